//! Variational inequalities for multivalued nonexpansive maps on CAT(0)
//! model spaces.
//!
//! Three model spaces are supported: Euclidean space, the hyperboloid
//! model of hyperbolic space and the star metric tree. On top of their
//! geodesic operations sit closed convex sets with metric projections,
//! finite-valued multimaps, the proximal Picard-S solver and its N-map
//! system variant, and diagnostics over recorded traces.
//!
//! ```
//! use cat0_vip::{solve_vip, ConvexSet, MultiMap, Point, Schedule, SpaceModel, VipProblem};
//!
//! let problem = VipProblem {
//!     space: SpaceModel::Euclidean { dim: 2 },
//!     set: ConvexSet::ball(Point::euclidean([0.0, 0.0]), 1.0),
//!     map: MultiMap::constant(vec![Point::euclidean([2.0, 0.0])]).unwrap(),
//!     x0: Point::euclidean([0.0, 0.0]),
//!     schedule: Schedule::default(),
//!     max_iter: 200,
//!     min_iter: 0,
//!     tol_fp: 1e-9,
//!     tol_res: 1e-6,
//!     sample_size: 512,
//!     seed: 1,
//!     fixed_points: vec![],
//! };
//! let (solution, _trace) = solve_vip(&problem).unwrap();
//! assert!(solution.certified);
//! assert_eq!(solution.x, Point::euclidean([1.0, 0.0]));
//! ```

pub mod convex;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod multimap;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod trace;
pub mod verify;

pub use convex::{projection_defect, ConvexSet, SampleSet};
pub use diagnostics::{
    asymptotic_center_estimate, delta_convergence_check, fejer_audit, rate_report,
    strong_convergence_check, DeltaReport, RateReport, TailWindow,
};
pub use error::{Error, Result};
pub use geometry::{
    cat0_defect, combine, dist, multi_combine, quasi_inner, Point, SpaceModel, Weights,
};
pub use multimap::{
    hausdorff, nearest_selection, nonexpansiveness_ratio, projected_multimap, FinitePointSet,
    MapDescriptor, MultiMap,
};
pub use rng::Stream;
pub use scenario::{ProblemSpec, RunOutcome, Scenario, Summary};
pub use solver::{
    baseline_step, modified_step, picard_s_step, residual, solve_by_truncation, solve_system,
    solve_vip, solve_with_scheme, truncated_solve, Schedule, Scheme, Sequence, SystemProblem,
    SystemSchedule, SystemSolution, TruncatedSolution, VipProblem, VipSolution,
};
pub use trace::{IterationTrace, StepRecord};
