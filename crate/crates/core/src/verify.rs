//! Fixed-seed property suites, one per module, behind `cat0-vip verify`.
//!
//! Every tolerance is multiplied by `CAT0VIP_TOL_SCALE` when that variable
//! is set; a negative scale makes every bound unsatisfiable, which
//! exercises the failure path.

use std::fmt;

use crate::convex::{projection_defect, ConvexSet};
use crate::diagnostics::{self, TailWindow};
use crate::error::Result;
use crate::geometry::{self, Point, SpaceModel};
use crate::multimap::{nonexpansiveness_ratio, projected_multimap};
use crate::rng::Stream;
use crate::scenario::{self, ProblemSpec};
use crate::solver::{self, SystemProblem, SystemSchedule};

pub const TOL_ENV: &str = "CAT0VIP_TOL_SCALE";

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub scale: f64,
}

impl Tolerances {
    pub fn from_env() -> Tolerances {
        let scale = std::env::var(TOL_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .unwrap_or(1.0);
        Tolerances { scale }
    }

    fn tol(&self, base: f64) -> f64 {
        base * self.scale
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub property: String,
    pub witness: String,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub checks: usize,
    pub failures: Vec<Failure>,
}

impl SuiteOutcome {
    fn new(suite: &'static str) -> SuiteOutcome {
        SuiteOutcome {
            suite,
            checks: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Records one check; only the first failure per property is kept.
    fn check(&mut self, property: &str, ok: bool, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && !self.failures.iter().any(|f| f.property == property) {
            self.failures.push(Failure {
                property: property.to_string(),
                witness: witness(),
            });
        }
    }

    fn error(&mut self, property: &str, err: crate::error::Error) {
        self.check(property, false, || format!("error: {err}"));
    }
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures.len();
        write!(
            f,
            "{:<12} {:>6} checks  {}",
            self.suite,
            self.checks,
            if failed == 0 {
                "ok".to_string()
            } else {
                format!("FAILED ({failed} properties)")
            }
        )?;
        for x in &self.failures {
            write!(f, "\n    {}: {}", x.property, x.witness)?;
        }
        Ok(())
    }
}

pub struct Suite {
    pub name: &'static str,
    pub description: &'static str,
    run: fn(&Tolerances) -> SuiteOutcome,
}

impl Suite {
    pub fn run(&self, tol: &Tolerances) -> SuiteOutcome {
        (self.run)(tol)
    }
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "geometry",
            description: "CN inequality and quasi-linearization identities",
            run: geometry_suite,
        },
        Suite {
            name: "convex",
            description: "projection characterization and membership",
            run: convex_suite,
        },
        Suite {
            name: "multimap",
            description: "nonexpansiveness of projected builtin maps",
            run: multimap_suite,
        },
        Suite {
            name: "solver",
            description: "builtin certificates, Fejér chains, N = 1 reduction",
            run: solver_suite,
        },
        Suite {
            name: "diagnostics",
            description: "asymptotic centers and Δ-convergence checks",
            run: diagnostics_suite,
        },
    ]
}

/// One space per model family at a few dimensions.
pub fn test_spaces() -> Vec<SpaceModel> {
    vec![
        SpaceModel::Euclidean { dim: 1 },
        SpaceModel::Euclidean { dim: 2 },
        SpaceModel::Euclidean { dim: 5 },
        SpaceModel::Euclidean { dim: 8 },
        SpaceModel::Hyperboloid { dim: 2 },
        SpaceModel::Hyperboloid { dim: 4 },
        SpaceModel::StarTree { branch_count: 2 },
        SpaceModel::StarTree { branch_count: 6 },
    ]
}

/// A random closed-form set of `space`.
pub fn random_set(space: &SpaceModel, rng: &mut Stream) -> ConvexSet {
    match space {
        SpaceModel::Euclidean { dim } => {
            if rng.next_bool() {
                ConvexSet::ball(space.random_point(rng, 1.0), rng.uniform(0.2, 1.5))
            } else {
                let normal: Vec<f64> = (0..*dim).map(|_| rng.next_normal()).collect();
                ConvexSet::half_space(normal, rng.uniform(-0.5, 0.5))
            }
        }
        SpaceModel::Hyperboloid { .. } => {
            ConvexSet::ball(space.random_point(rng, 0.8), rng.uniform(0.2, 1.5))
        }
        SpaceModel::StarTree { branch_count } => {
            if rng.next_index(3) == 0 {
                ConvexSet::ball(space.random_point(rng, 1.0), rng.uniform(0.2, 1.5))
            } else {
                let mut branches: Vec<usize> =
                    (0..*branch_count).filter(|_| rng.next_bool()).collect();
                if branches.is_empty() {
                    branches.push(rng.next_index(*branch_count));
                }
                let cap = rng.next_bool().then(|| rng.uniform(0.3, 2.0));
                ConvexSet::sub_tree(branches, cap)
            }
        }
    }
}

fn geometry_suite(tol: &Tolerances) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("geometry");
    let mut rng = Stream::new(101);
    for space in test_spaces() {
        let euclid = matches!(space, SpaceModel::Euclidean { .. });
        for _ in 0..500 {
            let [x, y, z, w, v] = [(); 5].map(|_| space.random_point(&mut rng, 2.0));
            let t = rng.next_f64();
            match geometry::cat0_defect(&x, &y, &z, t) {
                Ok(d) => {
                    out.check("cn_inequality", d <= tol.tol(1e-9), || {
                        format!("{space:?} x={x:?} y={y:?} z={z:?} t={t} defect={d:e}")
                    });
                    if euclid {
                        out.check(
                            "cn_equality_euclidean",
                            d.abs() <= tol.tol(1e-12) * (1.0 + x.coords().len() as f64),
                            || format!("x={x:?} y={y:?} z={z:?} t={t} defect={d:e}"),
                        );
                    }
                }
                Err(e) => out.error("cn_inequality", e),
            }
            let q = |a: &Point, b: &Point, c: &Point, d: &Point| {
                geometry::quasi_inner(a, b, c, d).unwrap_or(f64::NAN)
            };
            let dxy = geometry::dist(&x, &y).unwrap_or(f64::NAN);
            let dzw = geometry::dist(&z, &w).unwrap_or(f64::NAN);
            let scale = 1.0 + dxy * dxy + dzw * dzw;
            let bound = tol.tol(1e-9) * scale;
            let self_pair = q(&x, &y, &x, &y);
            out.check("quasi_self", (self_pair - dxy * dxy).abs() <= bound, || {
                format!("{space:?} a={x:?} b={y:?}: {self_pair} vs {}", dxy * dxy)
            });
            let ab = q(&x, &y, &z, &w);
            let ba = q(&y, &x, &z, &w);
            out.check("quasi_antisymmetry", (ab + ba).abs() <= bound, || {
                format!("{space:?} {ab} vs {ba}")
            });
            let split = q(&x, &v, &z, &w) + q(&v, &y, &z, &w);
            let dv = geometry::dist(&x, &v).unwrap_or(0.0) + geometry::dist(&v, &y).unwrap_or(0.0);
            out.check(
                "quasi_additivity",
                (ab - split).abs() <= bound * (1.0 + dv * dv),
                || format!("{space:?} e={v:?}: {ab} vs {split}"),
            );
            out.check("cauchy_schwarz", ab.abs() <= dxy * dzw + bound, || {
                format!("{space:?} |{ab}| > {dxy} * {dzw}")
            });
        }
    }
    out
}

fn convex_suite(tol: &Tolerances) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("convex");
    let mut rng = Stream::new(202);
    for space in test_spaces() {
        for trial in 0..40 {
            let k = random_set(&space, &mut rng);
            let x = space.random_point(&mut rng, 3.0);
            let step = (|| -> Result<(Point, f64, bool)> {
                let p = k.project(&x)?;
                let s = k.sample_in(&space, 256, trial)?;
                Ok((
                    p.clone(),
                    projection_defect(&x, &p, &s)?,
                    k.contains(&p, 1e-9)?,
                ))
            })();
            match step {
                Ok((p, defect, inside)) => {
                    out.check("projection_in_set", inside, || {
                        format!("{k:?} x={x:?} p={p:?}")
                    });
                    out.check("projection_defect", defect <= tol.tol(1e-7), || {
                        format!("{k:?} x={x:?} p={p:?} defect={defect:e}")
                    });
                    let again = k
                        .project(&p)
                        .map(|q| geometry::dist(&p, &q).unwrap_or(f64::INFINITY));
                    out.check(
                        "projection_idempotent",
                        again.is_ok_and(|d| d <= tol.tol(1e-9)),
                        || format!("{k:?} p={p:?}"),
                    );
                }
                Err(e) => out.error("projection_defect", e),
            }
        }
    }
    out
}

fn multimap_suite(tol: &Tolerances) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("multimap");
    let all = scenario::builtins();
    for (i, s) in all.iter().enumerate() {
        for map in s.maps() {
            for (j, other) in all.iter().enumerate() {
                if other.space() != s.space() {
                    continue;
                }
                for k in other.sets() {
                    let seed = (i * 100 + j) as u64;
                    let ratio = projected_multimap(k, map)
                        .and_then(|pm| nonexpansiveness_ratio(&pm, k, 200, seed));
                    match ratio {
                        Ok(r) => {
                            out.check("projected_nonexpansive", r <= 1.0 + tol.tol(1e-7), || {
                                format!("map of {} on K of {}: ratio {r}", s.name, other.name)
                            })
                        }
                        Err(e) => out.error("projected_nonexpansive", e),
                    }
                }
            }
        }
    }
    out
}

fn solver_suite(tol: &Tolerances) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("solver");
    for s in scenario::builtins() {
        match scenario::run(&s) {
            Ok(run) => {
                out.check("builtin_certified", run.passed, || {
                    format!("{}: residual {}", s.name, run.summary.residual)
                });
                for (k, p) in s.fixed_points().iter().enumerate() {
                    let fejer = diagnostics::fejer_audit(&run.trace, p).unwrap_or(f64::INFINITY);
                    out.check("fejer_monotone", fejer <= tol.tol(1e-9), || {
                        format!("{}: violation {fejer:e}", s.name)
                    });
                    let chain = diagnostics::chain_audit(&run.trace, k);
                    out.check("fejer_chain", chain <= tol.tol(1e-9), || {
                        format!("{}: violation {chain:e}", s.name)
                    });
                }
                if tol.scale < 0.0 {
                    out.check("builtin_certified", false, || {
                        format!("{}: tolerance scale {}", s.name, tol.scale)
                    });
                }
            }
            Err(e) => out.error("builtin_certified", e),
        }
    }

    let mut rng = Stream::new(303);
    let base = scenario::builtin("union-contractions").expect("builtin");
    let ProblemSpec::Single(mut p) = base.problem else {
        unreachable!("single-map builtin")
    };
    for _ in 0..50 {
        let (a, b) = (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
        p.schedule = solver::Schedule::constant(a, b);
        let mut sys = SystemProblem {
            space: p.space,
            sets: vec![p.set.clone()],
            maps: vec![p.map.clone()],
            x0: p.x0.clone(),
            schedule: Some(SystemSchedule::matching_single(a, b)),
            max_iter: 1,
            min_iter: 0,
            tol_fp: p.tol_fp,
            tol_res: p.tol_res,
            sample_size: p.sample_size,
            seed: p.seed,
            fixed_points: Vec::new(),
        };
        let x = p
            .set
            .project(&p.space.random_point(&mut rng, 1.0))
            .expect("closed form");
        sys.x0 = x.clone();
        let single = solver::picard_s_step(&p, &x, 0);
        let multi = solver::modified_step(&sys, &x, 0);
        match (single, multi) {
            (Ok((a, ra)), Ok((b, rb))) => {
                let same =
                    a == b && ra.step_displacement.to_bits() == rb.step_displacement.to_bits();
                out.check("single_map_reduction", same && tol.scale >= 0.0, || {
                    format!("x={x:?}: {a:?} vs {b:?}")
                });
            }
            (Err(e), _) | (_, Err(e)) => out.error("single_map_reduction", e),
        }
    }
    out
}

fn diagnostics_suite(tol: &Tolerances) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("diagnostics");
    let plane = SpaceModel::Euclidean { dim: 2 };
    let mut rng = Stream::new(404);
    for _ in 0..50 {
        let a = plane.random_point(&mut rng, 1.0);
        let b = plane.random_point(&mut rng, 1.0);
        let mid = geometry::combine(&a, &b, 0.5).expect("same model");
        match diagnostics::asymptotic_center_estimate(
            &plane,
            &[a.clone(), b.clone()],
            TailWindow { start: 0, end: 2 },
        ) {
            Ok((c, r)) => {
                let half = geometry::dist(&a, &b).unwrap_or(0.0) / 2.0;
                let ok = geometry::dist(&c, &mid).unwrap_or(f64::INFINITY) <= tol.tol(1e-6)
                    && (r - half).abs() <= tol.tol(1e-6);
                out.check("pair_center_is_midpoint", ok, || {
                    format!("a={a:?} b={b:?} c={c:?}")
                });
            }
            Err(e) => out.error("pair_center_is_midpoint", e),
        }
    }
    for name in [
        "interior-contraction",
        "hyperboloid-contraction",
        "tree-contraction",
    ] {
        let mut s = scenario::builtin(name).expect("builtin");
        if let ProblemSpec::Single(p) = &mut s.problem {
            p.min_iter = 60;
        }
        let run = match scenario::run(&s) {
            Ok(r) => r,
            Err(e) => {
                out.error("delta_on_certified_run", e);
                continue;
            }
        };
        match diagnostics::delta_convergence_check(s.space(), &run.trace, tol.tol(1e-4)) {
            Ok(rep) => out.check("delta_on_certified_run", rep.passed, || {
                format!("{name}: spread {:e}", rep.max_pairwise)
            }),
            Err(e) => out.error("delta_on_certified_run", e),
        }
        // Compact K: the tail must also be Cauchy.
        match diagnostics::strong_convergence_check(&run.trace, tol.tol(1e-6)) {
            Ok(rep) => out.check("strong_on_compact_run", rep.passed, || {
                format!("{name}: tail diameter {:e}", rep.tail_diameter)
            }),
            Err(e) => out.error("strong_on_compact_run", e),
        }
    }
    out
}
