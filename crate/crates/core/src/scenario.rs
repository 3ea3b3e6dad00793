//! Scenario files, the builtin scenario catalogue and the run driver that
//! turns a scenario into `summary.json`, `trace.csv` and `report.txt`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::diagnostics::{self, DELTA_MIN_LEN};
use crate::error::Result;
use crate::geometry::{Point, SpaceModel};
use crate::multimap::{MapDescriptor, MultiMap};
use crate::solver::{self, Schedule, Scheme, SystemProblem, VipProblem};
use crate::trace::IterationTrace;

/// Tolerance of the Δ-convergence check reported by [`run`].
pub const DELTA_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Single(VipProblem),
    System(SystemProblem),
    /// Solve on `K ∩ B(origin, radius)`, doubling the radius on demand when
    /// `double` is set.
    Truncated {
        problem: VipProblem,
        origin: Point,
        radius: f64,
        #[serde(default)]
        double: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub problem: ProblemSpec,
    /// Extra schemes run for the rate table; Picard-S is always run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "yes")]
    pub certify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> std::result::Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match &self.problem {
            ProblemSpec::Single(p) => p.validate(),
            ProblemSpec::System(p) => p.validate(),
            ProblemSpec::Truncated {
                problem,
                origin,
                radius,
                ..
            } => {
                problem.validate()?;
                problem.space.check_point(origin)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(crate::error::Error::domain(format!(
                        "truncation radius {radius} must be positive"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn space(&self) -> &SpaceModel {
        match &self.problem {
            ProblemSpec::Single(p) | ProblemSpec::Truncated { problem: p, .. } => &p.space,
            ProblemSpec::System(p) => &p.space,
        }
    }

    pub fn sets(&self) -> Vec<&ConvexSet> {
        match &self.problem {
            ProblemSpec::Single(p) | ProblemSpec::Truncated { problem: p, .. } => vec![&p.set],
            ProblemSpec::System(p) => p.sets.iter().collect(),
        }
    }

    pub fn maps(&self) -> Vec<&MultiMap> {
        match &self.problem {
            ProblemSpec::Single(p) | ProblemSpec::Truncated { problem: p, .. } => vec![&p.map],
            ProblemSpec::System(p) => p.maps.iter().collect(),
        }
    }

    pub fn fixed_points(&self) -> &[Point] {
        match &self.problem {
            ProblemSpec::Single(p) | ProblemSpec::Truncated { problem: p, .. } => &p.fixed_points,
            ProblemSpec::System(p) => &p.fixed_points,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match &mut self.problem {
            ProblemSpec::Single(p) | ProblemSpec::Truncated { problem: p, .. } => p.seed = seed,
            ProblemSpec::System(p) => p.seed = seed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.problem {
            ProblemSpec::Single(_) => "single",
            ProblemSpec::System(_) => "system",
            ProblemSpec::Truncated { .. } => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    One(Point),
    Many(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub passed: bool,
    pub max_pairwise: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub kind: String,
    pub x: Point,
    pub u: Selection,
    /// Smallest residual over all certified pairs.
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
    pub final_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_interior: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Fejér violation per declared fixed point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fejer: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<diagnostics::RateReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub trace: IterationTrace,
    pub report: String,
    /// Every requested certificate holds.
    pub passed: bool,
}

impl RunOutcome {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        std::fs::write(dir.join("trace.csv"), self.trace.to_csv())?;
        std::fs::write(dir.join("report.txt"), &self.report)
    }
}

/// Validates and runs a scenario.
pub fn run(scenario: &Scenario) -> Result<RunOutcome> {
    scenario.validate()?;
    let (mut summary, trace) = match &scenario.problem {
        ProblemSpec::Single(p) => {
            let (sol, trace) = solver::solve_vip(p)?;
            let mut s = base_summary(scenario, &sol.x, Selection::One(sol.u.clone()), &trace);
            s.residual = sol.residual;
            s.iterations = sol.iterations;
            s.converged = sol.converged;
            s.certified = sol.certified;
            (s, trace)
        }
        ProblemSpec::Truncated {
            problem,
            origin,
            radius,
            double,
        } => {
            let (t, trace) = if *double {
                solver::solve_by_truncation(problem, origin, *radius)?
            } else {
                solver::truncated_solve(problem, origin, *radius)?
            };
            let sol = &t.solution;
            let mut s = base_summary(scenario, &sol.x, Selection::One(sol.u.clone()), &trace);
            s.residual = sol.residual;
            s.iterations = sol.iterations;
            s.converged = sol.converged;
            s.certified = sol.certified;
            s.strict_interior = Some(t.strict_interior);
            s.radius = Some(t.radius);
            (s, trace)
        }
        ProblemSpec::System(p) => {
            let (sol, trace) = solver::solve_system(p)?;
            let mut s = base_summary(scenario, &sol.x, Selection::Many(sol.u.clone()), &trace);
            s.residual = sol.residuals.iter().copied().fold(f64::INFINITY, f64::min);
            s.residuals = sol.residuals.clone();
            s.iterations = sol.iterations;
            s.converged = sol.converged;
            s.certified = sol.certified;
            s.selection_gap = diagnostics::final_selection_gap(&trace);
            (s, trace)
        }
    };

    for p in scenario.fixed_points() {
        summary.fejer.push(diagnostics::fejer_audit(&trace, p)?);
    }
    if trace.len() >= DELTA_MIN_LEN {
        let rep = diagnostics::delta_convergence_check(scenario.space(), &trace, DELTA_TOL)?;
        summary.delta = Some(DeltaSummary {
            passed: rep.passed,
            max_pairwise: rep.max_pairwise,
            tol: rep.tol,
        });
    }
    if let ProblemSpec::Single(p) = &scenario.problem {
        let extra: Vec<Scheme> = scenario
            .schemes
            .iter()
            .copied()
            .filter(|s| *s != Scheme::PicardS)
            .collect();
        if !extra.is_empty() {
            let mut traces = vec![(Scheme::PicardS.label().to_string(), trace.clone())];
            for s in extra {
                traces.push((s.label().to_string(), solver::solve_with_scheme(p, s)?.1));
            }
            summary.rates = Some(diagnostics::rate_report(&traces, p.tol_fp));
        }
    }

    let passed = !scenario.certify || summary.certified;
    let report = render_report(scenario, &summary);
    Ok(RunOutcome {
        summary,
        trace,
        report,
        passed,
    })
}

fn base_summary(scenario: &Scenario, x: &Point, u: Selection, trace: &IterationTrace) -> Summary {
    Summary {
        scenario: scenario.name.clone(),
        kind: scenario.kind().to_string(),
        x: x.clone(),
        u,
        residual: 0.0,
        residuals: Vec::new(),
        iterations: 0,
        converged: false,
        certified: false,
        final_gap: trace.final_gap,
        strict_interior: None,
        radius: None,
        fejer: Vec::new(),
        selection_gap: None,
        delta: None,
        rates: None,
    }
}

fn render_report(scenario: &Scenario, s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario   {} ({})", scenario.name, s.kind);
    if !scenario.description.is_empty() {
        let _ = writeln!(out, "           {}", scenario.description);
    }
    let _ = writeln!(out, "iterations {}", s.iterations);
    let _ = writeln!(out, "converged  {}", s.converged);
    let _ = writeln!(out, "final gap  {:e}", s.final_gap);
    let _ = writeln!(out, "x          {:?}", s.x.coords());
    match &s.u {
        Selection::One(u) => {
            let _ = writeln!(out, "u          {:?}", u.coords());
        }
        Selection::Many(us) => {
            for (i, u) in us.iter().enumerate() {
                let _ = writeln!(out, "u{:<9} {:?}", i + 1, u.coords());
            }
        }
    }
    let _ = writeln!(out, "residual   {:e}", s.residual);
    if let (Some(strict), Some(r)) = (s.strict_interior, s.radius) {
        let _ = writeln!(out, "radius     {r} (strict interior: {strict})");
    }
    for (i, v) in s.fejer.iter().enumerate() {
        let _ = writeln!(out, "fejer p{}   {:e}", i + 1, v);
    }
    if let Some(g) = s.selection_gap {
        let _ = writeln!(out, "sel. gap   {g:e}");
    }
    match &s.delta {
        Some(d) => {
            let verdict = if d.passed { "pass" } else { "fail" };
            let _ = writeln!(
                out,
                "delta      {verdict} (max center spread {:e}, tol {:e})",
                d.max_pairwise, d.tol
            );
        }
        None => {
            let _ = writeln!(
                out,
                "delta      skipped (trace shorter than {DELTA_MIN_LEN})"
            );
        }
    }
    if let Some(r) = &s.rates {
        let _ = write!(out, "{r}");
    }
    let _ = writeln!(
        out,
        "certified  {}{}",
        s.certified,
        if scenario.certify {
            ""
        } else {
            " (not required)"
        }
    );
    out
}

fn e(c: &[f64]) -> Point {
    Point::euclidean(c.to_vec())
}

fn contraction(anchor: Point, factor: f64) -> MultiMap {
    MultiMap::union(vec![MapDescriptor::contraction(anchor, factor)])
}

fn single(space: SpaceModel, set: ConvexSet, map: MultiMap, x0: Point) -> VipProblem {
    VipProblem {
        space,
        set,
        map,
        x0,
        schedule: Schedule::default(),
        max_iter: 500,
        min_iter: 0,
        tol_fp: 1e-9,
        tol_res: 1e-6,
        sample_size: 512,
        seed: 1,
        fixed_points: Vec::new(),
    }
}

fn scenario(name: &str, description: &str, problem: ProblemSpec) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        problem,
        schemes: Vec::new(),
        certify: true,
        output_dir: None,
    }
}

const RATE_SCHEMES: [Scheme; 3] = [Scheme::PicardS, Scheme::Mann, Scheme::Ishikawa];

/// The builtin catalogue in listing order.
pub fn builtins() -> Vec<Scenario> {
    let plane = SpaceModel::Euclidean { dim: 2 };
    let h2 = SpaceModel::Hyperboloid { dim: 2 };
    let unit_ball = ConvexSet::ball(e(&[0.0, 0.0]), 1.0);
    let mut out = Vec::new();

    let mut p = single(
        plane,
        unit_ball.clone(),
        MultiMap::constant(vec![e(&[2.0, 0.0])]).expect("nonempty"),
        e(&[0.0, 0.0]),
    );
    p.max_iter = 200;
    out.push(scenario(
        "ball-constant",
        "unit disc, T = {(2,0)}; solution x = (1,0)",
        ProblemSpec::Single(p),
    ));

    let mut p = single(
        h2,
        ConvexSet::ball(Point::hyperboloid_from_spatial(&[0.0, 0.0]), 1.0),
        MultiMap::constant(vec![Point::hyperboloid_from_spatial(&[2.0, 0.0])]).expect("nonempty"),
        Point::hyperboloid_from_spatial(&[0.0, 0.0]),
    );
    p.max_iter = 200;
    out.push(scenario(
        "hyperboloid-ball-constant",
        "hyperbolic disc of radius 1, T = {c}; solution on the boundary toward c",
        ProblemSpec::Single(p),
    ));

    let mut p = single(
        SpaceModel::StarTree { branch_count: 3 },
        ConvexSet::sub_tree(vec![0], Some(1.0)),
        MultiMap::constant(vec![Point::tree(0, 3.0)]).expect("nonempty"),
        Point::tree(0, 0.25),
    );
    p.max_iter = 200;
    out.push(scenario(
        "tree-subtree-constant",
        "3-branch star, K = branch 0 up to radius 1, T = {(0, 3)}; solution (0, 1)",
        ProblemSpec::Single(p),
    ));

    let a = e(&[0.3, -0.2]);
    let mut p = single(
        plane,
        unit_ball.clone(),
        contraction(a.clone(), 0.5),
        e(&[-0.8, 0.1]),
    );
    p.tol_fp = 1e-10;
    p.fixed_points = vec![a];
    let mut s = scenario(
        "interior-contraction",
        "contraction toward an interior anchor; the solution is the anchor",
        ProblemSpec::Single(p),
    );
    s.schemes = RATE_SCHEMES.to_vec();
    out.push(s);

    let a = e(&[-2.0, 0.0]);
    let mut p = single(
        plane,
        ConvexSet::half_space(vec![1.0, 0.0], 0.0),
        contraction(a.clone(), 0.5),
        e(&[-1.0, 3.0]),
    );
    p.fixed_points = vec![a];
    out.push(scenario(
        "halfspace-truncated",
        "unbounded half-plane x1 <= 0 solved on its trace in the ball B(0, 5)",
        ProblemSpec::Truncated {
            problem: p,
            origin: e(&[0.0, 0.0]),
            radius: 5.0,
            double: false,
        },
    ));

    let a = e(&[0.2, 0.1]);
    out.push(scenario(
        "system-contractions",
        "three sets and three contractions sharing the anchor (0.2, 0.1)",
        ProblemSpec::System(SystemProblem {
            space: plane,
            sets: vec![
                ConvexSet::ball(e(&[0.0, 0.0]), 2.0),
                ConvexSet::ball(e(&[0.5, 0.0]), 2.0),
                ConvexSet::half_space(vec![0.0, 1.0], 1.0),
            ],
            maps: vec![
                contraction(a.clone(), 0.5),
                contraction(a.clone(), 0.7),
                contraction(a.clone(), 0.3),
            ],
            x0: e(&[-1.2, 0.9]),
            schedule: None,
            max_iter: 500,
            min_iter: 0,
            tol_fp: 1e-9,
            tol_res: 1e-6,
            sample_size: 256,
            seed: 2,
            fixed_points: vec![a],
        }),
    ));

    let discs = [
        ConvexSet::ball(e(&[0.0, 0.0]), 1.0),
        ConvexSet::ball(e(&[1.0, 0.0]), 1.0),
        ConvexSet::ball(e(&[0.5, 0.8]), 1.0),
    ];
    let domain = ConvexSet::ball(e(&[0.0, 0.0]), 3.0);
    out.push(scenario(
        "convex-feasibility",
        "T_i = projection onto one of three overlapping unit discs; finds a point in all three",
        ProblemSpec::System(SystemProblem {
            space: plane,
            sets: vec![domain; 3],
            maps: discs
                .iter()
                .map(|b| MultiMap::union(vec![MapDescriptor::Project { set: b.clone() }]))
                .collect(),
            x0: e(&[2.5, -1.5]),
            schedule: None,
            max_iter: 500,
            min_iter: 0,
            tol_fp: 1e-9,
            tol_res: 1e-6,
            sample_size: 256,
            seed: 3,
            fixed_points: vec![e(&[0.5, 0.3])],
        }),
    ));

    let a = e(&[0.6, 0.6]);
    let mut p = single(
        plane,
        ConvexSet::ball(e(&[0.0, 0.0]), 2.0),
        MultiMap::segment(
            MapDescriptor::contraction(a.clone(), 0.5),
            MapDescriptor::contraction(a.clone(), 0.8),
            8,
        ),
        e(&[-1.5, 0.5]),
    );
    p.fixed_points = vec![a];
    out.push(scenario(
        "segment-valued",
        "Tx = segment between two contractions of x toward (0.6, 0.6)",
        ProblemSpec::Single(p),
    ));

    let a = Point::hyperboloid_from_spatial(&[0.3, 0.2]);
    let mut p = single(
        h2,
        ConvexSet::ball(Point::hyperboloid_from_spatial(&[0.0, 0.0]), 2.0),
        contraction(a.clone(), 0.6),
        Point::hyperboloid_from_spatial(&[-1.0, 1.0]),
    );
    p.tol_fp = 1e-10;
    p.fixed_points = vec![a];
    let mut s = scenario(
        "hyperboloid-contraction",
        "geodesic contraction toward an interior anchor of a hyperbolic disc",
        ProblemSpec::Single(p),
    );
    s.schemes = RATE_SCHEMES.to_vec();
    out.push(s);

    let a = Point::tree(1, 0.5);
    let mut p = single(
        SpaceModel::StarTree { branch_count: 4 },
        ConvexSet::sub_tree(vec![0, 1], Some(3.0)),
        contraction(a.clone(), 0.5),
        Point::tree(0, 2.0),
    );
    p.tol_fp = 1e-10;
    p.fixed_points = vec![a];
    let mut s = scenario(
        "tree-contraction",
        "contraction across the origin of a 4-branch star toward (1, 0.5)",
        ProblemSpec::Single(p),
    );
    s.schemes = RATE_SCHEMES.to_vec();
    out.push(s);

    let p = single(
        plane,
        unit_ball,
        MultiMap::union(vec![
            MapDescriptor::contraction(e(&[0.5, 0.0]), 0.5),
            MapDescriptor::contraction(e(&[-0.5, 0.0]), 0.5),
        ]),
        e(&[0.4, 0.7]),
    );
    out.push(scenario(
        "union-contractions",
        "Tx = {f(x), g(x)} for contractions toward (0.5, 0) and (-0.5, 0)",
        ProblemSpec::Single(p),
    ));

    out
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtins().into_iter().find(|s| s.name == name)
}
