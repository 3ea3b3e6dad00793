//! Proximal multivalued Picard-S iteration, its N-map system variant,
//! VIP residual certification, truncation to bounded subproblems, and
//! Mann / Ishikawa / Picard baselines.
//!
//! One Picard-S step from `x_n` ∈ K, with nearest-point selections:
//!
//! ```text
//! w_n ∈ T x_n,  z_n = P_K((1-β_n) x_n ⊕ β_n w_n)
//! v_n ∈ T z_n,  y_n = P_K((1-α_n) w_n ⊕ α_n v_n)
//! u_n ∈ T y_n,  x_{n+1} = P_K(u_n)
//! ```
//!
//! A pair `(u, x)` with `u ∈ Tx` solves the VIP when `<ux, xy> >= 0` for
//! all `y ∈ K`; the residual is that minimum over a finite sample of K.

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexSet, SampleSet, SAMPLE_TOL};
use crate::error::{Error, Result};
use crate::geometry::{self, combine, dist, multi_combine, Point, SpaceModel, Weights};
use crate::multimap::{nearest_index, nearest_selection, MultiMap};
use crate::trace::{IterationTrace, StepRecord};

/// Number of leading indices scanned for the liminf surrogate.
pub const LIMINF_HORIZON: usize = 1_000_000;

/// Doubling budget of [`solve_by_truncation`].
pub const MAX_DOUBLINGS: usize = 20;

/// A weight sequence `n -> a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Sequence {
    Constant {
        value: f64,
    },
    /// `a_n = values[n mod len]`.
    Periodic {
        values: Vec<f64>,
    },
}

impl Sequence {
    pub fn constant(value: f64) -> Sequence {
        Sequence::Constant { value }
    }

    pub fn at(&self, n: usize) -> f64 {
        match self {
            Sequence::Constant { value } => *value,
            Sequence::Periodic { values } => values[n % values.len()],
        }
    }

    fn period(&self) -> usize {
        match self {
            Sequence::Constant { .. } => 1,
            Sequence::Periodic { values } => values.len(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Sequence::Periodic { values } = self {
            if values.is_empty() {
                return Err(Error::domain(format!("{name}: empty periodic sequence")));
            }
        }
        for n in 0..self.period() {
            let a = self.at(n);
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::domain(format!("{name}_{n} = {a} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn default_bounds() -> [f64; 2] {
    [0.1, 0.9]
}

/// Weight sequences `α_n`, `β_n` of the single-map iteration. `β_n` must
/// stay in `bounds = [b, c] ⊂ (0, 1)`, which gives
/// `liminf β_n (1 - β_n) >= b (1 - c) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub alpha: Sequence,
    pub beta: Sequence,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::constant(0.5, 0.5)
    }
}

impl Schedule {
    pub fn constant(alpha: f64, beta: f64) -> Schedule {
        Schedule {
            alpha: Sequence::constant(alpha),
            beta: Sequence::constant(beta),
            bounds: default_bounds(),
        }
    }

    /// `min β_n (1 - β_n)` over the first [`LIMINF_HORIZON`] indices.
    pub fn liminf_surrogate(&self) -> f64 {
        (0..self.beta.period().min(LIMINF_HORIZON))
            .map(|n| {
                let b = self.beta.at(n);
                b * (1.0 - b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let [b, c] = self.bounds;
        if !(0.0 < b && b <= c && c < 1.0) {
            return Err(Error::domain(format!(
                "schedule bounds [{b}, {c}] not inside (0, 1)"
            )));
        }
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")?;
        for n in 0..self.beta.period() {
            let beta = self.beta.at(n);
            if !(b..=c).contains(&beta) {
                return Err(Error::domain(format!(
                    "beta_{n} = {beta} outside [{b}, {c}]"
                )));
            }
        }
        let floor = b * (1.0 - c);
        let lim = self.liminf_surrogate();
        if lim < floor {
            return Err(Error::domain(format!(
                "min beta(1 - beta) = {lim} below b(1 - c) = {floor}"
            )));
        }
        Ok(())
    }
}

/// Constant-in-`n` weights of the system iteration: `lambda` (N entries),
/// `alpha` and `beta` (N entries each, jointly summing to one) and `gamma`
/// (N + 1 entries, `gamma[0]` weighting `x_n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSchedule {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
}

impl SystemSchedule {
    /// Uniform weights for `n` maps.
    pub fn uniform(n: usize) -> SystemSchedule {
        let half = 1.0 / (2 * n) as f64;
        SystemSchedule {
            lambda: vec![1.0 / n as f64; n],
            alpha: vec![half; n],
            beta: vec![half; n],
            gamma: vec![1.0 / (n + 1) as f64; n + 1],
            bounds: default_bounds(),
        }
    }

    /// The N = 1 schedule that reproduces a single-map step with
    /// parameters `alpha`, `beta`.
    pub fn matching_single(alpha: f64, beta: f64) -> SystemSchedule {
        SystemSchedule {
            lambda: vec![1.0],
            alpha: vec![1.0 - alpha],
            beta: vec![alpha],
            gamma: vec![1.0 - beta, beta],
            bounds: default_bounds(),
        }
    }

    pub fn lambda_weights(&self) -> Result<Weights> {
        Weights::new(self.lambda.clone())
    }

    pub fn alpha_beta_weights(&self) -> Result<Weights> {
        Weights::new(self.alpha.iter().chain(&self.beta).copied().collect())
    }

    pub fn gamma_weights(&self) -> Result<Weights> {
        Weights::new(self.gamma.clone())
    }

    pub fn validate(&self, n_maps: usize) -> Result<()> {
        let [b, c] = self.bounds;
        if !(0.0 < b && b <= c && c < 1.0) {
            return Err(Error::domain(format!(
                "schedule bounds [{b}, {c}] not inside (0, 1)"
            )));
        }
        if self.lambda.len() != n_maps
            || self.alpha.len() != n_maps
            || self.beta.len() != n_maps
            || self.gamma.len() != n_maps + 1
        {
            return Err(Error::domain(format!(
                "system schedule lengths do not match {n_maps} maps"
            )));
        }
        let groups = [
            ("lambda", self.lambda.clone()),
            (
                "alpha+beta",
                self.alpha.iter().chain(&self.beta).copied().collect(),
            ),
            ("gamma", self.gamma.clone()),
        ];
        for (name, values) in groups {
            Weights::new(values.clone()).map_err(|e| Error::domain(format!("{name}: {e}")))?;
            // A single weight is necessarily 1 and exempt from [b, c].
            if values.len() > 1 {
                if let Some(w) = values.iter().find(|w| !(b..=c).contains(*w)) {
                    return Err(Error::domain(format!(
                        "{name} weight {w} outside [{b}, {c}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Single-map VIP: find `u ∈ Tx` with `<ux, xy> >= 0` for all `y ∈ K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VipProblem {
    pub space: SpaceModel,
    pub set: ConvexSet,
    pub map: MultiMap,
    pub x0: Point,
    #[serde(default)]
    pub schedule: Schedule,
    pub max_iter: usize,
    /// Steps taken before the stopping rule is consulted.
    #[serde(default)]
    pub min_iter: usize,
    pub tol_fp: f64,
    pub tol_res: f64,
    pub sample_size: usize,
    pub seed: u64,
    /// Points with `Tp = {p}` whose distances are tracked per step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_points: Vec<Point>,
}

fn check_tolerances(tol_fp: f64, tol_res: f64, sample_size: usize) -> Result<()> {
    if !(tol_fp >= 0.0 && tol_res >= 0.0) {
        return Err(Error::domain("tolerances must be nonnegative"));
    }
    if sample_size == 0 {
        return Err(Error::domain("sample_size must be at least 1"));
    }
    Ok(())
}

impl VipProblem {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.set.validate()?;
        self.map.validate()?;
        self.schedule.validate()?;
        check_tolerances(self.tol_fp, self.tol_res, self.sample_size)?;
        self.space.check_point(&self.x0)?;
        if !self.set.contains(&self.x0, SAMPLE_TOL)? {
            return Err(Error::domain(format!("x0 = {:?} is not in K", self.x0)));
        }
        for p in &self.fixed_points {
            self.space.check_point(p)?;
        }
        Ok(())
    }

    pub fn samples(&self) -> Result<SampleSet> {
        self.set.sample_in(&self.space, self.sample_size, self.seed)
    }
}

/// System VIP over `K_1, ..., K_N` with maps `T_1, ..., T_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemProblem {
    pub space: SpaceModel,
    pub sets: Vec<ConvexSet>,
    pub maps: Vec<MultiMap>,
    pub x0: Point,
    /// Uniform weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<SystemSchedule>,
    pub max_iter: usize,
    #[serde(default)]
    pub min_iter: usize,
    pub tol_fp: f64,
    pub tol_res: f64,
    pub sample_size: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_points: Vec<Point>,
}

impl SystemProblem {
    pub fn schedule(&self) -> SystemSchedule {
        self.schedule
            .clone()
            .unwrap_or_else(|| SystemSchedule::uniform(self.maps.len()))
    }

    /// `K = ∩ K_i`, witnessed by `x0`; a single set is used as is.
    pub fn domain(&self) -> ConvexSet {
        if self.sets.len() == 1 {
            self.sets[0].clone()
        } else {
            ConvexSet::intersection(self.sets.clone(), self.x0.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.maps.is_empty() || self.maps.len() != self.sets.len() {
            return Err(Error::domain(format!(
                "{} sets for {} maps",
                self.sets.len(),
                self.maps.len()
            )));
        }
        for s in &self.sets {
            s.validate()?;
        }
        for m in &self.maps {
            m.validate()?;
        }
        self.schedule().validate(self.maps.len())?;
        check_tolerances(self.tol_fp, self.tol_res, self.sample_size)?;
        self.space.check_point(&self.x0)?;
        if !self.domain().contains(&self.x0, SAMPLE_TOL)? {
            return Err(Error::domain(format!(
                "x0 = {:?} is not in the intersection",
                self.x0
            )));
        }
        for p in &self.fixed_points {
            self.space.check_point(p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VipSolution {
    pub x: Point,
    pub u: Point,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSolution {
    pub x: Point,
    /// One selection `u_i ∈ T_i x` per map.
    pub u: Vec<Point>,
    /// Residual of `(u_i, x)` against a sample of `K_i`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSolution {
    pub solution: VipSolution,
    pub radius: f64,
    /// `d(o, x_r) < r - tol_res`.
    pub strict_interior: bool,
    /// Residual against a sample of the full K, only when strictly interior.
    pub full_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PicardS,
    Mann,
    Ishikawa,
    Picard,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::PicardS,
        Scheme::Mann,
        Scheme::Ishikawa,
        Scheme::Picard,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::PicardS => "picard_s",
            Scheme::Mann => "mann",
            Scheme::Ishikawa => "ishikawa",
            Scheme::Picard => "picard",
        }
    }
}

/// `min_{y in S} <ux, xy>`; `(u, x)` is certified when this is `>= -tol`.
pub fn residual(set: &ConvexSet, x: &Point, u: &Point, samples: &SampleSet) -> Result<f64> {
    set.contains(x, f64::INFINITY)?;
    let pts = samples.points.points();
    if pts.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let mut best = f64::INFINITY;
    for y in pts {
        best = best.min(geometry::quasi_inner(u, x, x, y)?);
    }
    Ok(best)
}

/// `(⟨ux, x0 x⟩ - ⟨u0 x0, x0 x⟩) / d(x, x0)`, the quotient whose growth as
/// `d(x, o) -> ∞` guarantees a solution on unbounded K.
pub fn coercivity_quotient(x0: &Point, u0: &Point, x: &Point, u: &Point) -> Result<f64> {
    let d = dist(x, x0)?;
    if d == 0.0 {
        return Err(Error::domain("coercivity quotient undefined at x = x0"));
    }
    Ok((geometry::quasi_inner(u, x, x0, x)? - geometry::quasi_inner(u0, x0, x0, x)?) / d)
}

/// Gaps of `x` under `map` restricted to `set`.
struct Assessment {
    /// `d(x, Tx)`.
    raw: f64,
    /// `d(x, P*_K T x)`.
    projected: f64,
    /// The member `u ∈ Tx` whose projection is nearest to `x`.
    vip_u: Point,
}

fn assess(set: &ConvexSet, map: &MultiMap, x: &Point) -> Result<Assessment> {
    let value = map.evaluate(x)?;
    let (_, raw) = nearest_index(x, &value)?;
    let mut best = (0, f64::INFINITY);
    for (i, p) in value.points().iter().enumerate() {
        let d = dist(x, &set.project(p)?)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(Assessment {
        raw,
        projected: best.1,
        vip_u: value.points()[best.0].clone(),
    })
}

fn distances(points: &[Point], x: &Point) -> Result<Vec<f64>> {
    points.iter().map(|p| dist(x, p)).collect()
}

/// One step of the proximal multivalued Picard-S iteration.
pub fn picard_s_step(problem: &VipProblem, x: &Point, n: usize) -> Result<(Point, StepRecord)> {
    let k = &problem.set;
    let t = &problem.map;
    let alpha = problem.schedule.alpha.at(n);
    let beta = problem.schedule.beta.at(n);

    let w = nearest_selection(t, x)?;
    let z = k.project(&combine(x, &w, beta)?)?;
    let v = nearest_selection(t, &z)?;
    let y = k.project(&combine(&w, &v, alpha)?)?;
    let u = nearest_selection(t, &y)?;
    let next = k.project(&u)?;

    let gaps = assess(k, t, x)?;
    let fp = &problem.fixed_points;
    let record = StepRecord {
        n,
        d_x_tx: gaps.raw,
        d_x_ptx: gaps.projected,
        step_displacement: dist(x, &next)?,
        d_to_p: distances(fp, x)?,
        d_y_p: distances(fp, &y)?,
        d_z_p: distances(fp, &z)?,
        d_next_p: distances(fp, &next)?,
        residual_sample: None,
        per_map_gap: Vec::new(),
        selection_gaps: Vec::new(),
    };
    Ok((next, record))
}

/// One step of a baseline scheme, with the same selection rule and
/// projection wrapper as [`picard_s_step`]:
///
/// * Mann: `x_{n+1} = P_K((1-α_n) x_n ⊕ α_n w_n)`
/// * Ishikawa: `y_n = P_K((1-β_n) x_n ⊕ β_n w_n)`,
///   `x_{n+1} = P_K((1-α_n) x_n ⊕ α_n u_n)` with `u_n ∈ T y_n`
/// * Picard: `x_{n+1} = P_K(w_n)`
pub fn baseline_step(
    scheme: Scheme,
    problem: &VipProblem,
    x: &Point,
    n: usize,
) -> Result<(Point, StepRecord)> {
    let k = &problem.set;
    let t = &problem.map;
    let alpha = problem.schedule.alpha.at(n);
    let beta = problem.schedule.beta.at(n);
    let fp = &problem.fixed_points;

    let (next, y) = match scheme {
        Scheme::PicardS => return picard_s_step(problem, x, n),
        Scheme::Mann => {
            let w = nearest_selection(t, x)?;
            (k.project(&combine(x, &w, alpha)?)?, None)
        }
        Scheme::Ishikawa => {
            let w = nearest_selection(t, x)?;
            let y = k.project(&combine(x, &w, beta)?)?;
            let u = nearest_selection(t, &y)?;
            (k.project(&combine(x, &u, alpha)?)?, Some(y))
        }
        Scheme::Picard => (k.project(&nearest_selection(t, x)?)?, None),
    };
    let gaps = assess(k, t, x)?;
    let record = StepRecord {
        n,
        d_x_tx: gaps.raw,
        d_x_ptx: gaps.projected,
        step_displacement: dist(x, &next)?,
        d_to_p: distances(fp, x)?,
        d_y_p: match &y {
            Some(y) => distances(fp, y)?,
            None => Vec::new(),
        },
        d_z_p: Vec::new(),
        d_next_p: distances(fp, &next)?,
        residual_sample: None,
        per_map_gap: Vec::new(),
        selection_gaps: Vec::new(),
    };
    Ok((next, record))
}

/// Iterates `scheme` from `x0` until `d(x_n, P*_K T x_n) < tol_fp` (once
/// `n >= min_iter`) or `max_iter` steps, then certifies the final pair
/// against a sample of K. Non-convergence is reported, not raised.
pub fn solve_with_scheme(
    problem: &VipProblem,
    scheme: Scheme,
) -> Result<(VipSolution, IterationTrace)> {
    problem.validate()?;
    let samples = problem.samples()?;
    let k = &problem.set;
    let t = &problem.map;

    let mut x = problem.x0.clone();
    let mut iterates = vec![x.clone()];
    let mut records = Vec::new();
    let mut n = 0;
    let last = loop {
        let gaps = assess(k, t, &x)?;
        let done = n >= problem.min_iter && gaps.projected < problem.tol_fp;
        if done || n >= problem.max_iter {
            break gaps;
        }
        let (next, mut record) = baseline_step(scheme, problem, &x, n)?;
        record.residual_sample = Some(residual(k, &x, &gaps.vip_u, &samples)?);
        records.push(record);
        iterates.push(next.clone());
        x = next;
        n += 1;
    };

    let res = residual(k, &x, &last.vip_u, &samples)?;
    let converged = last.projected < problem.tol_fp;
    let solution = VipSolution {
        x,
        u: last.vip_u,
        residual: res,
        iterations: records.len(),
        converged,
        certified: converged && res >= -problem.tol_res,
    };
    let trace = IterationTrace {
        scheme: scheme.label().to_string(),
        iterates,
        records,
        final_gap: last.projected,
        final_raw_gap: last.raw,
        schedule: serde_json::to_value(&problem.schedule).unwrap_or_default(),
        seed: problem.seed,
    };
    Ok((solution, trace))
}

/// Solves the VIP with the proximal multivalued Picard-S iteration.
pub fn solve_vip(problem: &VipProblem) -> Result<(VipSolution, IterationTrace)> {
    solve_with_scheme(problem, Scheme::PicardS)
}

/// Solves the VIP on `K_r = K ∩ B(o, r)`. When the solution lies strictly
/// inside the ball it also solves the VIP on all of K, which is then
/// certified against a sample of K.
pub fn truncated_solve(
    problem: &VipProblem,
    o: &Point,
    r: f64,
) -> Result<(TruncatedSolution, IterationTrace)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!(
            "truncation radius {r} must be positive"
        )));
    }
    problem.space.check_point(o)?;
    let witness = problem.set.project(o)?;
    if dist(o, &witness)? > r {
        return Err(Error::domain(format!("K ∩ B(o, {r}) is empty")));
    }
    let kr = ConvexSet::intersection(
        vec![problem.set.clone(), ConvexSet::ball(o.clone(), r)],
        witness,
    );
    let mut sub = problem.clone();
    sub.x0 = kr.project(&problem.x0)?;
    sub.set = kr;
    let (mut solution, trace) = solve_vip(&sub)?;

    let strict = dist(o, &solution.x)? < r - problem.tol_res;
    let full_residual = if strict {
        let full = assess(&problem.set, &problem.map, &solution.x)?;
        Some(residual(
            &problem.set,
            &solution.x,
            &full.vip_u,
            &problem.samples()?,
        )?)
    } else {
        None
    };
    solution.certified =
        solution.converged && full_residual.is_some_and(|res| res >= -problem.tol_res);
    if let Some(res) = full_residual {
        solution.residual = res;
    }
    Ok((
        TruncatedSolution {
            solution,
            radius: r,
            strict_interior: strict,
            full_residual,
        },
        trace,
    ))
}

/// Doubles `r` from `r0` until the truncated solution is strictly interior,
/// at most [`MAX_DOUBLINGS`] times. Returns the last attempt either way.
pub fn solve_by_truncation(
    problem: &VipProblem,
    o: &Point,
    r0: f64,
) -> Result<(TruncatedSolution, IterationTrace)> {
    let mut r = r0;
    let mut attempt = truncated_solve(problem, o, r)?;
    for _ in 0..MAX_DOUBLINGS {
        if attempt.0.strict_interior {
            break;
        }
        r *= 2.0;
        attempt = truncated_solve(problem, o, r)?;
    }
    Ok(attempt)
}

/// One step of the modified (N-map) Picard-S iteration:
///
/// ```text
/// z_n     = P_K(γ_0 x_n ⊕ ⊕_i γ_i w_{n,i})
/// y_n     = P_K(⊕_i α_i w_{n,i} ⊕ ⊕_i β_i v_{n,i})
/// x_{n+1} = P_K(⊕_i λ_i u_{n,i})
/// ```
///
/// with `w_{n,i} ∈ T_i x_n`, `v_{n,i} ∈ T_i z_n`, `u_{n,i} ∈ T_i y_n`.
pub fn modified_step(problem: &SystemProblem, x: &Point, n: usize) -> Result<(Point, StepRecord)> {
    let k = problem.domain();
    modified_step_in(problem, &k, &problem.schedule(), x, n)
}

fn modified_step_in(
    problem: &SystemProblem,
    k: &ConvexSet,
    schedule: &SystemSchedule,
    x: &Point,
    n: usize,
) -> Result<(Point, StepRecord)> {
    let maps = &problem.maps;
    let w: Vec<Point> = maps
        .iter()
        .map(|t| nearest_selection(t, x))
        .collect::<Result<_>>()?;

    let mut z_terms = Vec::with_capacity(maps.len() + 1);
    z_terms.push(x.clone());
    z_terms.extend(w.iter().cloned());
    let z = k.project(&multi_combine(&z_terms, &schedule.gamma_weights()?)?)?;

    let v: Vec<Point> = maps
        .iter()
        .map(|t| nearest_selection(t, &z))
        .collect::<Result<_>>()?;
    let y_terms: Vec<Point> = w.iter().chain(&v).cloned().collect();
    let y = k.project(&multi_combine(&y_terms, &schedule.alpha_beta_weights()?)?)?;

    let u: Vec<Point> = maps
        .iter()
        .map(|t| nearest_selection(t, &y))
        .collect::<Result<_>>()?;
    let next = k.project(&multi_combine(&u, &schedule.lambda_weights()?)?)?;

    let mut per_map_gap = Vec::with_capacity(maps.len());
    let mut projected_gap: f64 = 0.0;
    for t in maps {
        let g = assess(k, t, x)?;
        per_map_gap.push(g.raw);
        projected_gap = projected_gap.max(g.projected);
    }
    let mut selection_gaps = Vec::new();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            selection_gaps.push(dist(&u[i], &u[j])?);
        }
    }
    let fp = &problem.fixed_points;
    let record = StepRecord {
        n,
        d_x_tx: per_map_gap.iter().copied().fold(0.0, f64::max),
        d_x_ptx: projected_gap,
        step_displacement: dist(x, &next)?,
        d_to_p: distances(fp, x)?,
        d_y_p: distances(fp, &y)?,
        d_z_p: distances(fp, &z)?,
        d_next_p: distances(fp, &next)?,
        residual_sample: None,
        per_map_gap,
        selection_gaps,
    };
    Ok((next, record))
}

/// Iterates [`modified_step`] until `max_i d(x_n, P*_K T_i x_n) < tol_fp`
/// or `max_iter`, then certifies every pair `(u_i, x)` against a sample of
/// its own `K_i`.
pub fn solve_system(problem: &SystemProblem) -> Result<(SystemSolution, IterationTrace)> {
    problem.validate()?;
    let k = problem.domain();
    let schedule = problem.schedule();
    let samples: Vec<SampleSet> = problem
        .sets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.sample_in(
                &problem.space,
                problem.sample_size,
                problem.seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<_>>()?;

    let certify = |x: &Point| -> Result<(Vec<Point>, Vec<f64>, f64, f64)> {
        let mut us = Vec::new();
        let mut residuals = Vec::new();
        let mut raw: f64 = 0.0;
        let mut projected: f64 = 0.0;
        for (i, t) in problem.maps.iter().enumerate() {
            let own = assess(&problem.sets[i], t, x)?;
            residuals.push(residual(&problem.sets[i], x, &own.vip_u, &samples[i])?);
            us.push(own.vip_u);
            let g = assess(&k, t, x)?;
            raw = raw.max(g.raw);
            projected = projected.max(g.projected);
        }
        Ok((us, residuals, raw, projected))
    };

    let mut x = problem.x0.clone();
    let mut iterates = vec![x.clone()];
    let mut records = Vec::new();
    let mut n = 0;
    let (us, residuals, raw, projected) = loop {
        let state = certify(&x)?;
        let done = n >= problem.min_iter && state.3 < problem.tol_fp;
        if done || n >= problem.max_iter {
            break state;
        }
        let (next, mut record) = modified_step_in(problem, &k, &schedule, &x, n)?;
        record.residual_sample = state.1.iter().copied().reduce(f64::min);
        records.push(record);
        iterates.push(next.clone());
        x = next;
        n += 1;
    };

    let converged = projected < problem.tol_fp;
    let certified = converged && residuals.iter().all(|r| *r >= -problem.tol_res);
    let solution = SystemSolution {
        x,
        u: us,
        residuals,
        iterations: records.len(),
        converged,
        certified,
    };
    let trace = IterationTrace {
        scheme: "modified_picard_s".to_string(),
        iterates,
        records,
        final_gap: projected,
        final_raw_gap: raw,
        schedule: serde_json::to_value(&schedule).unwrap_or_default(),
        seed: problem.seed,
    };
    Ok((solution, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multimap::MapDescriptor;

    fn e(c: &[f64]) -> Point {
        Point::euclidean(c.to_vec())
    }

    fn plane() -> SpaceModel {
        SpaceModel::Euclidean { dim: 2 }
    }

    fn problem(set: ConvexSet, map: MultiMap, x0: Point) -> VipProblem {
        VipProblem {
            space: plane(),
            set,
            map,
            x0,
            schedule: Schedule::default(),
            max_iter: 500,
            min_iter: 0,
            tol_fp: 1e-10,
            tol_res: 1e-6,
            sample_size: 256,
            seed: 7,
            fixed_points: vec![],
        }
    }

    fn unit_ball() -> ConvexSet {
        ConvexSet::ball(e(&[0.0, 0.0]), 1.0)
    }

    #[test]
    fn identity_is_stationary() {
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::Identity]),
            e(&[0.3, 0.1]),
        );
        let (next, rec) = picard_s_step(&p, &p.x0, 0).unwrap();
        assert_eq!(next, p.x0);
        assert_eq!(rec.d_x_tx, 0.0);
        assert_eq!(rec.step_displacement, 0.0);
    }

    #[test]
    fn fixed_point_is_invariant() {
        let a = e(&[0.2, -0.3]);
        let mut p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::contraction(a.clone(), 0.5)]),
            a.clone(),
        );
        p.fixed_points = vec![a.clone()];
        let (next, rec) = picard_s_step(&p, &a, 0).unwrap();
        assert_eq!(next, a);
        assert_eq!(rec.d_to_p, vec![0.0]);
    }

    #[test]
    fn hand_computed_ball_constant_step() {
        // w = (2,0); z = P_K((1,0)) = (1,0); v = (2,0);
        // y = P_K((2,0)) = (1,0); u = (2,0); x1 = P_K((2,0)) = (1,0).
        let p = problem(
            unit_ball(),
            MultiMap::constant(vec![e(&[2.0, 0.0])]).unwrap(),
            e(&[0.0, 0.0]),
        );
        let (next, rec) = picard_s_step(&p, &p.x0, 0).unwrap();
        assert_eq!(next, e(&[1.0, 0.0]));
        assert_eq!(rec.d_x_tx, 2.0);
        assert_eq!(rec.d_x_ptx, 1.0);
    }

    #[test]
    fn constant_inside_k_solved_exactly() {
        let c = e(&[0.3, 0.4]);
        let p = problem(
            unit_ball(),
            MultiMap::constant(vec![c.clone()]).unwrap(),
            e(&[-0.5, 0.0]),
        );
        let (sol, trace) = solve_vip(&p).unwrap();
        assert_eq!(sol.x, c);
        assert_eq!(sol.u, c);
        assert!(sol.residual >= -1e-9);
        assert!(sol.certified);
        assert!(trace.is_consistent());
    }

    #[test]
    fn constant_outside_k_solved_by_projection() {
        let p = problem(
            unit_ball(),
            MultiMap::constant(vec![e(&[2.0, 0.0])]).unwrap(),
            e(&[0.0, 0.5]),
        );
        let (sol, _) = solve_vip(&p).unwrap();
        assert!(dist(&sol.x, &e(&[1.0, 0.0])).unwrap() < 1e-12);
        assert_eq!(sol.u, e(&[2.0, 0.0]));
        assert!(sol.residual >= -1e-9);
        assert!(sol.certified);
    }

    #[test]
    fn interior_solution_is_fixed_point() {
        let a = e(&[0.1, 0.2]);
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::contraction(a.clone(), 0.6)]),
            e(&[-0.7, 0.5]),
        );
        let (sol, _) = solve_vip(&p).unwrap();
        assert!(sol.converged);
        assert!(dist(&sol.x, &a).unwrap() < 1e-9);
        assert!(dist(&sol.x, &sol.u).unwrap() <= 1e-6);
        assert!(sol.certified);
    }

    #[test]
    fn residual_examples() {
        let k = unit_ball();
        let s = k.sample(128, 1).unwrap();
        let x = e(&[0.2, 0.2]);
        assert_eq!(residual(&k, &x, &x, &s).unwrap(), 0.0);
        // (x - u).(y - x) = (-1, 0).(y - (1, 0)) = 1 - y_1 >= 0 on the ball.
        assert!(residual(&k, &e(&[1.0, 0.0]), &e(&[2.0, 0.0]), &s).unwrap() >= -1e-9);
        let s1 = SampleSet {
            points: crate::multimap::FinitePointSet::new(vec![e(&[1.0, 0.0])]).unwrap(),
            seed: 0,
        };
        // (-2, 0).(1, 0) = -2.
        let r = residual(&k, &e(&[0.0, 0.0]), &e(&[2.0, 0.0]), &s1).unwrap();
        assert!(r <= -2.0 + 1e-9);
    }

    #[test]
    fn residual_is_monotone_in_sample() {
        let k = unit_ball();
        let small = k.sample(16, 5).unwrap();
        let mut pts = small.points.points().to_vec();
        pts.extend(k.sample(64, 6).unwrap().points.into_points());
        let big = SampleSet {
            points: crate::multimap::FinitePointSet::new(pts).unwrap(),
            seed: 0,
        };
        let x = e(&[0.1, 0.1]);
        let u = e(&[0.9, -0.4]);
        assert!(residual(&k, &x, &u, &big).unwrap() <= residual(&k, &x, &u, &small).unwrap());
    }

    fn half_plane_problem() -> VipProblem {
        let a = e(&[-2.0, 0.0]);
        let mut p = problem(
            ConvexSet::half_space(vec![1.0, 0.0], 0.0),
            MultiMap::union(vec![MapDescriptor::contraction(a.clone(), 0.5)]),
            e(&[-1.0, 3.0]),
        );
        p.fixed_points = vec![a];
        p
    }

    #[test]
    fn truncation_inside_radius() {
        let p = half_plane_problem();
        let (t, _) = truncated_solve(&p, &e(&[0.0, 0.0]), 5.0).unwrap();
        assert!(t.strict_interior);
        assert!(dist(&t.solution.x, &e(&[-2.0, 0.0])).unwrap() < 1e-8);
        assert!(t.full_residual.unwrap() >= -1e-6);
        assert!(t.solution.certified);
    }

    #[test]
    fn truncation_too_small_withholds_certificate() {
        let p = half_plane_problem();
        let (t, _) = truncated_solve(&p, &e(&[0.0, 0.0]), 1.0).unwrap();
        assert!(!t.strict_interior);
        assert!(t.full_residual.is_none());
        assert!(!t.solution.certified);
        let (d, _) = solve_by_truncation(&p, &e(&[0.0, 0.0]), 1.0).unwrap();
        assert!(d.strict_interior);
        assert_eq!(d.radius, 4.0);
    }

    #[test]
    fn truncation_inactive_for_bounded_k() {
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::contraction(e(&[2.0, 1.0]), 0.5)]),
            e(&[0.0, -0.5]),
        );
        let (direct, dt) = solve_vip(&p).unwrap();
        let (t, tt) = truncated_solve(&p, &e(&[0.0, 0.0]), 10.0).unwrap();
        assert_eq!(t.solution.x, direct.x);
        assert_eq!(t.solution.iterations, direct.iterations);
        assert_eq!(tt.iterates, dt.iterates);
    }

    #[test]
    fn empty_truncation_rejected() {
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::Identity]),
            e(&[0.0, 0.0]),
        );
        assert!(matches!(
            truncated_solve(&p, &e(&[5.0, 0.0]), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut p = half_plane_problem();
        p.max_iter = 1;
        let (sol, trace) = solve_vip(&p).unwrap();
        assert!(!sol.converged);
        assert!(!sol.certified);
        assert_eq!(trace.records.len(), 1);
    }

    fn system(maps: Vec<MultiMap>, sets: Vec<ConvexSet>, x0: Point) -> SystemProblem {
        SystemProblem {
            space: plane(),
            sets,
            maps,
            x0,
            schedule: None,
            max_iter: 500,
            min_iter: 0,
            tol_fp: 1e-10,
            tol_res: 1e-6,
            sample_size: 128,
            seed: 3,
            fixed_points: vec![],
        }
    }

    #[test]
    fn two_map_hand_step() {
        // x = (2,0), anchor 0, factors 1/2 and 1/4, λ = (1/2,1/2),
        // α = β = (1/4,1/4), γ = (1/3,1/3,1/3):
        // w = (1, 1/2), z = 7/6, v = (7/12, 7/24), y = 57/96,
        // u = (57/192, 57/384), x1 = 171/768.
        let a = e(&[0.0, 0.0]);
        let big = ConvexSet::ball(a.clone(), 10.0);
        let p = system(
            vec![
                MultiMap::union(vec![MapDescriptor::contraction(a.clone(), 0.5)]),
                MultiMap::union(vec![MapDescriptor::contraction(a.clone(), 0.25)]),
            ],
            vec![big.clone(), big],
            e(&[2.0, 0.0]),
        );
        let mut p = p;
        p.schedule = Some(SystemSchedule {
            lambda: vec![0.5, 0.5],
            alpha: vec![0.25, 0.25],
            beta: vec![0.25, 0.25],
            gamma: vec![1.0 / 3.0; 3],
            bounds: [0.1, 0.9],
        });
        let (next, rec) = modified_step(&p, &p.x0, 0).unwrap();
        assert!(dist(&next, &e(&[171.0 / 768.0, 0.0])).unwrap() < 1e-12);
        assert_eq!(rec.per_map_gap, vec![1.0, 1.5]);
        assert!((rec.selection_gaps[0] - 57.0 / 384.0).abs() < 1e-12);
    }

    #[test]
    fn all_identity_system_is_stationary() {
        let k = unit_ball();
        let id = MultiMap::union(vec![MapDescriptor::Identity]);
        let p = system(
            vec![id.clone(), id.clone(), id],
            vec![k.clone(), k.clone(), k],
            e(&[0.1, 0.1]),
        );
        let (next, _) = modified_step(&p, &p.x0, 0).unwrap();
        assert!(dist(&next, &p.x0).unwrap() < 1e-15);
    }

    #[test]
    fn single_map_reduction_is_exact() {
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![
                MapDescriptor::contraction(e(&[0.4, 0.0]), 0.7),
                MapDescriptor::contraction(e(&[3.0, 1.0]), 0.5),
            ]),
            e(&[-0.2, 0.6]),
        );
        let mut s = system(vec![p.map.clone()], vec![p.set.clone()], p.x0.clone());
        s.schedule = Some(SystemSchedule::matching_single(0.5, 0.5));
        let (a, ra) = picard_s_step(&p, &p.x0, 0).unwrap();
        let (b, rb) = modified_step(&s, &s.x0, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.d_x_tx.to_bits(), rb.d_x_tx.to_bits());
        assert_eq!(
            ra.step_displacement.to_bits(),
            rb.step_displacement.to_bits()
        );
    }

    #[test]
    fn constant_system_certified() {
        let c = e(&[0.1, 0.0]);
        let t = MultiMap::constant(vec![c.clone()]).unwrap();
        let sets = vec![
            unit_ball(),
            ConvexSet::ball(e(&[0.5, 0.0]), 1.0),
            ConvexSet::half_space(vec![0.0, 1.0], 0.5),
        ];
        let p = system(vec![t.clone(), t.clone(), t], sets, e(&[0.2, 0.0]));
        let (sol, _) = solve_system(&p).unwrap();
        assert!(dist(&sol.x, &c).unwrap() < 1e-9);
        assert!(sol.certified);
    }

    #[test]
    fn mann_steps() {
        let mut p = problem(
            ConvexSet::ball(e(&[0.0, 0.0]), 10.0),
            MultiMap::union(vec![MapDescriptor::contraction(e(&[0.0, 0.0]), 0.5)]),
            e(&[2.0, 0.0]),
        );
        p.schedule = Schedule::constant(0.0, 0.5);
        let (next, _) = baseline_step(Scheme::Mann, &p, &p.x0, 0).unwrap();
        assert_eq!(next, p.x0);
        // w = (1,0); x1 = (1/2)(2,0) + (1/2)(1,0) = (1.5, 0).
        p.schedule = Schedule::constant(0.5, 0.5);
        let (next, _) = baseline_step(Scheme::Mann, &p, &p.x0, 0).unwrap();
        assert_eq!(next, e(&[1.5, 0.0]));
    }

    #[test]
    fn picard_on_constant_reaches_target_in_one_step() {
        let c = e(&[0.5, 0.5]);
        let p = problem(
            unit_ball(),
            MultiMap::constant(vec![c.clone()]).unwrap(),
            e(&[0.0, -0.9]),
        );
        let (next, _) = baseline_step(Scheme::Picard, &p, &p.x0, 0).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::constant(0.5, 0.5).validate().is_ok());
        assert!(Schedule::constant(0.5, 0.99).validate().is_err());
        assert!(Schedule::constant(1.2, 0.5).validate().is_err());
        let s = Schedule {
            alpha: Sequence::constant(0.3),
            beta: Sequence::Periodic {
                values: vec![0.2, 0.8],
            },
            bounds: [0.2, 0.8],
        };
        assert!((s.liminf_surrogate() - 0.16).abs() < 1e-15);
        assert!(s.validate().is_ok());
        assert!(SystemSchedule::uniform(3).validate(3).is_ok());
        assert!(SystemSchedule::uniform(3).validate(2).is_err());
        assert!(SystemSchedule::matching_single(0.5, 0.5)
            .validate(1)
            .is_ok());
        let mut bad = SystemSchedule::uniform(2);
        bad.lambda = vec![0.95, 0.05];
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn x0_outside_k_rejected() {
        let p = problem(
            unit_ball(),
            MultiMap::union(vec![MapDescriptor::Identity]),
            e(&[3.0, 0.0]),
        );
        assert!(solve_vip(&p).is_err());
    }

    #[test]
    fn coercivity_quotient_of_contraction() {
        // T = contraction toward 0 with factor 1/2, x0 = 0, u0 = 0:
        // <ux, x0 x> = (x - u).(x - 0) = |x|^2 / 2, quotient = |x| / 2.
        let x = e(&[4.0, 0.0]);
        let u = e(&[2.0, 0.0]);
        let o = e(&[0.0, 0.0]);
        let q = coercivity_quotient(&o, &o, &x, &u).unwrap();
        assert!((q - 2.0).abs() < 1e-12);
    }
}
