//! Checks on recorded traces: asymptotic centers, Δ-convergence,
//! Fejér audits, Cauchy tails and scheme rate tables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{combine_unchecked, dist_unchecked, Point, SpaceModel};
use crate::rng::Stream;
use crate::trace::IterationTrace;

/// Step budget of the minimax descent.
pub const CENTER_MAX_STEPS: usize = 10_000;

/// The descent stops once the best value has improved by less than
/// [`CENTER_IMPROVEMENT_TOL`] over this many steps.
pub const CENTER_PATIENCE: usize = 100;
pub const CENTER_IMPROVEMENT_TOL: f64 = 1e-10;

/// Shortest trace accepted by [`delta_convergence_check`].
pub const DELTA_MIN_LEN: usize = 40;

/// Index range `[start, end)` into a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailWindow {
    pub start: usize,
    pub end: usize,
}

impl TailWindow {
    pub fn new(start: usize, end: usize, len: usize) -> Result<TailWindow> {
        if start >= end || end > len {
            return Err(Error::domain(format!(
                "window [{start}, {end}) invalid for length {len}"
            )));
        }
        Ok(TailWindow { start, end })
    }

    pub fn last_half(len: usize) -> Result<TailWindow> {
        TailWindow::new(len / 2, len, len)
    }

    pub fn last_quarter(len: usize) -> Result<TailWindow> {
        TailWindow::new(len - len / 4, len, len)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

fn farthest(x: &Point, pts: &[&Point]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = dist_unchecked(x, p);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Minimizer of `f(x) = max_{n in w} d(x, x_n)` by geodesic minimax
/// descent: start at the window's last point and step a distance
/// `η_0 / (k + 1)` toward the current farthest point, with `η_0` half the
/// window diameter. Returns the best point seen and `f` there.
pub fn asymptotic_center_estimate(
    space: &SpaceModel,
    pts: &[Point],
    w: TailWindow,
) -> Result<(Point, f64)> {
    let w = TailWindow::new(w.start, w.end, pts.len())?;
    let window = &pts[w.start..w.end];
    for p in window {
        space.check_point(p)?;
    }
    center_of(&window.iter().collect::<Vec<_>>())
}

fn center_of(window: &[&Point]) -> Result<(Point, f64)> {
    let mut diameter: f64 = 0.0;
    for i in 0..window.len() {
        for j in i + 1..window.len() {
            diameter = diameter.max(dist_unchecked(window[i], window[j]));
        }
    }
    let mut x = window[window.len() - 1].clone();
    let mut best = (x.clone(), farthest(&x, window).1);
    if diameter == 0.0 {
        return Ok((best.0, 0.0));
    }
    let eta0 = diameter / 2.0;
    let mut checkpoint = best.1;
    for k in 0..CENTER_MAX_STEPS {
        let (i, d) = farthest(&x, window);
        if d < best.1 {
            best = (x.clone(), d);
        }
        if k % CENTER_PATIENCE == CENTER_PATIENCE - 1 {
            if checkpoint - best.1 < CENTER_IMPROVEMENT_TOL {
                break;
            }
            checkpoint = best.1;
        }
        let step = eta0 / (k + 1) as f64;
        x = combine_unchecked(&x, window[i], (step / d).min(1.0));
    }
    // The radius is recomputed so it equals f(center) exactly.
    let radius = farthest(&best.0, window).1;
    Ok((best.0, radius))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceCenter {
    pub label: String,
    pub size: usize,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub window: TailWindow,
    pub centers: Vec<SubsequenceCenter>,
    /// `d(c_i, c_j)` for `i < j`, row-major.
    pub pairwise: Vec<f64>,
    pub max_pairwise: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares the asymptotic centers of five subsequences of the last-half
/// window (all, even indices, odd indices, two random masks seeded from the
/// trace seed). Passes iff all centers lie within `tol` of each other.
pub fn delta_convergence_check(
    space: &SpaceModel,
    trace: &IterationTrace,
    tol: f64,
) -> Result<DeltaReport> {
    let n = trace.iterates.len();
    if n < DELTA_MIN_LEN {
        return Err(Error::domain(format!(
            "trace of length {n} is shorter than {DELTA_MIN_LEN}"
        )));
    }
    let window = TailWindow::last_half(n)?;
    for p in &trace.iterates[window.start..window.end] {
        space.check_point(p)?;
    }
    let idx: Vec<usize> = (window.start..window.end).collect();
    let mut rng = Stream::new(trace.seed).fork(0xde17a);
    let mut masks: Vec<(String, Vec<usize>)> = vec![
        ("tail".into(), idx.clone()),
        (
            "even".into(),
            idx.iter().copied().filter(|i| i % 2 == 0).collect(),
        ),
        (
            "odd".into(),
            idx.iter().copied().filter(|i| i % 2 == 1).collect(),
        ),
    ];
    for m in 0..2 {
        let mut pick: Vec<usize> = idx.iter().copied().filter(|_| rng.next_bool()).collect();
        if pick.is_empty() {
            pick.push(window.end - 1);
        }
        masks.push((format!("random_{}", m + 1), pick));
    }

    let mut centers = Vec::with_capacity(masks.len());
    for (label, sel) in masks {
        let pts: Vec<&Point> = sel.iter().map(|&i| &trace.iterates[i]).collect();
        let (center, radius) = center_of(&pts)?;
        centers.push(SubsequenceCenter {
            label,
            size: pts.len(),
            center,
            radius,
        });
    }
    let mut pairwise = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            pairwise.push(dist_unchecked(&centers[i].center, &centers[j].center));
        }
    }
    let max_pairwise = pairwise.iter().copied().fold(0.0, f64::max);
    Ok(DeltaReport {
        window,
        centers,
        pairwise,
        max_pairwise,
        tol,
        passed: max_pairwise <= tol,
    })
}

/// `max_n d(x_{n+1}, p) - d(x_n, p)`, floored at 0.
pub fn fejer_audit(trace: &IterationTrace, p: &Point) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for x in &trace.iterates {
        let d = crate::geometry::dist(x, p)?;
        if let Some(before) = prev {
            worst = worst.max(d - before);
        }
        prev = Some(d);
    }
    Ok(worst)
}

/// Worst violation of `d(x_{n+1}, p) <= d(y_n, p) <= d(x_n, p)` and, where
/// recorded, `d(z_n, p) <= d(x_n, p)`, for the `k`-th declared fixed point.
pub fn chain_audit(trace: &IterationTrace, k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for r in &trace.records {
        let (Some(x), Some(next)) = (r.d_to_p.get(k), r.d_next_p.get(k)) else {
            continue;
        };
        worst = worst.max(next - x);
        if let Some(y) = r.d_y_p.get(k) {
            worst = worst.max(next - y).max(y - x);
        }
        if let Some(z) = r.d_z_p.get(k) {
            worst = worst.max(z - x);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    pub window: TailWindow,
    pub tail_diameter: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Cauchy test: the last-quarter window has diameter at most `tol`.
pub fn strong_convergence_check(trace: &IterationTrace, tol: f64) -> Result<StrongReport> {
    let window = TailWindow::last_quarter(trace.iterates.len())?;
    let tail = &trace.iterates[window.start..window.end];
    let mut diameter: f64 = 0.0;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            diameter = diameter.max(crate::geometry::dist(&tail[i], &tail[j])?);
        }
    }
    Ok(StrongReport {
        window,
        tail_diameter: diameter,
        tol,
        passed: diameter <= tol,
    })
}

/// Largest pairwise selection gap of the last system step, if any.
pub fn final_selection_gap(trace: &IterationTrace) -> Option<f64> {
    trace
        .records
        .last()
        .filter(|r| !r.selection_gaps.is_empty())
        .map(|r| r.selection_gaps.iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub scheme: String,
    /// First `n` with `d(x_n, P*_K T x_n) < target`.
    pub index: Option<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub target: f64,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn index_of(&self, scheme: &str) -> Option<Option<usize>> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme)
            .map(|r| r.index)
    }
}

pub fn first_below(trace: &IterationTrace, target: f64) -> Option<usize> {
    trace.gaps().iter().position(|g| *g < target)
}

pub fn rate_report(traces: &[(String, IterationTrace)], target: f64) -> RateReport {
    RateReport {
        target,
        rows: traces
            .iter()
            .map(|(label, t)| RateRow {
                scheme: label.clone(),
                index: first_below(t, target),
                iterations: t.records.len(),
            })
            .collect(),
    }
}

impl fmt::Display for RateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "first n with gap < {:e}", self.target)?;
        for r in &self.rows {
            match r.index {
                Some(i) => writeln!(f, "  {:<10} {}", r.scheme, i)?,
                None => writeln!(
                    f,
                    "  {:<10} not reached (max_iter = {})",
                    r.scheme, r.iterations
                )?,
            }
        }
        Ok(())
    }
}
