//! Closed convex constraint sets with membership and metric projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, combine_unchecked, dist_unchecked, minkowski, Point, SpaceModel};
use crate::multimap::FinitePointSet;
use crate::rng::Stream;

/// Sweep budget for cyclic alternating projection onto an intersection.
pub const MAX_SWEEPS: usize = 10_000;

/// Sweep displacement below which alternating projection stops.
pub const SWEEP_TOL: f64 = 1e-10;

/// Half-width of the box sampled around the witness of an unbounded set.
pub const UNBOUNDED_SAMPLE_RADIUS: f64 = 10.0;

/// Membership tolerance every sampled point satisfies.
pub const SAMPLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexSet {
    /// Closed geodesic ball; valid in every model.
    Ball { center: Point, radius: f64 },
    /// `{x : <normal, x> <= offset}`, Euclidean only.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Union of the listed branches of a star tree, each truncated at
    /// radius `cap` (unbounded when `cap` is absent).
    SubTree {
        branches: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// Intersection of the members; `witness` must lie in all of them.
    Intersection {
        members: Vec<ConvexSet>,
        witness: Point,
    },
}

/// Finite sample of a convex set, standing in for "for all y in K".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: FinitePointSet,
    pub seed: u64,
}

impl ConvexSet {
    pub fn ball(center: Point, radius: f64) -> ConvexSet {
        ConvexSet::Ball { center, radius }
    }

    pub fn half_space(normal: impl Into<Vec<f64>>, offset: f64) -> ConvexSet {
        ConvexSet::HalfSpace {
            normal: normal.into(),
            offset,
        }
    }

    pub fn sub_tree(branches: impl Into<Vec<usize>>, cap: Option<f64>) -> ConvexSet {
        ConvexSet::SubTree {
            branches: branches.into(),
            cap,
        }
    }

    pub fn intersection(members: Vec<ConvexSet>, witness: Point) -> ConvexSet {
        ConvexSet::Intersection { members, witness }
    }

    /// Structural checks, including that the witness of an intersection
    /// actually lies in every member.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Ball { center, radius } => {
                center.check()?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::domain(format!(
                        "ball radius {radius} must be positive"
                    )));
                }
            }
            ConvexSet::HalfSpace { normal, offset } => {
                if normal.is_empty() || normal.iter().all(|v| *v == 0.0) || !offset.is_finite() {
                    return Err(Error::domain(
                        "half-space needs a nonzero normal and finite offset",
                    ));
                }
            }
            ConvexSet::SubTree { branches, cap } => {
                if branches.is_empty() {
                    return Err(Error::domain("subtree needs at least one branch"));
                }
                if let Some(c) = cap {
                    if !(c.is_finite() && *c > 0.0) {
                        return Err(Error::domain(format!("subtree cap {c} must be positive")));
                    }
                }
            }
            ConvexSet::Intersection { members, witness } => {
                if members.is_empty() {
                    return Err(Error::domain("intersection needs at least one member"));
                }
                for m in members {
                    m.validate()?;
                    if !m.contains(witness, SAMPLE_TOL)? {
                        return Err(Error::domain(format!(
                            "intersection witness {witness:?} is not in member {m:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// A point guaranteed to lie in the set.
    pub fn witness(&self) -> Point {
        match self {
            ConvexSet::Ball { center, .. } => center.clone(),
            ConvexSet::HalfSpace { normal, offset } => {
                let nn: f64 = normal.iter().map(|v| v * v).sum();
                Point::Euclidean(normal.iter().map(|v| v * offset / nn).collect())
            }
            ConvexSet::SubTree { .. } => Point::tree_origin(),
            ConvexSet::Intersection { witness, .. } => witness.clone(),
        }
    }

    fn check_model(&self, x: &Point) -> Result<()> {
        let ok = match (self, x) {
            (ConvexSet::Ball { center, .. }, _) => {
                geometry::dist(center, x)?;
                true
            }
            (ConvexSet::HalfSpace { normal, .. }, Point::Euclidean(c)) => c.len() == normal.len(),
            (ConvexSet::SubTree { .. }, Point::StarTree { .. }) => true,
            (ConvexSet::Intersection { witness, .. }, _) => {
                geometry::dist(witness, x)?;
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{} point is incompatible with {}",
                x.model_name(),
                self.kind_name()
            )))
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::HalfSpace { .. } => "half_space",
            ConvexSet::SubTree { .. } => "sub_tree",
            ConvexSet::Intersection { .. } => "intersection",
        }
    }

    /// Distance from `x` to the set, for the closed-form variants.
    fn gap(&self, x: &Point) -> Option<f64> {
        match self {
            ConvexSet::Ball { center, radius } => {
                Some((dist_unchecked(center, x) - radius).max(0.0))
            }
            ConvexSet::HalfSpace { normal, offset } => {
                let c = euclid(x);
                let nn = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                Some((dot(normal, c) - offset).max(0.0) / nn)
            }
            ConvexSet::SubTree { branches, cap } => {
                let (b, r) = tree_parts(x);
                if r == 0.0 {
                    Some(0.0)
                } else if branches.contains(&b) {
                    Some(cap.map_or(0.0, |c| (r - c).max(0.0)))
                } else {
                    Some(r)
                }
            }
            ConvexSet::Intersection { .. } => None,
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        self.check_model(x)?;
        match self {
            ConvexSet::Intersection { members, .. } => {
                for m in members {
                    if !m.contains(x, tol)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Ok(self.gap(x).expect("closed form") <= tol),
        }
    }

    /// Metric projection `P_K(x)`.
    ///
    /// Closed forms for balls, half-spaces and subtrees. Intersections use
    /// cyclic alternating projection, which lands in the intersection but
    /// is the nearest point only for nested or orthogonal members.
    pub fn project(&self, x: &Point) -> Result<Point> {
        self.check_model(x)?;
        Ok(match self {
            ConvexSet::Ball { center, radius } => {
                let d = dist_unchecked(center, x);
                if d <= *radius {
                    x.clone()
                } else {
                    combine_unchecked(center, x, radius / d)
                }
            }
            ConvexSet::HalfSpace { normal, offset } => {
                let c = euclid(x);
                let excess = dot(normal, c) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    let nn: f64 = normal.iter().map(|v| v * v).sum();
                    Point::Euclidean(
                        c.iter()
                            .zip(normal)
                            .map(|(v, n)| v - excess / nn * n)
                            .collect(),
                    )
                }
            }
            ConvexSet::SubTree { branches, cap } => {
                let (b, r) = tree_parts(x);
                if r == 0.0 {
                    x.clone()
                } else if branches.contains(&b) {
                    match cap {
                        Some(c) if r > *c => Point::tree(b, *c),
                        _ => x.clone(),
                    }
                } else {
                    Point::tree_origin()
                }
            }
            ConvexSet::Intersection { members, .. } => {
                let mut cur = x.clone();
                let mut displacement = f64::INFINITY;
                for _ in 0..MAX_SWEEPS {
                    let start = cur.clone();
                    for m in members {
                        cur = m.project(&cur)?;
                    }
                    displacement = dist_unchecked(&start, &cur);
                    if displacement < SWEEP_TOL {
                        // A stable cycle between disjoint members also stops moving.
                        let mut gap: f64 = 0.0;
                        for m in members {
                            gap = gap.max(dist_unchecked(&cur, &m.project(&cur)?));
                        }
                        if gap <= SAMPLE_TOL {
                            return Ok(cur);
                        }
                        return Err(Error::Convergence {
                            last: Box::new(cur),
                            displacement: gap,
                            sweeps: MAX_SWEEPS,
                        });
                    }
                }
                return Err(Error::Convergence {
                    last: Box::new(cur),
                    displacement,
                    sweeps: MAX_SWEEPS,
                });
            }
        })
    }

    /// Deterministic sample of `m` points (fewer if draws coincide): the
    /// witness first, then draws with roughly half the mass on the boundary.
    pub fn sample(&self, m: usize, seed: u64) -> Result<SampleSet> {
        self.sample_draws(m, seed, None)
    }

    /// As [`ConvexSet::sample`], drawing tree-ball points from every branch
    /// of `space` rather than only those up to the center's branch.
    pub fn sample_in(&self, space: &SpaceModel, m: usize, seed: u64) -> Result<SampleSet> {
        self.sample_draws(m, seed, Some(space))
    }

    fn sample_draws(&self, m: usize, seed: u64, space: Option<&SpaceModel>) -> Result<SampleSet> {
        if m == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let mut rng = Stream::new(seed);
        let mut points = vec![self.witness()];
        let mut attempts = 0;
        while points.len() < m && attempts < 20 * m {
            attempts += 1;
            let boundary = rng.next_bool();
            let Ok(mut p) = self.draw(&mut rng, boundary, space) else {
                continue;
            };
            if !self.contains(&p, SAMPLE_TOL)? {
                match self.project(&p) {
                    Ok(q) if self.contains(&q, SAMPLE_TOL)? => p = q,
                    _ => continue,
                }
            }
            points.push(p);
        }
        Ok(SampleSet {
            points: FinitePointSet::new(points)?,
            seed,
        })
    }

    fn draw(&self, rng: &mut Stream, boundary: bool, space: Option<&SpaceModel>) -> Result<Point> {
        match self {
            ConvexSet::Ball { center, radius } => {
                Ok(draw_ball(center, *radius, rng, boundary, space))
            }
            ConvexSet::HalfSpace { normal, offset } => {
                let witness = euclid(&self.witness()).to_vec();
                let mut c: Vec<f64> = witness
                    .iter()
                    .map(|w| w + rng.uniform(-UNBOUNDED_SAMPLE_RADIUS, UNBOUNDED_SAMPLE_RADIUS))
                    .collect();
                let nn: f64 = normal.iter().map(|v| v * v).sum();
                let excess = dot(normal, &c) - offset;
                // Boundary draws land on the hyperplane; outside draws are reflected in.
                let shift = if boundary {
                    excess / nn
                } else if excess > 0.0 {
                    2.0 * excess / nn
                } else {
                    0.0
                };
                for (v, n) in c.iter_mut().zip(normal) {
                    *v -= shift * n;
                }
                Ok(Point::Euclidean(c))
            }
            ConvexSet::SubTree { branches, cap } => {
                let b = branches[rng.next_index(branches.len())];
                let top = cap.unwrap_or(UNBOUNDED_SAMPLE_RADIUS);
                let r = if boundary && cap.is_some() {
                    top
                } else {
                    rng.uniform(0.0, top)
                };
                Ok(Point::tree(b, r))
            }
            ConvexSet::Intersection { members, witness } => {
                let p = members[0].draw(rng, boundary, space)?;
                let q = self.project(&p)?;
                if boundary {
                    Ok(q)
                } else {
                    let t = rng.next_f64();
                    Ok(combine_unchecked(witness, &q, t))
                }
            }
        }
    }
}

fn draw_ball(
    center: &Point,
    radius: f64,
    rng: &mut Stream,
    boundary: bool,
    space: Option<&SpaceModel>,
) -> Point {
    match center {
        Point::Euclidean(c) => {
            let dim = c.len();
            let dir = unit_normal(rng, dim);
            let r = if boundary {
                radius
            } else {
                radius * rng.next_f64().powf(1.0 / dim as f64)
            };
            Point::Euclidean(c.iter().zip(&dir).map(|(v, u)| v + r * u).collect())
        }
        Point::Hyperboloid(c) => {
            let g: Vec<f64> = (0..c.len()).map(|_| rng.next_normal()).collect();
            let gc = minkowski(&g, c);
            let v: Vec<f64> = g.iter().zip(c).map(|(gi, ci)| gi + gc * ci).collect();
            let vn = minkowski(&v, &v).max(f64::MIN_POSITIVE).sqrt();
            let r = if boundary {
                radius
            } else {
                radius * rng.next_f64()
            };
            let spatial: Vec<f64> = (1..c.len())
                .map(|i| r.cosh() * c[i] + r.sinh() * v[i] / vn)
                .collect();
            Point::hyperboloid_from_spatial(&spatial)
        }
        Point::StarTree { branch, radius: rc } => {
            // Walk from the center toward a far point on a random branch.
            let branch_count = match space {
                Some(SpaceModel::StarTree { branch_count }) => *branch_count,
                _ => (branch + 1).max(2),
            };
            let b = rng.next_index(branch_count);
            let target = Point::tree(b, rc + radius + 1.0);
            let s = if boundary {
                radius
            } else {
                radius * rng.next_f64()
            };
            let d = dist_unchecked(center, &target);
            combine_unchecked(center, &target, (s / d).min(1.0))
        }
    }
}

fn unit_normal(rng: &mut Stream, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let n = dot(&g, &g).sqrt();
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

fn euclid(x: &Point) -> &[f64] {
    match x {
        Point::Euclidean(c) => c,
        _ => unreachable!("model checked by caller"),
    }
}

fn tree_parts(x: &Point) -> (usize, f64) {
    match x {
        Point::StarTree { branch, radius } => (*branch, *radius),
        _ => unreachable!("model checked by caller"),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_{y in S} <xu, yu>`; at most zero (up to rounding) exactly when
/// `u` is the projection of `x` onto the sampled set.
pub fn projection_defect(x: &Point, u: &Point, samples: &SampleSet) -> Result<f64> {
    let pts = samples.points.points();
    if pts.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let mut worst = f64::NEG_INFINITY;
    for y in pts {
        worst = worst.max(geometry::quasi_inner(x, u, y, u)?);
    }
    Ok(worst)
}
