//! CAT(0) model spaces: Euclidean space, the hyperboloid model of
//! hyperbolic space, and star-shaped metric trees.
//!
//! All three are complete CAT(0) spaces, so geodesics are unique and the
//! quasi-linearization below satisfies the Cauchy–Schwarz inequality.
//!
//! Geodesic combinations follow the Euclidean reading of
//! `(1 - t) x ⊕ t y`: [`combine`]`(x, y, t)` is the point `z` on `[x, y]`
//! with `d(x, z) = t d(x, y)` and `d(z, y) = (1 - t) d(x, y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest tolerated violation of `<x, x>_M = -1` for hyperboloid points.
pub const HYPERBOLOID_TOL: f64 = 1e-6;

/// Tolerance on `Σ w = 1` for [`Weights`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpaceModel {
    Euclidean {
        dim: usize,
    },
    /// Hyperbolic space of dimension `dim`, embedded in `R^(dim+1)`.
    Hyperboloid {
        dim: usize,
    },
    /// `branch_count` half-lines glued at a common origin.
    StarTree {
        branch_count: usize,
    },
}

/// A location in one of the model spaces.
///
/// Tree points with zero radius are all the origin; constructors and
/// deserialization normalize them to `(branch 0, radius 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PointRepr", into = "PointRepr")]
pub enum Point {
    Euclidean(Vec<f64>),
    /// Coordinates `(x_0, ..., x_d)` with `x_0 > 0` and `-x_0^2 + Σ x_i^2 = -1`.
    Hyperboloid(Vec<f64>),
    StarTree {
        branch: usize,
        radius: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum PointRepr {
    Euclidean { coords: Vec<f64> },
    Hyperboloid { coords: Vec<f64> },
    StarTree { branch: usize, radius: f64 },
}

impl From<PointRepr> for Point {
    fn from(r: PointRepr) -> Self {
        match r {
            PointRepr::Euclidean { coords } => Point::Euclidean(coords),
            PointRepr::Hyperboloid { coords } => Point::Hyperboloid(coords),
            PointRepr::StarTree { branch, radius } => Point::tree(branch, radius),
        }
    }
}

impl From<Point> for PointRepr {
    fn from(p: Point) -> Self {
        match p {
            Point::Euclidean(coords) => PointRepr::Euclidean { coords },
            Point::Hyperboloid(coords) => PointRepr::Hyperboloid { coords },
            Point::StarTree { branch, radius } => PointRepr::StarTree { branch, radius },
        }
    }
}

impl Point {
    pub fn euclidean(coords: impl Into<Vec<f64>>) -> Point {
        Point::Euclidean(coords.into())
    }

    /// Lifts spatial coordinates `(x_1, ..., x_d)` onto the upper sheet.
    pub fn hyperboloid_from_spatial(spatial: &[f64]) -> Point {
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push(lift_time(spatial));
        coords.extend_from_slice(spatial);
        Point::Hyperboloid(coords)
    }

    /// Checked constructor for full hyperboloid coordinates.
    pub fn hyperboloid(coords: impl Into<Vec<f64>>) -> Result<Point> {
        let p = Point::Hyperboloid(coords.into());
        p.check()?;
        Ok(p)
    }

    pub fn tree(branch: usize, radius: f64) -> Point {
        if radius == 0.0 {
            Point::tree_origin()
        } else {
            Point::StarTree { branch, radius }
        }
    }

    pub fn tree_origin() -> Point {
        Point::StarTree {
            branch: 0,
            radius: 0.0,
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            Point::Euclidean(_) => "euclidean",
            Point::Hyperboloid(_) => "hyperboloid",
            Point::StarTree { .. } => "star_tree",
        }
    }

    /// Raw coordinates; `[branch, radius]` for tree points.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Euclidean(c) | Point::Hyperboloid(c) => c.clone(),
            Point::StarTree { branch, radius } => vec![*branch as f64, *radius],
        }
    }

    /// Validates intrinsic invariants: finite coordinates, hyperboloid
    /// constraint, nonnegative tree radius.
    pub fn check(&self) -> Result<()> {
        match self {
            Point::Euclidean(c) => {
                if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPoint(format!("euclidean coords {c:?}")));
                }
            }
            Point::Hyperboloid(c) => {
                if c.len() < 2 || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPoint(format!("hyperboloid coords {c:?}")));
                }
                let q = minkowski(c, c);
                if c[0] <= 0.0 || (q + 1.0).abs() > HYPERBOLOID_TOL {
                    return Err(Error::InvalidPoint(format!(
                        "hyperboloid point off the upper sheet: x0 = {}, <x,x> = {q}",
                        c[0]
                    )));
                }
            }
            Point::StarTree { radius, .. } => {
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::InvalidPoint(format!("tree radius {radius}")));
                }
            }
        }
        Ok(())
    }

    fn tree_parts(&self) -> (usize, f64) {
        match self {
            Point::StarTree { branch, radius } => (*branch, *radius),
            _ => unreachable!("tree_parts on non-tree point"),
        }
    }
}

fn lift_time(spatial: &[f64]) -> f64 {
    (1.0 + spatial.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Minkowski bilinear form `-a_0 b_0 + Σ_{i≥1} a_i b_i`.
pub fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    -a[0] * b[0] + a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
}

fn mismatch(a: &Point, b: &Point) -> Error {
    Error::domain(format!(
        "model mismatch: {} point vs {} point",
        a.model_name(),
        b.model_name()
    ))
}

fn check_pair(a: &Point, b: &Point) -> Result<()> {
    match (a, b) {
        (Point::Euclidean(x), Point::Euclidean(y))
        | (Point::Hyperboloid(x), Point::Hyperboloid(y)) => {
            if x.len() != y.len() {
                return Err(Error::domain(format!(
                    "dimension mismatch: {} vs {}",
                    x.len(),
                    y.len()
                )));
            }
        }
        (Point::StarTree { .. }, Point::StarTree { .. }) => {}
        _ => return Err(mismatch(a, b)),
    }
    if let Point::Hyperboloid(_) = a {
        a.check()?;
        b.check()?;
    }
    Ok(())
}

/// Geodesic distance.
pub fn dist(a: &Point, b: &Point) -> Result<f64> {
    check_pair(a, b)?;
    Ok(dist_unchecked(a, b))
}

pub(crate) fn dist_unchecked(a: &Point, b: &Point) -> f64 {
    match (a, b) {
        (Point::Euclidean(x), Point::Euclidean(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt(),
        (Point::Hyperboloid(x), Point::Hyperboloid(y)) => {
            let cosh_d = -minkowski(x, y);
            if cosh_d > 2.0 {
                cosh_d.acosh()
            } else {
                // Chord form: <x-y, x-y>_M = 4 sinh^2(d/2), accurate for close points.
                let chord = x
                    .iter()
                    .zip(y)
                    .enumerate()
                    .map(|(i, (p, q))| {
                        if i == 0 {
                            -(p - q) * (p - q)
                        } else {
                            (p - q) * (p - q)
                        }
                    })
                    .sum::<f64>()
                    .max(0.0);
                2.0 * (chord.sqrt() / 2.0).asinh()
            }
        }
        (Point::StarTree { .. }, Point::StarTree { .. }) => {
            let (ba, ra) = a.tree_parts();
            let (bb, rb) = b.tree_parts();
            if ba == bb || ra == 0.0 || rb == 0.0 {
                (ra - rb).abs()
            } else {
                ra + rb
            }
        }
        _ => unreachable!("model checked by caller"),
    }
}

pub(crate) fn dist_sq(a: &Point, b: &Point) -> f64 {
    match (a, b) {
        (Point::Euclidean(x), Point::Euclidean(y)) => {
            x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
        }
        _ => {
            let d = dist_unchecked(a, b);
            d * d
        }
    }
}

/// The point at fraction `t` of the way from `x` to `y` along `[x, y]`.
///
/// `t = 0` returns `x` and `t = 1` returns `y`, both bit-exactly.
pub fn combine(x: &Point, y: &Point, t: f64) -> Result<Point> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "combination parameter {t} outside [0, 1]"
        )));
    }
    check_pair(x, y)?;
    Ok(combine_unchecked(x, y, t))
}

pub(crate) fn combine_unchecked(x: &Point, y: &Point, t: f64) -> Point {
    if t == 0.0 {
        return x.clone();
    }
    if t == 1.0 {
        return y.clone();
    }
    match (x, y) {
        (Point::Euclidean(a), Point::Euclidean(b)) => {
            Point::Euclidean(a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect())
        }
        (Point::Hyperboloid(a), Point::Hyperboloid(b)) => {
            let d = dist_unchecked(x, y);
            if d == 0.0 {
                return x.clone();
            }
            let (wa, wb) = if d < 1e-8 {
                (1.0 - t, t)
            } else {
                let s = d.sinh();
                (((1.0 - t) * d).sinh() / s, (t * d).sinh() / s)
            };
            let spatial: Vec<f64> = a[1..]
                .iter()
                .zip(&b[1..])
                .map(|(p, q)| wa * p + wb * q)
                .collect();
            Point::hyperboloid_from_spatial(&spatial)
        }
        (Point::StarTree { .. }, Point::StarTree { .. }) => {
            let (bx, rx) = x.tree_parts();
            let (by, ry) = y.tree_parts();
            if bx == by || rx == 0.0 || ry == 0.0 {
                let branch = if rx == 0.0 { by } else { bx };
                Point::tree(branch, rx + t * (ry - rx))
            } else {
                let s = t * (rx + ry);
                if s <= rx {
                    Point::tree(bx, rx - s)
                } else {
                    Point::tree(by, s - rx)
                }
            }
        }
        _ => unreachable!("model checked by caller"),
    }
}

/// Convex weights `λ_1, ..., λ_n`: nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Weights> {
        if values.is_empty() {
            return Err(Error::domain("empty weight vector"));
        }
        if values.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::domain(format!("weights outside [0, 1]: {values:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("weights sum to {sum}, not 1")));
        }
        Ok(Weights(values))
    }

    pub fn uniform(n: usize) -> Result<Weights> {
        if n == 0 {
            return Err(Error::domain("empty weight vector"));
        }
        Weights::new(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Weights::new(v)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

/// N-point geodesic combination `⊕ λ_i x_i` as a left fold:
/// `c_1 = x_1`, `c_k = combine(c_{k-1}, x_k, λ_k / Σ_{i≤k} λ_i)`.
///
/// Reduces to the affine combination in Euclidean space. In the curved
/// models the result depends on the order of `points`.
pub fn multi_combine(points: &[Point], weights: &Weights) -> Result<Point> {
    if points.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    for p in &points[1..] {
        check_pair(&points[0], p)?;
    }
    let w = weights.values();
    let mut acc = points[0].clone();
    let mut mass = w[0];
    for (p, &wk) in points.iter().zip(w).skip(1) {
        mass += wk;
        let t = if mass > 0.0 {
            (wk / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        acc = combine_unchecked(&acc, p, t);
    }
    Ok(acc)
}

/// Quasi-linearization `<ab, cd> = ½ [d²(a,d) + d²(b,c) - d²(a,c) - d²(b,d)]`.
pub fn quasi_inner(a: &Point, b: &Point, c: &Point, d: &Point) -> Result<f64> {
    check_pair(a, b)?;
    check_pair(a, c)?;
    check_pair(a, d)?;
    Ok(quasi_inner_unchecked(a, b, c, d))
}

pub(crate) fn quasi_inner_unchecked(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    0.5 * (dist_sq(a, d) + dist_sq(b, c) - dist_sq(a, c) - dist_sq(b, d))
}

/// Defect of the CN inequality:
/// `d²(x, m) - [(1-t) d²(x,y) + t d²(x,z) - t(1-t) d²(y,z)]` with
/// `m = combine(y, z, t)`. Nonpositive in every CAT(0) space, zero in
/// Euclidean space.
pub fn cat0_defect(x: &Point, y: &Point, z: &Point, t: f64) -> Result<f64> {
    check_pair(x, y)?;
    check_pair(x, z)?;
    let m = combine(y, z, t)?;
    Ok(dist_sq(x, &m)
        - ((1.0 - t) * dist_sq(x, y) + t * dist_sq(x, z) - t * (1.0 - t) * dist_sq(y, z)))
}

impl SpaceModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceModel::Euclidean { dim } | SpaceModel::Hyperboloid { dim } if dim == 0 => {
                Err(Error::domain("space dimension must be at least 1"))
            }
            SpaceModel::StarTree { branch_count } if branch_count < 2 => {
                Err(Error::domain("star tree needs at least two branches"))
            }
            _ => Ok(()),
        }
    }

    /// Checks that `p` is a valid point of this space.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        p.check()?;
        let ok = match (self, p) {
            (SpaceModel::Euclidean { dim }, Point::Euclidean(c)) => c.len() == *dim,
            (SpaceModel::Hyperboloid { dim }, Point::Hyperboloid(c)) => c.len() == dim + 1,
            (SpaceModel::StarTree { branch_count }, Point::StarTree { branch, .. }) => {
                branch < branch_count
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "point {p:?} does not belong to space {self:?}"
            )))
        }
    }

    /// Canonical base point: the origin, the hyperboloid apex, or the tree root.
    pub fn origin(&self) -> Point {
        match *self {
            SpaceModel::Euclidean { dim } => Point::Euclidean(vec![0.0; dim]),
            SpaceModel::Hyperboloid { dim } => Point::hyperboloid_from_spatial(&vec![0.0; dim]),
            SpaceModel::StarTree { .. } => Point::tree_origin(),
        }
    }

    pub fn dist(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        dist(a, b)
    }

    pub fn combine(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        self.check_point(x)?;
        self.check_point(y)?;
        combine(x, y, t)
    }

    pub fn multi_combine(&self, points: &[Point], weights: &Weights) -> Result<Point> {
        for p in points {
            self.check_point(p)?;
        }
        multi_combine(points, weights)
    }

    pub fn quasi_inner(&self, a: &Point, b: &Point, c: &Point, d: &Point) -> Result<f64> {
        for p in [a, b, c, d] {
            self.check_point(p)?;
        }
        quasi_inner(a, b, c, d)
    }

    pub fn cat0_defect(&self, x: &Point, y: &Point, z: &Point, t: f64) -> Result<f64> {
        for p in [x, y, z] {
            self.check_point(p)?;
        }
        cat0_defect(x, y, z, t)
    }

    /// Random point for property checks: Euclidean/spatial coordinates
    /// uniform in `[-scale, scale]`, tree radius uniform in `[0, scale]`
    /// (the origin with probability 1/20).
    pub fn random_point(&self, rng: &mut Stream, scale: f64) -> Point {
        match *self {
            SpaceModel::Euclidean { dim } => {
                Point::Euclidean((0..dim).map(|_| rng.uniform(-scale, scale)).collect())
            }
            SpaceModel::Hyperboloid { dim } => {
                let spatial: Vec<f64> = (0..dim).map(|_| rng.uniform(-scale, scale)).collect();
                Point::hyperboloid_from_spatial(&spatial)
            }
            SpaceModel::StarTree { branch_count } => {
                let branch = rng.next_index(branch_count);
                if rng.next_index(20) == 0 {
                    Point::tree_origin()
                } else {
                    Point::tree(branch, rng.uniform(0.0, scale))
                }
            }
        }
    }
}
