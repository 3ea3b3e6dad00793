//! Multivalued maps with finite values, the Hausdorff distance between
//! such values, nearest-point selection, and the projected multimap
//! `P*_K T(x) = {P_K(x') : x' in Tx}`.

use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::error::{Error, Result};
use crate::geometry::{self, combine_unchecked, dist_unchecked, Point};
use crate::rng::Stream;

/// Points closer than this collapse to one member of a [`FinitePointSet`].
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Nonempty finite set of points from one model: the surrogate for a
/// compact value `Tx`. Order of first occurrence is kept; near-duplicates
/// are dropped on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct FinitePointSet(Vec<Point>);

impl FinitePointSet {
    pub fn new(points: Vec<Point>) -> Result<FinitePointSet> {
        if points.is_empty() {
            return Err(Error::domain("finite point set must be nonempty"));
        }
        let mut kept: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            p.check()?;
            if let Some(first) = kept.first() {
                geometry::dist(first, &p)?;
            }
            if kept.iter().all(|q| dist_unchecked(q, &p) >= DUPLICATE_TOL) {
                kept.push(p);
            }
        }
        Ok(FinitePointSet(kept))
    }

    pub fn singleton(p: Point) -> FinitePointSet {
        FinitePointSet(vec![p])
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.0
    }
}

impl TryFrom<Vec<Point>> for FinitePointSet {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        FinitePointSet::new(v)
    }
}

impl From<FinitePointSet> for Vec<Point> {
    fn from(s: FinitePointSet) -> Self {
        s.0
    }
}

/// Single-valued nonexpansive building blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDescriptor {
    Identity,
    Constant {
        point: Point,
    },
    /// Metric projection onto a convex set.
    Project {
        set: ConvexSet,
    },
    /// `x -> combine(anchor, x, factor)`; Lipschitz with constant `factor`.
    Contraction {
        anchor: Point,
        factor: f64,
    },
    /// Applies `maps` left to right.
    Compose {
        maps: Vec<MapDescriptor>,
    },
}

impl MapDescriptor {
    pub fn contraction(anchor: Point, factor: f64) -> MapDescriptor {
        MapDescriptor::Contraction { anchor, factor }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MapDescriptor::Identity => Ok(()),
            MapDescriptor::Constant { point } => point.check(),
            MapDescriptor::Project { set } => set.validate(),
            MapDescriptor::Contraction { anchor, factor } => {
                anchor.check()?;
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::domain(format!(
                        "contraction factor {factor} outside (0, 1]"
                    )));
                }
                Ok(())
            }
            MapDescriptor::Compose { maps } => maps.iter().try_for_each(MapDescriptor::validate),
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        match self {
            MapDescriptor::Identity => Ok(x.clone()),
            MapDescriptor::Constant { point } => {
                geometry::dist(point, x)?;
                Ok(point.clone())
            }
            MapDescriptor::Project { set } => set.project(x),
            MapDescriptor::Contraction { anchor, factor } => geometry::combine(anchor, x, *factor),
            MapDescriptor::Compose { maps } => {
                let mut cur = x.clone();
                for m in maps {
                    cur = m.apply(&cur)?;
                }
                Ok(cur)
            }
        }
    }

    /// Upper bound on the Lipschitz constant.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            MapDescriptor::Identity | MapDescriptor::Project { .. } => 1.0,
            MapDescriptor::Constant { .. } => 0.0,
            MapDescriptor::Contraction { factor, .. } => *factor,
            MapDescriptor::Compose { maps } => {
                maps.iter().map(MapDescriptor::lipschitz_bound).product()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MultiMap {
    /// `Tx = {f_1(x), ..., f_m(x)}`.
    UnionOfMaps { maps: Vec<MapDescriptor> },
    /// `Tx = points` for every `x`.
    ConstantSet { points: FinitePointSet },
    /// `samples + 1` equally spaced points of `[first(x), second(x)]`.
    /// Hausdorff error against the full segment is at most `length / (2 samples)`.
    SegmentValued {
        first: MapDescriptor,
        second: MapDescriptor,
        samples: usize,
    },
    /// `P*_K T`: every value of `inner` projected onto `set`.
    Projected {
        set: ConvexSet,
        inner: Box<MultiMap>,
    },
}

impl MultiMap {
    pub fn union(maps: Vec<MapDescriptor>) -> MultiMap {
        MultiMap::UnionOfMaps { maps }
    }

    pub fn constant(points: Vec<Point>) -> Result<MultiMap> {
        Ok(MultiMap::ConstantSet {
            points: FinitePointSet::new(points)?,
        })
    }

    pub fn segment(first: MapDescriptor, second: MapDescriptor, samples: usize) -> MultiMap {
        MultiMap::SegmentValued {
            first,
            second,
            samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MultiMap::UnionOfMaps { maps } => {
                if maps.is_empty() {
                    return Err(Error::domain("union of maps needs at least one map"));
                }
                maps.iter().try_for_each(MapDescriptor::validate)
            }
            MultiMap::ConstantSet { .. } => Ok(()),
            MultiMap::SegmentValued {
                first,
                second,
                samples,
            } => {
                if *samples == 0 {
                    return Err(Error::domain("segment-valued map needs samples >= 1"));
                }
                first.validate()?;
                second.validate()
            }
            MultiMap::Projected { set, inner } => {
                set.validate()?;
                inner.validate()
            }
        }
    }

    pub fn evaluate(&self, x: &Point) -> Result<FinitePointSet> {
        match self {
            MultiMap::UnionOfMaps { maps } => {
                FinitePointSet::new(maps.iter().map(|m| m.apply(x)).collect::<Result<_>>()?)
            }
            MultiMap::ConstantSet { points } => {
                geometry::dist(&points.points()[0], x)?;
                Ok(points.clone())
            }
            MultiMap::SegmentValued {
                first,
                second,
                samples,
            } => {
                let a = first.apply(x)?;
                let b = second.apply(x)?;
                geometry::dist(&a, &b)?;
                let m = *samples;
                FinitePointSet::new(
                    (0..=m)
                        .map(|i| combine_unchecked(&a, &b, i as f64 / m as f64))
                        .collect(),
                )
            }
            MultiMap::Projected { set, inner } => FinitePointSet::new(
                inner
                    .evaluate(x)?
                    .points()
                    .iter()
                    .map(|p| set.project(p))
                    .collect::<Result<_>>()?,
            ),
        }
    }

    /// Hausdorff error of the finite surrogate against the exact value at `x`.
    pub fn discretization_error(&self, x: &Point) -> Result<f64> {
        match self {
            MultiMap::SegmentValued {
                first,
                second,
                samples,
            } => Ok(geometry::dist(&first.apply(x)?, &second.apply(x)?)? / (2.0 * *samples as f64)),
            MultiMap::Projected { inner, .. } => inner.discretization_error(x),
            _ => Ok(0.0),
        }
    }
}

/// `d(x, A) = min_{a in A} d(x, a)`.
pub fn dist_point_set(x: &Point, set: &FinitePointSet) -> Result<f64> {
    Ok(nearest_index(x, set)?.1)
}

/// Index and distance of the member of `set` nearest to `x`; the lowest
/// index wins ties.
pub fn nearest_index(x: &Point, set: &FinitePointSet) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (i, p) in set.points().iter().enumerate() {
        let d = geometry::dist(x, p)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

fn directed(a: &FinitePointSet, b: &FinitePointSet) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in a.points() {
        worst = worst.max(dist_point_set(p, b)?);
    }
    Ok(worst)
}

/// Hausdorff distance `max{sup_a d(a, B), sup_b d(b, A)}`.
pub fn hausdorff(a: &FinitePointSet, b: &FinitePointSet) -> Result<f64> {
    Ok(directed(a, b)?.max(directed(b, a)?))
}

/// The member of `Tx` nearest to `x` (lowest index on ties).
pub fn nearest_selection(map: &MultiMap, x: &Point) -> Result<Point> {
    let value = map.evaluate(x)?;
    let (i, _) = nearest_index(x, &value)?;
    Ok(value.into_points().swap_remove(i))
}

/// `P*_K T`. Constant values are projected eagerly and unions of maps are
/// rewritten member-wise, so the result stays in the simplest variant.
pub fn projected_multimap(set: &ConvexSet, map: &MultiMap) -> Result<MultiMap> {
    Ok(match map {
        MultiMap::ConstantSet { points } => MultiMap::ConstantSet {
            points: FinitePointSet::new(
                points
                    .points()
                    .iter()
                    .map(|p| set.project(p))
                    .collect::<Result<_>>()?,
            )?,
        },
        MultiMap::UnionOfMaps { maps } => MultiMap::UnionOfMaps {
            maps: maps
                .iter()
                .map(|m| MapDescriptor::Compose {
                    maps: vec![m.clone(), MapDescriptor::Project { set: set.clone() }],
                })
                .collect(),
        },
        other => MultiMap::Projected {
            set: set.clone(),
            inner: Box::new(other.clone()),
        },
    })
}

/// Pairs of distinct points of `K` for Lipschitz probing. Half of the pairs
/// are pulled together along their geodesic to probe short scales.
pub fn sample_pairs(set: &ConvexSet, trials: usize, seed: u64) -> Result<Vec<(Point, Point)>> {
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let samples = set.sample((2 * trials).max(16), seed)?;
    let pts = samples.points.points();
    let mut rng = Stream::new(seed ^ 0x05ee_d0f9_a1e5);
    let mut pairs = Vec::with_capacity(trials);
    let mut attempts = 0;
    while pairs.len() < trials && attempts < 50 * trials {
        attempts += 1;
        let x = &pts[rng.next_index(pts.len())];
        let mut y = pts[rng.next_index(pts.len())].clone();
        if rng.next_bool() {
            y = combine_unchecked(x, &y, rng.uniform(1e-3, 1.0));
        }
        if dist_unchecked(x, &y) > 1e-9 {
            pairs.push((x.clone(), y));
        }
    }
    Ok(pairs)
}

/// `max H(Tx, Ty) / d(x, y)` over the given pairs.
pub fn ratio_on_pairs(map: &MultiMap, pairs: &[(Point, Point)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in pairs {
        let h = hausdorff(&map.evaluate(x)?, &map.evaluate(y)?)?;
        worst = worst.max(h / geometry::dist(x, y)?);
    }
    Ok(worst)
}

/// Empirical nonexpansiveness certificate: the largest observed
/// `H(Tx, Ty) / d(x, y)` over `trials` sampled pairs in `K`.
pub fn nonexpansiveness_ratio(
    map: &MultiMap,
    set: &ConvexSet,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    ratio_on_pairs(map, &sample_pairs(set, trials, seed)?)
}
