//! Spatial proximity, the combined ranking score and the MBR-level bounds used
//! to drive best-first traversal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GeoPoint;

/// Axis-aligned minimum bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mbr {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl Mbr {
    pub fn new(min: GeoPoint, max: GeoPoint) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y) {
            return Err(Error::InvalidArgument(format!(
                "degenerate MBR ({}, {}) - ({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }

    pub fn point(p: GeoPoint) -> Self {
        Self { min: p, max: p }
    }

    /// Smallest box around `points`; `None` when there are none.
    pub fn enclosing(points: impl IntoIterator<Item = GeoPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = Self::point(it.next()?);
        Some(it.fold(first, |acc, p| acc.union(&Self::point(p))))
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: GeoPoint::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: GeoPoint::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn enlargement(&self, other: &Self) -> f64 {
        self.union(other).area() - self.area()
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains_point(&self, p: GeoPoint) -> bool {
        self.min.x <= p.x && p.x <= self.max.x && self.min.y <= p.y && p.y <= self.max.y
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.contains_point(other.min) && self.contains_point(other.max)
    }

    pub fn corners(&self) -> [GeoPoint; 4] {
        [
            self.min,
            GeoPoint::new(self.min.x, self.max.y),
            GeoPoint::new(self.max.x, self.min.y),
            self.max,
        ]
    }
}

/// Per-query normalisation state: the maximum distance and the proximity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringContext {
    delta_max: f64,
    mu: f64,
}

impl ScoringContext {
    /// A zero `delta_max` (every object co-located with the query) is lifted
    /// to the smallest positive float so that proximity stays 1 instead of NaN.
    pub fn new(delta_max: f64, mu: f64) -> Result<Self> {
        if !(delta_max >= 0.0 && delta_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta_max = {delta_max} must be finite and nonnegative"
            )));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidArgument(format!("mu = {mu} outside [0, 1]")));
        }
        Ok(Self {
            delta_max: delta_max.max(f64::MIN_POSITIVE),
            mu,
        })
    }

    /// Context normalised by the farthest corner of `root`.
    pub fn for_root(q: GeoPoint, root: &Mbr, mu: f64) -> Result<Self> {
        Self::new(delta_max_upper_bound(q, root), mu)
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// How the per-query maximum distance is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DeltaMaxMode {
    /// Farthest corner of the dataset bounding box (what the index uses).
    #[default]
    CornerBound,
    /// Largest distance to any object, found by a full scan.
    ExactScan,
}

pub fn euclidean(a: GeoPoint, b: GeoPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `q` to the farthest corner of `root`; dominates the distance
/// to every point inside it.
pub fn delta_max_upper_bound(q: GeoPoint, root: &Mbr) -> f64 {
    root.corners()
        .into_iter()
        .map(|c| euclidean(q, c))
        .fold(0.0, f64::max)
}

/// Largest distance from `q` to any of `points`.
pub fn delta_max_exact(q: GeoPoint, points: impl IntoIterator<Item = GeoPoint>) -> f64 {
    points
        .into_iter()
        .map(|p| euclidean(q, p))
        .fold(0.0, f64::max)
}

/// `1 - delta / delta_max`: 1 when co-located, 0 at the maximum distance.
pub fn distance_proximity(delta: f64, ctx: &ScoringContext) -> Result<f64> {
    if delta > ctx.delta_max || delta < 0.0 || delta.is_nan() {
        return Err(Error::DistanceOutOfContext {
            delta,
            delta_max: ctx.delta_max,
        });
    }
    Ok(proximity_unchecked(delta, ctx))
}

#[inline]
pub(crate) fn proximity_unchecked(delta: f64, ctx: &ScoringContext) -> f64 {
    1.0 - delta / ctx.delta_max
}

#[inline]
pub fn combined_score(dst: f64, sim: f64, mu: f64) -> f64 {
    mu * dst + (1.0 - mu) * sim
}

/// Smallest distance from `q` to any point of `b` (0 inside).
pub fn min_dist_to_mbr(q: GeoPoint, b: &Mbr) -> f64 {
    let dx = (b.min.x - q.x).max(0.0).max(q.x - b.max.x);
    let dy = (b.min.y - q.y).max(0.0).max(q.y - b.max.y);
    (dx * dx + dy * dy).sqrt()
}

/// Score no object inside `b` can exceed, using similarity at most 1.
pub fn score_upper_bound_for_node(q: GeoPoint, b: &Mbr, ctx: &ScoringContext) -> f64 {
    let d = min_dist_to_mbr(q, b).min(ctx.delta_max);
    combined_score(proximity_unchecked(d, ctx), 1.0, ctx.mu)
}
