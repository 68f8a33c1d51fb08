//! Domain types shared by every module: objects, queries, results and the
//! dataset container.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scoring::Mbr;

pub type ObjectId = u64;

/// Tolerance on the unit sum of a posterior vector.
pub const SEMANTIC_SUM_TOLERANCE: f64 = 1e-9;

/// Planar location. Coordinates are treated as Euclidean, not geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Modality {
    Text,
    Image,
}

impl Modality {
    pub fn tag(self) -> char {
        match self {
            Modality::Text => 'T',
            Modality::Image => 'I',
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Text => f.write_str("text"),
            Modality::Image => f.write_str("image"),
        }
    }
}

/// Raw feature vector of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub modality: Modality,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(modality: Modality, values: Vec<f64>) -> Self {
        Self { modality, values }
    }

    pub fn text(values: Vec<f64>) -> Self {
        Self::new(Modality::Text, values)
    }

    pub fn image(values: Vec<f64>) -> Self {
        Self::new(Modality::Image, values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Posterior distribution over the shared class set.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector(Vec<f64>);

impl SemanticVector {
    /// Checks that `probabilities` is a distribution: entries in `[0, 1]`
    /// summing to one within [`SEMANTIC_SUM_TOLERANCE`].
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if let Some(reason) = semantic_violation(&probabilities) {
            return Err(Error::InvalidArgument(reason));
        }
        Ok(Self(probabilities))
    }

    /// Wraps softmax output without re-checking it.
    pub(crate) fn from_softmax(probabilities: Vec<f64>) -> Self {
        Self(probabilities)
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

fn semantic_violation(p: &[f64]) -> Option<String> {
    if p.is_empty() {
        return Some("semantic vector is empty".into());
    }
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Some(format!("semantic entry {v} outside [0, 1]"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SEMANTIC_SUM_TOLERANCE {
        return Some(format!("semantic entries sum to {sum}, not 1"));
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoMultimediaObject {
    pub id: ObjectId,
    pub location: GeoPoint,
    pub feature: FeatureVector,
    pub semantic: Option<SemanticVector>,
    pub label: Option<usize>,
}

impl GeoMultimediaObject {
    pub fn new(id: ObjectId, location: GeoPoint, feature: FeatureVector) -> Self {
        Self {
            id,
            location,
            feature,
            semantic: None,
            label: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_semantic(mut self, semantic: SemanticVector) -> Self {
        self.semantic = Some(semantic);
        self
    }
}

/// A kNN text-to-image query.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub location: GeoPoint,
    pub text_feature: FeatureVector,
    pub k: usize,
    pub mu: f64,
}

impl Query {
    /// Weight used by the search algorithm when none is given.
    pub const DEFAULT_MU: f64 = 0.5;

    pub fn new(location: GeoPoint, text_feature: FeatureVector, k: usize, mu: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidArgument(format!("mu = {mu} outside [0, 1]")));
        }
        if text_feature.modality != Modality::Text {
            return Err(Error::InvalidArgument(
                "query feature must be a text feature".into(),
            ));
        }
        if !location.is_finite() {
            return Err(Error::InvalidArgument(
                "query location is not finite".into(),
            ));
        }
        Ok(Self {
            location,
            text_feature,
            k,
            mu,
        })
    }
}

/// One ranked answer. `score = mu * distance_proximity + (1 - mu) * similarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredResult {
    pub object_id: ObjectId,
    pub distance: f64,
    pub distance_proximity: f64,
    pub similarity: f64,
    pub score: f64,
}

impl ScoredResult {
    /// Total ranking order: score descending, then distance ascending, then id ascending.
    pub fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.distance.total_cmp(&other.distance))
            .then(self.object_id.cmp(&other.object_id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    DuplicateId,
    NonFiniteCoordinate,
    DimensionMismatch { expected: usize, actual: usize },
    NonFiniteFeature,
    InvalidSemantic(String),
    SemanticLengthMismatch { expected: usize, actual: usize },
    LabelOutOfRange { label: usize, class_count: usize },
    BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub object_id: ObjectId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "object {}: ", self.object_id)?;
        match &self.kind {
            ViolationKind::DuplicateId => write!(f, "duplicate id"),
            ViolationKind::NonFiniteCoordinate => write!(f, "non-finite coordinate"),
            ViolationKind::DimensionMismatch { expected, actual } => {
                write!(f, "feature has {actual} values, expected {expected}")
            }
            ViolationKind::NonFiniteFeature => write!(f, "non-finite feature value"),
            ViolationKind::InvalidSemantic(reason) => write!(f, "{reason}"),
            ViolationKind::SemanticLengthMismatch { expected, actual } => {
                write!(
                    f,
                    "semantic vector has {actual} classes, expected {expected}"
                )
            }
            ViolationKind::LabelOutOfRange { label, class_count } => {
                write!(f, "label {label} out of range for {class_count} classes")
            }
            ViolationKind::BoundingBox => write!(f, "location outside the bounding box"),
        }
    }
}

/// A set of objects with declared feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub objects: Vec<GeoMultimediaObject>,
    pub bounding_box: Option<Mbr>,
    pub text_dim: usize,
    pub image_dim: usize,
    pub class_count: Option<usize>,
}

impl Dataset {
    /// Builds a dataset and computes its bounding box from the object locations.
    pub fn new(
        objects: Vec<GeoMultimediaObject>,
        text_dim: usize,
        image_dim: usize,
        class_count: Option<usize>,
    ) -> Self {
        let bounding_box = Mbr::enclosing(objects.iter().map(|o| o.location));
        Self {
            objects,
            bounding_box,
            text_dim,
            image_dim,
            class_count,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn declared_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Text => self.text_dim,
            Modality::Image => self.image_dim,
        }
    }

    /// Every invariant violation, in object order. Empty iff the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate_dataset(self)
    }
}

pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::with_capacity(ds.objects.len());
    let semantic_len = ds.class_count.or_else(|| {
        ds.objects
            .iter()
            .find_map(|o| o.semantic.as_ref().map(SemanticVector::len))
    });

    for obj in &ds.objects {
        let mut push = |kind| {
            out.push(Violation {
                object_id: obj.id,
                kind,
            })
        };
        if !seen.insert(obj.id) {
            push(ViolationKind::DuplicateId);
        }
        if !obj.location.is_finite() {
            push(ViolationKind::NonFiniteCoordinate);
        } else if let Some(bb) = &ds.bounding_box {
            if !bb.contains_point(obj.location) {
                push(ViolationKind::BoundingBox);
            }
        }
        let expected = ds.declared_dim(obj.feature.modality);
        if obj.feature.dim() != expected {
            push(ViolationKind::DimensionMismatch {
                expected,
                actual: obj.feature.dim(),
            });
        }
        if !obj.feature.is_finite() {
            push(ViolationKind::NonFiniteFeature);
        }
        if let Some(sem) = &obj.semantic {
            if let Some(reason) = semantic_violation(sem.as_slice()) {
                push(ViolationKind::InvalidSemantic(reason));
            }
            if let Some(len) = semantic_len {
                if sem.len() != len {
                    push(ViolationKind::SemanticLengthMismatch {
                        expected: len,
                        actual: sem.len(),
                    });
                }
            }
        }
        if let (Some(label), Some(class_count)) = (obj.label, ds.class_count) {
            if label >= class_count {
                push(ViolationKind::LabelOutOfRange { label, class_count });
            }
        }
    }
    out
}
