//! Geo-multimedia cross-modal kNN search.
//!
//! Text and image feature vectors are mapped into a shared space of class
//! posteriors (canonical-correlation projection followed by multinomial
//! logistic regression). Image objects carrying a location are indexed in a
//! GMR-Tree, an R-Tree whose entries also carry superimposed bit signatures
//! of the semantic vectors below them. Text queries with a location are
//! answered by best-first traversal and ranked by
//! `mu * proximity + (1 - mu) * cosine`.
//!
//! Data-parallel loops (linear scans, query batches) use rayon when the
//! `parallel` feature is enabled and fall back to sequential iteration
//! otherwise; see [`Parallelism`].

pub mod bench;
pub mod cosmat;
pub mod error;
pub mod featurize;
pub mod format;
pub mod gmrtree;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod scoring;
pub mod search;
pub mod signature;
pub mod synth;

pub use cosmat::{
    cosine_similarity, CorrProjModel, LogsTranModel, SemanticSpaceConfig, SemanticSpaceModel,
};
pub use error::{Error, Result};
pub use gmrtree::{GmrTree, TreeParams};
pub use model::{
    Dataset, FeatureVector, GeoMultimediaObject, GeoPoint, Modality, ObjectId, Query, ScoredResult,
    SemanticVector,
};
pub use parallel::Parallelism;
pub use scoring::{Mbr, ScoringContext};
pub use search::{SearchOptions, SearchOutcome, SearchStats};
pub use signature::{Signature, SignatureParams};
