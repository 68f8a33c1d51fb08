//! Query execution over a [`GmrTree`].
//!
//! * [`NearestNeighbor`] emits signature-matching objects in nondecreasing
//!   distance from the query, pruning subtrees whose signature lacks a query
//!   bit.
//! * [`kgmcms`] takes the first `k` emissions and ranks them by combined score.
//! * [`exact_top_k`] is a best-first traversal on a score upper bound and
//!   returns the true top `k` by combined score.
//! * [`brute_force`] is the linear-scan oracle for both.
//!
//! All rankings use [`ScoredResult::rank_cmp`]: score descending, distance
//! ascending, id ascending.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cosmat::{cosine, SemanticSpaceModel};
use crate::error::{Error, Result};
use crate::gmrtree::{Child, GmrTree, NodeId, Slot};
use crate::model::{GeoMultimediaObject, GeoPoint, ObjectId, Query, ScoredResult, SemanticVector};
use crate::parallel::Parallelism;
use crate::scoring::{
    combined_score, delta_max_exact, delta_max_upper_bound, euclidean, min_dist_to_mbr,
    proximity_unchecked, score_upper_bound_for_node, DeltaMaxMode, Mbr, ScoringContext,
};
use crate::signature::{Signature, SignatureParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Skip subtrees whose signature misses a query bit. When off, every
    /// emitted object is filtered by its own signature instead.
    pub signature_pruning: bool,
    pub delta_max: DeltaMaxMode,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            signature_pruning: true,
            delta_max: DeltaMaxMode::CornerBound,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes_visited: u64,
    pub objects_scored: u64,
    pub signature_pruned_subtrees: u64,
    pub elapsed: Duration,
    /// Fewer than `k` objects qualified.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub results: Vec<ScoredResult>,
    pub stats: SearchStats,
}

impl SearchOutcome {
    pub fn ids(&self) -> Vec<ObjectId> {
        self.results.iter().map(|r| r.object_id).collect()
    }
}

/// A query whose text has already been embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub location: GeoPoint,
    pub semantic: SemanticVector,
    pub k: usize,
    pub mu: f64,
}

impl PreparedQuery {
    pub fn new(location: GeoPoint, semantic: SemanticVector, k: usize, mu: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidArgument(format!("mu = {mu} outside [0, 1]")));
        }
        if !location.is_finite() {
            return Err(Error::InvalidArgument(
                "query location is not finite".into(),
            ));
        }
        Ok(Self {
            location,
            semantic,
            k,
            mu,
        })
    }

    /// Embeds the query text with `space`.
    pub fn embed(space: &SemanticSpaceModel, q: &Query) -> Result<Self> {
        let semantic = space.embed_text(&q.text_feature)?;
        Self::new(q.location, semantic, q.k, q.mu)
    }
}

/// Scores one object. Every search path goes through here, so equal inputs
/// give bit-identical scores.
fn score(
    q: &PreparedQuery,
    ctx: &ScoringContext,
    id: ObjectId,
    loc: GeoPoint,
    sem: &SemanticVector,
) -> ScoredResult {
    let distance = euclidean(q.location, loc);
    let distance_proximity = proximity_unchecked(distance, ctx);
    let similarity = cosine(q.semantic.as_slice(), sem.as_slice())
        .expect("semantic vectors are nonzero with checked lengths");
    ScoredResult {
        object_id: id,
        distance,
        distance_proximity,
        similarity,
        score: combined_score(distance_proximity, similarity, q.mu),
    }
}

fn sem(o: &GeoMultimediaObject) -> &SemanticVector {
    o.semantic.as_ref().expect("checked by the caller")
}

fn check_classes(expected: usize, q: &PreparedQuery) -> Result<()> {
    if q.semantic.len() != expected {
        return Err(Error::dim(
            expected,
            q.semantic.len(),
            "query semantic vector",
        ));
    }
    Ok(())
}

fn tree_context(
    tree: &GmrTree,
    q: &PreparedQuery,
    mode: DeltaMaxMode,
) -> Result<Option<ScoringContext>> {
    let Some(root) = tree.root_mbr() else {
        return Ok(None);
    };
    let delta_max = match mode {
        DeltaMaxMode::CornerBound => delta_max_upper_bound(q.location, &root),
        DeltaMaxMode::ExactScan => {
            delta_max_exact(q.location, tree.objects().map(|o| o.location()))
        }
    };
    ScoringContext::new(delta_max, q.mu).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Payload {
    Node(NodeId),
    Object(Slot),
}

impl Payload {
    /// Nodes sort before objects at equal keys.
    fn kind(self) -> u8 {
        match self {
            Payload::Node(_) => 0,
            Payload::Object(_) => 1,
        }
    }
}

/// Min-queue item keyed by spatial distance, then kind, then id.
#[derive(Debug, Clone, Copy)]
struct DistItem {
    key: f64,
    payload: Payload,
    tie: u64,
}

impl Ord for DistItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap pops the greatest
        other
            .key
            .total_cmp(&self.key)
            .then(other.payload.kind().cmp(&self.payload.kind()))
            .then(other.tie.cmp(&self.tie))
    }
}

impl PartialOrd for DistItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for DistItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for DistItem {}

/// Incremental nearest-neighbour cursor. Yields `(slot, distance)` for objects
/// whose signature contains every bit of the query signature, in
/// nondecreasing distance; equal distances come out by ascending id.
pub struct NearestNeighbor<'t> {
    tree: &'t GmrTree,
    q: GeoPoint,
    sig: Option<Signature>,
    prune: bool,
    heap: BinaryHeap<DistItem>,
    stats: SearchStats,
}

impl<'t> NearestNeighbor<'t> {
    /// Cursor over objects matching `sig`, pruning subtrees by signature.
    /// `None` matches everything.
    pub fn new(tree: &'t GmrTree, q: GeoPoint, sig: Option<Signature>) -> Result<Self> {
        Self::with_pruning(tree, q, sig, true)
    }

    /// With `prune == false` subtrees are never skipped and objects are
    /// filtered by signature only when emitted.
    pub fn with_pruning(
        tree: &'t GmrTree,
        q: GeoPoint,
        sig: Option<Signature>,
        prune: bool,
    ) -> Result<Self> {
        if let Some(s) = &sig {
            if s.len() != tree.signature_params().bits {
                return Err(Error::dim(
                    tree.signature_params().bits,
                    s.len(),
                    "query signature",
                ));
            }
        }
        let mut heap = BinaryHeap::new();
        heap.push(DistItem {
            key: 0.0,
            payload: Payload::Node(tree.root_id()),
            tie: tree.root_id() as u64,
        });
        Ok(Self {
            tree,
            q,
            sig,
            prune,
            heap,
            stats: SearchStats::default(),
        })
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    fn matches(&self, s: &Signature) -> bool {
        self.sig.as_ref().is_none_or(|q| q.is_subset_of(s))
    }
}

impl Iterator for NearestNeighbor<'_> {
    type Item = (Slot, f64);

    fn next(&mut self) -> Option<(Slot, f64)> {
        while let Some(item) = self.heap.pop() {
            match item.payload {
                Payload::Object(slot) => {
                    if !self.prune && !self.matches(&self.tree.stored(slot).signature) {
                        continue;
                    }
                    return Some((slot, item.key));
                }
                Payload::Node(id) => {
                    self.stats.nodes_visited += 1;
                    for e in &self.tree.node(id).entries {
                        let is_node = matches!(e.child, Child::Node(_));
                        if self.prune && !self.matches(&e.sig) {
                            if is_node {
                                self.stats.signature_pruned_subtrees += 1;
                            }
                            continue;
                        }
                        let (payload, tie, key) = match e.child {
                            Child::Node(c) => {
                                (Payload::Node(c), c as u64, min_dist_to_mbr(self.q, &e.mbr))
                            }
                            Child::Object(s) => {
                                let o = self.tree.stored(s);
                                (Payload::Object(s), o.id(), euclidean(self.q, o.location()))
                            }
                        };
                        self.heap.push(DistItem { key, payload, tie });
                    }
                }
            }
        }
        None
    }
}

/// First `k` signature-matching objects in distance order, ranked by score.
pub fn kgmcms(
    tree: &GmrTree,
    space: &SemanticSpaceModel,
    q: &Query,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    let pq = PreparedQuery::embed(space, q)?;
    kgmcms_prepared(tree, &pq, opts)
}

pub fn kgmcms_prepared(
    tree: &GmrTree,
    q: &PreparedQuery,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    let start = Instant::now();
    check_classes(tree.class_count(), q)?;
    let Some(ctx) = tree_context(tree, q, opts.delta_max)? else {
        return Ok(empty_outcome(start));
    };
    let sig = tree.object_signature(&q.semantic);
    let mut nn =
        NearestNeighbor::with_pruning(tree, q.location, Some(sig), opts.signature_pruning)?;
    let mut results = Vec::with_capacity(q.k);
    for (slot, _) in nn.by_ref().take(q.k) {
        let o = tree.stored(slot);
        results.push(score(q, &ctx, o.id(), o.location(), o.semantic()));
    }
    results.sort_by(ScoredResult::rank_cmp);
    let mut stats = nn.stats();
    stats.objects_scored = results.len() as u64;
    stats.truncated = results.len() < q.k;
    stats.elapsed = start.elapsed();
    Ok(SearchOutcome { results, stats })
}

fn empty_outcome(start: Instant) -> SearchOutcome {
    SearchOutcome {
        results: Vec::new(),
        stats: SearchStats {
            truncated: true,
            elapsed: start.elapsed(),
            ..SearchStats::default()
        },
    }
}

/// Max-queue item: key descending, nodes first, then distance and id ascending.
#[derive(Debug, Clone, Copy)]
struct ScoreItem {
    key: f64,
    payload: Payload,
    distance: f64,
    tie: u64,
}

impl Ord for ScoreItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(other.payload.kind().cmp(&self.payload.kind()))
            .then(other.distance.total_cmp(&self.distance))
            .then(other.tie.cmp(&self.tie))
    }
}

impl PartialOrd for ScoreItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ScoreItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScoreItem {}

/// Best-first cursor that yields every indexed object in exact rank order.
/// Node keys bound the score of anything below them, so an object is only
/// emitted once nothing left in the queue can outrank it.
pub struct BestFirst<'t, 'q> {
    tree: &'t GmrTree,
    q: &'q PreparedQuery,
    ctx: ScoringContext,
    heap: BinaryHeap<ScoreItem>,
    stats: SearchStats,
}

impl<'t, 'q> BestFirst<'t, 'q> {
    pub fn new(
        tree: &'t GmrTree,
        q: &'q PreparedQuery,
        mode: DeltaMaxMode,
    ) -> Result<Option<Self>> {
        check_classes(tree.class_count(), q)?;
        let Some(ctx) = tree_context(tree, q, mode)? else {
            return Ok(None);
        };
        let mut heap = BinaryHeap::new();
        heap.push(ScoreItem {
            key: f64::INFINITY,
            payload: Payload::Node(tree.root_id()),
            distance: 0.0,
            tie: tree.root_id() as u64,
        });
        Ok(Some(Self {
            tree,
            q,
            ctx,
            heap,
            stats: SearchStats::default(),
        }))
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    /// The scoring context in use.
    pub fn context(&self) -> ScoringContext {
        self.ctx
    }

    fn expand(&mut self, id: NodeId) {
        self.stats.nodes_visited += 1;
        for e in &self.tree.node(id).entries {
            let item = match e.child {
                Child::Node(c) => ScoreItem {
                    key: score_upper_bound_for_node(self.q.location, &e.mbr, &self.ctx),
                    payload: Payload::Node(c),
                    distance: min_dist_to_mbr(self.q.location, &e.mbr),
                    tie: c as u64,
                },
                Child::Object(s) => {
                    let o = self.tree.stored(s);
                    let r = score(self.q, &self.ctx, o.id(), o.location(), o.semantic());
                    self.stats.objects_scored += 1;
                    ScoreItem {
                        key: r.score,
                        payload: Payload::Object(s),
                        distance: r.distance,
                        tie: r.object_id,
                    }
                }
            };
            self.heap.push(item);
        }
    }
}

impl Iterator for BestFirst<'_, '_> {
    type Item = ScoredResult;

    fn next(&mut self) -> Option<ScoredResult> {
        while let Some(item) = self.heap.pop() {
            match item.payload {
                Payload::Node(id) => self.expand(id),
                Payload::Object(s) => {
                    let o = self.tree.stored(s);
                    return Some(score(self.q, &self.ctx, o.id(), o.location(), o.semantic()));
                }
            }
        }
        None
    }
}

/// The `k` objects with the highest combined score. No signature pruning.
pub fn exact_top_k(
    tree: &GmrTree,
    space: &SemanticSpaceModel,
    q: &Query,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    let pq = PreparedQuery::embed(space, q)?;
    exact_top_k_prepared(tree, &pq, opts)
}

pub fn exact_top_k_prepared(
    tree: &GmrTree,
    q: &PreparedQuery,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    let start = Instant::now();
    let Some(mut bf) = BestFirst::new(tree, q, opts.delta_max)? else {
        return Ok(empty_outcome(start));
    };
    let results: Vec<ScoredResult> = bf.by_ref().take(q.k).collect();
    let mut stats = bf.stats();
    stats.truncated = results.len() < q.k;
    stats.elapsed = start.elapsed();
    Ok(SearchOutcome { results, stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleMode {
    /// Signature-matching objects, `k` nearest, ranked by score.
    NearestMatching,
    /// Top `k` by score over every object.
    ExactScore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Signature parameters for [`OracleMode::NearestMatching`]; should equal the tree's.
    pub signature: SignatureParams,
    pub delta_max: DeltaMaxMode,
    pub parallelism: Parallelism,
}

impl OracleConfig {
    /// Mirrors `tree`'s signature parameters and the default delta-max mode.
    pub fn for_tree(tree: &GmrTree) -> Self {
        Self {
            signature: tree.signature_params(),
            delta_max: DeltaMaxMode::CornerBound,
            parallelism: Parallelism::Sequential,
        }
    }
}

/// Linear-scan oracle. Every object must carry a semantic vector.
pub fn brute_force(
    objects: &[GeoMultimediaObject],
    space: &SemanticSpaceModel,
    q: &Query,
    mode: OracleMode,
    cfg: &OracleConfig,
) -> Result<SearchOutcome> {
    let pq = PreparedQuery::embed(space, q)?;
    brute_force_prepared(objects, &pq, mode, cfg)
}

pub fn brute_force_prepared(
    objects: &[GeoMultimediaObject],
    q: &PreparedQuery,
    mode: OracleMode,
    cfg: &OracleConfig,
) -> Result<SearchOutcome> {
    let start = Instant::now();
    for o in objects {
        let s = o.semantic.as_ref().ok_or(Error::MissingSemantic(o.id))?;
        check_classes(s.len(), q)?;
    }
    let Some(bbox) = Mbr::enclosing(objects.iter().map(|o| o.location)) else {
        return Ok(empty_outcome(start));
    };
    let delta_max = match cfg.delta_max {
        DeltaMaxMode::CornerBound => delta_max_upper_bound(q.location, &bbox),
        DeltaMaxMode::ExactScan => delta_max_exact(q.location, objects.iter().map(|o| o.location)),
    };
    let ctx = ScoringContext::new(delta_max, q.mu)?;

    let mut stats = SearchStats::default();
    let results = match mode {
        OracleMode::ExactScore => {
            let mut all = cfg
                .parallelism
                .map(objects, |o| score(q, &ctx, o.id, o.location, sem(o)));
            stats.objects_scored = all.len() as u64;
            all.sort_by(ScoredResult::rank_cmp);
            all.truncate(q.k);
            all
        }
        OracleMode::NearestMatching => {
            let qsig = cfg.signature.sign(&q.semantic);
            let mut matching: Vec<(f64, ObjectId, &GeoMultimediaObject)> = objects
                .iter()
                .filter(|o| qsig.is_subset_of(&cfg.signature.sign(sem(o))))
                .map(|o| (euclidean(q.location, o.location), o.id, o))
                .collect();
            matching.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            matching.truncate(q.k);
            let mut top: Vec<ScoredResult> = matching
                .iter()
                .map(|(_, _, o)| score(q, &ctx, o.id, o.location, sem(o)))
                .collect();
            stats.objects_scored = top.len() as u64;
            top.sort_by(ScoredResult::rank_cmp);
            top
        }
    };
    stats.truncated = results.len() < q.k;
    stats.elapsed = start.elapsed();
    Ok(SearchOutcome { results, stats })
}

/// Runs `f` over every query with the given strategy, preserving order.
pub fn run_batch<Q, F>(queries: &[Q], parallelism: Parallelism, f: F) -> Result<Vec<SearchOutcome>>
where
    Q: Sync,
    F: Fn(&Q) -> Result<SearchOutcome> + Sync + Send,
{
    parallelism.try_map(queries, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrtree::TreeParams;
    use crate::model::FeatureVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(v: &[f64]) -> SemanticVector {
        SemanticVector::new(v.to_vec()).unwrap()
    }

    fn random_sv(rng: &mut impl Rng, classes: usize) -> SemanticVector {
        let mut p: Vec<f64> = (0..classes)
            .map(|_| rng.random_range(0.0..1.0f64).powi(3) + 1e-6)
            .collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        sv(&p)
    }

    fn random_objects(rng: &mut impl Rng, n: usize, classes: usize) -> Vec<GeoMultimediaObject> {
        (0..n)
            .map(|i| {
                GeoMultimediaObject::new(
                    i as u64,
                    GeoPoint::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)),
                    FeatureVector::image(vec![]),
                )
                .with_semantic(random_sv(rng, classes))
            })
            .collect()
    }

    fn params(bits: usize, tau: f64) -> TreeParams {
        TreeParams {
            min_fanout: 2,
            max_fanout: 6,
            signature: Some(SignatureParams::new(bits, tau).unwrap()),
        }
    }

    fn assert_same(a: &[ScoredResult], b: &[ScoredResult], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.object_id, y.object_id);
            assert!((x.score - y.score).abs() <= tol);
        }
    }

    #[test]
    fn single_object_then_exhausted() {
        let o = GeoMultimediaObject::new(9, GeoPoint::new(1.0, 1.0), FeatureVector::image(vec![]))
            .with_semantic(sv(&[0.5, 0.5]));
        let t = GmrTree::bulk_load_objects(vec![o], TreeParams::default()).unwrap();
        let mut nn =
            NearestNeighbor::new(&t, GeoPoint::new(0.0, 0.0), Some(Signature::zeros(64))).unwrap();
        let (slot, d) = nn.next().unwrap();
        assert_eq!(t.stored(slot).id(), 9);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(nn.next().is_none());
    }

    #[test]
    fn failing_root_signature_prunes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let objs: Vec<_> = random_objects(&mut rng, 100, 4)
            .into_iter()
            .map(|o| o.with_semantic(sv(&[0.97, 0.01, 0.01, 0.01])))
            .collect();
        let t = GmrTree::bulk_load_objects(objs, params(4, 0.5)).unwrap();
        let q = Signature::from_bits(&[false, true, false, false]);
        assert!(!q.is_subset_of(&t.root_signature()));
        let mut nn = NearestNeighbor::new(&t, GeoPoint::new(0.0, 0.0), Some(q)).unwrap();
        assert!(nn.next().is_none());
        assert_eq!(nn.stats().nodes_visited, 1);
    }

    #[test]
    fn zero_signature_emits_in_distance_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let objs = random_objects(&mut rng, 200, 5);
        let t = GmrTree::bulk_load_objects(objs.clone(), params(8, 0.3)).unwrap();
        let q = GeoPoint::new(20.0, 30.0);
        let got: Vec<ObjectId> = NearestNeighbor::new(&t, q, Some(Signature::zeros(8)))
            .unwrap()
            .map(|(s, _)| t.stored(s).id())
            .collect();
        let mut oracle: Vec<(f64, ObjectId)> = objs
            .iter()
            .map(|o| {
                (
                    ((o.location.x - q.x).powi(2) + (o.location.y - q.y).powi(2)).sqrt(),
                    o.id,
                )
            })
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(got, oracle.iter().map(|p| p.1).collect::<Vec<_>>());
    }

    #[test]
    fn kgmcms_single_colocated_object() {
        let o = GeoMultimediaObject::new(3, GeoPoint::new(4.0, 4.0), FeatureVector::image(vec![]))
            .with_semantic(sv(&[0.2, 0.1, 0.7]));
        let t = GmrTree::bulk_load_objects(vec![o], TreeParams::default()).unwrap();
        let q = PreparedQuery::new(GeoPoint::new(4.0, 4.0), sv(&[0.1, 0.2, 0.7]), 1, 0.3).unwrap();
        let out = kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap();
        let cos = (0.02 + 0.02 + 0.49) / (0.54f64.sqrt() * 0.54f64.sqrt());
        assert_eq!(out.ids(), vec![3]);
        assert!((out.results[0].score - (0.3 + 0.7 * cos)).abs() < 1e-12);
        assert!(!out.stats.truncated);
    }

    #[test]
    fn kgmcms_exhaustion_returns_all_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let objs = random_objects(&mut rng, 60, 4);
        let t = GmrTree::bulk_load_objects(objs.clone(), params(4, 0.4)).unwrap();
        let q = PreparedQuery::new(
            GeoPoint::new(10.0, 10.0),
            sv(&[0.1, 0.8, 0.05, 0.05]),
            1000,
            0.5,
        )
        .unwrap();
        let out = kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap();
        let qsig = t.object_signature(&q.semantic);
        let matching = t
            .objects()
            .filter(|o| qsig.is_subset_of(&o.signature))
            .count();
        assert!(matching > 0 && matching < 60);
        assert_eq!(out.results.len(), matching);
        assert!(out.stats.truncated);
        assert!(out.results.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_lt()));
    }

    #[test]
    fn kgmcms_matches_nearest_matching_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let objs = random_objects(&mut rng, 1000, 6);
        let t = GmrTree::bulk_load_objects(objs.clone(), params(16, 0.25)).unwrap();
        let cfg = OracleConfig::for_tree(&t);
        for _ in 0..20 {
            let q = PreparedQuery::new(
                GeoPoint::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)),
                random_sv(&mut rng, 6),
                10,
                0.5,
            )
            .unwrap();
            let got = kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap();
            let want = brute_force_prepared(&objs, &q, OracleMode::NearestMatching, &cfg).unwrap();
            assert_same(&got.results, &want.results, 0.0);
        }
    }

    #[test]
    fn pruning_never_changes_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let objs = random_objects(&mut rng, 500, 6);
        let t = GmrTree::bulk_load_objects(objs, params(6, 0.3)).unwrap();
        for _ in 0..30 {
            let q = PreparedQuery::new(
                GeoPoint::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)),
                random_sv(&mut rng, 6),
                rng.random_range(1..30),
                0.5,
            )
            .unwrap();
            let pruned = kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap();
            let post = kgmcms_prepared(
                &t,
                &q,
                SearchOptions {
                    signature_pruning: false,
                    ..SearchOptions::default()
                },
            )
            .unwrap();
            assert_eq!(pruned.results, post.results);
            assert!(pruned.stats.nodes_visited <= post.stats.nodes_visited);
            assert_eq!(post.stats.signature_pruned_subtrees, 0);
        }
    }

    #[test]
    fn exact_matches_oracle_and_degenerate_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let objs = random_objects(&mut rng, 1000, 5);
        let t = GmrTree::bulk_load_objects(objs.clone(), params(8, 0.3)).unwrap();
        let cfg = OracleConfig::for_tree(&t);
        for mu in [0.0, 0.5, 1.0] {
            let q = PreparedQuery::new(GeoPoint::new(25.0, 5.0), random_sv(&mut rng, 5), 10, mu)
                .unwrap();
            let got = exact_top_k_prepared(&t, &q, SearchOptions::default()).unwrap();
            let want = brute_force_prepared(&objs, &q, OracleMode::ExactScore, &cfg).unwrap();
            assert_same(&got.results, &want.results, 1e-12);
            if mu > 0.0 {
                // at mu = 0 every node bound is 1 and nothing can be cut
                assert!(got.stats.objects_scored < 1000);
            }

            let mut ids = got.ids();
            ids.sort_unstable();
            let mut alt: Vec<(f64, ObjectId)> = objs
                .iter()
                .map(|o| {
                    let key = if mu == 1.0 {
                        euclidean(q.location, o.location)
                    } else {
                        -cosine(
                            q.semantic.as_slice(),
                            o.semantic.as_ref().unwrap().as_slice(),
                        )
                        .unwrap()
                    };
                    (key, o.id)
                })
                .collect();
            if mu != 0.5 {
                alt.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut want: Vec<ObjectId> = alt[..10].iter().map(|p| p.1).collect();
                want.sort_unstable();
                assert_eq!(ids, want, "mu = {mu}");
            }
        }
    }

    #[test]
    fn best_first_continuation_is_rank_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let objs = random_objects(&mut rng, 80, 4);
            let t = GmrTree::bulk_load_objects(objs.clone(), params(4, 0.3)).unwrap();
            let q = PreparedQuery::new(GeoPoint::new(10.0, 40.0), random_sv(&mut rng, 4), 80, 0.5)
                .unwrap();
            let all: Vec<ScoredResult> = BestFirst::new(&t, &q, DeltaMaxMode::CornerBound)
                .unwrap()
                .unwrap()
                .collect();
            assert_eq!(all.len(), 80);
            assert!(all.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_lt()));
            let want = brute_force_prepared(
                &objs,
                &q,
                OracleMode::ExactScore,
                &OracleConfig::for_tree(&t),
            )
            .unwrap();
            assert_eq!(all, want.results);
        }
    }

    #[test]
    fn brute_force_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // every object returned, in total order
        let objs = random_objects(&mut rng, 30, 3);
        let q =
            PreparedQuery::new(GeoPoint::new(1.0, 1.0), random_sv(&mut rng, 3), 30, 0.5).unwrap();
        let cfg = OracleConfig {
            signature: SignatureParams::new(8, 0.5).unwrap(),
            delta_max: DeltaMaxMode::ExactScan,
            parallelism: Parallelism::Parallel,
        };
        let out = brute_force_prepared(&objs, &q, OracleMode::ExactScore, &cfg).unwrap();
        assert_eq!(out.results.len(), 30);
        assert!(out.results.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_lt()));

        // identical objects tie on score and distance; id breaks the tie
        let twin = |id| {
            GeoMultimediaObject::new(id, GeoPoint::new(2.0, 2.0), FeatureVector::image(vec![]))
                .with_semantic(sv(&[0.2, 0.3, 0.5]))
        };
        let objs = vec![twin(7), twin(3), twin(5)];
        let out = brute_force_prepared(&objs, &q, OracleMode::ExactScore, &cfg).unwrap();
        assert_eq!(out.ids(), vec![3, 5, 7]);

        // top-1 equals the argmax of an independently recomputed score column
        let objs = random_objects(&mut rng, 500, 4);
        let q =
            PreparedQuery::new(GeoPoint::new(12.0, 33.0), random_sv(&mut rng, 4), 1, 0.5).unwrap();
        let dmax = objs
            .iter()
            .map(|o| ((o.location.x - 12.0).powi(2) + (o.location.y - 33.0).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let column: Vec<f64> = objs
            .iter()
            .map(|o| {
                let d = ((o.location.x - 12.0).powi(2) + (o.location.y - 33.0).powi(2)).sqrt();
                let a = q.semantic.as_slice();
                let b = o.semantic.as_ref().unwrap().as_slice();
                let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                0.5 * (1.0 - d / dmax) + 0.5 * ab / (na * nb)
            })
            .collect();
        let best = (0..500)
            .max_by(|&i, &j| column[i].total_cmp(&column[j]))
            .unwrap();
        let out = brute_force_prepared(&objs, &q, OracleMode::ExactScore, &cfg).unwrap();
        assert_eq!(out.results[0].object_id, objs[best].id);
    }

    #[test]
    fn mismatched_class_count_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = GmrTree::bulk_load_objects(random_objects(&mut rng, 10, 4), TreeParams::default())
            .unwrap();
        let q = PreparedQuery::new(GeoPoint::new(0.0, 0.0), SemanticVector::uniform(5), 3, 0.5)
            .unwrap();
        assert!(matches!(
            kgmcms_prepared(&t, &q, SearchOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(exact_top_k_prepared(&t, &q, SearchOptions::default()).is_err());
    }

    #[test]
    fn batch_strategies_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = GmrTree::bulk_load_objects(
            random_objects(&mut rng, 300, 4),
            TreeParams::with_fanout(8),
        )
        .unwrap();
        let qs: Vec<_> = (0..40)
            .map(|_| {
                PreparedQuery::new(
                    GeoPoint::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)),
                    random_sv(&mut rng, 4),
                    5,
                    0.5,
                )
                .unwrap()
            })
            .collect();
        let run = |p| {
            run_batch(&qs, p, |q| {
                exact_top_k_prepared(&t, q, SearchOptions::default())
            })
            .unwrap()
            .into_iter()
            .map(|o| o.results)
            .collect::<Vec<_>>()
        };
        assert_eq!(run(Parallelism::Sequential), run(Parallelism::Parallel));
    }
}
