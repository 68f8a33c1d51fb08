//! Benchmark harness: response time, work counters and result quality of
//! each search method against the exact-score oracle.
//!
//! Ground truth for a query is the exact top-`k` by combined score, with the
//! distance normalised by the dataset bounding box. A method's per-query
//! class is the argmax concept of its top-1 object; the confusion matrix
//! crosses the oracle's top-1 class (rows) with the method's (columns, plus
//! a final "none" column for empty answers).

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cosmat::{SemanticSpaceConfig, SemanticSpaceModel};
use crate::error::{Error, Result};
use crate::gmrtree::{GmrTree, TreeParams};
use crate::model::{Dataset, GeoMultimediaObject, Modality, ObjectId};
use crate::parallel::Parallelism;
use crate::search::{
    brute_force_prepared, exact_top_k_prepared, kgmcms_prepared, run_batch, OracleConfig,
    OracleMode, PreparedQuery, SearchOptions, SearchOutcome,
};
use crate::synth::{SpatialLayout, SyntheticWorld, WorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GmrtreeKgmcms,
    GmrtreeExact,
    RtreePostfilter,
    LinearScan,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GmrtreeKgmcms,
        Method::GmrtreeExact,
        Method::RtreePostfilter,
        Method::LinearScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GmrtreeKgmcms => "gmrtree-kgmcms",
            Method::GmrtreeExact => "gmrtree-exact",
            Method::RtreePostfilter => "rtree-postfilter",
            Method::LinearScan => "linear-scan",
        }
    }

    pub fn uses_tree(self) -> bool {
        self != Method::LinearScan
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkloadSpec {
    pub query_count: usize,
    pub k: usize,
    pub mu: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            query_count: 100,
            k: 10,
            mu: 0.5,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.query_count == 0 {
            return Err(Error::InvalidArgument(
                "query count must be at least 1".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument(format!(
                "mu = {} outside [0, 1]",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Builds the workload: query texts are taken from `texts` in order
/// (cycling if needed), each paired with the location of a random indexed
/// object. Texts must already carry semantic vectors.
pub fn make_queries(
    texts: &Dataset,
    index: &Dataset,
    spec: &WorkloadSpec,
) -> Result<Vec<PreparedQuery>> {
    spec.validate()?;
    if texts.is_empty() || index.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.query_count)
        .map(|i| {
            let t = &texts.objects[i % texts.len()];
            let sem = t.semantic.clone().ok_or(Error::MissingSemantic(t.id))?;
            let loc = index.objects[rng.random_range(0..index.len())].location;
            PreparedQuery::new(loc, sem, spec.k, spec.mu)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    /// Run every query once before timing.
    pub warm_up: bool,
    /// Run queries concurrently. Timings are per query either way, but
    /// concurrent runs contend for cores.
    pub parallelism: Parallelism,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            warm_up: true,
            parallelism: Parallelism::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[oracle_class][method_class]`; the last column counts empty answers.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n + 1]; n],
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Fraction of queries whose top-1 class agrees with the oracle's.
    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.row_sums().iter().sum();
        let diag: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            1.0
        } else {
            diag as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub mean_nodes_visited: f64,
    pub mean_objects_scored: f64,
    pub max_objects_scored: u64,
    pub precision: f64,
    pub recall: f64,
    /// Fraction of queries whose id set differs from the oracle's.
    pub divergence_rate: f64,
    pub truncated_queries: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub ground_truth: &'static str,
    pub dataset_size: usize,
    pub workload: WorkloadSpec,
    pub methods: Vec<MethodReport>,
}

const GROUND_TRUTH: &str =
    "exact top-k by combined score over all objects (corner-bound delta_max); \
     class of a query = argmax concept of its top-1 object";

/// Indexed corpus ready for benchmarking.
pub struct BenchCorpus<'a> {
    pub tree: &'a GmrTree,
    /// The indexed objects, with semantic vectors.
    pub objects: &'a [GeoMultimediaObject],
    pub class_names: Vec<String>,
}

impl<'a> BenchCorpus<'a> {
    pub fn new(
        tree: &'a GmrTree,
        objects: &'a [GeoMultimediaObject],
        concept_names: Option<&[String]>,
    ) -> Result<Self> {
        if tree.len() != objects.len() {
            return Err(Error::InvalidArgument(format!(
                "index holds {} objects, dataset has {}",
                tree.len(),
                objects.len()
            )));
        }
        if let Some(o) = objects.iter().find(|o| tree.get(o.id).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "object {} is not in the index",
                o.id
            )));
        }
        let class_names = match concept_names {
            Some(n) => n.to_vec(),
            None => (0..tree.class_count()).map(|i| i.to_string()).collect(),
        };
        Ok(Self {
            tree,
            objects,
            class_names,
        })
    }

    fn oracle_config(&self) -> OracleConfig {
        OracleConfig::for_tree(self.tree)
    }

    pub fn run(&self, method: Method, q: &PreparedQuery) -> Result<SearchOutcome> {
        match method {
            Method::GmrtreeKgmcms => kgmcms_prepared(self.tree, q, SearchOptions::default()),
            Method::GmrtreeExact => exact_top_k_prepared(self.tree, q, SearchOptions::default()),
            Method::RtreePostfilter => kgmcms_prepared(
                self.tree,
                q,
                SearchOptions {
                    signature_pruning: false,
                    ..SearchOptions::default()
                },
            ),
            Method::LinearScan => brute_force_prepared(
                self.objects,
                q,
                OracleMode::ExactScore,
                &self.oracle_config(),
            ),
        }
    }

    pub fn oracle(&self, q: &PreparedQuery) -> Result<SearchOutcome> {
        brute_force_prepared(
            self.objects,
            q,
            OracleMode::ExactScore,
            &self.oracle_config(),
        )
    }

    fn class_of(&self, id: ObjectId) -> usize {
        self.tree
            .get(id)
            .map(|o| o.semantic().argmax())
            .expect("results come from the index")
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn run_benchmark(
    corpus: &BenchCorpus<'_>,
    queries: &[PreparedQuery],
    methods: &[Method],
    workload: &WorkloadSpec,
    opts: BenchOptions,
) -> Result<BenchReport> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one query".into(),
        ));
    }
    let oracle = run_batch(queries, opts.parallelism, |q| corpus.oracle(q))?;
    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        if opts.warm_up {
            run_batch(queries, opts.parallelism, |q| corpus.run(method, q))?;
        }
        let timed = run_batch(queries, opts.parallelism, |q| {
            let start = Instant::now();
            let mut out = corpus.run(method, q)?;
            out.stats.elapsed = start.elapsed();
            Ok(out)
        })?;
        reports.push(summarize(corpus, method, &timed, &oracle));
    }
    Ok(BenchReport {
        ground_truth: GROUND_TRUTH,
        dataset_size: corpus.objects.len(),
        workload: *workload,
        methods: reports,
    })
}

fn summarize(
    corpus: &BenchCorpus<'_>,
    method: Method,
    runs: &[SearchOutcome],
    oracle: &[SearchOutcome],
) -> MethodReport {
    let n = runs.len() as f64;
    let mut times: Vec<f64> = runs.iter().map(|r| ms(r.stats.elapsed)).collect();
    times.sort_by(f64::total_cmp);
    let mut confusion = ConfusionMatrix::new(corpus.class_names.clone());
    let none = corpus.class_names.len();
    let (mut precision, mut recall, mut diverged) = (0.0, 0.0, 0usize);
    for (run, truth) in runs.iter().zip(oracle) {
        let mut got = run.ids();
        let mut want = truth.ids();
        got.sort_unstable();
        want.sort_unstable();
        let hits = got
            .iter()
            .filter(|id| want.binary_search(id).is_ok())
            .count() as f64;
        precision += if got.is_empty() {
            f64::from(u8::from(want.is_empty()))
        } else {
            hits / got.len() as f64
        };
        recall += if want.is_empty() {
            1.0
        } else {
            hits / want.len() as f64
        };
        if got != want {
            diverged += 1;
        }
        if let Some(top) = truth.results.first() {
            let row = corpus.class_of(top.object_id);
            let col = run
                .results
                .first()
                .map_or(none, |r| corpus.class_of(r.object_id));
            confusion.counts[row][col] += 1;
        }
    }
    MethodReport {
        method,
        mean_ms: times.iter().sum::<f64>() / n,
        median_ms: median(&times),
        mean_nodes_visited: runs
            .iter()
            .map(|r| r.stats.nodes_visited as f64)
            .sum::<f64>()
            / n,
        mean_objects_scored: runs
            .iter()
            .map(|r| r.stats.objects_scored as f64)
            .sum::<f64>()
            / n,
        max_objects_scored: runs
            .iter()
            .map(|r| r.stats.objects_scored)
            .max()
            .unwrap_or(0),
        precision: precision / n,
        recall: recall / n,
        divergence_rate: diverged as f64 / n,
        truncated_queries: runs.iter().filter(|r| r.stats.truncated).count(),
        confusion,
    }
}

impl BenchReport {
    /// Human-readable table, one row per method, followed by each method's
    /// confusion matrix.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let w = &self.workload;
        let _ = writeln!(
            s,
            "n = {}, queries = {}, k = {}, mu = {}, seed = {}",
            self.dataset_size, w.query_count, w.k, w.mu, w.seed
        );
        let _ = writeln!(s, "ground truth: {}", self.ground_truth);
        let _ = writeln!(
            s,
            "{:<18} {:>10} {:>10} {:>12} {:>12} {:>9} {:>9} {:>9} {:>9}",
            "method",
            "mean ms",
            "median ms",
            "nodes",
            "scored",
            "prec",
            "recall",
            "diverge",
            "trunc"
        );
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:<18} {:>10.4} {:>10.4} {:>12.1} {:>12.1} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                m.method.name(),
                m.mean_ms,
                m.median_ms,
                m.mean_nodes_visited,
                m.mean_objects_scored,
                m.precision,
                m.recall,
                m.divergence_rate,
                m.truncated_queries
            );
        }
        for m in &self.methods {
            let c = &m.confusion;
            let _ = writeln!(
                s,
                "\nconfusion ({}): rows = oracle top-1 class, columns = method top-1 class",
                m.method.name()
            );
            let width = c.classes.iter().map(String::len).max().unwrap_or(1).max(5);
            let _ = write!(s, "{:>width$}", "");
            for name in c.classes.iter().map(String::as_str).chain(["none"]) {
                let _ = write!(s, " {name:>width$}");
            }
            s.push('\n');
            for (name, row) in c.classes.iter().zip(&c.counts) {
                let _ = write!(s, "{name:>width$}");
                for v in row {
                    let _ = write!(s, " {v:>width$}");
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Everything needed to benchmark one synthetic dataset size.
pub struct SyntheticCase {
    pub index: Dataset,
    pub tree: GmrTree,
    pub queries: Vec<PreparedQuery>,
}

/// A trained model over one synthetic world, able to produce indexed
/// datasets of any size that the model applies to.
pub struct SyntheticSuite {
    pub world: SyntheticWorld,
    pub space: SemanticSpaceModel,
    pub layout: SpatialLayout,
    pub tree_params: TreeParams,
}

impl SyntheticSuite {
    pub fn train(
        world: WorldSpec,
        train_size: usize,
        layout: SpatialLayout,
        cfg: &SemanticSpaceConfig,
    ) -> Result<Self> {
        let world = SyntheticWorld::new(world)?;
        if train_size < world.class_count() * 10 {
            return Err(Error::InvalidArgument(
                "training split needs 10 pairs per class".into(),
            ));
        }
        let p = world.pairs(train_size, world.spec().seed);
        let (space, _) =
            SemanticSpaceModel::fit(&p.text, &p.image, &p.labels, world.class_count(), cfg)?;
        Ok(Self {
            world,
            space,
            layout,
            tree_params: TreeParams::default(),
        })
    }

    /// Embeds and indexes `size` fresh image objects and prepares the workload.
    pub fn case(
        &self,
        size: usize,
        workload: &WorkloadSpec,
        parallelism: Parallelism,
    ) -> Result<SyntheticCase> {
        let seed = self.world.spec().seed ^ (size as u64).rotate_left(32);
        let raw = self
            .world
            .objects(Modality::Image, size, self.layout, seed)?;
        let index = self.space.embed_dataset(&raw, parallelism)?;
        let tree = GmrTree::bulk_load(&index, self.tree_params)?;
        let texts = self
            .world
            .objects(Modality::Text, workload.query_count, self.layout, seed)?;
        let texts = self.space.embed_dataset(&texts, parallelism)?;
        let queries = make_queries(&texts, &index, workload)?;
        Ok(SyntheticCase {
            index,
            tree,
            queries,
        })
    }
}
