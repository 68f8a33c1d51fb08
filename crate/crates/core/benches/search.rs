//! Sequential vs rayon-parallel execution of the hot paths. Without the
//! `parallel` feature both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gmrsearch::bench::{SyntheticCase, SyntheticSuite, WorkloadSpec};
use gmrsearch::cosmat::SemanticSpaceConfig;
use gmrsearch::model::Modality;
use gmrsearch::search::{
    brute_force_prepared, exact_top_k_prepared, kgmcms_prepared, run_batch, OracleConfig,
    OracleMode, SearchOptions,
};
use gmrsearch::synth::{SpatialLayout, WorldSpec};
use gmrsearch::Parallelism;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn suite() -> SyntheticSuite {
    SyntheticSuite::train(
        WorldSpec::default(),
        2000,
        SpatialLayout::clustered_default(),
        &SemanticSpaceConfig::default(),
    )
    .expect("training succeeds")
}

fn case(suite: &SyntheticSuite, size: usize) -> SyntheticCase {
    suite
        .case(size, &WorkloadSpec::default(), Parallelism::Parallel)
        .expect("case builds")
}

fn linear_scan(c: &mut Criterion) {
    let suite = suite();
    let mut group = c.benchmark_group("linear_scan");
    for size in [10_000, 100_000] {
        let case = case(&suite, size);
        let q = &case.queries[0];
        group.throughput(Throughput::Elements(size as u64));
        for (name, par) in MODES {
            let cfg = OracleConfig {
                parallelism: par,
                ..OracleConfig::for_tree(&case.tree)
            };
            group.bench_with_input(BenchmarkId::new(name, size), &size, |b, _| {
                b.iter(|| {
                    brute_force_prepared(&case.index.objects, q, OracleMode::ExactScore, &cfg)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn query_batch(c: &mut Criterion) {
    let suite = suite();
    let case = case(&suite, 50_000);
    let mut group = c.benchmark_group("query_batch");
    group.throughput(Throughput::Elements(case.queries.len() as u64));
    for (name, par) in MODES {
        group.bench_function(BenchmarkId::new("exact_top_k", name), |b| {
            b.iter(|| {
                run_batch(&case.queries, par, |q| {
                    exact_top_k_prepared(&case.tree, q, SearchOptions::default())
                })
                .unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("kgmcms", name), |b| {
            b.iter(|| {
                run_batch(&case.queries, par, |q| {
                    kgmcms_prepared(&case.tree, q, SearchOptions::default())
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

fn embedding(c: &mut Criterion) {
    let suite = suite();
    let raw = suite
        .world
        .objects(Modality::Image, 20_000, suite.layout, 7)
        .unwrap();
    let mut group = c.benchmark_group("embed_dataset");
    group.sample_size(10);
    group.throughput(Throughput::Elements(raw.len() as u64));
    for (name, par) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| suite.space.embed_dataset(&raw, par).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, linear_scan, query_batch, embedding);
criterion_main!(benches);
