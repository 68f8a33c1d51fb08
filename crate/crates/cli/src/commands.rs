use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use gmrsearch::bench::{
    make_queries, run_benchmark, BenchCorpus, BenchOptions, BenchReport, Method, SyntheticSuite,
    WorkloadSpec,
};
use gmrsearch::cosmat::logstran::accuracy;
use gmrsearch::cosmat::{training_pairs, LogsTranConfig, Ridge, SemanticSpaceConfig};
use gmrsearch::featurize::{is_usable, ToyTextFeaturizer};
use gmrsearch::format::{space, tsv};
use gmrsearch::gmrtree::{GmrTree, TreeParams};
use gmrsearch::model::{Dataset, FeatureVector, GeoMultimediaObject, GeoPoint, Modality, Query};
use gmrsearch::search::PreparedQuery;
use gmrsearch::signature::SignatureParams;
use gmrsearch::synth::{synthesize, SpatialLayout, SynthSpec, WorldSpec};
use gmrsearch::{Parallelism, SemanticSpaceModel};
use serde_json::json;

use crate::{
    BenchArgs, BuildArgs, Cli, Command, EmbedArgs, IngestArgs, Layout, QueryArgs, QueryMethod,
    SynthArgs, TrainArgs, WorldArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let dir = cli.data_dir;
    match cli.command {
        Command::Synth(a) => synth(&dir, a),
        Command::Ingest(a) => ingest(&dir, a),
        Command::Train(a) => train(&dir, a),
        Command::Embed(a) => embed(&dir, a),
        Command::Build(a) => build(&dir, a),
        Command::Query(a) => query(&dir, a),
        Command::Bench(a) => bench(&dir, a),
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    tsv::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<SemanticSpaceModel> {
    space::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_index(path: &Path) -> Result<GmrTree> {
    GmrTree::load(path).with_context(|| format!("loading index {}", path.display()))
}

fn parallelism(on: bool) -> Parallelism {
    if on {
        Parallelism::Parallel
    } else {
        Parallelism::Sequential
    }
}

impl WorldArgs {
    fn spec(&self) -> WorldSpec {
        WorldSpec {
            class_count: self.classes,
            text_dim: self.text_dim,
            image_dim: self.image_dim,
            separation: self.separation,
            noise: self.noise,
            extent: self.extent,
            seed: self.seed,
        }
    }

    fn layout(&self) -> SpatialLayout {
        match self.layout {
            Layout::Uniform => SpatialLayout::Uniform,
            Layout::Clustered => SpatialLayout::Clustered {
                clusters: self.clusters,
                spread: self.spread,
            },
        }
    }
}

fn synth(dir: &Path, a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        world: a.world.spec(),
        train_size: a.train_size,
        index_size: a.index_size,
        query_count: a.query_count,
        layout: a.world.layout(),
    };
    let s = synthesize(&spec)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, ds) in [
        ("train_text.tsv", &s.train_text),
        ("train_image.tsv", &s.train_image),
        ("index.tsv", &s.index),
        ("queries.tsv", &s.queries),
    ] {
        let path = dir.join(name);
        tsv::write(ds, &path)?;
        println!("{}: {} objects", path.display(), ds.len());
    }
    Ok(())
}

fn ingest(dir: &Path, a: IngestArgs) -> Result<()> {
    let ds = read_dataset(&resolve(dir, &a.input))?;
    let text = ds
        .objects
        .iter()
        .filter(|o| o.feature.modality == Modality::Text)
        .count();
    let labelled = ds.objects.iter().filter(|o| o.label.is_some()).count();
    let embedded = ds.objects.iter().filter(|o| o.semantic.is_some()).count();
    println!(
        "{} objects ({text} text, {} image), d_T = {}, d_I = {}, classes = {}, {labelled} labelled, {embedded} embedded",
        ds.len(),
        ds.len() - text,
        ds.text_dim,
        ds.image_dim,
        ds.class_count.map_or("-".to_string(), |c| c.to_string()),
    );
    if let Some(out) = a.output {
        tsv::write(&ds, &resolve(dir, &out))?;
    }
    Ok(())
}

fn train(dir: &Path, a: TrainArgs) -> Result<()> {
    let text = read_dataset(&resolve(dir, &a.text))?;
    let image = read_dataset(&resolve(dir, &a.image))?;
    let pairs = training_pairs(&text, &image)?;
    let gamma = a
        .gamma
        .unwrap_or_else(|| 16.min(text.text_dim).min(image.image_dim));
    let cfg = SemanticSpaceConfig {
        gamma,
        ridge: Ridge::Relative(a.ridge),
        logs_tran: LogsTranConfig {
            l2: a.l2,
            max_iters: a.max_iters,
            tol: a.tol,
        },
    };
    let (mut model, report) = SemanticSpaceModel::fit(
        &pairs.text,
        &pairs.image,
        &pairs.labels,
        pairs.class_count,
        &cfg,
    )?;
    if let Some(path) = a.concepts {
        let path = resolve(dir, &path);
        let names: Vec<String> = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        ensure!(
            names.len() == pairs.class_count,
            "{} concept names for {} classes",
            names.len(),
            pairs.class_count
        );
        model.concept_names = Some(names);
    }
    let cp = &model.corr_proj;
    let text_acc = accuracy(
        &model.text_logs_tran,
        &cp.project_rows(Modality::Text, &pairs.text)?,
        &pairs.labels,
    )?;
    let image_acc = accuracy(
        &model.image_logs_tran,
        &cp.project_rows(Modality::Image, &pairs.image)?,
        &pairs.labels,
    )?;
    let out = resolve(dir, &a.output);
    space::save(&model, &out)?;
    let fit = |f: &gmrsearch::cosmat::LogsTranFit, acc: f64| {
        json!({
            "iterations": f.iterations,
            "converged": f.converged,
            "final_loss": f.loss_history.last(),
            "training_accuracy": acc,
        })
    };
    let summary = json!({
        "model": out,
        "pairs": pairs.labels.len(),
        "classes": pairs.class_count,
        "gamma": gamma,
        "correlations": cp.correlations(),
        "text": fit(&report.text, text_acc),
        "image": fit(&report.image, image_acc),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn embed(dir: &Path, a: EmbedArgs) -> Result<()> {
    let model = load_model(&resolve(dir, &a.model))?;
    let ds = read_dataset(&resolve(dir, &a.input))?;
    let out = model.embed_dataset(&ds, parallelism(a.parallel))?;
    let path = resolve(dir, &a.output);
    tsv::write(&out, &path)?;
    println!("{}: {} objects embedded", path.display(), out.len());
    Ok(())
}

fn build(dir: &Path, a: BuildArgs) -> Result<()> {
    let mut ds = read_dataset(&resolve(dir, &a.input))?;
    if let Some(m) = &a.model {
        ds = load_model(&resolve(dir, m))?.embed_dataset(&ds, Parallelism::Parallel)?;
    }
    let classes = match (
        ds.class_count,
        ds.objects.iter().all(|o| o.semantic.is_some()),
    ) {
        (Some(c), true) => c,
        _ => bail!("objects carry no semantic vectors; embed them first or pass --model"),
    };
    let threshold = a
        .threshold
        .unwrap_or_else(|| SignatureParams::default_for_classes(classes).threshold);
    let params = TreeParams {
        min_fanout: a.min_fanout.unwrap_or(a.max_fanout / 2),
        max_fanout: a.max_fanout,
        signature: Some(SignatureParams::new(a.bits, threshold)?),
    };
    let tree = if a.insert {
        GmrTree::from_inserts(ds.objects, params, classes)?
    } else {
        GmrTree::bulk_load(&ds, params)?
    };
    let path = resolve(dir, &a.output);
    tree.save(&path)?;
    println!(
        "{}: {} objects, height {}, {} classes, {}-bit signatures at threshold {threshold}",
        path.display(),
        tree.len(),
        tree.height(),
        tree.class_count(),
        a.bits,
    );
    Ok(())
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {v:?}"))
        })
        .collect()
}

fn query_feature(dir: &Path, a: &QueryArgs) -> Result<FeatureVector> {
    if let Some(f) = &a.feature {
        return Ok(FeatureVector::text(parse_floats(f)?));
    }
    if let Some(text) = &a.text {
        let path = resolve(dir, a.vocab.as_ref().expect("clap requires --vocab"));
        let words: Vec<String> = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let f = ToyTextFeaturizer::new(&words)?.featurize(text);
        ensure!(is_usable(&f), "no vocabulary word occurs in {text:?}");
        return Ok(f);
    }
    if let Some(id) = a.query_id {
        let ds = read_dataset(&resolve(dir, &a.queries))?;
        let o = ds
            .objects
            .into_iter()
            .find(|o| o.id == id)
            .with_context(|| format!("no object {id} in {}", a.queries.display()))?;
        ensure!(
            o.feature.modality == Modality::Text,
            "object {id} is not a text object"
        );
        return Ok(o.feature);
    }
    bail!("give the query text as --feature, --text or --query-id")
}

fn indexed_objects(tree: &GmrTree) -> Vec<GeoMultimediaObject> {
    tree.objects().map(|s| s.object.clone()).collect()
}

fn query(dir: &Path, a: QueryArgs) -> Result<()> {
    let model = load_model(&resolve(dir, &a.model))?;
    let tree = load_index(&resolve(dir, &a.index))?;
    let feature = query_feature(dir, &a)?;
    let q = Query::new(GeoPoint::new(a.x, a.y), feature, a.k, a.mu)?;
    let pq = PreparedQuery::embed(&model, &q)?;
    let method = match a.method {
        QueryMethod::Kgmcms => Method::GmrtreeKgmcms,
        QueryMethod::Exact => Method::GmrtreeExact,
        QueryMethod::Postfilter => Method::RtreePostfilter,
        QueryMethod::Linear => Method::LinearScan,
    };
    let objects = indexed_objects(&tree);
    let out = BenchCorpus::new(&tree, &objects, None)?.run(method, &pq)?;
    if a.json {
        let doc = json!({
            "method": method,
            "query_concepts": pq.semantic.as_slice(),
            "results": out.results,
            "stats": out.stats,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    println!(
        "{:>4} {:>12} {:>12} {:>12} {:>10} {:>10}",
        "rank", "id", "score", "distance", "proximity", "cosine"
    );
    for (i, r) in out.results.iter().enumerate() {
        println!(
            "{:>4} {:>12} {:>12.6} {:>12.4} {:>10.6} {:>10.6}",
            i + 1,
            r.object_id,
            r.score,
            r.distance,
            r.distance_proximity,
            r.similarity
        );
    }
    let s = &out.stats;
    eprintln!(
        "{}: {} results, {} nodes visited, {} objects scored, {} subtrees pruned{}",
        method.name(),
        out.results.len(),
        s.nodes_visited,
        s.objects_scored,
        s.signature_pruned_subtrees,
        if s.truncated {
            ", fewer than k matches"
        } else {
            ""
        }
    );
    Ok(())
}

fn bench(dir: &Path, a: BenchArgs) -> Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<gmrsearch::Result<Vec<_>>>()?;
    ensure!(!methods.is_empty(), "no methods given");
    ensure!(!a.k.is_empty(), "no k given");
    let opts = BenchOptions {
        warm_up: !a.no_warm_up,
        parallelism: parallelism(a.parallel),
    };
    let workload = |k| WorkloadSpec {
        query_count: a.query_count,
        k,
        mu: a.mu,
        seed: a.workload_seed,
    };
    let mut reports: Vec<BenchReport> = Vec::new();
    let mut emit = |r: BenchReport| {
        if a.json.as_deref() != Some(Path::new("-")) {
            println!("{}", r.to_table());
        }
        reports.push(r);
    };

    if a.synthetic {
        let cfg = SemanticSpaceConfig {
            gamma: 16.min(a.world.text_dim).min(a.world.image_dim),
            ..SemanticSpaceConfig::default()
        };
        let suite = SyntheticSuite::train(a.world.spec(), a.train_size, a.world.layout(), &cfg)?;
        for &size in &a.sizes {
            // one index per size; the k sweep reuses it with fresh query sets
            for &k in &a.k {
                let w = workload(k);
                let case = suite.case(size, &w, Parallelism::Parallel)?;
                let corpus = BenchCorpus::new(&case.tree, &case.index.objects, None)?;
                emit(run_benchmark(&corpus, &case.queries, &methods, &w, opts)?);
            }
        }
    } else {
        let model = load_model(&resolve(dir, &a.model))?;
        let tree = load_index(&resolve(dir, &a.index))?;
        let texts = read_dataset(&resolve(dir, &a.queries))?;
        let texts = model.embed_dataset(&texts, Parallelism::Parallel)?;
        let objects = indexed_objects(&tree);
        let index = Dataset::new(
            objects.clone(),
            model.text_dim(),
            model.image_dim(),
            Some(model.class_count()),
        );
        let corpus = BenchCorpus::new(&tree, &objects, model.concept_names.as_deref())?;
        for &k in &a.k {
            let w = workload(k);
            let queries = make_queries(&texts, &index, &w)?;
            emit(run_benchmark(&corpus, &queries, &methods, &w, opts)?);
        }
    }

    if let Some(path) = a.json {
        let doc = serde_json::to_string_pretty(&reports)?;
        if path == Path::new("-") {
            println!("{doc}");
        } else {
            let path = resolve(dir, &path);
            fs::write(&path, doc).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}
