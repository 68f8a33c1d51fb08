use gmrsearch::format::tsv;
use gmrsearch::gmrtree::{GmrTree, TreeParams};
use gmrsearch::model::{Dataset, FeatureVector, GeoMultimediaObject, GeoPoint};
use gmrsearch::search::{
    brute_force_prepared, exact_top_k_prepared, kgmcms_prepared, NearestNeighbor, OracleConfig,
    OracleMode, PreparedQuery, SearchOptions,
};
use gmrsearch::signature::SignatureParams;
use gmrsearch::{ScoredResult, SemanticVector};
use proptest::prelude::*;

const CLASSES: usize = 4;

fn semantic() -> impl Strategy<Value = SemanticVector> {
    prop::collection::vec(0.01f64..1.0, CLASSES).prop_map(|v| {
        let s: f64 = v.iter().sum();
        SemanticVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn location() -> impl Strategy<Value = GeoPoint> {
    // small integer grid mixed with continuous points, so ties occur
    prop_oneof![
        (0i32..6, 0i32..6).prop_map(|(x, y)| GeoPoint::new(x as f64, y as f64)),
        (-50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y)| GeoPoint::new(x, y)),
    ]
}

fn objects(max: usize) -> impl Strategy<Value = Vec<GeoMultimediaObject>> {
    prop::collection::vec((location(), semantic(), -3.0f64..3.0), 1..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (loc, sem, f))| {
                GeoMultimediaObject::new(i as u64 * 7, loc, FeatureVector::image(vec![f, -f]))
                    .with_semantic(sem)
            })
            .collect()
    })
}

#[derive(Debug, Clone)]
struct Setup {
    objects: Vec<GeoMultimediaObject>,
    max_fanout: usize,
    bits: usize,
    threshold: f64,
    bulk: bool,
}

fn setup() -> impl Strategy<Value = Setup> {
    (
        objects(300),
        3usize..12,
        prop::sample::select(vec![2usize, 4, 64]),
        0.05f64..0.5,
        any::<bool>(),
    )
        .prop_map(|(objects, max_fanout, bits, threshold, bulk)| Setup {
            objects,
            max_fanout,
            bits,
            threshold,
            bulk,
        })
}

fn tree(s: &Setup) -> GmrTree {
    let params = TreeParams {
        signature: Some(SignatureParams::new(s.bits, s.threshold).unwrap()),
        ..TreeParams::with_fanout(s.max_fanout)
    };
    if s.bulk {
        GmrTree::bulk_load_objects(s.objects.clone(), params).unwrap()
    } else {
        GmrTree::from_inserts(s.objects.clone(), params, CLASSES).unwrap()
    }
}

fn query() -> impl Strategy<Value = PreparedQuery> {
    (
        location(),
        semantic(),
        1usize..30,
        prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]),
    )
        .prop_map(|(l, s, k, mu)| PreparedQuery::new(l, s, k, mu).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kgmcms_equals_nearest_matching_oracle(s in setup(), q in query()) {
        let t = tree(&s);
        let got = kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap();
        let want = brute_force_prepared(&s.objects, &q, OracleMode::NearestMatching, &OracleConfig::for_tree(&t)).unwrap();
        prop_assert_eq!(got.results, want.results);
        prop_assert_eq!(got.stats.truncated, want.stats.truncated);
    }

    #[test]
    fn exact_equals_exhaustive_scan(s in setup(), q in query()) {
        let t = tree(&s);
        let got = exact_top_k_prepared(&t, &q, SearchOptions::default()).unwrap();
        let want = brute_force_prepared(&s.objects, &q, OracleMode::ExactScore, &OracleConfig::for_tree(&t)).unwrap();
        prop_assert_eq!(got.results.len(), q.k.min(s.objects.len()));
        prop_assert_eq!(got.results, want.results);
    }

    #[test]
    fn results_are_in_rank_order(s in setup(), q in query()) {
        let t = tree(&s);
        for out in [
            kgmcms_prepared(&t, &q, SearchOptions::default()).unwrap(),
            exact_top_k_prepared(&t, &q, SearchOptions::default()).unwrap(),
        ] {
            prop_assert!(out.results.windows(2).all(|w| ScoredResult::rank_cmp(&w[0], &w[1]).is_le()));
        }
    }

    #[test]
    fn pruning_never_changes_exact_answers(s in setup(), q in query()) {
        let t = tree(&s);
        let off = SearchOptions { signature_pruning: false, ..SearchOptions::default() };
        let pruned = exact_top_k_prepared(&t, &q, SearchOptions::default()).unwrap();
        let full = exact_top_k_prepared(&t, &q, off).unwrap();
        prop_assert_eq!(pruned.results, full.results);
    }

    #[test]
    fn unfiltered_nn_visits_every_object_once(s in setup(), q in location()) {
        let t = tree(&s);
        let mut ids: Vec<u64> = NearestNeighbor::new(&t, q, None)
            .unwrap()
            .map(|(slot, _)| t.stored(slot).id())
            .collect();
        ids.sort_unstable();
        let mut want: Vec<u64> = s.objects.iter().map(|o| o.id).collect();
        want.sort_unstable();
        prop_assert_eq!(ids, want);
    }

    #[test]
    fn index_encoding_round_trips(s in setup()) {
        let t = tree(&s);
        prop_assert!(t.audit().is_empty());
        prop_assert_eq!(GmrTree::decode(&t.encode()).unwrap(), t);
    }

    #[test]
    fn dataset_text_round_trips(objs in objects(60), labelled in any::<bool>()) {
        let objs: Vec<_> = objs
            .into_iter()
            .enumerate()
            .map(|(i, o)| if labelled { o.with_label(i % CLASSES) } else { o })
            .collect();
        let ds = Dataset::new(objs, 3, 2, Some(CLASSES));
        let text = tsv::to_string(&ds);
        prop_assert_eq!(tsv::parse(&text).unwrap(), ds);
    }
}
