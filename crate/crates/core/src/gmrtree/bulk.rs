//! Sort-tile-recursive packing.

use super::{Child, Entry, GmrTree, Node, TreeParams};
use crate::error::{Error, Result};
use crate::model::GeoMultimediaObject;
use crate::scoring::Mbr;

pub(super) fn bulk_load(objects: Vec<GeoMultimediaObject>, params: TreeParams) -> Result<GmrTree> {
    let first = objects.first().ok_or(Error::EmptyDataset)?;
    let class_count = first
        .semantic
        .as_ref()
        .ok_or(Error::MissingSemantic(first.id))?
        .len();
    let mut tree = GmrTree::new(params, class_count)?;
    tree.nodes.clear();

    let mut entries = Vec::with_capacity(objects.len());
    for obj in objects {
        let sig = tree.check_object(&obj)?;
        let mbr = Mbr::point(obj.location);
        let slot = tree.store(obj, sig.clone());
        entries.push(Entry {
            mbr,
            sig,
            child: Child::Object(slot),
        });
    }

    let mut level = 0u32;
    loop {
        if entries.len() <= tree.max_fanout {
            tree.root = tree.push_node(Node { level, entries });
            return Ok(tree);
        }
        let groups = str_partition(entries, tree.max_fanout, tree.min_fanout);
        entries = Vec::with_capacity(groups.len());
        for group in groups {
            let id = tree.push_node(Node {
                level,
                entries: group,
            });
            entries.push(tree.entry_for(id));
        }
        level += 1;
    }
}

/// Splits `len` items into `parts` runs whose sizes differ by at most one.
fn balanced_sizes(len: usize, parts: usize) -> impl Iterator<Item = usize> {
    let base = len / parts;
    let extra = len % parts;
    (0..parts).map(move |i| base + usize::from(i < extra))
}

fn center_cmp_x(a: &Entry, b: &Entry) -> std::cmp::Ordering {
    let (ca, cb) = (a.mbr.center(), b.mbr.center());
    ca.x.total_cmp(&cb.x).then(ca.y.total_cmp(&cb.y))
}

fn center_cmp_y(a: &Entry, b: &Entry) -> std::cmp::Ordering {
    let (ca, cb) = (a.mbr.center(), b.mbr.center());
    ca.y.total_cmp(&cb.y).then(ca.x.total_cmp(&cb.x))
}

/// One STR pass: sort by x, cut into vertical slabs of `ceil(P / S)` full
/// runs, sort each slab by y and cut it into runs of `max`. This yields
/// exactly `P = ceil(n / max)` runs; only the final run can be short, and it
/// is rebalanced with its predecessor when it falls below `min`.
fn str_partition(mut entries: Vec<Entry>, max: usize, min: usize) -> Vec<Vec<Entry>> {
    let n = entries.len();
    let runs = n.div_ceil(max);
    let slabs = (runs as f64).sqrt().ceil() as usize;
    let slab_items = runs.div_ceil(slabs) * max;
    entries.sort_by(center_cmp_x);

    let mut out: Vec<Vec<Entry>> = Vec::with_capacity(runs);
    let mut rest = entries.into_iter().peekable();
    while rest.peek().is_some() {
        let mut slab: Vec<Entry> = rest.by_ref().take(slab_items).collect();
        slab.sort_by(center_cmp_y);
        let mut it = slab.into_iter().peekable();
        while it.peek().is_some() {
            out.push(it.by_ref().take(max).collect());
        }
    }

    if out.len() >= 2 && out[out.len() - 1].len() < min {
        let last = out.pop().unwrap_or_default();
        let mut prev = out.pop().unwrap_or_default();
        prev.extend(last);
        let total = prev.len();
        let mut sizes = balanced_sizes(total, 2);
        let first = sizes.next().unwrap_or(total);
        let tail = prev.split_off(first);
        out.push(prev);
        out.push(tail);
    }
    debug_assert_eq!(out.len(), runs);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrtree::tests::random_object;
    use crate::model::{FeatureVector, GeoPoint, SemanticVector};
    use crate::signature::SignatureParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_object_is_single_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t =
            GmrTree::bulk_load_objects(vec![random_object(&mut rng, 0, 4)], TreeParams::default())
                .unwrap();
        assert_eq!(t.height(), 1);
        assert_eq!(t.node_count(), 1);
        assert!(t.audit().is_empty());
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            GmrTree::bulk_load_objects(vec![], TreeParams::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn grid_packing_height() {
        for (k, max) in [
            (1usize, 8usize),
            (2, 8),
            (8, 8),
            (9, 8),
            (64, 8),
            (65, 8),
            (3, 32),
            (40, 32),
        ] {
            let n = k * max;
            let side = (n as f64).sqrt().ceil() as usize;
            let objs: Vec<_> = (0..n)
                .map(|i| {
                    GeoMultimediaObject::new(
                        i as u64,
                        GeoPoint::new((i % side) as f64, (i / side) as f64),
                        FeatureVector::image(vec![]),
                    )
                    .with_semantic(SemanticVector::uniform(3))
                })
                .collect();
            let t = GmrTree::bulk_load_objects(objs, TreeParams::with_fanout(max)).unwrap();
            // ceil(log_M(k·M)) levels, computed by integer powers
            let mut expected = 1;
            let mut cap = max;
            while cap < n {
                cap *= max;
                expected += 1;
            }
            assert_eq!(t.height(), expected, "k = {k}, M = {max}");
            assert!(t.audit().is_empty());
        }
    }

    #[test]
    fn random_bulk_loads_pass_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, max) in [(10_000usize, 32usize), (333, 4), (17, 4), (1000, 5), (5, 2)] {
            let objs: Vec<_> = (0..n)
                .map(|i| random_object(&mut rng, i as u64, 6))
                .collect();
            let params = TreeParams {
                min_fanout: max / 2,
                max_fanout: max,
                signature: Some(SignatureParams::new(16, 0.25).unwrap()),
            };
            let t = GmrTree::bulk_load_objects(objs, params).unwrap();
            assert_eq!(t.len(), n);
            assert!(
                t.audit().is_empty(),
                "n = {n}, M = {max}: {:?}",
                t.audit().first()
            );
        }
    }

    #[test]
    fn bulk_load_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let objs: Vec<_> = (0..500).map(|i| random_object(&mut rng, i, 5)).collect();
        let a = GmrTree::bulk_load_objects(objs.clone(), TreeParams::with_fanout(8)).unwrap();
        let b = GmrTree::bulk_load_objects(objs, TreeParams::with_fanout(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balanced_sizes_sum() {
        let v: Vec<_> = balanced_sizes(10, 3).collect();
        assert_eq!(v, vec![4, 3, 3]);
    }
}
