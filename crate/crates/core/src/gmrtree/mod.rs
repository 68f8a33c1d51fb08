//! GMR-Tree: a height-balanced R-Tree whose entries carry, next to the MBR,
//! the superimposed signature of every semantic vector below them.
//!
//! Nodes live in an arena and are addressed by [`NodeId`]. Leaf entries point
//! into the object store by slot; the store maps object ids to slots.

mod bulk;
mod persist;

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Dataset, GeoMultimediaObject, GeoPoint, ObjectId, SemanticVector};
use crate::scoring::Mbr;
use crate::signature::{Signature, SignatureParams};

pub type NodeId = usize;

/// Slot of an object in the tree's object store.
pub type Slot = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Node(NodeId),
    Object(Slot),
}

/// `⟨MBR, SIG, PTR⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub mbr: Mbr,
    pub sig: Signature,
    pub child: Child,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// 0 for leaves.
    pub level: u32,
    pub entries: Vec<Entry>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.level == 0
    }
}

/// An indexed object with its cached signature.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredObject {
    pub object: GeoMultimediaObject,
    pub signature: Signature,
}

impl StoredObject {
    pub fn id(&self) -> ObjectId {
        self.object.id
    }

    pub fn location(&self) -> GeoPoint {
        self.object.location
    }

    pub fn semantic(&self) -> &SemanticVector {
        self.object
            .semantic
            .as_ref()
            .expect("indexed objects always carry a semantic vector")
    }
}

/// Construction parameters. `signature: None` derives the defaults from the
/// class count of the first object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub min_fanout: usize,
    pub max_fanout: usize,
    pub signature: Option<SignatureParams>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_fanout: 16,
            max_fanout: 32,
            signature: None,
        }
    }
}

impl TreeParams {
    pub fn with_fanout(max_fanout: usize) -> Self {
        Self {
            min_fanout: max_fanout / 2,
            max_fanout,
            signature: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_fanout < 2 {
            return Err(Error::InvalidArgument(
                "max fanout must be at least 2".into(),
            ));
        }
        if self.min_fanout < 1 || self.min_fanout > self.max_fanout / 2 {
            return Err(Error::InvalidArgument(format!(
                "min fanout {} outside [1, {}]",
                self.min_fanout,
                self.max_fanout / 2
            )));
        }
        if let Some(s) = self.signature {
            SignatureParams::new(s.bits, s.threshold)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmrTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: NodeId,
    pub(crate) min_fanout: usize,
    pub(crate) max_fanout: usize,
    pub(crate) sig_params: SignatureParams,
    pub(crate) class_count: usize,
    pub(crate) objects: Vec<StoredObject>,
    pub(crate) slots: HashMap<ObjectId, Slot>,
}

impl GmrTree {
    /// Empty tree for semantic vectors over `class_count` classes.
    pub fn new(params: TreeParams, class_count: usize) -> Result<Self> {
        params.validate()?;
        if class_count == 0 {
            return Err(Error::InvalidArgument(
                "class count must be positive".into(),
            ));
        }
        Ok(Self {
            nodes: vec![Node {
                level: 0,
                entries: Vec::new(),
            }],
            root: 0,
            min_fanout: params.min_fanout,
            max_fanout: params.max_fanout,
            sig_params: params
                .signature
                .unwrap_or_else(|| SignatureParams::default_for_classes(class_count)),
            class_count,
            objects: Vec::new(),
            slots: HashMap::new(),
        })
    }

    /// Sort-tile-recursive packing of a dataset whose objects all carry
    /// semantic vectors.
    pub fn bulk_load(ds: &Dataset, params: TreeParams) -> Result<Self> {
        Self::bulk_load_objects(ds.objects.clone(), params)
    }

    pub fn bulk_load_objects(
        objects: Vec<GeoMultimediaObject>,
        params: TreeParams,
    ) -> Result<Self> {
        bulk::bulk_load(objects, params)
    }

    /// Builds by repeated insertion, in input order.
    pub fn from_inserts(
        objects: impl IntoIterator<Item = GeoMultimediaObject>,
        params: TreeParams,
        class_count: usize,
    ) -> Result<Self> {
        let mut t = Self::new(params, class_count)?;
        for o in objects {
            t.insert(o)?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of levels; a lone leaf has height 1.
    pub fn height(&self) -> usize {
        self.nodes[self.root].level as usize + 1
    }

    pub fn min_fanout(&self) -> usize {
        self.min_fanout
    }

    pub fn max_fanout(&self) -> usize {
        self.max_fanout
    }

    pub fn signature_params(&self) -> SignatureParams {
        self.sig_params
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn stored(&self, slot: Slot) -> &StoredObject {
        &self.objects[slot as usize]
    }

    pub fn objects(&self) -> impl ExactSizeIterator<Item = &StoredObject> {
        self.objects.iter()
    }

    pub fn get(&self, id: ObjectId) -> Option<&StoredObject> {
        self.slots.get(&id).map(|&s| self.stored(s))
    }

    /// Bounding box of everything indexed.
    pub fn root_mbr(&self) -> Option<Mbr> {
        node_mbr(&self.nodes[self.root])
    }

    /// Signature of the whole tree (OR of the root entries).
    pub fn root_signature(&self) -> Signature {
        node_signature(&self.nodes[self.root], self.sig_params.bits)
    }

    pub fn object_signature(&self, sv: &SemanticVector) -> Signature {
        self.sig_params.sign(sv)
    }

    fn check_object(&self, obj: &GeoMultimediaObject) -> Result<Signature> {
        let sem = obj
            .semantic
            .as_ref()
            .ok_or(Error::MissingSemantic(obj.id))?;
        if sem.len() != self.class_count {
            return Err(Error::dim(self.class_count, sem.len(), "semantic vector"));
        }
        if !obj.location.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "object {} has a non-finite location",
                obj.id
            )));
        }
        if self.slots.contains_key(&obj.id) {
            return Err(Error::DuplicateId(obj.id));
        }
        Ok(self.sig_params.sign(sem))
    }

    fn store(&mut self, obj: GeoMultimediaObject, signature: Signature) -> Slot {
        let slot = self.objects.len() as Slot;
        self.slots.insert(obj.id, slot);
        self.objects.push(StoredObject {
            object: obj,
            signature,
        });
        slot
    }

    /// Inserts one object: least-enlargement descent, OR-updates of every
    /// ancestor signature, quadratic split on overflow.
    pub fn insert(&mut self, obj: GeoMultimediaObject) -> Result<()> {
        let sig = self.check_object(&obj)?;
        let entry = Entry {
            mbr: Mbr::point(obj.location),
            sig: sig.clone(),
            child: Child::Object(0),
        };
        let slot = self.store(obj, sig);
        let entry = Entry {
            child: Child::Object(slot),
            ..entry
        };
        if let Some(sibling) = self.insert_into(self.root, entry) {
            let old_root = self.root;
            let level = self.nodes[old_root].level + 1;
            let left = self.entry_for(old_root);
            let new_root = self.push_node(Node {
                level,
                entries: vec![left, sibling],
            });
            self.root = new_root;
        }
        Ok(())
    }

    fn push_node(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Entry describing `id` as seen from its parent.
    fn entry_for(&self, id: NodeId) -> Entry {
        let node = &self.nodes[id];
        Entry {
            mbr: node_mbr(node).expect("non-root nodes are never empty"),
            sig: node_signature(node, self.sig_params.bits),
            child: Child::Node(id),
        }
    }

    fn insert_into(&mut self, id: NodeId, entry: Entry) -> Option<Entry> {
        if self.nodes[id].is_leaf() {
            self.nodes[id].entries.push(entry);
        } else {
            let i = choose_subtree(&self.nodes[id].entries, &entry.mbr);
            let Child::Node(child) = self.nodes[id].entries[i].child else {
                unreachable!("internal entries point to nodes")
            };
            let grown_mbr = self.nodes[id].entries[i].mbr.union(&entry.mbr);
            let mut grown_sig = self.nodes[id].entries[i].sig.clone();
            grown_sig
                .or_assign(&entry.sig)
                .expect("signature lengths are uniform");
            match self.insert_into(child, entry) {
                None => {
                    let e = &mut self.nodes[id].entries[i];
                    e.mbr = grown_mbr;
                    e.sig = grown_sig;
                }
                Some(sibling) => {
                    self.nodes[id].entries[i] = self.entry_for(child);
                    self.nodes[id].entries.push(sibling);
                }
            }
        }
        if self.nodes[id].entries.len() > self.max_fanout {
            Some(self.split(id))
        } else {
            None
        }
    }

    /// Quadratic split of an overflowing node; returns the entry of the new sibling.
    fn split(&mut self, id: NodeId) -> Entry {
        let entries = std::mem::take(&mut self.nodes[id].entries);
        let (a, b) = quadratic_split(entries, self.min_fanout);
        let level = self.nodes[id].level;
        self.nodes[id].entries = a;
        let sibling = self.push_node(Node { level, entries: b });
        self.entry_for(sibling)
    }

    /// Ids of the objects located exactly at `p`.
    pub fn locate(&self, p: GeoPoint) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            for e in &self.nodes[id].entries {
                if !e.mbr.contains_point(p) {
                    continue;
                }
                match e.child {
                    Child::Node(c) => stack.push(c),
                    Child::Object(s) => {
                        if self.stored(s).location() == p {
                            out.push(self.stored(s).id());
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Structural check of every entry. Empty iff the tree is valid.
    pub fn audit(&self) -> Vec<AuditViolation> {
        let mut out = Vec::new();
        let bits = self.sig_params.bits;
        let mut reached = vec![0u32; self.objects.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let n = node.entries.len();
            let is_root = id == self.root;
            let fanout_ok = if is_root {
                n <= self.max_fanout && (n >= 1 || self.objects.is_empty())
            } else {
                (self.min_fanout..=self.max_fanout).contains(&n)
            };
            if !fanout_ok {
                out.push(AuditViolation::Fanout {
                    node: id,
                    entries: n,
                });
            }
            for (i, e) in node.entries.iter().enumerate() {
                if e.sig.len() != bits {
                    out.push(AuditViolation::SignatureLength { node: id, entry: i });
                    continue;
                }
                match e.child {
                    Child::Node(c) => {
                        let child = &self.nodes[c];
                        if child.level + 1 != node.level {
                            out.push(AuditViolation::LevelMismatch { node: c });
                        }
                        let covered_box = node_mbr(child).is_none_or(|m| e.mbr.contains(&m));
                        if !covered_box {
                            out.push(AuditViolation::BoxNotContained { node: id, entry: i });
                        }
                        if !node_signature(child, bits).is_subset_of(&e.sig) {
                            out.push(AuditViolation::SignatureNotCovered { node: id, entry: i });
                        }
                        stack.push(c);
                    }
                    Child::Object(s) => {
                        if !node.is_leaf() {
                            out.push(AuditViolation::LevelMismatch { node: id });
                        }
                        let Some(obj) = self.objects.get(s as usize) else {
                            out.push(AuditViolation::DanglingObject { node: id, entry: i });
                            continue;
                        };
                        reached[s as usize] += 1;
                        if !e.mbr.contains_point(obj.location()) {
                            out.push(AuditViolation::BoxNotContained { node: id, entry: i });
                        }
                        if e.sig != obj.signature
                            || obj.signature != self.sig_params.sign(obj.semantic())
                        {
                            out.push(AuditViolation::LeafSignatureMismatch { node: id, entry: i });
                        }
                    }
                }
            }
        }
        for (slot, &count) in reached.iter().enumerate() {
            if count != 1 {
                out.push(AuditViolation::Reachability {
                    object: self.objects[slot].id(),
                    times: count,
                });
            }
        }
        let extent = Mbr::enclosing(self.objects.iter().map(StoredObject::location));
        if self.root_mbr() != extent {
            out.push(AuditViolation::RootBox);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditViolation {
    BoxNotContained { node: NodeId, entry: usize },
    SignatureNotCovered { node: NodeId, entry: usize },
    LeafSignatureMismatch { node: NodeId, entry: usize },
    SignatureLength { node: NodeId, entry: usize },
    Fanout { node: NodeId, entries: usize },
    LevelMismatch { node: NodeId },
    DanglingObject { node: NodeId, entry: usize },
    Reachability { object: ObjectId, times: u32 },
    RootBox,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BoxNotContained { node, entry } => {
                write!(
                    f,
                    "node {node} entry {entry}: box does not contain its child"
                )
            }
            Self::SignatureNotCovered { node, entry } => {
                write!(f, "node {node} entry {entry}: signature misses child bits")
            }
            Self::LeafSignatureMismatch { node, entry } => {
                write!(
                    f,
                    "node {node} entry {entry}: leaf signature differs from object"
                )
            }
            Self::SignatureLength { node, entry } => {
                write!(f, "node {node} entry {entry}: wrong signature length")
            }
            Self::Fanout { node, entries } => write!(f, "node {node}: {entries} entries"),
            Self::LevelMismatch { node } => write!(f, "node {node}: inconsistent level"),
            Self::DanglingObject { node, entry } => {
                write!(f, "node {node} entry {entry}: unknown object slot")
            }
            Self::Reachability { object, times } => {
                write!(f, "object {object} reachable {times} times")
            }
            Self::RootBox => write!(f, "root box differs from the object extent"),
        }
    }
}

pub(crate) fn node_mbr(node: &Node) -> Option<Mbr> {
    let mut it = node.entries.iter();
    let first = it.next()?.mbr;
    Some(it.fold(first, |acc, e| acc.union(&e.mbr)))
}

pub(crate) fn node_signature(node: &Node, bits: usize) -> Signature {
    let mut s = Signature::zeros(bits);
    for e in &node.entries {
        s.or_assign(&e.sig).expect("signature lengths are uniform");
    }
    s
}

fn perimeter(m: &Mbr) -> f64 {
    (m.max.x - m.min.x) + (m.max.y - m.min.y)
}

/// Least area enlargement, then least perimeter enlargement, then smallest area.
fn choose_subtree(entries: &[Entry], mbr: &Mbr) -> usize {
    let key = |e: &Entry| {
        let u = e.mbr.union(mbr);
        (
            u.area() - e.mbr.area(),
            perimeter(&u) - perimeter(&e.mbr),
            e.mbr.area(),
        )
    };
    let mut best = 0;
    let mut best_key = key(&entries[0]);
    for (i, e) in entries.iter().enumerate().skip(1) {
        let k = key(e);
        if k.0 < best_key.0
            || (k.0 == best_key.0 && (k.1 < best_key.1 || (k.1 == best_key.1 && k.2 < best_key.2)))
        {
            best = i;
            best_key = k;
        }
    }
    best
}

/// Guttman's quadratic split, with perimeter as tie-breaker for degenerate
/// (zero-area) boxes such as collinear points.
fn quadratic_split(mut entries: Vec<Entry>, min_fill: usize) -> (Vec<Entry>, Vec<Entry>) {
    let n = entries.len();
    let waste = |a: &Mbr, b: &Mbr| {
        let u = a.union(b);
        (
            u.area() - a.area() - b.area(),
            perimeter(&u) - perimeter(a) - perimeter(b),
        )
    };
    let (mut s1, mut s2) = (0, 1);
    let mut worst = waste(&entries[0].mbr, &entries[1].mbr);
    for i in 0..n {
        for j in i + 1..n {
            let w = waste(&entries[i].mbr, &entries[j].mbr);
            if w.0 > worst.0 || (w.0 == worst.0 && w.1 > worst.1) {
                worst = w;
                s1 = i;
                s2 = j;
            }
        }
    }
    // remove the higher index first so the lower stays valid
    let seed2 = entries.swap_remove(s2);
    let seed1 = entries.swap_remove(s1);
    let mut box1 = seed1.mbr;
    let mut box2 = seed2.mbr;
    let mut g1 = vec![seed1];
    let mut g2 = vec![seed2];

    while !entries.is_empty() {
        if g1.len() + entries.len() == min_fill {
            for e in entries.drain(..) {
                box1 = box1.union(&e.mbr);
                g1.push(e);
            }
            break;
        }
        if g2.len() + entries.len() == min_fill {
            for e in entries.drain(..) {
                box2 = box2.union(&e.mbr);
                g2.push(e);
            }
            break;
        }
        let enlarge = |b: &Mbr, e: &Entry| {
            let u = b.union(&e.mbr);
            (u.area() - b.area(), perimeter(&u) - perimeter(b))
        };
        let mut pick = 0;
        let mut pick_diff = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, e) in entries.iter().enumerate() {
            let d1 = enlarge(&box1, e);
            let d2 = enlarge(&box2, e);
            let diff = ((d1.0 - d2.0).abs(), (d1.1 - d2.1).abs());
            if diff.0 > pick_diff.0 || (diff.0 == pick_diff.0 && diff.1 > pick_diff.1) {
                pick = i;
                pick_diff = diff;
            }
        }
        let e = entries.swap_remove(pick);
        let d1 = enlarge(&box1, &e);
        let d2 = enlarge(&box2, &e);
        let to_first = match d1.0.total_cmp(&d2.0).then(d1.1.total_cmp(&d2.1)) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => match box1.area().total_cmp(&box2.area()) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => g1.len() <= g2.len(),
            },
        };
        if to_first {
            box1 = box1.union(&e.mbr);
            g1.push(e);
        } else {
            box2 = box2.union(&e.mbr);
            g2.push(e);
        }
    }
    (g1, g2)
}
