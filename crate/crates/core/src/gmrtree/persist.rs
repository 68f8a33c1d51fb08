//! Binary index files.
//!
//! Body: signature length and threshold, min/max fanout, class count, root
//! node id, the object table (id, location, modality, label, feature,
//! semantic), then the node arena. Each entry stores its box, signature words
//! and child reference. A decoded tree is audited before it is returned.

use std::collections::HashMap;
use std::path::Path;

use super::{Child, Entry, GmrTree, Node, StoredObject};
use crate::error::{Error, Result};
use crate::format::binary::{Decoder, Encoder};
use crate::format::{read_file, write_file};
use crate::model::{FeatureVector, GeoMultimediaObject, GeoPoint, Modality, SemanticVector};
use crate::scoring::Mbr;
use crate::signature::{Signature, SignatureParams};

const MAGIC: &[u8; 8] = b"GMRINDEX";
const VERSION: u32 = 1;

const TAG_NODE: u8 = 0;
const TAG_OBJECT: u8 = 1;

impl GmrTree {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new(MAGIC, VERSION);
        e.len(self.sig_params.bits);
        e.f64(self.sig_params.threshold);
        e.len(self.min_fanout);
        e.len(self.max_fanout);
        e.len(self.class_count);
        e.len(self.root);

        e.len(self.objects.len());
        for so in &self.objects {
            let o = &so.object;
            e.u64(o.id);
            e.f64(o.location.x);
            e.f64(o.location.y);
            e.u8(match o.feature.modality {
                Modality::Text => 0,
                Modality::Image => 1,
            });
            match o.label {
                None => e.u8(0),
                Some(l) => {
                    e.u8(1);
                    e.len(l);
                }
            }
            e.f64s(&o.feature.values);
            e.f64s(so.semantic().as_slice());
        }

        e.len(self.nodes.len());
        for node in &self.nodes {
            e.u32(node.level);
            e.len(node.entries.len());
            for entry in &node.entries {
                e.f64(entry.mbr.min.x);
                e.f64(entry.mbr.min.y);
                e.f64(entry.mbr.max.x);
                e.f64(entry.mbr.max.y);
                for &w in entry.sig.words() {
                    e.u64(w);
                }
                match entry.child {
                    Child::Node(id) => {
                        e.u8(TAG_NODE);
                        e.len(id);
                    }
                    Child::Object(slot) => {
                        e.u8(TAG_OBJECT);
                        e.u32(slot);
                    }
                }
            }
        }
        e.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (mut d, version) = Decoder::new("index", bytes, MAGIC)?;
        if version != VERSION {
            return Err(d.corrupt(format!("unsupported version {version}")));
        }
        let bits = d.len()?;
        let threshold = d.f64()?;
        let sig_params =
            SignatureParams::new(bits, threshold).map_err(|e| d.corrupt(e.to_string()))?;
        let min_fanout = d.len()?;
        let max_fanout = d.len()?;
        let class_count = d.len()?;
        let root = d.u64()?;

        let object_count = d.len()?;
        let mut objects = Vec::with_capacity(object_count.min(1 << 20));
        let mut slots = HashMap::with_capacity(object_count.min(1 << 20));
        for slot in 0..object_count {
            let id = d.u64()?;
            let location = GeoPoint::new(d.f64()?, d.f64()?);
            let modality = match d.u8()? {
                0 => Modality::Text,
                1 => Modality::Image,
                t => return Err(d.corrupt(format!("bad modality tag {t}"))),
            };
            let label = match d.u8()? {
                0 => None,
                1 => Some(d.u64()? as usize),
                t => return Err(d.corrupt(format!("bad label tag {t}"))),
            };
            let values = d.f64s()?;
            let semantic = SemanticVector::new(d.f64s()?).map_err(|e| d.corrupt(e.to_string()))?;
            if semantic.len() != class_count {
                return Err(d.corrupt(format!("object {id} has {} concepts", semantic.len())));
            }
            if slots.insert(id, slot as u32).is_some() {
                return Err(d.corrupt(format!("duplicate object id {id}")));
            }
            let signature = sig_params.sign(&semantic);
            objects.push(StoredObject {
                object: GeoMultimediaObject {
                    id,
                    location,
                    feature: FeatureVector::new(modality, values),
                    semantic: Some(semantic),
                    label,
                },
                signature,
            });
        }

        let node_count = d.len()?;
        let words = bits.div_ceil(64);
        let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
        for _ in 0..node_count {
            let level = d.u32()?;
            let n = d.len()?;
            let mut entries = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let min = GeoPoint::new(d.f64()?, d.f64()?);
                let max = GeoPoint::new(d.f64()?, d.f64()?);
                let mbr = Mbr::new(min, max).map_err(|e| d.corrupt(e.to_string()))?;
                let w = (0..words).map(|_| d.u64()).collect::<Result<Vec<_>>>()?;
                let sig = Signature::from_words(bits, w).map_err(|e| d.corrupt(e.to_string()))?;
                let child = match d.u8()? {
                    TAG_NODE => {
                        let id = d.u64()?;
                        if id >= node_count as u64 {
                            return Err(d.corrupt(format!("child node {id} out of range")));
                        }
                        Child::Node(id as usize)
                    }
                    TAG_OBJECT => {
                        let slot = d.u32()?;
                        if slot as usize >= object_count {
                            return Err(d.corrupt(format!("object slot {slot} out of range")));
                        }
                        Child::Object(slot)
                    }
                    t => return Err(d.corrupt(format!("bad child tag {t}"))),
                };
                entries.push(Entry { mbr, sig, child });
            }
            nodes.push(Node { level, entries });
        }
        if root >= node_count as u64 {
            return Err(d.corrupt(format!("root {root} out of range")));
        }
        let root = root as usize;
        d.finish()?;

        let tree = Self {
            nodes,
            root,
            min_fanout,
            max_fanout,
            sig_params,
            class_count,
            objects,
            slots,
        };
        // a cyclic child graph would make the audit loop forever
        check_acyclic(&tree)?;
        let violations = tree.audit();
        if let Some(v) = violations.first() {
            return Err(Error::Corrupt {
                kind: "index",
                message: format!("{} structural violations, first: {v}", violations.len()),
            });
        }
        Ok(tree)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?)
    }
}

/// Every child must sit exactly one level below its parent, which rules out cycles.
fn check_acyclic(tree: &GmrTree) -> Result<()> {
    for node in &tree.nodes {
        for e in &node.entries {
            if let Child::Node(c) = e.child {
                if tree.nodes[c].level + 1 != node.level {
                    return Err(Error::Corrupt {
                        kind: "index",
                        message: "node levels are inconsistent".into(),
                    });
                }
            }
        }
    }
    Ok(())
}
