//! Tab-separated dataset records.
//!
//! ```text
//! #gmrsearch	d_T=32	d_I=48	classes=10
//! 0	12.5	-3.25	I	4	0.1,0.2,...	0.05,0.6,...
//! -	7.0	1.0	T	-	0.3,0.0,...
//! ```
//!
//! Fields: id (`-` assigns the record's ordinal), x, y, modality tag (`T` or
//! `I`), label (`-` when absent), comma-separated feature values, and an
//! optional seventh field holding the semantic vector. Blank lines and `#`
//! comment lines after the header are skipped. Floats are written in Rust's
//! shortest round-trip form, so export followed by ingest is lossless.

// the example above uses real tab characters
#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    Dataset, FeatureVector, GeoMultimediaObject, GeoPoint, Modality, SemanticVector,
};

const HEADER_TAG: &str = "#gmrsearch";

/// Serializes `ds` in the record format.
pub fn to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{HEADER_TAG}\td_T={}\td_I={}",
        ds.text_dim, ds.image_dim
    );
    if let Some(c) = ds.class_count {
        let _ = write!(out, "\tclasses={c}");
    }
    out.push('\n');
    for o in &ds.objects {
        let _ = write!(
            out,
            "{}\t{:?}\t{:?}\t{}\t",
            o.id,
            o.location.x,
            o.location.y,
            o.feature.modality.tag()
        );
        match o.label {
            Some(l) => {
                let _ = write!(out, "{l}");
            }
            None => out.push('-'),
        }
        out.push('\t');
        push_floats(&mut out, &o.feature.values);
        if let Some(s) = &o.semantic {
            out.push('\t');
            push_floats(&mut out, s.as_slice());
        }
        out.push('\n');
    }
    out
}

fn push_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
}

struct Header {
    text_dim: usize,
    image_dim: usize,
    class_count: Option<usize>,
}

fn parse_header(line: &str) -> Result<Header> {
    let err = |message: String| Error::Parse { line: 1, message };
    let mut fields = line.split('\t');
    if fields.next() != Some(HEADER_TAG) {
        return Err(err(format!("header must start with {HEADER_TAG}")));
    }
    let (mut dt, mut di, mut classes) = (None, None, None);
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| err(format!("header field {f:?} is not key=value")))?;
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| err(format!("header value {value:?} is not an integer")))?;
        match key.trim() {
            "d_T" => dt = Some(n),
            "d_I" => di = Some(n),
            "classes" => classes = Some(n),
            other => return Err(err(format!("unknown header key {other:?}"))),
        }
    }
    Ok(Header {
        text_dim: dt.ok_or_else(|| err("header lacks d_T".into()))?,
        image_dim: di.ok_or_else(|| err("header lacks d_I".into()))?,
        class_count: classes,
    })
}

fn parse_floats(s: &str, line: usize, what: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{what}: {v:?} is not a number"),
            })
        })
        .collect()
}

/// Parses records without validating dataset invariants.
pub fn parse_unvalidated(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break parse_header(l.trim_end_matches('\r'))?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
    };

    let mut objects = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(6..=7).contains(&fields.len()) {
            return Err(perr(format!(
                "expected 6 or 7 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let id = match fields[0].trim() {
            "-" => objects.len() as u64,
            s => s.parse().map_err(|_| perr(format!("bad id {s:?}")))?,
        };
        let coord = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| perr(format!("bad coordinate {s:?}")))
        };
        let location = GeoPoint::new(coord(fields[1])?, coord(fields[2])?);
        let modality = match fields[3].trim() {
            "T" => Modality::Text,
            "I" => Modality::Image,
            s => return Err(perr(format!("bad modality tag {s:?}"))),
        };
        let label = match fields[4].trim() {
            "-" => None,
            s => Some(s.parse().map_err(|_| perr(format!("bad label {s:?}")))?),
        };
        let values = parse_floats(fields[5], line_no, "feature")?;
        let expected = match modality {
            Modality::Text => header.text_dim,
            Modality::Image => header.image_dim,
        };
        if values.len() != expected {
            return Err(perr(format!(
                "{modality} feature has {} values, header declares {expected}",
                values.len()
            )));
        }
        let semantic = match fields.get(6) {
            Some(s) => {
                let p = parse_floats(s, line_no, "semantic")?;
                if let Some(c) = header.class_count {
                    if p.len() != c {
                        return Err(perr(format!(
                            "semantic vector has {} values, header declares {c} classes",
                            p.len()
                        )));
                    }
                }
                Some(SemanticVector::new(p).map_err(|e| perr(e.to_string()))?)
            }
            None => None,
        };
        objects.push(GeoMultimediaObject {
            id,
            location,
            feature: FeatureVector::new(modality, values),
            semantic,
            label,
        });
    }
    Ok(Dataset::new(
        objects,
        header.text_dim,
        header.image_dim,
        header.class_count,
    ))
}

/// Parses and validates; any invariant violation is an error.
pub fn parse(text: &str) -> Result<Dataset> {
    let ds = parse_unvalidated(text)?;
    let violations = ds.validate();
    if !violations.is_empty() {
        let shown: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        let more = violations.len().saturating_sub(5);
        let mut msg = shown.join("; ");
        if more > 0 {
            let _ = write!(msg, "; and {more} more");
        }
        return Err(Error::InvalidDataset(msg));
    }
    Ok(ds)
}

pub fn read(path: &Path) -> Result<Dataset> {
    let bytes = super::read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
        line: 0,
        message: format!("{} is not utf-8", path.display()),
    })?;
    parse(&text)
}

pub fn write(ds: &Dataset, path: &Path) -> Result<()> {
    super::write_file(path, to_string(ds).as_bytes())
}
