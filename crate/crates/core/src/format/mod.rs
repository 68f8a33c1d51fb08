//! On-disk formats.
//!
//! * [`tsv`]: line-oriented dataset records, one object per line.
//! * [`space`]: binary semantic-space model.
//! * index files are written by [`crate::gmrtree::GmrTree::save`].
//!
//! Binary files share one layout: an 8-byte magic, a little-endian `u32`
//! format version, then the body. Floats are stored as raw IEEE-754 bits so
//! round trips are exact.

pub mod binary;
pub mod space;
pub mod tsv;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
