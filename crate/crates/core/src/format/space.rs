//! Binary persistence of a [`SemanticSpaceModel`].
//!
//! Body: `d_T, d_I, gamma, classes` (u64 each), text mean, image mean,
//! correlations, text directions (row-major), image directions, text weights,
//! image weights, then an optional list of concept names.

use std::path::Path;

use super::binary::{Decoder, Encoder};
use crate::cosmat::{CorrProjModel, LogsTranModel, SemanticSpaceModel};
use crate::error::Result;
use crate::linalg::Matrix;

const MAGIC: &[u8; 8] = b"GMRSPACE";
const VERSION: u32 = 1;

pub fn encode(model: &SemanticSpaceModel) -> Vec<u8> {
    let cp = &model.corr_proj;
    let mut e = Encoder::new(MAGIC, VERSION);
    e.len(cp.text_dim());
    e.len(cp.image_dim());
    e.len(cp.gamma());
    e.len(model.class_count());
    e.f64s(cp.text_mean());
    e.f64s(cp.image_mean());
    e.f64s(cp.correlations());
    e.f64s(cp.text_directions().as_slice());
    e.f64s(cp.image_directions().as_slice());
    e.f64s(model.text_logs_tran.weights().as_slice());
    e.f64s(model.image_logs_tran.weights().as_slice());
    match &model.concept_names {
        None => e.u8(0),
        Some(names) => {
            e.u8(1);
            e.len(names.len());
            for n in names {
                e.str(n);
            }
        }
    }
    e.finish()
}

pub fn decode(bytes: &[u8]) -> Result<SemanticSpaceModel> {
    let (mut d, version) = Decoder::new("model", bytes, MAGIC)?;
    if version != VERSION {
        return Err(d.corrupt(format!("unsupported version {version}")));
    }
    let dt = d.len()?;
    let di = d.len()?;
    let gamma = d.len()?;
    let classes = d.len()?;
    let text_mean = d.f64s()?;
    let image_mean = d.f64s()?;
    let correlations = d.f64s()?;
    let matrix = |d: &mut Decoder, rows: usize, cols: usize| -> Result<Matrix> {
        let data = d.f64s()?;
        Matrix::from_vec(rows, cols, data).map_err(|_| d.corrupt("matrix shape"))
    };
    let td = matrix(&mut d, gamma, dt)?;
    let id = matrix(&mut d, gamma, di)?;
    let tw = matrix(&mut d, classes, gamma + 1)?;
    let iw = matrix(&mut d, classes, gamma + 1)?;
    let names = match d.u8()? {
        0 => None,
        1 => {
            let n = d.len()?;
            Some((0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?)
        }
        t => return Err(d.corrupt(format!("bad concept-name tag {t}"))),
    };
    d.finish()?;
    let cp = CorrProjModel::new(td, id, correlations, text_mean, image_mean)?;
    SemanticSpaceModel::new(
        cp,
        LogsTranModel::from_weights(tw)?,
        LogsTranModel::from_weights(iw)?,
        names,
    )
}

pub fn save(model: &SemanticSpaceModel, path: &Path) -> Result<()> {
    super::write_file(path, &encode(model))
}

pub fn load(path: &Path) -> Result<SemanticSpaceModel> {
    decode(&super::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn model() -> SemanticSpaceModel {
        let td = Matrix::from_vec(2, 3, vec![0.1, -0.2, 0.3, 1e-300, 5.5, -7.25]).unwrap();
        let id = Matrix::from_vec(2, 2, vec![1.0 / 3.0, 2.0, -0.5, 0.25]).unwrap();
        let cp = CorrProjModel::new(td, id, vec![0.9, 0.1], vec![0.5; 3], vec![-1.5, 2.0]).unwrap();
        let tw = Matrix::from_vec(3, 3, (0..9).map(|i| i as f64 * 0.7 - 2.0).collect()).unwrap();
        let iw = Matrix::from_vec(3, 3, (0..9).map(|i| (i as f64).sin()).collect()).unwrap();
        SemanticSpaceModel::new(
            cp,
            LogsTranModel::from_weights(tw).unwrap(),
            LogsTranModel::from_weights(iw).unwrap(),
            Some(vec!["cat".into(), "house".into(), "airplane".into()]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
        let mut m2 = m.clone();
        m2.concept_names = None;
        assert_eq!(decode(&encode(&m2)).unwrap(), m2);
    }

    #[test]
    fn truncated_and_foreign_input_rejected() {
        let bytes = encode(&model());
        for cut in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Corrupt { .. })));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
