//! Canonical-correlation projection of paired text/image features.

use crate::error::{Error, Result};
use crate::linalg::{norm, symmetric_eigen, Matrix};
use crate::model::Modality;

const CORRELATION_TOLERANCE: f64 = 1e-6;
const EIGEN_TOLERANCE: f64 = 1e-15;
const EIGEN_MAX_SWEEPS: usize = 200;

/// Diagonal loading added to each covariance before factorisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// Add this value to every diagonal entry.
    Absolute(f64),
    /// Add `factor * trace(cov) / d`, computed per modality. Invariant to
    /// rescaling the features.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-6)
    }
}

impl Ridge {
    fn amount(self, cov: &Matrix) -> f64 {
        match self {
            Ridge::Absolute(v) => v,
            Ridge::Relative(f) => f * cov.trace() / cov.rows().max(1) as f64,
        }
    }

    fn value(self) -> f64 {
        match self {
            Ridge::Absolute(v) | Ridge::Relative(v) => v,
        }
    }
}

/// Leading canonical direction pairs plus the centring means.
///
/// Row `j` of `text_directions` / `image_directions` is the `j`-th direction
/// pair; each is scaled to unit variance under its (ridged) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrProjModel {
    text_directions: Matrix,
    image_directions: Matrix,
    correlations: Vec<f64>,
    text_mean: Vec<f64>,
    image_mean: Vec<f64>,
}

impl CorrProjModel {
    pub fn new(
        text_directions: Matrix,
        image_directions: Matrix,
        correlations: Vec<f64>,
        text_mean: Vec<f64>,
        image_mean: Vec<f64>,
    ) -> Result<Self> {
        let gamma = correlations.len();
        if gamma == 0 {
            return Err(Error::InvalidArgument("gamma must be at least 1".into()));
        }
        if text_directions.rows() != gamma || image_directions.rows() != gamma {
            return Err(Error::dim(
                gamma,
                text_directions.rows().min(image_directions.rows()),
                "direction count",
            ));
        }
        if text_mean.len() != text_directions.cols() {
            return Err(Error::dim(
                text_directions.cols(),
                text_mean.len(),
                "text mean",
            ));
        }
        if image_mean.len() != image_directions.cols() {
            return Err(Error::dim(
                image_directions.cols(),
                image_mean.len(),
                "image mean",
            ));
        }
        if gamma > text_directions.cols().min(image_directions.cols()) {
            return Err(Error::InvalidArgument(format!(
                "gamma = {gamma} exceeds min(d_T, d_I)"
            )));
        }
        let in_range = correlations
            .iter()
            .all(|c| (-CORRELATION_TOLERANCE..=1.0 + CORRELATION_TOLERANCE).contains(c));
        let sorted = correlations
            .windows(2)
            .all(|w| w[0] + CORRELATION_TOLERANCE >= w[1]);
        if !in_range || !sorted {
            return Err(Error::InvalidArgument(
                "correlations must lie in [0, 1] and be nonincreasing".into(),
            ));
        }
        Ok(Self {
            text_directions,
            image_directions,
            correlations,
            text_mean,
            image_mean,
        })
    }

    pub fn gamma(&self) -> usize {
        self.correlations.len()
    }

    pub fn text_dim(&self) -> usize {
        self.text_mean.len()
    }

    pub fn image_dim(&self) -> usize {
        self.image_mean.len()
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    pub fn text_directions(&self) -> &Matrix {
        &self.text_directions
    }

    pub fn image_directions(&self) -> &Matrix {
        &self.image_directions
    }

    pub fn text_mean(&self) -> &[f64] {
        &self.text_mean
    }

    pub fn image_mean(&self) -> &[f64] {
        &self.image_mean
    }

    pub fn project_text(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.project(Modality::Text, values)
    }

    pub fn project_image(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.project(Modality::Image, values)
    }

    /// `directions · (values - mean)` for the given modality.
    pub fn project(&self, modality: Modality, values: &[f64]) -> Result<Vec<f64>> {
        let (dirs, mean) = match modality {
            Modality::Text => (&self.text_directions, &self.text_mean),
            Modality::Image => (&self.image_directions, &self.image_mean),
        };
        if values.len() != mean.len() {
            return Err(Error::dim(mean.len(), values.len(), "feature to project"));
        }
        Ok(dirs
            .row_iter()
            .map(|d| {
                d.iter()
                    .zip(values.iter().zip(mean))
                    .map(|(w, (v, m))| w * (v - m))
                    .sum()
            })
            .collect())
    }

    /// Projects every row of `features`.
    pub fn project_rows(&self, modality: Modality, features: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(features.rows(), self.gamma());
        for i in 0..features.rows() {
            let p = self.project(modality, features.row(i))?;
            out.row_mut(i).copy_from_slice(&p);
        }
        Ok(out)
    }
}

/// Fits the top-`gamma` canonical direction pairs of row-paired samples.
///
/// With `L_T L_Tᵀ = Σ_TT + r_T I` and `L_I L_Iᵀ = Σ_II + r_I I`, the whitened
/// cross-covariance `K = L_T⁻¹ Σ_TI L_I⁻ᵀ` is formed and `K Kᵀ` is
/// diagonalised. Eigenvalue `ρ²` with eigenvector `u` gives text direction
/// `L_T⁻ᵀ u` and image direction `L_I⁻ᵀ Kᵀu / ρ`.
pub fn fit_corr_proj(
    text: &Matrix,
    image: &Matrix,
    gamma: usize,
    ridge: Ridge,
) -> Result<CorrProjModel> {
    let n = text.rows();
    if image.rows() != n {
        return Err(Error::dim(n, image.rows(), "paired sample count"));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 paired samples, got {n}"
        )));
    }
    let (dt, di) = (text.cols(), image.cols());
    if gamma == 0 || gamma > dt.min(di) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} outside [1, {}]",
            dt.min(di)
        )));
    }
    if ridge.value().is_nan() || ridge.value() < 0.0 {
        return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
    }

    let text_mean = text.column_means();
    let image_mean = image.column_means();
    let tc = text.centered(&text_mean);
    let ic = image.centered(&image_mean);
    let mut s_tt = tc.cross_covariance(&tc)?;
    let mut s_ii = ic.cross_covariance(&ic)?;
    let s_ti = tc.cross_covariance(&ic)?;
    let r_t = ridge.amount(&s_tt);
    let r_i = ridge.amount(&s_ii);
    s_tt.add_diagonal(r_t);
    s_ii.add_diagonal(r_i);
    let l_t = s_tt.cholesky().ok_or(Error::SingularCovariance("text"))?;
    let l_i = s_ii.cholesky().ok_or(Error::SingularCovariance("image"))?;

    // X = L_T⁻¹ Σ_TI, column by column
    let mut x = Matrix::zeros(dt, di);
    for j in 0..di {
        let col = l_t.solve_lower(&s_ti.column(j));
        for i in 0..dt {
            x[(i, j)] = col[i];
        }
    }
    // K = X L_I⁻ᵀ, row r of K is (L_I⁻¹ x_r)ᵀ
    let mut k = Matrix::zeros(dt, di);
    for r in 0..dt {
        let row = l_i.solve_lower(x.row(r));
        k.row_mut(r).copy_from_slice(&row);
    }
    let kt = k.transpose();
    let kkt = k.matmul(&kt)?;
    let (_, eigvecs) = symmetric_eigen(&kkt, EIGEN_TOLERANCE, EIGEN_MAX_SWEEPS);

    let mut text_dirs = Matrix::zeros(gamma, dt);
    let mut image_dirs = Matrix::zeros(gamma, di);
    let mut correlations = Vec::with_capacity(gamma);
    let mut whitened_image: Vec<Vec<f64>> = Vec::with_capacity(gamma);
    let scale = k
        .as_slice()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);

    for j in 0..gamma {
        let mut u = eigvecs.row(j).to_vec();
        // deterministic sign: largest-magnitude component positive
        let pivot = u
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if v.abs() > u[b].abs() { i } else { b });
        if u[pivot] < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        let w = kt.matvec(&u)?;
        let rho = norm(&w);
        let v = if rho > 1e-13 * scale {
            w.iter().map(|x| x / rho).collect()
        } else {
            orthogonal_complement_vector(&whitened_image, di)
        };
        let prev = correlations.last().copied().unwrap_or(1.0);
        correlations.push(rho.clamp(0.0, prev));

        text_dirs
            .row_mut(j)
            .copy_from_slice(&l_t.solve_lower_transpose(&u));
        image_dirs
            .row_mut(j)
            .copy_from_slice(&l_i.solve_lower_transpose(&v));
        whitened_image.push(v);
    }

    CorrProjModel::new(text_dirs, image_dirs, correlations, text_mean, image_mean)
}

/// A unit vector orthogonal to every row of `basis`, by Gram-Schmidt over
/// the standard basis. Used only for zero-correlation directions.
fn orthogonal_complement_vector(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for e in 0..dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        for b in basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
    vec![0.0; dim]
}
