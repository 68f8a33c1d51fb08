//! Multinomial logistic regression from projected features to class posteriors.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::SemanticVector;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Weight matrix with one row per class; the last column is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogsTranModel {
    weights: Matrix,
}

impl LogsTranModel {
    pub fn zeros(class_count: usize, input_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(class_count, input_dim + 1),
        }
    }

    pub fn from_weights(weights: Matrix) -> Result<Self> {
        if weights.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                weights.rows()
            )));
        }
        if weights.cols() < 1 {
            return Err(Error::InvalidArgument(
                "weight matrix has no bias column".into(),
            ));
        }
        if weights.as_slice().iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn class_count(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols() - 1
    }

    /// Class scores `W · [x; 1]`.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), x.len(), "logistic input"));
        }
        Ok(logits_unchecked(&self.weights, x))
    }

    /// Posterior over classes: softmax of the logits.
    pub fn to_semantic(&self, x: &[f64]) -> Result<SemanticVector> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(SemanticVector::from_softmax(z))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.to_semantic(x)?.argmax())
    }
}

fn logits_unchecked(w: &Matrix, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    w.row_iter()
        .map(|row| row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[d])
        .collect()
}

/// Max-shifted softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogsTranConfig {
    /// Penalty `l2 / 2 · ‖W‖²` on the non-bias weights.
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the largest absolute gradient entry falls below this.
    pub tol: f64,
}

impl Default for LogsTranConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iters: 5_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogsTranFit {
    pub model: LogsTranModel,
    /// Objective after each accepted step; `loss_history[0]` is the zero model.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Mean cross-entropy plus the L2 penalty, and its gradient.
pub fn objective(weights: &Matrix, projected: &Matrix, labels: &[usize], l2: f64) -> (f64, Matrix) {
    let n = projected.rows();
    let d = projected.cols();
    let c = weights.rows();
    let mut grad = Matrix::zeros(c, d + 1);
    let mut loss = 0.0;
    for (x, &y) in projected.row_iter().zip(labels) {
        let mut z = logits_unchecked(weights, x);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        for (k, zk) in z.iter_mut().enumerate() {
            let p = (*zk - lse).exp();
            let r = p - if k == y { 1.0 } else { 0.0 };
            let g = grad.row_mut(k);
            for (gj, xj) in g[..d].iter_mut().zip(x) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    let mut penalty = 0.0;
    for k in 0..c {
        let w = weights.row(k);
        let g = grad.row_mut(k);
        for j in 0..=d {
            g[j] *= inv_n;
            if j < d {
                g[j] += l2 * w[j];
                penalty += w[j] * w[j];
            }
        }
    }
    (loss + 0.5 * l2 * penalty, grad)
}

/// Penalised mean negative log-likelihood, without the gradient.
pub fn loss(weights: &Matrix, projected: &Matrix, labels: &[usize], l2: f64) -> f64 {
    let d = projected.cols();
    let mut loss = 0.0;
    for (x, &y) in projected.row_iter().zip(labels) {
        let z = logits_unchecked(weights, x);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
    }
    let penalty: f64 = weights
        .row_iter()
        .map(|w| w[..d].iter().map(|v| v * v).sum::<f64>())
        .sum();
    loss / projected.rows() as f64 + 0.5 * l2 * penalty
}

/// Full-batch gradient descent from zero weights. Each iteration starts at
/// step 1 and halves until the Armijo condition holds, so accepted steps
/// strictly decrease the objective.
pub fn fit_logs_tran(
    projected: &Matrix,
    labels: &[usize],
    class_count: usize,
    config: &LogsTranConfig,
) -> Result<LogsTranFit> {
    let n = projected.rows();
    if labels.len() != n {
        return Err(Error::dim(n, labels.len(), "label count"));
    }
    if class_count < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if n < class_count {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot cover {class_count} classes"
        )));
    }
    if config.l2.is_nan() || config.l2 < 0.0 {
        return Err(Error::InvalidArgument("l2 must be nonnegative".into()));
    }
    let mut counts = vec![0usize; class_count];
    for &y in labels {
        if y >= class_count {
            return Err(Error::LabelOutOfRange {
                label: y,
                class_count,
            });
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(empty));
    }

    let d = projected.cols();
    let mut w = Matrix::zeros(class_count, d + 1);
    let (mut current, mut grad) = objective(&w, projected, labels, config.l2);
    let mut history = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let gmax = grad.as_slice().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < config.tol {
            converged = true;
            break;
        }
        let gsq: f64 = grad.as_slice().iter().map(|g| g * g).sum();
        let mut step = 1.0;
        let accepted = loop {
            let trial = Matrix::from_vec(
                class_count,
                d + 1,
                w.as_slice()
                    .iter()
                    .zip(grad.as_slice())
                    .map(|(wi, gi)| wi - step * gi)
                    .collect(),
            )?;
            let trial_loss = loss(&trial, projected, labels, config.l2);
            if trial_loss <= current - ARMIJO * step * gsq && trial_loss < current {
                break Some(trial);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(next) = accepted else {
            // no descent possible at machine precision
            converged = true;
            break;
        };
        w = next;
        (current, grad) = objective(&w, projected, labels, config.l2);
        history.push(current);
        iterations += 1;
    }
    if !converged {
        let gmax = grad.as_slice().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = gmax < config.tol;
    }

    Ok(LogsTranFit {
        model: LogsTranModel::from_weights(w)?,
        loss_history: history,
        iterations,
        converged,
    })
}

/// Fraction of rows whose most probable class equals the label.
pub fn accuracy(model: &LogsTranModel, projected: &Matrix, labels: &[usize]) -> Result<f64> {
    let mut hits = 0usize;
    for (x, &y) in projected.row_iter().zip(labels) {
        if model.predict(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_is_uniform() {
        let m = LogsTranModel::zeros(4, 3);
        let s = m.to_semantic(&[10.0, -3.0, 0.5]).unwrap();
        assert!(s.as_slice().iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn saturated_bias_dominates() {
        let mut w = Matrix::zeros(3, 3);
        w[(1, 2)] = 1000.0;
        let m = LogsTranModel::from_weights(w).unwrap();
        let s = m.to_semantic(&[0.3, -0.2]).unwrap();
        assert!(s.as_slice()[1] >= 1.0 - 1e-9);
        assert!(s.as_slice().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let w = Matrix::from_vec(5, 4, (0..20).map(|_| rng.random_range(-2.0..2.0)).collect())
                .unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let m = LogsTranModel::from_weights(w.clone()).unwrap();
            let s = m.to_semantic(&x).unwrap();
            let raw: Vec<f64> = (0..5)
                .map(|k| (w[(k, 0)] * x[0] + w[(k, 1)] * x[1] + w[(k, 2)] * x[2] + w[(k, 3)]).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            for (a, b) in s.as_slice().iter().zip(&raw) {
                assert!((a - b / total).abs() < 1e-12);
            }
            assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut w =
            Matrix::from_vec(4, 3, (0..12).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let x = [0.7, -1.3];
        let before = LogsTranModel::from_weights(w.clone())
            .unwrap()
            .to_semantic(&x)
            .unwrap();
        for k in 0..4 {
            w[(k, 2)] += 123.0;
        }
        let after = LogsTranModel::from_weights(w)
            .unwrap()
            .to_semantic(&x)
            .unwrap();
        for (a, b) in before.as_slice().iter().zip(after.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_two_class_toy_reaches_full_accuracy() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..50 {
            rows.push([-1.0]);
            labels.push(0);
            rows.push([1.0]);
            labels.push(1);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        // sign-threshold oracle confirms separability
        assert!(rows
            .iter()
            .zip(&labels)
            .all(|(r, &y)| (r[0] > 0.0) == (y == 1)));
        let cfg = LogsTranConfig {
            l2: 1e-4,
            ..LogsTranConfig::default()
        };
        let fit = fit_logs_tran(&x, &labels, 2, &cfg).unwrap();
        assert_eq!(accuracy(&fit.model, &x, &labels).unwrap(), 1.0);
        assert!(fit.loss_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Matrix::from_vec(
            30,
            3,
            (0..90).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let w =
            Matrix::from_vec(4, 4, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (_, g) = objective(&w, &x, &labels, 0.05);
        let h = 1e-5;
        let mut err = 0.0;
        let mut scale = 0.0;
        for idx in 0..16 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[(idx / 4, idx % 4)] += h;
            wm[(idx / 4, idx % 4)] -= h;
            let fd = (loss(&wp, &x, &labels, 0.05) - loss(&wm, &x, &labels, 0.05)) / (2.0 * h);
            err += (fd - g.as_slice()[idx]).powi(2);
            scale += fd * fd;
        }
        assert!(err.sqrt() / scale.sqrt() < 1e-4);
    }

    #[test]
    fn fit_errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(
            fit_logs_tran(&x, &[0, 1, 5], 3, &LogsTranConfig::default()),
            Err(Error::LabelOutOfRange { label: 5, .. })
        ));
        assert!(matches!(
            fit_logs_tran(&x, &[0, 0, 2], 3, &LogsTranConfig::default()),
            Err(Error::EmptyClass(1))
        ));
        assert!(fit_logs_tran(&x, &[0, 1, 0], 4, &LogsTranConfig::default()).is_err());
        assert!(LogsTranModel::zeros(2, 2).to_semantic(&[1.0]).is_err());
    }

    #[test]
    fn deterministic_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Matrix::from_vec(
            40,
            2,
            (0..80).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let cfg = LogsTranConfig {
            max_iters: 200,
            ..LogsTranConfig::default()
        };
        let a = fit_logs_tran(&x, &labels, 3, &cfg).unwrap();
        let b = fit_logs_tran(&x, &labels, 3, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }
}
