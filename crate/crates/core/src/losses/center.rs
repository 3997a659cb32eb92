use serde::{Deserialize, Serialize};

use super::{check_labels, LossResult};
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// One center per intent class, shared across languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterBank {
    centers: Matrix,
    rate: f64,
}

impl CenterBank {
    /// Zero-initialized centers.
    pub fn new(classes: usize, dim: usize, rate: f64) -> Result<Self> {
        Self::from_centers(Matrix::zeros(classes, dim), rate)
    }

    pub fn from_centers(centers: Matrix, rate: f64) -> Result<Self> {
        if centers.rows() == 0 {
            return Err(Error::Config("center bank needs at least one class".into()));
        }
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Config(format!("center update rate {rate} outside (0, 1]")));
        }
        Ok(Self { centers, rate })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn classes(&self) -> usize {
        self.centers.rows()
    }
}

/// `½ Σᵢ ‖uᵢ − c_{yᵢ}‖²` with the centers held constant.
pub fn center_loss_eval(bank: &CenterBank, embeddings: &Matrix, labels: &[usize]) -> Result<LossResult> {
    check_labels(labels, embeddings.rows(), bank.classes())?;
    if embeddings.cols() != bank.centers.cols() {
        return Err(Error::shape("center_loss_eval", bank.centers.cols(), embeddings.cols()));
    }
    let mut grad = Matrix::zeros(embeddings.rows(), embeddings.cols());
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let c = bank.centers.row(y);
        for ((g, &u), &cj) in grad.row_mut(i).iter_mut().zip(embeddings.row(i)).zip(c) {
            let diff = u - cj;
            *g = diff;
            total += diff * diff;
        }
    }
    Ok(LossResult::inputs_only(0.5 * total, vec![grad]))
}

/// Moves each present class center toward its batch members:
/// `Δc_j = Σ_{yᵢ=j}(c_j − uᵢ) / (1 + n_j)`, `c_j ← c_j − rate·Δc_j`.
pub fn center_bank_update(bank: &mut CenterBank, embeddings: &Matrix, labels: &[usize]) -> Result<()> {
    check_labels(labels, embeddings.rows(), bank.classes())?;
    if embeddings.cols() != bank.centers.cols() {
        return Err(Error::shape("center_bank_update", bank.centers.cols(), embeddings.cols()));
    }
    let (classes, dim) = bank.centers.shape();
    let mut delta = Matrix::zeros(classes, dim);
    let mut counts = vec![0usize; classes];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        let c = bank.centers.row(y).to_vec();
        for ((d, &cj), &u) in delta.row_mut(y).iter_mut().zip(&c).zip(embeddings.row(i)) {
            *d += cj - u;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let scale = bank.rate / (1 + n) as f64;
        let d = delta.row(j).to_vec();
        for (c, dj) in bank.centers.row_mut(j).iter_mut().zip(d) {
            *c -= scale * dj;
        }
    }
    Ok(())
}
