use super::{check_labels, ClassifierHead, LossResult};
use crate::error::{Error, Result};
use crate::nn::{l2_normalize_rows, l2_normalize_rows_backward, Matrix};

/// Mean negative log-likelihood of `labels` under `softmax(logits)`.
pub fn softmax_ce_loss(logits: &Matrix, labels: &[usize]) -> Result<LossResult> {
    let (m, c) = logits.shape();
    if m == 0 {
        return Err(Error::Domain("softmax_ce_loss needs at least one row".into()));
    }
    check_labels(labels, m, c)?;
    let mut grad = Matrix::zeros(m, c);
    let mut total = 0.0;
    let inv_m = 1.0 / m as f64;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[y];
        let g = grad.row_mut(i);
        for (gj, &z) in g.iter_mut().zip(row) {
            *gj = (z - lse).exp() * inv_m;
        }
        g[y] -= inv_m;
    }
    Ok(LossResult::inputs_only(total * inv_m, vec![grad]))
}

/// Plain softmax classification on unnormalized embeddings.
pub fn softmax_head_loss(head: &ClassifierHead, embeddings: &Matrix, labels: &[usize]) -> Result<LossResult> {
    let cache = head.forward(embeddings)?;
    let ce = softmax_ce_loss(&cache.output, labels)?;
    let (gu, params) = head.backward(&cache, &ce.input_grads[0])?;
    Ok(LossResult {
        value: ce.value,
        input_grads: vec![gu],
        param_grads: params,
    })
}

/// Softmax loss on embeddings projected onto the radius-`alpha` hypersphere.
///
/// Gradients flow through the normalization Jacobian back to `embeddings`.
pub fn l2c_softmax_loss(
    head: &ClassifierHead,
    embeddings: &Matrix,
    labels: &[usize],
    alpha: f64,
) -> Result<LossResult> {
    let z = l2_normalize_rows(embeddings, alpha)?;
    let (value, gz, params) = head_ce_on_normalized(head, &z, labels)?;
    let gu = l2_normalize_rows_backward(embeddings, alpha, &gz)?;
    Ok(LossResult {
        value,
        input_grads: vec![gu],
        param_grads: params,
    })
}

/// Cross-entropy of the head on already-normalized rows; gradient is w.r.t. `z`.
pub(super) fn head_ce_on_normalized(
    head: &ClassifierHead,
    z: &Matrix,
    labels: &[usize],
) -> Result<(f64, Matrix, Vec<Matrix>)> {
    let cache = head.forward(z)?;
    let ce = softmax_ce_loss(&cache.output, labels)?;
    let (gz, params) = head.backward(&cache, &ce.input_grads[0])?;
    Ok((ce.value, gz, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{norm, AdamConfig};

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Matrix::zeros(4, 13);
        let r = softmax_ce_loss(&logits, &[0, 3, 7, 12]).unwrap();
        assert!((r.value - 13f64.ln()).abs() < 1e-12);
        assert!((r.value - 2.5649).abs() < 1e-4);
    }

    #[test]
    fn saturated_true_class() {
        let mut logits = Matrix::zeros(1, 3);
        logits.set(0, 1, 1e6);
        let r = softmax_ce_loss(&logits, &[1]).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(r.input_grads[0].is_finite());
    }

    #[test]
    fn batch_mean_of_rows() {
        let logits = Matrix::new(2, 3, vec![0.5, -1.0, 2.0, 3.0, 0.1, -0.7]).unwrap();
        let labels = [2, 1];
        let per_row = |row: &[f64], y: usize| -> f64 {
            let s: f64 = row.iter().map(|z| z.exp()).sum();
            -(row[y].exp() / s).ln()
        };
        let expect = (per_row(logits.row(0), 2) + per_row(logits.row(1), 1)) / 2.0;
        let r = softmax_ce_loss(&logits, &labels).unwrap();
        assert!((r.value - expect).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Matrix::zeros(1, 3);
        assert!(matches!(softmax_ce_loss(&logits, &[3]), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_head_gives_ln2() {
        let w = Matrix::new(2, 3, vec![0.3, -0.2, 0.9, 0.3, -0.2, 0.9]).unwrap();
        let head = ClassifierHead::from_parts(w, vec![0.1, 0.1], AdamConfig::default()).unwrap();
        let u = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, -4.0, 0.5, 0.0]).unwrap();
        let r = l2c_softmax_loss(&head, &u, &[0, 1], 50.0).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normalized_rows_have_norm_alpha() {
        let u = Matrix::new(3, 2, vec![1e-3, 2e-3, 40.0, -7.0, 0.1, 0.0]).unwrap();
        let z = l2_normalize_rows(&u, 50.0).unwrap();
        for row in z.row_iter() {
            assert!((norm(row) - 50.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_row_rejected() {
        let head = ClassifierHead::from_parts(Matrix::zeros(2, 2), vec![0.0, 0.0], AdamConfig::default()).unwrap();
        let u = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            l2c_softmax_loss(&head, &u, &[0, 1], 50.0),
            Err(Error::Degenerate(_))
        ));
    }
}
