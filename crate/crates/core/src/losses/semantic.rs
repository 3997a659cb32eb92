use super::softmax::head_ce_on_normalized;
use super::{center_loss_eval, CenterBank, ClassifierHead, LossResult};
use crate::error::Result;
use crate::nn::{l2_normalize_rows, l2_normalize_rows_backward, Matrix};

/// The combined classifier objective and its two components.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLoss {
    pub result: LossResult,
    pub softmax: f64,
    pub center: f64,
    /// The radius-`alpha` rows fed to both the head and the center term.
    pub normalized: Matrix,
}

/// `softmax + lambda · center`
#[inline]
pub fn combine_semantic(softmax: f64, center: f64, lambda: f64) -> f64 {
    softmax + lambda * center
}

/// L2-constrained softmax plus `lambda`-weighted center loss, both evaluated on
/// the normalized rows; gradients are returned w.r.t. the raw `embeddings`.
pub fn semantic_loss(
    head: &ClassifierHead,
    bank: &CenterBank,
    embeddings: &Matrix,
    labels: &[usize],
    alpha: f64,
    lambda: f64,
) -> Result<SemanticLoss> {
    let z = l2_normalize_rows(embeddings, alpha)?;
    let (softmax, mut gz, params) = head_ce_on_normalized(head, &z, labels)?;
    let center = center_loss_eval(bank, &z, labels)?;
    if lambda != 0.0 {
        gz.add_assign(&center.input_grads[0].scaled(lambda))?;
    }
    let gu = l2_normalize_rows_backward(embeddings, alpha, &gz)?;
    Ok(SemanticLoss {
        result: LossResult {
            value: combine_semantic(softmax, center.value, lambda),
            input_grads: vec![gu],
            param_grads: params,
        },
        softmax,
        center: center.value,
        normalized: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::l2c_softmax_loss;
    use crate::nn::AdamConfig;

    fn fixture() -> (ClassifierHead, CenterBank, Matrix, Vec<usize>) {
        let w = Matrix::new(2, 3, vec![0.2, -0.4, 0.1, -0.3, 0.5, 0.7]).unwrap();
        let head = ClassifierHead::from_parts(w, vec![0.05, -0.1], AdamConfig::default()).unwrap();
        let centers = Matrix::new(2, 3, vec![1.0, 2.0, 0.5, -3.0, 0.0, 4.0]).unwrap();
        let bank = CenterBank::from_centers(centers, 0.5).unwrap();
        let u = Matrix::new(2, 3, vec![0.3, 1.1, -0.2, -0.9, 0.4, 1.5]).unwrap();
        (head, bank, u, vec![0, 1])
    }

    #[test]
    fn lambda_zero_is_l2c_softmax() {
        let (head, bank, u, y) = fixture();
        let s = semantic_loss(&head, &bank, &u, &y, 50.0, 0.0).unwrap();
        let l = l2c_softmax_loss(&head, &u, &y, 50.0).unwrap();
        assert_eq!(s.result, l);
    }

    #[test]
    fn hand_combination() {
        assert!((combine_semantic(1.0, 2.0, 1e-4) - 1.0002).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_sum_of_parts() {
        let (head, bank, u, y) = fixture();
        let lambda = 0.37;
        let s = semantic_loss(&head, &bank, &u, &y, 50.0, lambda).unwrap();
        let l = l2c_softmax_loss(&head, &u, &y, 50.0).unwrap();
        let z = l2_normalize_rows(&u, 50.0).unwrap();
        let c = center_loss_eval(&bank, &z, &y).unwrap();
        let gc = l2_normalize_rows_backward(&u, 50.0, &c.input_grads[0]).unwrap();
        for i in 0..u.data().len() {
            let expect = l.input_grads[0].data()[i] + lambda * gc.data()[i];
            assert!((s.result.input_grads[0].data()[i] - expect).abs() < 1e-12);
        }
        assert_eq!(s.result.param_grads, l.param_grads);
        assert!((s.result.value - (l.value + lambda * c.value)).abs() < 1e-12);
    }
}
