use super::{check_labels, LossResult};
use crate::error::{Error, Result};
use crate::nn::{dot, norm, Matrix};

/// Pairwise margin loss: `d²` for same-intent pairs, `max(0, m − d)²` otherwise.
pub fn contrastive_loss(u1: &[f64], u2: &[f64], same: bool, margin: f64) -> Result<LossResult> {
    if u1.len() != u2.len() {
        return Err(Error::shape("contrastive_loss", u1.len(), u2.len()));
    }
    let diff: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
    let d = norm(&diff);
    let (value, coeff) = if same {
        (d * d, 2.0)
    } else if d < margin && d > 0.0 {
        let gap = margin - d;
        (gap * gap, -2.0 * gap / d)
    } else if d < margin {
        // coincident points: loss m², no defined direction
        (margin * margin, 0.0)
    } else {
        (0.0, 0.0)
    };
    let g1: Vec<f64> = diff.iter().map(|x| coeff * x).collect();
    let g2: Vec<f64> = g1.iter().map(|x| -x).collect();
    Ok(LossResult::inputs_only(
        value,
        vec![Matrix::row_vector(&g1)?, Matrix::row_vector(&g2)?],
    ))
}

/// Gradient of `cos(a, b)` w.r.t. `a`.
fn cosine_grad(a: &[f64], b: &[f64], na: f64, nb: f64, cos: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| bi / (na * nb) - cos * ai / (na * na))
        .collect()
}

/// Scaled-cosine softmax over one positive and `N − 1` negatives:
/// `−log(e^{s·cos(a,p)} / (e^{s·cos(a,p)} + Σⱼ e^{s·cos(a,nⱼ)}))`.
///
/// Input gradients are returned as `[anchor, positive, negatives]`.
pub fn npair_cosine_loss(anchor: &[f64], positive: &[f64], negatives: &Matrix, scale: f64) -> Result<LossResult> {
    let d = anchor.len();
    if positive.len() != d {
        return Err(Error::shape("npair_cosine_loss positive", d, positive.len()));
    }
    if negatives.rows() > 0 && negatives.cols() != d {
        return Err(Error::shape("npair_cosine_loss negatives", d, negatives.cols()));
    }
    let na = norm(anchor);
    let np = norm(positive);
    if na == 0.0 || np == 0.0 {
        return Err(Error::Degenerate("npair_cosine_loss: zero anchor or positive".into()));
    }
    let neg_norms: Vec<f64> = negatives.row_iter().map(norm).collect();
    if let Some(j) = neg_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!("npair_cosine_loss: zero negative {j}")));
    }

    let cos_p = dot(anchor, positive) / (na * np);
    let cos_n: Vec<f64> = negatives
        .row_iter()
        .zip(&neg_norms)
        .map(|(n, &nn)| dot(anchor, n) / (na * nn))
        .collect();
    let logits: Vec<f64> = std::iter::once(scale * cos_p)
        .chain(cos_n.iter().map(|c| scale * c))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let value = lse - logits[0];
    // dL/dlogit
    let probs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    let w_pos = scale * (probs[0] - 1.0);

    let mut ga: Vec<f64> = cosine_grad(anchor, positive, na, np, cos_p)
        .into_iter()
        .map(|g| w_pos * g)
        .collect();
    let gp: Vec<f64> = cosine_grad(positive, anchor, np, na, cos_p)
        .into_iter()
        .map(|g| w_pos * g)
        .collect();
    let mut gn = Matrix::zeros(negatives.rows(), d);
    for (j, (n, &nn)) in negatives.row_iter().zip(&neg_norms).enumerate() {
        let w = scale * probs[j + 1];
        for (gai, g) in ga.iter_mut().zip(cosine_grad(anchor, n, na, nn, cos_n[j])) {
            *gai += w * g;
        }
        for (gnj, g) in gn.row_mut(j).iter_mut().zip(cosine_grad(n, anchor, nn, na, cos_n[j])) {
            *gnj = w * g;
        }
    }
    Ok(LossResult::inputs_only(
        value,
        vec![Matrix::row_vector(&ga)?, Matrix::row_vector(&gp)?, gn],
    ))
}

/// Mean contrastive loss over every unordered pair in a labeled batch.
pub fn contrastive_batch_loss(embeddings: &Matrix, labels: &[usize], margin: f64) -> Result<LossResult> {
    check_labels(labels, embeddings.rows(), usize::MAX)?;
    let n = embeddings.rows();
    let mut grad = Matrix::zeros(n, embeddings.cols());
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 {
        return Ok(LossResult::inputs_only(0.0, vec![grad]));
    }
    let inv = 1.0 / pairs as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = contrastive_loss(embeddings.row(i), embeddings.row(j), labels[i] == labels[j], margin)?;
            total += r.value;
            for (g, x) in grad.row_mut(i).iter_mut().zip(r.input_grads[0].data()) {
                *g += inv * x;
            }
            for (g, x) in grad.row_mut(j).iter_mut().zip(r.input_grads[1].data()) {
                *g += inv * x;
            }
        }
    }
    Ok(LossResult::inputs_only(total * inv, vec![grad]))
}

/// Mean N-pair loss over the batch. Each row with a same-intent partner acts as
/// an anchor; its positive is the next same-intent row (cyclically) and its
/// negatives are the first `n − 1` rows of other intents in batch order.
pub fn npair_batch_loss(embeddings: &Matrix, labels: &[usize], n: usize, scale: f64) -> Result<LossResult> {
    check_labels(labels, embeddings.rows(), usize::MAX)?;
    let rows = embeddings.rows();
    let mut grad = Matrix::zeros(rows, embeddings.cols());
    let mut tuples = Vec::new();
    for i in 0..rows {
        let positive = (1..rows)
            .map(|off| (i + off) % rows)
            .find(|&j| labels[j] == labels[i]);
        if let Some(p) = positive {
            let negs: Vec<usize> = (0..rows)
                .filter(|&j| labels[j] != labels[i])
                .take(n.saturating_sub(1))
                .collect();
            tuples.push((i, p, negs));
        }
    }
    if tuples.is_empty() {
        return Ok(LossResult::inputs_only(0.0, vec![grad]));
    }
    let inv = 1.0 / tuples.len() as f64;
    let mut total = 0.0;
    for (a, p, negs) in &tuples {
        let neg_m = embeddings.select_rows(negs);
        let r = npair_cosine_loss(embeddings.row(*a), embeddings.row(*p), &neg_m, scale)?;
        total += r.value;
        for (g, x) in grad.row_mut(*a).iter_mut().zip(r.input_grads[0].data()) {
            *g += inv * x;
        }
        for (g, x) in grad.row_mut(*p).iter_mut().zip(r.input_grads[1].data()) {
            *g += inv * x;
        }
        for (k, &j) in negs.iter().enumerate() {
            for (g, x) in grad.row_mut(j).iter_mut().zip(r.input_grads[2].row(k)) {
                *g += inv * x;
            }
        }
    }
    Ok(LossResult::inputs_only(total * inv, vec![grad]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrastive_examples() {
        let same = contrastive_loss(&[1.0, 2.0], &[1.0, 2.0], true, 2.0).unwrap();
        assert_eq!(same.value, 0.0);
        let far = contrastive_loss(&[0.0, 0.0], &[3.0, 0.0], false, 2.0).unwrap();
        assert_eq!(far.value, 0.0);
        assert!(far.input_grads.iter().all(|g| g.data().iter().all(|&x| x == 0.0)));
        let near = contrastive_loss(&[0.0, 0.0], &[1.0, 0.0], false, 2.0).unwrap();
        assert!((near.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn npair_examples() {
        let a = [1.0, 0.0];
        let none = Matrix::zeros(0, 2);
        assert_eq!(npair_cosine_loss(&a, &[2.0, 0.0], &none, 1.0).unwrap().value, 0.0);

        let negs = Matrix::new(1, 2, vec![-3.0, 0.0]).unwrap();
        let r = npair_cosine_loss(&a, &[5.0, 0.0], &negs, 1.0).unwrap();
        assert!((r.value - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-12);
        assert!((r.value - 0.1269).abs() < 1e-4);

        // every candidate at the same cosine
        let negs = Matrix::new(3, 2, vec![0.0, 1.0, 0.0, -1.0, 0.0, 2.0]).unwrap();
        let r = npair_cosine_loss(&a, &[0.0, 3.0], &negs, 1.0).unwrap();
        assert!((r.value - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn npair_zero_vector() {
        let negs = Matrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            npair_cosine_loss(&[1.0, 0.0], &[1.0, 1.0], &negs, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn batch_losses_without_positives() {
        let u = Matrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.5]).unwrap();
        let r = npair_batch_loss(&u, &[0, 1, 2], 16, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        let c = contrastive_batch_loss(&u, &[0, 1, 2], 2.0).unwrap();
        assert!(c.value >= 0.0);
    }
}
