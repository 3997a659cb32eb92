use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{cosine, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compactness {
    /// Mean squared distance of each embedding to its class centroid.
    pub intra_class_variance: f64,
    /// Mean cosine over cross-language pairs sharing a sentence group;
    /// `None` when no such pair exists.
    pub alignment: Option<f64>,
    pub alignment_pairs: usize,
}

pub fn compactness_metrics(
    embeddings: &Matrix,
    labels: &[usize],
    languages: &[String],
    groups: &[String],
) -> Result<Compactness> {
    let n = embeddings.rows();
    if labels.len() != n || languages.len() != n || groups.len() != n {
        return Err(Error::shape("compactness_metrics", n, labels.len()));
    }
    if n == 0 {
        return Err(Error::Domain("compactness_metrics needs at least one example".into()));
    }
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let d = embeddings.cols();
    let mut sums = Matrix::zeros(classes, d);
    let mut counts = vec![0usize; classes];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (s, v) in sums.row_mut(y).iter_mut().zip(embeddings.row(i)) {
            *s += v;
        }
    }
    for (y, &c) in counts.iter().enumerate() {
        if c > 0 {
            for s in sums.row_mut(y) {
                *s /= c as f64;
            }
        }
    }
    let mut var = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        var += embeddings
            .row(i)
            .iter()
            .zip(sums.row(y))
            .map(|(u, c)| (u - c) * (u - c))
            .sum::<f64>();
    }
    var /= n as f64;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| groups[a].cmp(&groups[b]).then(a.cmp(&b)));
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && groups[order[end]] == groups[order[start]] {
            end += 1;
        }
        for a in start..end {
            for b in a + 1..end {
                let (i, j) = (order[a], order[b]);
                if languages[i] != languages[j] {
                    total += cosine(embeddings.row(i), embeddings.row(j));
                    pairs += 1;
                }
            }
        }
        start = end;
    }
    Ok(Compactness {
        intra_class_variance: var,
        alignment: (pairs > 0).then(|| total / pairs as f64),
        alignment_pairs: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn zero_variance_at_centroids() {
        let m = Matrix::new(3, 2, vec![1.0, 1.0, 1.0, 1.0, -2.0, 0.5]).unwrap();
        let c = compactness_metrics(&m, &[0, 0, 1], &s(&["en", "de", "en"]), &s(&["g1", "g1", "g2"])).unwrap();
        assert_eq!(c.intra_class_variance, 0.0);
        assert!((c.alignment.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(c.alignment_pairs, 1);
    }

    #[test]
    fn four_point_hand_fixture() {
        // class 0: (0,0),(2,0) centroid (1,0); class 1: (0,1),(0,3) centroid (0,2)
        let m = Matrix::new(4, 2, vec![0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0]).unwrap();
        let langs = s(&["en", "de", "en", "de"]);
        let groups = s(&["a", "b", "c", "c"]);
        let c = compactness_metrics(&m, &[0, 0, 1, 1], &langs, &groups).unwrap();
        assert!((c.intra_class_variance - 1.0).abs() < 1e-12);
        // only pair: (0,1) vs (0,3) → cosine 1
        assert!((c.alignment.unwrap() - 1.0).abs() < 1e-12);
        let groups = s(&["a", "a", "c", "d"]);
        let c = compactness_metrics(&m, &[0, 0, 1, 1], &langs, &groups).unwrap();
        // (0,0) vs (2,0): zero vector → cosine 0
        assert_eq!(c.alignment, Some(0.0));
    }
}
