use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `n × 2` coordinates on the top two principal axes.
    pub coords: Matrix,
    /// Variance along each axis (population normalization).
    pub axis_variance: [f64; 2],
    /// Fraction of total variance explained by each axis.
    pub explained: [f64; 2],
    /// All-zero coordinates because the data has no variance.
    pub degenerate: bool,
}

/// PCA onto the top two principal axes of the centered data.
///
/// Each axis is signed so that its largest-magnitude coordinate is positive.
pub fn project_2d(embeddings: &Matrix) -> Result<Projection> {
    let (n, d) = embeddings.shape();
    if n < 2 || d < 2 {
        return Err(Error::Domain(format!(
            "project_2d needs >= 2 points of dimension >= 2, got {n} x {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in embeddings.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let x = DMatrix::from_fn(n, d, |i, j| embeddings.get(i, j) - mean[j]);
    let scale = embeddings.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let trace = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if trace <= 1e-24 * scale.max(1.0).powi(2) {
        return Ok(Projection {
            coords: Matrix::zeros(n, 2),
            axis_variance: [0.0, 0.0],
            explained: [0.0, 0.0],
            degenerate: true,
        });
    }

    let mut coords = Matrix::zeros(n, 2);
    let mut variance = [0.0; 2];
    if d <= n {
        let cov = (x.transpose() * &x) / n as f64;
        let eig = SymmetricEigen::new(cov);
        let order = top_two(eig.eigenvalues.as_slice());
        for (axis, &k) in order.iter().enumerate() {
            variance[axis] = eig.eigenvalues[k].max(0.0);
            let v = eig.eigenvectors.column(k);
            let proj = &x * v;
            for i in 0..n {
                coords.set(i, axis, proj[i]);
            }
        }
    } else {
        let gram = (&x * x.transpose()) / n as f64;
        let eig = SymmetricEigen::new(gram);
        let order = top_two(eig.eigenvalues.as_slice());
        for (axis, &k) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[k].max(0.0);
            variance[axis] = lambda;
            let s = (n as f64 * lambda).sqrt();
            let u = eig.eigenvectors.column(k);
            for i in 0..n {
                coords.set(i, axis, u[i] * s);
            }
        }
    }
    for axis in 0..2 {
        let mut best = 0.0f64;
        for i in 0..n {
            let v = coords.get(i, axis);
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            for i in 0..n {
                coords.set(i, axis, -coords.get(i, axis));
            }
        }
    }
    Ok(Projection {
        coords,
        axis_variance: variance,
        explained: [variance[0] / trace, variance[1] / trace],
        degenerate: false,
    })
}

fn top_two(values: &[f64]) -> [usize; 2] {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    [idx[0], idx[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_has_flat_second_axis() {
        let m = Matrix::new(4, 3, vec![1., 2., 3., 2., 4., 6., -1., -2., -3., 0.5, 1., 1.5]).unwrap();
        let p = project_2d(&m).unwrap();
        assert!(p.axis_variance[1] < 1e-12);
        assert!(p.axis_variance[0] >= p.axis_variance[1]);
        assert!((p.explained[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let m = Matrix::new(3, 2, vec![0.1, 0.2, 0.1, 0.2, 0.1, 0.2]).unwrap();
        let p = project_2d(&m).unwrap();
        assert!(p.degenerate);
        assert!(p.coords.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wide_and_tall_paths_agree() {
        // 3 points in 5 dimensions uses the Gram path; padding to 6 points with
        // copies of the mean leaves the axes unchanged but switches to covariance.
        let pts = vec![1.0, 0.0, 2.0, -1.0, 0.5, 0.0, 1.0, -1.0, 3.0, 0.0, 2.0, 2.0, 0.0, 1.0, -2.0];
        let wide = Matrix::new(3, 5, pts.clone()).unwrap();
        let pw = project_2d(&wide).unwrap();
        let mut mean = [0.0; 5];
        for r in 0..3 {
            for c in 0..5 {
                mean[c] += pts[r * 5 + c] / 3.0;
            }
        }
        let mut tall = pts.clone();
        for _ in 0..3 {
            tall.extend_from_slice(&mean);
        }
        let pt = project_2d(&Matrix::new(6, 5, tall).unwrap()).unwrap();
        for i in 0..3 {
            for a in 0..2 {
                assert!((pw.coords.get(i, a) - pt.coords.get(i, a)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_small() {
        assert!(project_2d(&Matrix::zeros(1, 3)).is_err());
        assert!(project_2d(&Matrix::zeros(3, 1)).is_err());
    }
}
