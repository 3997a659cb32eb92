use rand::Rng;

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// `alpha · u / ‖u‖₂`.
pub fn l2_normalize_scale(u: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = checked_norm(u, alpha)?;
    Ok(u.iter().map(|x| alpha * x / n).collect())
}

fn checked_norm(u: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let n = norm(u);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize a vector with norm {n}"
        )));
    }
    Ok(n)
}

/// Vector-Jacobian product of [`l2_normalize_scale`]: `Jᵀ g` with
/// `J = (alpha/‖u‖)(I − û ûᵀ)`.
pub fn l2_normalize_scale_backward(u: &[f64], alpha: f64, grad_out: &[f64]) -> Result<Vec<f64>> {
    if u.len() != grad_out.len() {
        return Err(Error::shape("l2_normalize_scale_backward", u.len(), grad_out.len()));
    }
    let n = checked_norm(u, alpha)?;
    let proj = dot(u, grad_out) / (n * n);
    Ok(u
        .iter()
        .zip(grad_out)
        .map(|(&ui, &gi)| alpha / n * (gi - proj * ui))
        .collect())
}

/// Full Jacobian `∂y/∂u` of [`l2_normalize_scale`] (symmetric).
pub fn l2_normalize_scale_jacobian(u: &[f64], alpha: f64) -> Result<Matrix> {
    let n = checked_norm(u, alpha)?;
    let d = u.len();
    let mut j = Matrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let delta = if r == c { 1.0 } else { 0.0 };
            j.set(r, c, alpha / n * (delta - u[r] * u[c] / (n * n)));
        }
    }
    Ok(j)
}

/// Row-wise [`l2_normalize_scale`].
pub fn l2_normalize_rows(m: &Matrix, alpha: f64) -> Result<Matrix> {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        let z = l2_normalize_scale(m.row(r), alpha).map_err(|e| match e {
            Error::Degenerate(msg) => Error::Degenerate(format!("row {r}: {msg}")),
            other => other,
        })?;
        out.row_mut(r).copy_from_slice(&z);
    }
    Ok(out)
}

/// Row-wise [`l2_normalize_scale_backward`].
pub fn l2_normalize_rows_backward(m: &Matrix, alpha: f64, grad_out: &Matrix) -> Result<Matrix> {
    if m.shape() != grad_out.shape() {
        return Err(Error::shape(
            "l2_normalize_rows_backward",
            format!("{:?}", m.shape()),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        let g = l2_normalize_scale_backward(m.row(r), alpha, grad_out.row(r))?;
        out.row_mut(r).copy_from_slice(&g);
    }
    Ok(out)
}

/// Clamps every entry into `[-c, c]`.
pub fn clip_parameters(params: &mut [f64], c: f64) {
    for p in params {
        *p = p.clamp(-c, c);
    }
}

/// Inverted dropout. Returns the masked activations and the multiplicative mask
/// (each entry `0` or `1/(1-p)`), which the backward pass reuses.
pub fn dropout<R: Rng + ?Sized>(x: &Matrix, p: f64, rng: &mut R) -> (Matrix, Matrix) {
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    if p <= 0.0 {
        mask.data_mut().fill(1.0);
        return (x.clone(), mask);
    }
    let keep = 1.0 / (1.0 - p);
    for m in mask.data_mut() {
        *m = if rng.gen::<f64>() < p { 0.0 } else { keep };
    }
    let mut out = x.clone();
    for (o, m) in out.data_mut().iter_mut().zip(mask.data()) {
        *o *= m;
    }
    (out, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_basis_is_pure_scaling() {
        let out = l2_normalize_scale(&[1.0, 0.0, 0.0], 50.0).unwrap();
        assert_eq!(out, vec![50.0, 0.0, 0.0]);
    }

    #[test]
    fn three_four_five() {
        let out = l2_normalize_scale(&[3.0, 4.0], 1.0).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15);
        assert!((out[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_is_degenerate() {
        assert!(matches!(
            l2_normalize_scale(&[0.0, 0.0], 50.0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(l2_normalize_scale(&[1.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn backward_matches_explicit_jacobian() {
        let u = [0.3, -1.2, 2.0];
        let g = [1.0, 0.5, -0.25];
        let j = l2_normalize_scale_jacobian(&u, 7.0).unwrap();
        let vjp = l2_normalize_scale_backward(&u, 7.0, &g).unwrap();
        for c in 0..3 {
            let expect: f64 = (0..3).map(|r| j.get(r, c) * g[r]).sum();
            assert!((vjp[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_examples() {
        let mut p = [0.02, -0.5, 0.005];
        clip_parameters(&mut p, 0.01);
        assert_eq!(p, [0.01, -0.01, 0.005]);
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::new(2, 50, vec![1.0; 100]).unwrap();
        let (y, mask) = dropout(&x, 0.2, &mut rng);
        assert!(mask.data().iter().all(|&m| m == 0.0 || (m - 1.25).abs() < 1e-15));
        assert_eq!(y, mask);
        let (y0, _) = dropout(&x, 0.0, &mut rng);
        assert_eq!(y0, x);
    }
}
