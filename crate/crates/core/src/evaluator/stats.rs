use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wald interval `p̂ ± z·sqrt(p̂(1 − p̂)/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialInterval {
    pub p_hat: f64,
    pub n: usize,
    pub half_width: f64,
    pub low: f64,
    pub high: f64,
    /// Zero-width interval at `p̂ ∈ {0, 1}`; the Wald approximation breaks down there.
    pub degenerate: bool,
}

impl BinomialInterval {
    /// Non-overlapping intervals.
    pub fn disjoint(&self, other: &BinomialInterval) -> bool {
        self.high < other.low || other.high < self.low
    }
}

pub fn wald_interval(p_hat: f64, n: usize, z: f64) -> Result<BinomialInterval> {
    if n == 0 {
        return Err(Error::Domain("binomial interval needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::Domain(format!("proportion {p_hat} outside [0, 1]")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::Domain(format!("z must be finite and >= 0, got {z}")));
    }
    let half_width = z * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(BinomialInterval {
        p_hat,
        n,
        half_width,
        low: p_hat - half_width,
        high: p_hat + half_width,
        degenerate: p_hat == 0.0 || p_hat == 1.0,
    })
}

pub fn binomial_ci(successes: usize, n: usize, z: f64) -> Result<BinomialInterval> {
    if n == 0 {
        return Err(Error::Domain("binomial interval needs n >= 1".into()));
    }
    if successes > n {
        return Err(Error::Domain(format!("{successes} successes out of {n}")));
    }
    wald_interval(successes as f64 / n as f64, n, z)
}

/// Significance flag: Wald intervals of the two proportions are disjoint at `z`.
pub fn significantly_different(a: &BinomialInterval, b: &BinomialInterval) -> bool {
    a.disjoint(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_width_at_half() {
        let ci = binomial_ci(50, 100, 1.96).unwrap();
        assert!((ci.half_width - 0.098).abs() < 1e-12);
        assert!(!ci.degenerate);
    }

    #[test]
    fn boundary_is_degenerate() {
        let ci = binomial_ci(7, 7, 1.96).unwrap();
        assert_eq!(ci.half_width, 0.0);
        assert!(ci.degenerate);
    }

    #[test]
    fn reported_gap_is_significant() {
        let a = wald_interval(0.785, 144, 1.645).unwrap();
        let b = wald_interval(0.556, 144, 1.645).unwrap();
        assert!(significantly_different(&a, &b));
    }

    #[test]
    fn domain_errors() {
        assert!(binomial_ci(0, 0, 1.96).is_err());
        assert!(binomial_ci(3, 2, 1.96).is_err());
    }
}
