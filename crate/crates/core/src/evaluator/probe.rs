use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discriminator::LanguageDiscriminator;
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Balanced accuracy on the held-out half: mean of the two per-class rates.
    pub accuracy: f64,
    pub steps: usize,
    pub train_rows: usize,
    pub test_rows: usize,
}

fn split_alternate(m: &Matrix) -> (Matrix, Matrix) {
    let even: Vec<usize> = (0..m.rows()).step_by(2).collect();
    let odd: Vec<usize> = (1..m.rows()).step_by(2).collect();
    (m.select_rows(&even), m.select_rows(&odd))
}

/// Trains a fresh discriminator (same architecture, optimizer and clipping as
/// in training) to tell `target`-language rows from `others`, using even rows
/// for training and odd rows for the held-out score.
pub fn language_probe(
    target: &Matrix,
    others: &Matrix,
    hp: &HyperParams,
    steps: usize,
    seed: u64,
) -> Result<ProbeResult> {
    if target.rows() < 2 || others.rows() < 2 {
        return Err(Error::Eval("language probe needs at least two rows per side".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_train, t_test) = split_alternate(target);
    let (o_train, o_test) = split_alternate(others);
    let mut d = LanguageDiscriminator::new("probe", target.cols(), hp, &mut rng)?;
    for _ in 0..steps {
        let ti: Vec<usize> = (0..hp.batch_size).map(|_| rng.gen_range(0..t_train.rows())).collect();
        let oi: Vec<usize> = (0..hp.batch_size).map(|_| rng.gen_range(0..o_train.rows())).collect();
        d.update_step(&t_train.select_rows(&ti), &o_train.select_rows(&oi), &mut rng)?;
    }
    let pt = d.probabilities(&t_test)?;
    let po = d.probabilities(&o_test)?;
    let tpr = pt.iter().filter(|&&p| p > 0.5).count() as f64 / pt.len() as f64;
    let tnr = po.iter().filter(|&&p| p <= 0.5).count() as f64 / po.len() as f64;
    Ok(ProbeResult {
        accuracy: 0.5 * (tpr + tnr),
        steps,
        train_rows: t_train.rows() + o_train.rows(),
        test_rows: t_test.rows() + o_test.rows(),
    })
}
