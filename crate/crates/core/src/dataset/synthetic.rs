//! Seeded multilingual benchmark with intent structure, intent-independent
//! surface confounders, and per-language rotations and offsets.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, LabeledExample, Split};
use crate::error::{Error, Result};

const LANGUAGE_NAMES: [&str; 6] = ["en", "de", "es", "fr", "ja", "zh"];

pub fn language_name(i: usize) -> String {
    LANGUAGE_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("l{i}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub languages: usize,
    pub intents: usize,
    /// Sentences per intent per language.
    pub per_intent: usize,
    pub dim: usize,
    /// Expected norm of an intent prototype.
    pub semantic_scale: f64,
    /// Expected norm of the per-sentence semantic noise.
    pub noise_scale: f64,
    /// Number of surface-style clusters shared across intents.
    pub confounders: usize,
    /// Expected norm of a confounder component.
    pub confounder_scale: f64,
    /// Expected norm of each language's offset.
    pub shift_strength: f64,
    /// `1` keeps every language identical; `0` applies the full language transform.
    pub rho: f64,
    /// Fraction of each intent's sentence groups assigned to the train split.
    pub train_fraction: f64,
    /// Extra unlabeled train-split sentences per intent for every language but
    /// the first; they enlarge the adversarial pool only.
    pub unlabeled_per_intent: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            languages: 3,
            intents: 10,
            per_intent: 30,
            dim: 64,
            semantic_scale: 1.0,
            noise_scale: 0.5,
            confounders: 20,
            confounder_scale: 1.25,
            shift_strength: 0.5,
            rho: 0.6,
            train_fraction: 2.0 / 3.0,
            unlabeled_per_intent: 0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, why: &str| Err(Error::Config(format!("synthetic.{k}: {why}")));
        if self.languages < 1 {
            return bad("languages", "must be >= 1");
        }
        if self.intents < 1 {
            return bad("intents", "must be >= 1");
        }
        if self.per_intent < 1 {
            return bad("per_intent", "must be >= 1");
        }
        if self.dim < 1 {
            return bad("dim", "must be >= 1");
        }
        if self.confounders < 1 {
            return bad("confounders", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("train_fraction", "must be in [0, 1]");
        }
        for (k, v) in [
            ("semantic_scale", self.semantic_scale),
            ("noise_scale", self.noise_scale),
            ("confounder_scale", self.confounder_scale),
            ("shift_strength", self.shift_strength),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(k, "must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Number of train-split groups per intent.
    pub fn train_groups(&self) -> usize {
        (self.per_intent as f64 * self.train_fraction).round() as usize
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> Vec<f64> {
    let scale = norm / (dim as f64).sqrt();
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Builds the corpus. Pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<Vec<f64>> = (0..spec.intents)
        .map(|_| gaussian(&mut rng, d, spec.semantic_scale))
        .collect();
    let styles: Vec<Vec<f64>> = (0..spec.confounders)
        .map(|_| gaussian(&mut rng, d, spec.confounder_scale))
        .collect();
    let transforms: Vec<(DMatrix<f64>, Vec<f64>)> = (0..spec.languages)
        .map(|_| {
            let r = random_rotation(&mut rng, d);
            let o = gaussian(&mut rng, d, spec.shift_strength);
            (r, o)
        })
        .collect();
    let langs: Vec<String> = (0..spec.languages).map(language_name).collect();

    let project = |lang: usize, z: &[f64]| -> Vec<f64> {
        let (r, o) = &transforms[lang];
        let rho = spec.rho;
        (0..d)
            .map(|i| {
                let rz: f64 = (0..d).map(|j| r[(i, j)] * z[j]).sum();
                rho * z[i] + (1.0 - rho) * (rz + o[i])
            })
            .collect()
    };

    let train_groups = spec.train_groups();
    let mut examples = Vec::with_capacity(spec.languages * spec.intents * spec.per_intent);
    let mut group_no = 0usize;
    for (c, proto) in prototypes.iter().enumerate() {
        let intent = format!("intent_{c:02}");
        for j in 0..spec.per_intent {
            let noise = gaussian(&mut rng, d, spec.noise_scale);
            let style = &styles[rng.gen_range(0..spec.confounders)];
            let z: Vec<f64> = (0..d).map(|i| proto[i] + noise[i] + style[i]).collect();
            let group = format!("g{group_no:05}");
            group_no += 1;
            let split = if j < train_groups { Split::Train } else { Split::Test };
            for (l, lang) in langs.iter().enumerate() {
                examples.push(LabeledExample {
                    id: format!("{group}-{lang}"),
                    group: group.clone(),
                    lang: lang.clone(),
                    intent: Some(intent.clone()),
                    split,
                    embedding: project(l, &z),
                });
            }
        }
    }
    for (l, lang) in langs.iter().enumerate().skip(1) {
        for proto in &prototypes {
            for _ in 0..spec.unlabeled_per_intent {
                let noise = gaussian(&mut rng, d, spec.noise_scale);
                let style = &styles[rng.gen_range(0..spec.confounders)];
                let z: Vec<f64> = (0..d).map(|i| proto[i] + noise[i] + style[i]).collect();
                let group = format!("u{group_no:05}");
                group_no += 1;
                examples.push(LabeledExample {
                    id: format!("{group}-{lang}"),
                    group,
                    lang: lang.clone(),
                    intent: None,
                    split: Split::Train,
                    embedding: project(l, &z),
                });
            }
        }
    }
    Corpus::new(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            languages: 3,
            intents: 4,
            per_intent: 5,
            dim: 8,
            ..Default::default()
        }
    }

    #[test]
    fn size_is_l_c_n() {
        let spec = small();
        let c = generate_synthetic(&spec).unwrap();
        assert_eq!(c.len(), 3 * 4 * 5);
        assert_eq!(c.intents().len(), 4);
        assert_eq!(c.languages().len(), 3);
    }

    #[test]
    fn pure_function_of_spec() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic(&SyntheticSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rho_one_aligns_translations() {
        let c = generate_synthetic(&SyntheticSpec { rho: 1.0, ..small() }).unwrap();
        for i in c.select(Some("en"), None, true) {
            let j = c.translation(i, "de").unwrap();
            assert_eq!(c.example(i).embedding, c.example(j).embedding);
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_rotation(&mut rng, 6);
        let qtq = q.transpose() * &q;
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unlabeled_pool_only_in_foreign_languages() {
        let c = generate_synthetic(&SyntheticSpec {
            unlabeled_per_intent: 2,
            ..small()
        })
        .unwrap();
        let s = c.stats();
        assert_eq!(s.unlabeled, 2 * 4 * 2);
        assert!(c
            .examples()
            .iter()
            .filter(|e| e.intent.is_none())
            .all(|e| e.lang != "en" && e.split == Split::Train));
    }

    #[test]
    fn invalid_spec() {
        assert!(generate_synthetic(&SyntheticSpec { rho: 1.5, ..small() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { intents: 0, ..small() }).is_err());
    }
}
