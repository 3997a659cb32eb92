//! The alternating encoder/discriminator training step and the epoch loop.

mod variant;

pub use variant::{Adversarial, LossKind, Variant, VariantSpec};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_with_replacement, AdversarialPools, Corpus, EpochBatcher};
use crate::discriminator::LanguageDiscriminator;
use crate::encoder::{AdapterEncoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::evaluator::{compactness_metrics, loo_intent_acc, EvalSet};
use crate::hyper::HyperParams;
use crate::losses::{
    center_bank_update, contrastive_batch_loss, l2c_softmax_loss, npair_batch_loss, semantic_loss,
    softmax_head_loss, CenterBank, ClassifierHead,
};
use crate::nn::{AdamConfig, Matrix};

/// Encoder, classifier head and center bank: everything that is kept after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationModel {
    pub encoder: AdapterEncoder,
    pub head: ClassifierHead,
    pub centers: CenterBank,
    /// Intent names indexed by class id.
    pub intents: Vec<String>,
}

impl SpecializationModel {
    pub fn new<R: Rng + ?Sized>(
        corpus: &Corpus,
        hp: &HyperParams,
        encoder: &EncoderConfig,
        rng: &mut R,
    ) -> Result<Self> {
        hp.validate()?;
        let d = corpus.dim();
        let classes = corpus.intents().len();
        if classes == 0 {
            return Err(Error::Config("corpus has no labeled intents".into()));
        }
        let adam = AdamConfig::with_lr(hp.lr_main);
        Ok(Self {
            encoder: AdapterEncoder::new(d, encoder, adam, rng)?,
            head: ClassifierHead::zeros(classes, d, adam)?,
            centers: CenterBank::new(classes, d, hp.center_lr)?,
            intents: corpus.intents().to_vec(),
        })
    }

    /// Seeded initialization on its own generator stream, disjoint from the
    /// streams of [`TrainRng`].
    pub fn init(corpus: &Corpus, hp: &HyperParams, encoder: &EncoderConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        rng.set_stream(2);
        Self::new(corpus, hp, encoder, &mut rng)
    }

    pub fn encode(&self, base: &Matrix) -> Result<Matrix> {
        self.encoder.encode(base)
    }
}

/// Independent generator streams. `main` drives language choice, epoch
/// shuffles and labeled batches; `adv` drives everything adversarial
/// (discriminator init, inner batches, adversarial batches, dropout), so
/// switching the adversary on never perturbs the labeled trajectory.
#[derive(Debug, Clone)]
pub struct TrainRng {
    pub main: ChaCha8Rng,
    pub adv: ChaCha8Rng,
}

impl TrainRng {
    pub fn new(seed: u64) -> Self {
        let main = ChaCha8Rng::seed_from_u64(seed);
        let mut adv = ChaCha8Rng::seed_from_u64(seed);
        adv.set_stream(1);
        Self { main, adv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub language: String,
    pub batch: usize,
    pub semantic: f64,
    /// Frozen-discriminator loss on the step's batches; 0 when the adversary is off.
    pub disc: f64,
    /// `semantic − γ·disc`.
    pub total: f64,
    /// Loss of the last inner discriminator update, before that update.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_language: Option<String>,
    /// Largest `|θ|` of `D_t` seen after any inner update of this step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_param_max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSnapshot {
    pub epoch: usize,
    pub steps: usize,
    pub mean_semantic: f64,
    pub mean_disc: f64,
    pub mean_total: f64,
    /// Test-split intra-class variance of unit-normalized encodings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intra_class_variance: Option<f64>,
    /// Test-split monolingual Acc@1 in the first training language.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mono_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub variant: VariantSpec,
    pub hp: HyperParams,
    #[serde(default)]
    pub config: serde_json::Value,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochSnapshot>,
}

/// Per-run state shared by consecutive steps.
pub struct TrainState {
    pub discriminators: Vec<LanguageDiscriminator>,
    pub batchers: Vec<EpochBatcher>,
    pub pools: Option<AdversarialPools>,
    pub rng: TrainRng,
    pub step: usize,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(corpus: &Corpus, variant: &VariantSpec, hp: &HyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        variant.validate(corpus)?;
        let mut rng = TrainRng::new(seed);
        let batchers = variant
            .train_languages
            .iter()
            .map(|l| EpochBatcher::new(corpus, l))
            .collect::<Result<Vec<_>>>()?;
        let (discriminators, pools) = if variant.adversarial == Adversarial::Off {
            (Vec::new(), None)
        } else {
            let discs = variant
                .train_languages
                .iter()
                .map(|l| LanguageDiscriminator::new(l, corpus.dim(), hp, &mut rng.adv))
                .collect::<Result<Vec<_>>>()?;
            let pools = AdversarialPools::new(corpus, &variant.resolved_adversarial(corpus))?;
            (discs, Some(pools))
        };
        Ok(Self {
            discriminators,
            batchers,
            pools,
            rng,
            step: 0,
            epoch: 0,
        })
    }

    /// Starts an epoch: a fresh permutation of every training language.
    pub fn begin_epoch(&mut self) {
        for b in &mut self.batchers {
            b.shuffle(&mut self.rng.main);
        }
    }
}

struct SemanticOut {
    value: f64,
    grad_u: Matrix,
    head_grads: Vec<Matrix>,
    normalized: Option<Matrix>,
}

fn semantic_objective(
    model: &SpecializationModel,
    loss: LossKind,
    u: &Matrix,
    labels: &[usize],
    hp: &HyperParams,
) -> Result<SemanticOut> {
    Ok(match loss {
        LossKind::L2cCenter => {
            let s = semantic_loss(&model.head, &model.centers, u, labels, hp.alpha, hp.lambda)?;
            let mut r = s.result;
            SemanticOut {
                value: r.value,
                grad_u: r.input_grads.swap_remove(0),
                head_grads: r.param_grads,
                normalized: Some(s.normalized),
            }
        }
        LossKind::L2c | LossKind::Softmax => {
            let mut r = if loss == LossKind::L2c {
                l2c_softmax_loss(&model.head, u, labels, hp.alpha)?
            } else {
                softmax_head_loss(&model.head, u, labels)?
            };
            SemanticOut {
                value: r.value,
                grad_u: r.input_grads.swap_remove(0),
                head_grads: r.param_grads,
                normalized: None,
            }
        }
        LossKind::Contrastive | LossKind::Npair => {
            let mut r = if loss == LossKind::Contrastive {
                contrastive_batch_loss(u, labels, hp.margin_m)?
            } else {
                npair_batch_loss(u, labels, hp.npair_n, hp.npair_scale)?
            };
            SemanticOut {
                value: r.value,
                grad_u: r.input_grads.swap_remove(0),
                head_grads: Vec::new(),
                normalized: None,
            }
        }
    })
}

/// One outer step.
///
/// (i) picks a training language `t`; (ii) runs `k` discriminator updates on
/// fresh `t`/adversarial batches with the encoder fixed; (iii) updates the
/// encoder and head on `L_C − γ·L_D` with `D_t` frozen (eval mode), then moves
/// the centers. With the adversary off, (ii) and the `γ` term are skipped.
pub fn emu_train_step(
    model: &mut SpecializationModel,
    state: &mut TrainState,
    corpus: &Corpus,
    variant: &VariantSpec,
    hp: &HyperParams,
) -> Result<StepRecord> {
    let ti = state.rng.main.gen_range(0..variant.train_languages.len());
    let t = variant.train_languages[ti].clone();
    let mode = variant.adversarial.mode();

    let mut disc_inner = None;
    let mut disc_param_max_abs = None;
    if let (Some(mode), Some(pools)) = (mode, state.pools.as_ref()) {
        let disc = &mut state.discriminators[ti];
        for _ in 0..hp.k {
            let xt = sample_with_replacement(state.batchers[ti].pool(), hp.batch_size, &mut state.rng.adv);
            let adv = pools.sample(corpus, &t, mode, &xt, hp.batch_size, &mut state.rng.adv)?;
            let ut = model.encoder.encode(&corpus.embeddings(&xt))?;
            let ua = model.encoder.encode(&corpus.embeddings(&adv.indices))?;
            disc_inner = Some(disc.update_step(&ut, &ua, &mut state.rng.adv as &mut dyn RngCore)?);
            let m = disc.flat_params().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            disc_param_max_abs = Some(disc_param_max_abs.map_or(m, |p: f64| p.max(m)));
        }
    }

    let batch = state.batchers[ti].next_batch(hp.batch_size, &mut state.rng.main);
    let labels = corpus.labels(&batch)?;
    let cache_t = model.encoder.forward(&corpus.embeddings(&batch))?;
    let sem = semantic_objective(model, variant.loss, cache_t.output(), &labels, hp)?;

    let mut grad_t = sem.grad_u;
    let mut disc_value = 0.0;
    let mut adversarial_language = None;
    let mut adv_grads = None;
    if let (Some(mode), Some(pools)) = (mode, state.pools.as_ref()) {
        let adv = pools.sample(corpus, &t, mode, &batch, batch.len(), &mut state.rng.adv)?;
        let cache_a = model.encoder.forward(&corpus.embeddings(&adv.indices))?;
        let (value, gu, gv, _) =
            state.discriminators[ti].objective_and_input_grads(cache_t.output(), cache_a.output(), None)?;
        disc_value = value;
        adversarial_language = Some(adv.language);
        if hp.gamma != 0.0 {
            grad_t.add_assign(&gu.scaled(-hp.gamma))?;
            let (_, g) = model.encoder.backward(&cache_a, &gv.scaled(-hp.gamma))?;
            adv_grads = Some(g);
        }
    }

    let (_, mut enc_grads) = model.encoder.backward(&cache_t, &grad_t)?;
    if let Some(g) = adv_grads {
        enc_grads.add_assign(&g)?;
    }
    model.encoder.apply_grads(&enc_grads)?;
    if variant.loss.uses_head() {
        model.head.apply_grads(&sem.head_grads)?;
    }
    if let Some(z) = &sem.normalized {
        center_bank_update(&mut model.centers, z, &labels)?;
    }

    let record = StepRecord {
        step: state.step,
        epoch: state.epoch,
        language: t,
        batch: batch.len(),
        semantic: sem.value,
        disc: disc_value,
        total: sem.value - hp.gamma * disc_value,
        disc_inner,
        adversarial_language,
        disc_param_max_abs,
    };
    state.step += 1;
    Ok(record)
}

/// Outer steps per epoch: labeled training sentences over all training
/// languages divided by the batch size, rounded up.
pub fn steps_per_epoch(corpus: &Corpus, variant: &VariantSpec, batch_size: usize) -> usize {
    let n: usize = variant
        .train_languages
        .iter()
        .map(|l| corpus.select(Some(l), Some(crate::dataset::Split::Train), true).len())
        .sum();
    n.div_ceil(batch_size.max(1))
}

fn snapshot(
    model: &SpecializationModel,
    corpus: &Corpus,
    variant: &VariantSpec,
    epoch: usize,
    records: &[StepRecord],
) -> Result<EpochSnapshot> {
    let n = records.len().max(1) as f64;
    let mean = |f: fn(&StepRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let (mut icv, mut mono) = (None, None);
    if !corpus.select(None, Some(crate::dataset::Split::Test), true).is_empty() {
        let set = EvalSet::from_corpus(corpus, |m| model.encode(m))?;
        let mut unit = set.embeddings.clone();
        for r in 0..unit.rows() {
            let nr = crate::nn::norm(unit.row(r));
            if nr > 0.0 {
                unit.row_mut(r).iter_mut().for_each(|v| *v /= nr);
            }
        }
        icv = Some(compactness_metrics(&unit, &set.labels, &set.langs, &set.groups)?.intra_class_variance);
        let lang = &variant.train_languages[0];
        if set.indices_in(lang).len() >= 2 {
            mono = Some(loo_intent_acc(&set, lang, lang, true)?.acc);
        }
    }
    Ok(EpochSnapshot {
        epoch,
        steps: records.len(),
        mean_semantic: mean(|r| r.semantic),
        mean_disc: mean(|r| r.disc),
        mean_total: mean(|r| r.total),
        intra_class_variance: icv,
        mono_acc: mono,
    })
}

/// Full fine-tuning run: `epochs × steps_per_epoch` outer steps.
///
/// Returns the log and the final run state (discriminators included).
pub fn train_run(
    model: &mut SpecializationModel,
    corpus: &Corpus,
    variant: &VariantSpec,
    hp: &HyperParams,
    seed: u64,
) -> Result<(TrainLog, TrainState)> {
    let mut state = TrainState::new(corpus, variant, hp, seed)?;
    let per_epoch = steps_per_epoch(corpus, variant, hp.batch_size);
    let mut log = TrainLog {
        seed,
        variant: variant.clone(),
        hp: hp.clone(),
        config: serde_json::Value::Null,
        steps: Vec::with_capacity(per_epoch * hp.epochs),
        epochs: Vec::with_capacity(hp.epochs),
    };
    for epoch in 0..hp.epochs {
        state.epoch = epoch;
        state.begin_epoch();
        let start = log.steps.len();
        for _ in 0..per_epoch {
            log.steps.push(emu_train_step(model, &mut state, corpus, variant, hp)?);
        }
        log.epochs.push(snapshot(model, corpus, variant, epoch, &log.steps[start..])?);
    }
    Ok((log, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn small() -> (Corpus, HyperParams) {
        let corpus = generate_synthetic(&SyntheticSpec {
            intents: 3,
            per_intent: 6,
            dim: 4,
            confounders: 2,
            ..Default::default()
        })
        .unwrap();
        let hp = HyperParams {
            disc_hidden: 8,
            batch_size: 4,
            epochs: 1,
            ..Default::default()
        };
        (corpus, hp)
    }

    fn langs(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn step_count_follows_epoch_accounting() {
        let (corpus, _) = small();
        let v = Variant::EmuNoLd.spec(&langs(&["en"]), &[]);
        // 3 intents × 6 × 2/3 train = 12 English training sentences.
        assert_eq!(steps_per_epoch(&corpus, &v, 4), 3);
        assert_eq!(steps_per_epoch(&corpus, &v, 5), 3);
        assert_eq!(steps_per_epoch(&corpus, &v, 16), 1);
    }

    #[test]
    fn recorded_total_recombines() {
        let (corpus, hp) = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = SpecializationModel::new(&corpus, &hp, &EncoderConfig::default(), &mut rng).unwrap();
        let before = model.encoder.flat_params();
        let v = Variant::Emu.spec(&langs(&["en"]), &[]);
        let (log, _) = train_run(&mut model, &corpus, &v, &hp, 3).unwrap();
        assert_ne!(before, model.encoder.flat_params());
        for r in &log.steps {
            assert!((r.total - (r.semantic - hp.gamma * r.disc)).abs() <= 1e-12);
            assert_ne!(r.adversarial_language.as_deref(), Some("en"));
        }
        assert!(log.steps.windows(2).all(|w| w[1].step == w[0].step + 1));
    }

    #[test]
    fn parallel_without_links_is_config_error() {
        let (corpus, _) = small();
        let v = VariantSpec {
            train_languages: langs(&["xx"]),
            ..Variant::EmuParallel.spec(&[], &[])
        };
        assert!(matches!(v.validate(&corpus), Err(Error::Config(_))));
    }
}
