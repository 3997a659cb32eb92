//! Labeled epoch batching and adversarial-batch sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Split};
use crate::error::{Error, Result};

/// Where adversarial sentences come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversarialMode {
    /// Uniform draws (with replacement) from the adversarial language's pool.
    Random,
    /// Exact translations of the labeled anchor batch.
    Parallel,
}

/// Epoch-order batches over one language's labeled training sentences.
#[derive(Debug, Clone)]
pub struct EpochBatcher {
    language: String,
    pool: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
}

impl EpochBatcher {
    pub fn new(corpus: &Corpus, language: &str) -> Result<Self> {
        let pool = corpus.select(Some(language), Some(Split::Train), true);
        if pool.is_empty() {
            return Err(Error::Config(format!(
                "no labeled training data in language {language:?}"
            )));
        }
        Ok(Self {
            language: language.to_string(),
            order: pool.clone(),
            pool,
            cursor: 0,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    /// Starts a new epoch with a fresh permutation.
    pub fn shuffle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.order = self.pool.clone();
        self.order.shuffle(rng);
        self.cursor = 0;
    }

    /// Next `min(batch_size, remaining)` examples of the current epoch; an
    /// exhausted epoch is reshuffled first.
    pub fn next_batch<R: Rng + ?Sized>(&mut self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        if self.remaining() == 0 {
            self.shuffle(rng);
        }
        let end = (self.cursor + batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }
}

/// One-shot labeled batch for language `t` drawn from a fresh epoch shuffle.
pub fn sample_training_batch<R: Rng + ?Sized>(
    corpus: &Corpus,
    language: &str,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut b = EpochBatcher::new(corpus, language)?;
    b.shuffle(rng);
    Ok(b.next_batch(batch_size, rng))
}

/// Uniform draws with replacement from language `t`'s labeled training data.
pub fn sample_with_replacement<R: Rng + ?Sized>(pool: &[usize], size: usize, rng: &mut R) -> Vec<usize> {
    (0..size).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialBatch {
    pub language: String,
    pub indices: Vec<usize>,
}

/// Adversarial pools: train-split sentences per language, labels ignored.
#[derive(Debug, Clone)]
pub struct AdversarialPools {
    languages: Vec<String>,
    pools: Vec<Vec<usize>>,
}

impl AdversarialPools {
    pub fn new(corpus: &Corpus, languages: &[String]) -> Result<Self> {
        let mut pools = Vec::with_capacity(languages.len());
        for l in languages {
            let pool = corpus.select(Some(l), Some(Split::Train), false);
            if pool.is_empty() {
                return Err(Error::Config(format!("adversarial language {l:?} has no training sentences")));
            }
            pools.push(pool);
        }
        Ok(Self {
            languages: languages.to_vec(),
            pools,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Draws an adversarial batch for training language `t`.
    ///
    /// The adversarial language is uniform over the pool languages other than
    /// `t`. In parallel mode the batch is the translation set of `anchor`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        corpus: &Corpus,
        t: &str,
        mode: AdversarialMode,
        anchor: &[usize],
        size: usize,
        rng: &mut R,
    ) -> Result<AdversarialBatch> {
        let candidates: Vec<usize> = (0..self.languages.len())
            .filter(|&i| self.languages[i] != t)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config(format!(
                "no adversarial language other than {t:?} available"
            )));
        }
        let li = candidates[rng.gen_range(0..candidates.len())];
        let language = self.languages[li].clone();
        let indices = match mode {
            AdversarialMode::Random => sample_with_replacement(&self.pools[li], size, rng),
            AdversarialMode::Parallel => {
                let mut out = Vec::with_capacity(anchor.len());
                let mut missing = Vec::new();
                for &a in anchor {
                    match corpus.translation(a, &language) {
                        Some(j) => out.push(j),
                        None => missing.push(corpus.example(a).group.clone()),
                    }
                }
                if !missing.is_empty() {
                    return Err(Error::Data(format!(
                        "no {language:?} translation for groups {}",
                        missing.join(", ")
                    )));
                }
                out
            }
        };
        Ok(AdversarialBatch { language, indices })
    }
}

/// Free-function form of [`AdversarialPools::sample`].
pub fn sample_adversarial_batch<R: Rng + ?Sized>(
    corpus: &Corpus,
    t: &str,
    adversarial: &[String],
    mode: AdversarialMode,
    anchor: &[usize],
    size: usize,
    rng: &mut R,
) -> Result<AdversarialBatch> {
    AdversarialPools::new(corpus, adversarial)?.sample(corpus, t, mode, anchor, size, rng)
}
