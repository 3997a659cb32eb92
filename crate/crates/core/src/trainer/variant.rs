use serde::{Deserialize, Serialize};

use crate::dataset::{AdversarialMode, Corpus};
use crate::error::{Error, Result};

/// Semantic objective optimized by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// L2-constrained softmax plus center loss.
    L2cCenter,
    /// L2-constrained softmax alone.
    L2c,
    /// Plain softmax on raw embeddings.
    Softmax,
    /// Pairwise contrastive loss with margin.
    Contrastive,
    /// Multi-class N-pair loss on cosine similarities.
    Npair,
}

impl LossKind {
    pub fn uses_head(self) -> bool {
        matches!(self, LossKind::L2cCenter | LossKind::L2c | LossKind::Softmax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adversarial {
    Off,
    Random,
    Parallel,
}

impl Adversarial {
    pub fn mode(self) -> Option<AdversarialMode> {
        match self {
            Adversarial::Off => None,
            Adversarial::Random => Some(AdversarialMode::Random),
            Adversarial::Parallel => Some(AdversarialMode::Parallel),
        }
    }
}

/// The named configurations of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Emu,
    EmuNoLd,
    EmuNoLdCl,
    EmuParallel,
    Softmax,
    Contrastive,
    Npair,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Emu,
        Variant::EmuNoLd,
        Variant::EmuNoLdCl,
        Variant::EmuParallel,
        Variant::Softmax,
        Variant::Contrastive,
        Variant::Npair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Emu => "emu",
            Variant::EmuNoLd => "emu-no-ld",
            Variant::EmuNoLdCl => "emu-no-ld-cl",
            Variant::EmuParallel => "emu-parallel",
            Variant::Softmax => "softmax",
            Variant::Contrastive => "contrastive",
            Variant::Npair => "npair",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            Variant::Emu => "EMU",
            Variant::EmuNoLd => "EMU w/o LD",
            Variant::EmuNoLdCl => "EMU w/o LD+CL",
            Variant::EmuParallel => "EMU-Parallel",
            Variant::Softmax => "softmax",
            Variant::Contrastive => "contrastive",
            Variant::Npair => "N-pair",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }

    pub fn loss(self) -> LossKind {
        match self {
            Variant::Emu | Variant::EmuNoLd | Variant::EmuParallel => LossKind::L2cCenter,
            Variant::EmuNoLdCl => LossKind::L2c,
            Variant::Softmax => LossKind::Softmax,
            Variant::Contrastive => LossKind::Contrastive,
            Variant::Npair => LossKind::Npair,
        }
    }

    pub fn adversarial(self) -> Adversarial {
        match self {
            Variant::Emu => Adversarial::Random,
            Variant::EmuParallel => Adversarial::Parallel,
            _ => Adversarial::Off,
        }
    }

    pub fn spec(self, train_languages: &[String], adversarial_languages: &[String]) -> VariantSpec {
        VariantSpec {
            name: self.name().to_string(),
            loss: self.loss(),
            adversarial: self.adversarial(),
            train_languages: train_languages.to_vec(),
            adversarial_languages: adversarial_languages.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    pub loss: LossKind,
    pub adversarial: Adversarial,
    pub train_languages: Vec<String>,
    /// Adversarial language set; empty means every corpus language.
    #[serde(default)]
    pub adversarial_languages: Vec<String>,
}

impl VariantSpec {
    /// Adversarial languages after resolving the empty default against `corpus`.
    pub fn resolved_adversarial(&self, corpus: &Corpus) -> Vec<String> {
        if self.adversarial_languages.is_empty() {
            corpus.languages().to_vec()
        } else {
            self.adversarial_languages.clone()
        }
    }

    /// Checks the variant against a corpus before any training work.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        if self.train_languages.is_empty() {
            return Err(Error::Config("variant.train_languages: empty".into()));
        }
        for l in &self.train_languages {
            if corpus.select(Some(l), Some(crate::dataset::Split::Train), true).is_empty() {
                return Err(Error::Config(format!(
                    "variant.train_languages: no labeled training data in {l:?}"
                )));
            }
        }
        if self.adversarial == Adversarial::Off {
            return Ok(());
        }
        let adv = self.resolved_adversarial(corpus);
        for t in &self.train_languages {
            if !adv.iter().any(|l| l != t) {
                return Err(Error::Config(format!(
                    "variant.adversarial_languages: no language other than {t:?}"
                )));
            }
        }
        for l in &adv {
            if !corpus.has_language(l) {
                return Err(Error::Config(format!(
                    "variant.adversarial_languages: {l:?} not in corpus"
                )));
            }
        }
        if self.adversarial == Adversarial::Parallel && !corpus.has_group_links() {
            return Err(Error::Config(
                "variant.adversarial: parallel mode needs sentence-group links".into(),
            ));
        }
        Ok(())
    }
}
