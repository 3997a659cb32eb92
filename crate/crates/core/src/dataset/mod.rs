//! Corpora of frozen base embeddings: validation, file formats, the synthetic
//! benchmark generator and batch samplers.

mod corpus;
mod io;
mod sampling;
mod synthetic;

pub use corpus::{Corpus, CorpusStats, LabeledExample, Split};
pub use io::{load_corpus, save_corpus, write_corpus, CorpusFormat, TSV_HEADER};
pub use sampling::{
    sample_adversarial_batch, sample_training_batch, sample_with_replacement, AdversarialBatch,
    AdversarialMode, AdversarialPools, EpochBatcher,
};
pub use synthetic::{generate_synthetic, language_name, SyntheticSpec};
