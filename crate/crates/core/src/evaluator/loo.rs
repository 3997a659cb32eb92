use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, Split};
use crate::error::{Error, Result};
use crate::nn::{dot, norm, Matrix};

/// Labeled test sentences with their (specialized) embeddings.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub ids: Vec<String>,
    pub groups: Vec<String>,
    pub langs: Vec<String>,
    pub labels: Vec<usize>,
    pub embeddings: Matrix,
}

impl EvalSet {
    pub fn new(
        ids: Vec<String>,
        groups: Vec<String>,
        langs: Vec<String>,
        labels: Vec<usize>,
        embeddings: Matrix,
    ) -> Result<Self> {
        let n = embeddings.rows();
        for (what, len) in [("ids", ids.len()), ("groups", groups.len()), ("langs", langs.len()), ("labels", labels.len())] {
            if len != n {
                return Err(Error::shape(
                    "EvalSet",
                    format!("{n} rows"),
                    format!("{len} {what}"),
                ));
            }
        }
        Ok(Self {
            ids,
            groups,
            langs,
            labels,
            embeddings,
        })
    }

    /// Labeled test-split sentences of `corpus`, embedded by `encode`.
    pub fn from_corpus<F>(corpus: &Corpus, encode: F) -> Result<Self>
    where
        F: FnOnce(&Matrix) -> Result<Matrix>,
    {
        let idx = corpus.select(None, Some(Split::Test), true);
        if idx.is_empty() {
            return Err(Error::Eval("corpus has no labeled test sentences".into()));
        }
        let base = corpus.embeddings(&idx);
        let embeddings = encode(&base)?;
        if embeddings.rows() != idx.len() {
            return Err(Error::shape("EvalSet::from_corpus", idx.len(), embeddings.rows()));
        }
        Self::new(
            idx.iter().map(|&i| corpus.example(i).id.clone()).collect(),
            idx.iter().map(|&i| corpus.example(i).group.clone()).collect(),
            idx.iter().map(|&i| corpus.example(i).lang.clone()).collect(),
            corpus.labels(&idx)?,
            embeddings,
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn indices_in(&self, lang: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.langs[i] == lang).collect()
    }

    /// True when some sentence group spans two or more rows.
    pub fn has_group_links(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.groups.iter().any(|g| !seen.insert(g.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub query: String,
    pub neighbor: String,
    pub cosine: f64,
    pub predicted: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub correct: usize,
    pub total: usize,
    pub acc: f64,
    /// Whether same-group candidates were excluded.
    pub translation_exclusion: bool,
    pub trace: Vec<QueryTrace>,
}

/// Leave-one-out nearest-neighbor intent accuracy for `src` queries against
/// `tgt` candidates.
///
/// Candidates exclude the query itself and, when `exclude_translations` is set
/// and the set carries group links, every sentence in the query's group. Cosine
/// ties go to the lexicographically smallest candidate id.
pub fn loo_intent_acc(set: &EvalSet, src: &str, tgt: &str, exclude_translations: bool) -> Result<LooResult> {
    let queries = set.indices_in(src);
    let candidates = set.indices_in(tgt);
    if queries.is_empty() {
        return Err(Error::Eval(format!("no test sentences in source language {src:?}")));
    }
    if candidates.is_empty() {
        return Err(Error::Eval(format!("no test sentences in target language {tgt:?}")));
    }
    let exclusion = exclude_translations && set.has_group_links();
    let norms: Vec<f64> = set.embeddings.row_iter().map(norm).collect();
    let mut trace = Vec::with_capacity(queries.len());
    let mut correct = 0;
    for &q in &queries {
        let qv = set.embeddings.row(q);
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            if c == q || (exclusion && set.groups[c] == set.groups[q]) {
                continue;
            }
            let denom = norms[q] * norms[c];
            let cos = if denom == 0.0 {
                0.0
            } else {
                dot(qv, set.embeddings.row(c)) / denom
            };
            let better = match best {
                None => true,
                Some((b, bc)) => cos > bc || (cos == bc && set.ids[c] < set.ids[b]),
            };
            if better {
                best = Some((c, cos));
            }
        }
        let Some((nb, cos)) = best else {
            return Err(Error::Eval(format!(
                "query {:?} has no candidate in {tgt:?}",
                set.ids[q]
            )));
        };
        let hit = set.labels[nb] == set.labels[q];
        correct += usize::from(hit);
        trace.push(QueryTrace {
            query: set.ids[q].clone(),
            neighbor: set.ids[nb].clone(),
            cosine: cos,
            predicted: set.labels[nb],
            truth: set.labels[q],
        });
    }
    Ok(LooResult {
        correct,
        total: queries.len(),
        acc: correct as f64 / queries.len() as f64,
        translation_exclusion: exclusion,
        trace,
    })
}
