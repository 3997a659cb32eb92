use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

/// One sentence with its frozen base embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledExample {
    pub id: String,
    /// Translations of the same sentence share a group.
    pub group: String,
    pub lang: String,
    /// Absent for unlabeled (adversarial-only) sentences.
    pub intent: Option<String>,
    pub split: Split,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    pub unlabeled: usize,
    pub languages: Vec<String>,
    /// `(language, train, test)` labeled counts.
    pub per_language: Vec<(String, usize, usize)>,
}

/// Validated, immutable collection of examples.
#[derive(Debug, Clone)]
pub struct Corpus {
    dim: usize,
    examples: Vec<LabeledExample>,
    languages: Vec<String>,
    intents: Vec<String>,
    intent_of: Vec<Option<usize>>,
    by_group: HashMap<String, Vec<usize>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.examples == other.examples
    }
}

impl Corpus {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        let Some(first) = examples.first() else {
            return Err(Error::Validation("corpus is empty".into()));
        };
        let dim = first.embedding.len();
        if dim == 0 {
            return Err(Error::Validation(format!("example {:?} has an empty embedding", first.id)));
        }
        let mut ids = HashSet::with_capacity(examples.len());
        let mut languages: Vec<String> = Vec::new();
        let mut intents_set = BTreeMap::new();
        let mut by_group: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, ex) in examples.iter().enumerate() {
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {:?}", ex.id)));
            }
            if ex.embedding.len() != dim {
                return Err(Error::Validation(format!(
                    "example {:?} has dimension {}, expected {dim}",
                    ex.id,
                    ex.embedding.len()
                )));
            }
            if ex.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("example {:?} has a non-finite embedding", ex.id)));
            }
            if ex.lang.is_empty() {
                return Err(Error::Validation(format!("example {:?} has no language", ex.id)));
            }
            if !languages.contains(&ex.lang) {
                languages.push(ex.lang.clone());
            }
            if let Some(intent) = &ex.intent {
                if intent.is_empty() {
                    return Err(Error::Validation(format!("example {:?} has an empty intent", ex.id)));
                }
                intents_set.insert(intent.clone(), ());
            }
            by_group.entry(ex.group.clone()).or_default().push(i);
        }
        for (group, members) in &by_group {
            let mut langs = HashSet::new();
            let mut intent: Option<&str> = None;
            for &m in members {
                let ex = &examples[m];
                if !langs.insert(ex.lang.as_str()) {
                    return Err(Error::Validation(format!(
                        "group {group:?} has two members in language {:?}",
                        ex.lang
                    )));
                }
                if let Some(y) = ex.intent.as_deref() {
                    match intent {
                        Some(prev) if prev != y => {
                            return Err(Error::Validation(format!(
                                "group {group:?} mixes intents {prev:?} and {y:?}"
                            )))
                        }
                        _ => intent = Some(y),
                    }
                }
            }
        }
        let intents: Vec<String> = intents_set.into_keys().collect();
        let intent_of = examples
            .iter()
            .map(|ex| {
                ex.intent
                    .as_ref()
                    .map(|y| intents.binary_search(y).expect("intent inventory is complete"))
            })
            .collect();
        Ok(Self {
            dim,
            examples,
            languages,
            intents,
            intent_of,
            by_group,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &LabeledExample {
        &self.examples[i]
    }

    /// Languages in order of first appearance.
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Intent names, sorted; a label's class index is its position here.
    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn intent_index(&self, i: usize) -> Option<usize> {
        self.intent_of[i]
    }

    pub fn has_language(&self, lang: &str) -> bool {
        self.languages.iter().any(|l| l == lang)
    }

    /// Indices of examples matching the filters, in corpus order.
    pub fn select(&self, lang: Option<&str>, split: Option<Split>, labeled_only: bool) -> Vec<usize> {
        self.examples
            .iter()
            .enumerate()
            .filter(|(i, ex)| {
                lang.is_none_or(|l| ex.lang == l)
                    && split.is_none_or(|s| ex.split == s)
                    && (!labeled_only || self.intent_of[*i].is_some())
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// The member of `example`'s sentence group written in `lang`, if any.
    pub fn translation(&self, example: usize, lang: &str) -> Option<usize> {
        self.by_group
            .get(&self.examples[example].group)?
            .iter()
            .copied()
            .find(|&j| self.examples[j].lang == lang)
    }

    /// True when at least one group has members in two languages.
    pub fn has_group_links(&self) -> bool {
        self.by_group.values().any(|m| m.len() > 1)
    }

    pub fn group_members(&self, group: &str) -> &[usize] {
        self.by_group.get(group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn embeddings(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(&self.examples[i].embedding);
        }
        Matrix::new(indices.len(), self.dim, data).expect("validated embeddings")
    }

    pub fn labels(&self, indices: &[usize]) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&i| {
                self.intent_of[i].ok_or_else(|| {
                    Error::Data(format!("example {:?} has no intent label", self.examples[i].id))
                })
            })
            .collect()
    }

    pub fn stats(&self) -> CorpusStats {
        let mut train = 0;
        let mut test = 0;
        let mut unlabeled = 0;
        let mut per_lang: Vec<(String, usize, usize)> =
            self.languages.iter().map(|l| (l.clone(), 0, 0)).collect();
        for (i, ex) in self.examples.iter().enumerate() {
            if self.intent_of[i].is_none() {
                unlabeled += 1;
                continue;
            }
            let slot = per_lang
                .iter_mut()
                .find(|(l, _, _)| *l == ex.lang)
                .expect("language inventory is complete");
            match ex.split {
                Split::Train => {
                    train += 1;
                    slot.1 += 1;
                }
                Split::Test => {
                    test += 1;
                    slot.2 += 1;
                }
            }
        }
        CorpusStats {
            classes: self.intents.len(),
            train,
            test,
            unlabeled,
            languages: self.languages.clone(),
            per_language: per_lang,
        }
    }
}

#[cfg(test)]
pub(crate) fn example(id: &str, group: &str, lang: &str, intent: Option<&str>, split: Split, e: Vec<f64>) -> LabeledExample {
    LabeledExample {
        id: id.into(),
        group: group.into(),
        lang: lang.into(),
        intent: intent.map(Into::into),
        split,
        embedding: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_invalid() {
        assert!(matches!(Corpus::new(vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_and_dimension_checks() {
        let a = example("a", "g1", "en", Some("x"), Split::Train, vec![1.0, 2.0]);
        let dup = example("a", "g2", "en", Some("x"), Split::Train, vec![1.0, 2.0]);
        assert!(Corpus::new(vec![a.clone(), dup]).is_err());
        let short = example("b", "g2", "en", Some("x"), Split::Train, vec![1.0]);
        assert!(Corpus::new(vec![a.clone(), short]).is_err());
        let clash = example("c", "g1", "de", Some("y"), Split::Train, vec![1.0, 2.0]);
        assert!(Corpus::new(vec![a, clash]).is_err());
    }

    #[test]
    fn inventories_and_translation() {
        let c = Corpus::new(vec![
            example("1", "g1", "en", Some("b"), Split::Train, vec![1.0]),
            example("2", "g1", "de", Some("b"), Split::Train, vec![2.0]),
            example("3", "g2", "en", Some("a"), Split::Test, vec![3.0]),
            example("4", "g3", "de", None, Split::Train, vec![4.0]),
        ])
        .unwrap();
        assert_eq!(c.languages(), &["en".to_string(), "de".to_string()]);
        assert_eq!(c.intents(), &["a".to_string(), "b".to_string()]);
        assert_eq!(c.intent_index(0), Some(1));
        assert_eq!(c.translation(0, "de"), Some(1));
        assert_eq!(c.translation(2, "de"), None);
        assert_eq!(c.select(Some("de"), Some(Split::Train), true), vec![1]);
        let s = c.stats();
        assert_eq!((s.classes, s.train, s.test, s.unlabeled), (2, 2, 1, 1));
    }
}
