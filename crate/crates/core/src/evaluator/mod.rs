//! Leave-one-out nearest-neighbor evaluation and embedding diagnostics.

mod compact;
mod loo;
mod probe;
mod projection;
mod stats;

pub use compact::{compactness_metrics, Compactness};
pub use loo::{loo_intent_acc, EvalSet, LooResult, QueryTrace};
pub use probe::{language_probe, ProbeResult};
pub use projection::{project_2d, Projection};
pub use stats::{binomial_ci, significantly_different, wald_interval, BinomialInterval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{norm, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub src: String,
    pub tgt: String,
    pub acc: f64,
    pub correct: usize,
    pub n: usize,
    pub ci: BinomialInterval,
}

impl CellReport {
    pub fn label(&self) -> String {
        if self.src == self.tgt {
            format!("{}-{}", self.src, self.tgt)
        } else {
            format!("{}->{}", self.src, self.tgt)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Language on one side of every cross-lingual cell (`en` in the usual layout).
    pub pivot: String,
    /// Languages paired with the pivot; empty means every other test language.
    pub languages: Vec<String>,
    /// Explicit `(src, tgt)` grid overriding the pivot layout.
    pub pairs: Vec<(String, String)>,
    pub z: f64,
    pub exclude_translations: bool,
    pub projection: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            pivot: "en".into(),
            languages: Vec::new(),
            pairs: Vec::new(),
            z: 1.96,
            exclude_translations: true,
            projection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<CellReport>,
    /// Computed on unit-normalized embeddings.
    pub compactness: Compactness,
    pub translation_exclusion: bool,
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl EvalReport {
    pub fn cell(&self, src: &str, tgt: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.src == src && c.tgt == tgt)
    }

    /// Mean Acc@1 over cells with `src != tgt`.
    pub fn cross_lingual_mean(&self) -> Option<f64> {
        let xs: Vec<f64> = self.cells.iter().filter(|c| c.src != c.tgt).map(|c| c.acc).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }

    pub fn mean_acc(&self) -> f64 {
        self.cells.iter().map(|c| c.acc).sum::<f64>() / self.cells.len().max(1) as f64
    }
}

/// `pivot-pivot`, then `pivot→ℓ` for each ℓ, then `ℓ→pivot` for each ℓ.
pub fn table2_pairs(pivot: &str, languages: &[String]) -> Vec<(String, String)> {
    let others: Vec<&String> = languages.iter().filter(|l| *l != pivot).collect();
    let mut pairs = vec![(pivot.to_string(), pivot.to_string())];
    pairs.extend(others.iter().map(|l| (pivot.to_string(), l.to_string())));
    pairs.extend(others.iter().map(|l| (l.to_string(), pivot.to_string())));
    pairs
}

/// Runs [`loo_intent_acc`] for every `(src, tgt)` pair.
pub fn eval_pair_matrix(
    set: &EvalSet,
    pairs: &[(String, String)],
    z: f64,
    exclude_translations: bool,
) -> Result<Vec<CellReport>> {
    if pairs.is_empty() {
        return Err(Error::Eval("no language pairs to evaluate".into()));
    }
    pairs
        .iter()
        .map(|(src, tgt)| {
            let r = loo_intent_acc(set, src, tgt, exclude_translations)?;
            Ok(CellReport {
                src: src.clone(),
                tgt: tgt.clone(),
                acc: r.acc,
                correct: r.correct,
                n: r.total,
                ci: binomial_ci(r.correct, r.total, z)?,
            })
        })
        .collect()
}

fn unit_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let n = norm(out.row(r));
        if n > 0.0 {
            for v in out.row_mut(r) {
                *v /= n;
            }
        }
    }
    out
}

/// Full report: the pair matrix, compactness diagnostics and optional projection.
pub fn evaluate(set: &EvalSet, opts: &EvalOptions) -> Result<EvalReport> {
    let pairs = if opts.pairs.is_empty() {
        let mut langs: Vec<String> = Vec::new();
        for l in &set.langs {
            if !langs.contains(l) {
                langs.push(l.clone());
            }
        }
        if !langs.contains(&opts.pivot) {
            return Err(Error::Eval(format!("pivot language {:?} has no test sentences", opts.pivot)));
        }
        let others = if opts.languages.is_empty() {
            langs
        } else {
            opts.languages.clone()
        };
        table2_pairs(&opts.pivot, &others)
    } else {
        opts.pairs.clone()
    };
    let cells = eval_pair_matrix(set, &pairs, opts.z, opts.exclude_translations)?;
    let unit = unit_rows(&set.embeddings);
    let compactness = compactness_metrics(&unit, &set.labels, &set.langs, &set.groups)?;
    let projection = if opts.projection {
        Some(project_2d(&set.embeddings)?)
    } else {
        None
    };
    Ok(EvalReport {
        cells,
        compactness,
        translation_exclusion: opts.exclude_translations && set.has_group_links(),
        z: opts.z,
        projection,
        meta: serde_json::Value::Null,
    })
}

/// Aligned plain-text table, one row per labeled report, Acc@1 in percent.
/// A `*` marks cells whose interval is disjoint from the first row's.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let labels: Vec<String> = first.cells.iter().map(CellReport::label).collect();
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
    let col_w = labels.iter().map(|l| l.len()).max().unwrap_or(5).max(7);
    let mut out = format!("{:<name_w$}", "method");
    for l in &labels {
        out.push_str(&format!(" | {l:>col_w$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_w + labels.len() * (col_w + 3)));
    out.push('\n');
    for (ri, (name, report)) in rows.iter().enumerate() {
        out.push_str(&format!("{name:<name_w$}"));
        for (ci, cell) in report.cells.iter().enumerate() {
            let mark = match first.cells.get(ci) {
                Some(base) if ri > 0 && significantly_different(&cell.ci, &base.ci) => "*",
                _ => " ",
            };
            let v = format!("{:.1}{mark}", 100.0 * cell.acc);
            out.push_str(&format!(" | {v:>col_w$}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_language_layout_has_eleven_cells() {
        let langs: Vec<String> = ["en", "de", "es", "fr", "ja", "zh"].iter().map(|s| s.to_string()).collect();
        let pairs = table2_pairs("en", &langs);
        assert_eq!(pairs.len(), 11);
        assert_eq!(pairs[0], ("en".into(), "en".into()));
        assert_eq!(pairs[1], ("en".into(), "de".into()));
        assert_eq!(pairs[6], ("de".into(), "en".into()));
    }
}
