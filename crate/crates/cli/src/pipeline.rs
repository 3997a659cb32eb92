//! Command-independent experiment steps, shared by the subcommands and the
//! acceptance suite so that `ablate` and standalone runs execute the same code.

use emu_core::dataset::{generate_synthetic, load_corpus, Corpus, CorpusFormat};
use emu_core::evaluator::{evaluate, EvalOptions, EvalReport, EvalSet};
use emu_core::persist::dump_model;
use emu_core::trainer::{train_run, SpecializationModel, TrainLog, Variant, VariantSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

pub fn load_or_generate(cfg: &RunConfig) -> Result<Corpus, CliError> {
    match &cfg.corpus.path {
        Some(path) => {
            let format = match &cfg.corpus.format {
                Some(f) => f.parse::<CorpusFormat>().map_err(CliError::Config)?,
                None => CorpusFormat::from_path(path).ok_or_else(|| {
                    CliError::Config(format!(
                        "corpus.format: cannot infer from {}; set jsonl or tsv",
                        path.display()
                    ))
                })?,
            };
            Ok(load_corpus(path, format)?)
        }
        None => Ok(generate_synthetic(&cfg.synthetic)?),
    }
}

/// Trained model plus everything a run emits.
pub struct RunOutcome {
    pub model: SpecializationModel,
    pub log: TrainLog,
    pub report: EvalReport,
    pub dump: String,
}

pub fn train(corpus: &Corpus, cfg: &RunConfig, variant: &VariantSpec) -> Result<(SpecializationModel, TrainLog), CliError> {
    let mut model = SpecializationModel::init(corpus, &cfg.hp, &cfg.encoder)?;
    let (mut log, _) = train_run(&mut model, corpus, variant, &cfg.hp, cfg.hp.seed)?;
    log.config = cfg.echo();
    Ok((model, log))
}

/// Evaluates `model` (or the identity encoder when `None`) on the test split.
pub fn eval(corpus: &Corpus, model: Option<&SpecializationModel>, opts: &EvalOptions) -> Result<EvalReport, CliError> {
    let set = match model {
        Some(m) => EvalSet::from_corpus(corpus, |x| m.encode(x))?,
        None => EvalSet::from_corpus(corpus, |x| Ok(x.clone()))?,
    };
    Ok(evaluate(&set, opts)?)
}

pub fn run_variant(corpus: &Corpus, cfg: &RunConfig, variant: &VariantSpec) -> Result<RunOutcome, CliError> {
    let (model, log) = train(corpus, cfg, variant)?;
    let mut report = eval(corpus, Some(&model), &cfg.eval)?;
    report.meta = json!({ "config": cfg.echo(), "seed": cfg.hp.seed, "variant": variant, "model": "trained" });
    let dump = dump_model(&model, &cfg.echo())?;
    Ok(RunOutcome { model, log, report, dump })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: String,
    pub seed: u64,
    /// Acc@1 per cell, in the report's cell order.
    pub acc: Vec<f64>,
    pub intra_class_variance: f64,
    pub alignment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub display: String,
    pub mean_acc: Vec<f64>,
    pub mean_overall: f64,
    /// Mean over cells and seeds of `reference − variant`, in percentage points.
    pub drop_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub labels: Vec<String>,
    pub seeds: Vec<u64>,
    pub reference: String,
    pub runs: Vec<AblationCell>,
    pub rows: Vec<AblationRow>,
    pub config: serde_json::Value,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

/// Runs every variant for every seed on one corpus. Seed `s` sets `hp.seed`.
pub fn ablate(corpus: &Corpus, cfg: &RunConfig) -> Result<Ablation, CliError> {
    let variants = cfg.ablate_variants()?;
    let frozen = eval(corpus, None, &cfg.eval)?;
    let labels: Vec<String> = frozen.cells.iter().map(|c| c.label()).collect();
    let mut runs = vec![AblationCell {
        variant: "frozen".into(),
        seed: 0,
        acc: frozen.cells.iter().map(|c| c.acc).collect(),
        intra_class_variance: frozen.compactness.intra_class_variance,
        alignment: frozen.compactness.alignment,
    }];
    for v in &variants {
        for &seed in &cfg.ablate.seeds {
            let mut c = cfg.clone();
            c.hp.seed = seed;
            c.variant.name = v.name().to_string();
            c.variant.loss = None;
            c.variant.adversarial = None;
            let spec = c.variant_spec()?;
            eprintln!("ablate: {} seed {seed}", v.name());
            let out = run_variant(corpus, &c, &spec)?;
            runs.push(AblationCell {
                variant: v.name().to_string(),
                seed,
                acc: out.report.cells.iter().map(|c| c.acc).collect(),
                intra_class_variance: out.report.compactness.intra_class_variance,
                alignment: out.report.compactness.alignment,
            });
        }
    }
    let reference = variants.first().map(|v| v.name()).unwrap_or("emu").to_string();
    let row_of = |name: &str, display: &str| {
        let rs: Vec<&AblationCell> = runs.iter().filter(|r| r.variant == name).collect();
        let mean_acc: Vec<f64> = (0..labels.len()).map(|j| mean(rs.iter().map(|r| r.acc[j]))).collect();
        (display.to_string(), mean_acc)
    };
    let (_, ref_acc) = row_of(&reference, "");
    let mut rows = Vec::new();
    let mut push = |name: &str, display: &str| {
        let (display, mean_acc) = row_of(name, display);
        let drop_pp = 100.0 * mean(ref_acc.iter().zip(&mean_acc).map(|(r, a)| r - a));
        rows.push(AblationRow {
            variant: name.to_string(),
            display,
            mean_overall: mean(mean_acc.iter().copied()),
            mean_acc,
            drop_pp,
        });
    };
    push("frozen", "frozen");
    for v in &variants {
        push(v.name(), v.display());
    }
    Ok(Ablation {
        labels,
        seeds: cfg.ablate.seeds.clone(),
        reference,
        runs,
        rows,
        config: cfg.echo(),
    })
}

pub fn render_ablation(a: &Ablation) -> String {
    let name_w = a.rows.iter().map(|r| r.display.len()).max().unwrap_or(6).max(6);
    let col_w = a.labels.iter().map(|l| l.len()).max().unwrap_or(5).max(6);
    let mut out = format!("{:<name_w$}", "method");
    for l in &a.labels {
        out.push_str(&format!(" | {l:>col_w$}"));
    }
    out.push_str(&format!(" | {:>7} | {:>8}\n", "mean", "drop pp"));
    out.push_str(&"-".repeat(name_w + (a.labels.len() + 2) * (col_w + 3) + 2));
    out.push('\n');
    for r in &a.rows {
        out.push_str(&format!("{:<name_w$}", r.display));
        for v in &r.mean_acc {
            out.push_str(&format!(" | {:>col_w$.1}", 100.0 * v));
        }
        out.push_str(&format!(" | {:>7.1} | {:>8.2}\n", 100.0 * r.mean_overall, r.drop_pp));
    }
    out.push_str(&format!(
        "\nseeds: {:?}; drop pp = mean over cells of ({} − method)\n",
        a.seeds, a.reference
    ));
    out
}

/// Convenience for callers that only need a variant's spec from a name.
pub fn named_spec(cfg: &RunConfig, v: Variant) -> VariantSpec {
    v.spec(&cfg.variant.train_languages, &cfg.variant.adversarial_languages)
}
