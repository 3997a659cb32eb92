//! `emu` command-line front end.
//!
//! ```text
//! emu gen-data [--output FILE]
//! emu train
//! emu eval    [--model FILE | --frozen]
//! emu ablate
//! emu project [--model FILE | --frozen]
//! emu report  REPORT.json...
//! ```
//!
//! Every command takes `--config FILE`, `--set key=value` (repeatable),
//! `--seed N` (`hp.seed`), `--out DIR` and `--corpus FILE`. The output
//! directory defaults to `$EMU_OUT_DIR`, then `./out`.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use emu_core::dataset::{save_corpus, CorpusFormat};
use emu_core::evaluator::{project_2d, render_table, EvalReport, EvalSet};
use emu_core::nn::AdamConfig;
use emu_core::persist::load_model;
use emu_core::trainer::SpecializationModel;
use serde_json::{json, Map, Value};

use artifacts::Staged;
use config::{parse_override, RunConfig};

pub const OUT_DIR_ENV: &str = "EMU_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments; exit code 2.
    Config(String),
    /// Failure while running; exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<emu_core::Error> for CliError {
    fn from(e: emu_core::Error) -> Self {
        match e {
            emu_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "emu", about = "Semantic specialization of multilingual sentence embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat dotted-key JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Training seed (`hp.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus file (`corpus.path`); without it a synthetic corpus is generated.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArg {
    /// Model dump; defaults to `<out>/model.txt`.
    #[arg(long, conflicts_with = "frozen")]
    model: Option<PathBuf>,
    /// Evaluate the untrained (identity) encoder.
    #[arg(long)]
    frozen: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output corpus file (`.jsonl`/`.tsv`, optional `.gz`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fine-tune one variant; writes model.txt and train_log.jsonl.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out evaluation; writes eval_report.json and eval_report.txt.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Run the variant grid over shared seeds; writes ablation.json and ablation.txt.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// 2D PCA coordinates and raw embeddings of the test split.
    Project {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Render saved EvalReports as one table.
    Report {
        #[command(flatten)]
        common: Common,
        /// eval_report.json files; the first is the significance baseline.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut flat = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse_json(&text)?
        }
        None => Map::new(),
    };
    for s in &common.sets {
        let (k, v) = parse_override(s)?;
        flat.insert(k, v);
    }
    if let Some(seed) = common.seed {
        flat.insert("hp.seed".into(), json!(seed));
    }
    if let Some(p) = &common.corpus {
        flat.insert("corpus.path".into(), json!(p.to_string_lossy()));
    }
    let mut cfg = RunConfig::from_flat(&flat)?;
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn to_pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Run(format!("serialize: {e}")))
}

fn load_trained(path: &Path, cfg: &RunConfig) -> Result<(SpecializationModel, Value), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    Ok(load_model(&text, AdamConfig::with_lr(cfg.hp.lr_main))?)
}

/// Model for `eval`/`project`: explicit path, else `<out>/model.txt`, else an error
/// unless `--frozen` was given.
fn pick_model(arg: &ModelArg, cfg: &RunConfig) -> Result<Option<(SpecializationModel, Value, PathBuf)>, CliError> {
    if arg.frozen {
        return Ok(None);
    }
    let path = arg.model.clone().unwrap_or_else(|| out_dir(cfg).join("model.txt"));
    if !path.exists() {
        return Err(CliError::Run(format!(
            "model {} not found (train first, pass --model, or use --frozen)",
            path.display()
        )));
    }
    let (m, c) = load_trained(&path, cfg)?;
    Ok(Some((m, c, path)))
}

fn gen_data(common: &Common, output: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let path = output.unwrap_or_else(|| out_dir(&cfg).join("corpus.jsonl"));
    let format = CorpusFormat::from_path(&path)
        .ok_or_else(|| CliError::Config(format!("--output {}: use .jsonl or .tsv", path.display())))?;
    let corpus = emu_core::dataset::generate_synthetic(&cfg.synthetic)?;
    let stats = corpus.stats();
    let meta = json!({ "config": cfg.echo(), "seed": cfg.synthetic.seed, "stats": stats });
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
    }
    let tmp = artifacts::external_temp(&path);
    if let Err(e) = save_corpus(&tmp, &corpus, format, Some(&meta)) {
        artifacts::discard_external(&path);
        return Err(e.into());
    }
    artifacts::finish_external(&path)?;
    eprintln!(
        "wrote {} ({} classes, {} train, {} test)",
        path.display(),
        stats.classes,
        stats.train,
        stats.test
    );
    Ok(())
}

fn train(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let corpus = pipeline::load_or_generate(&cfg)?;
    let variant = cfg.variant_spec()?;
    variant.validate(&corpus)?;
    let (model, log) = pipeline::train(&corpus, &cfg, &variant)?;
    let dump = emu_core::persist::dump_model(&model, &cfg.echo())?;
    let mut lines = String::new();
    let meta = json!({ "meta": { "config": cfg.echo(), "seed": cfg.hp.seed, "variant": variant } });
    lines.push_str(&meta.to_string());
    lines.push('\n');
    for s in &log.steps {
        lines.push_str(&json!({ "step": s }).to_string());
        lines.push('\n');
    }
    for e in &log.epochs {
        lines.push_str(&json!({ "epoch": e }).to_string());
        lines.push('\n');
    }
    let dir = out_dir(&cfg);
    let mut staged = Staged::default();
    staged.add(dir.join("model.txt"), dump);
    staged.add(dir.join("train_log.jsonl"), lines);
    staged.commit()?;
    if let Some(last) = log.epochs.last() {
        eprintln!(
            "trained {} for {} steps; final mean loss {:.4}",
            variant.name,
            log.steps.len(),
            last.mean_total
        );
    }
    Ok(())
}

fn eval(common: &Common, arg: &ModelArg) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let corpus = pipeline::load_or_generate(&cfg)?;
    let picked = pick_model(arg, &cfg)?;
    let mut report = pipeline::eval(&corpus, picked.as_ref().map(|p| &p.0), &cfg.eval)?;
    report.meta = json!({
        "config": cfg.echo(),
        "seed": cfg.hp.seed,
        "model": picked.as_ref().map_or(json!("frozen"), |p| json!({ "config": p.1 })),
    });
    let table = render_table(&[("model".to_string(), &report)]);
    let dir = out_dir(&cfg);
    let mut staged = Staged::default();
    staged.add(dir.join("eval_report.json"), to_pretty(&report)?);
    staged.add(dir.join("eval_report.txt"), table.clone());
    staged.commit()?;
    print!("{table}");
    Ok(())
}

fn ablate(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let corpus = pipeline::load_or_generate(&cfg)?;
    cfg.variant_spec()?.validate(&corpus)?;
    let a = pipeline::ablate(&corpus, &cfg)?;
    let text = pipeline::render_ablation(&a);
    let dir = out_dir(&cfg);
    let mut staged = Staged::default();
    staged.add(dir.join("ablation.json"), to_pretty(&a)?);
    staged.add(dir.join("ablation.txt"), text.clone());
    staged.commit()?;
    print!("{text}");
    Ok(())
}

fn project(common: &Common, arg: &ModelArg) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let corpus = pipeline::load_or_generate(&cfg)?;
    let picked = pick_model(arg, &cfg)?;
    let set = match &picked {
        Some((m, _, _)) => EvalSet::from_corpus(&corpus, |x| m.encode(x))?,
        None => EvalSet::from_corpus(&corpus, |x| Ok(x.clone()))?,
    };
    let p = project_2d(&set.embeddings)?;
    let header = format!(
        "# config {}\n# explained {:?} degenerate {}\n",
        cfg.echo(),
        p.explained,
        p.degenerate
    );
    let mut coords = header.clone();
    coords.push_str("id\tlang\tintent\tx\ty\n");
    let mut raw = header;
    raw.push_str("id\tlang\tintent\tembedding\n");
    for i in 0..set.len() {
        let intent = corpus
            .intents()
            .get(set.labels[i])
            .cloned()
            .unwrap_or_default();
        coords.push_str(&format!(
            "{}\t{}\t{}\t{:?}\t{:?}\n",
            set.ids[i],
            set.langs[i],
            intent,
            p.coords.get(i, 0),
            p.coords.get(i, 1)
        ));
        let emb: Vec<String> = set.embeddings.row(i).iter().map(|v| format!("{v:?}")).collect();
        raw.push_str(&format!("{}\t{}\t{}\t{}\n", set.ids[i], set.langs[i], intent, emb.join(",")));
    }
    let dir = out_dir(&cfg);
    let mut staged = Staged::default();
    staged.add(dir.join("projection.tsv"), coords);
    staged.add(dir.join("embeddings.tsv"), raw);
    staged.commit()?;
    eprintln!("wrote {} points; explained variance {:?}", set.len(), p.explained);
    Ok(())
}

fn report(common: &Common, paths: &[PathBuf]) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let mut reports = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| CliError::Run(format!("{}: {e}", p.display())))?;
        let r: EvalReport =
            serde_json::from_str(&text).map_err(|e| CliError::Run(format!("{}: {e}", p.display())))?;
        let name = p
            .parent()
            .and_then(|d| d.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        reports.push((name, r));
    }
    let rows: Vec<(String, &EvalReport)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    let mut text = render_table(&rows);
    for (n, r) in &reports {
        text.push_str(&format!(
            "{n}: intra-class variance {:.4}, alignment {}\n",
            r.compactness.intra_class_variance,
            r.compactness.alignment.map_or("n/a".into(), |a| format!("{a:.4}"))
        ));
    }
    let mut staged = Staged::default();
    staged.add(out_dir(&cfg).join("report.txt"), text.clone());
    staged.commit()?;
    print!("{text}");
    Ok(())
}

/// Runs one command; returns the process exit code (0 ok, 1 runtime, 2 config).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenData { common, output } => gen_data(common, output.clone()),
        Command::Train { common } => train(common),
        Command::Eval { common, model } => eval(common, model),
        Command::Ablate { common } => ablate(common),
        Command::Project { common, model } => project(common, model),
        Command::Report { common, reports } => report(common, reports),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("emu: {e}");
            e.exit_code()
        }
    }
}
