//! JSONL / TSV corpus files, optionally gzip-compressed (`.gz` suffix).
//!
//! JSONL: one object per line with `id`, `group`, `lang`, `intent` (string or
//! null), `split` (`train`/`test`) and `embedding` (array of numbers). An
//! optional first line `{"meta": ...}` carries run metadata and is skipped.
//!
//! TSV: header `id group lang intent split embedding` (tab separated), an empty
//! `intent` cell for unlabeled rows, and the embedding as comma-separated
//! decimals. Lines starting with `#` are comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, LabeledExample};
use crate::error::{Error, Result};

pub const TSV_HEADER: &str = "id\tgroup\tlang\tintent\tsplit\tembedding";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Infers the format from the file name, looking through a trailing `.gz`.
    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        let name = name.strip_suffix(".gz").unwrap_or(name);
        if name.ends_with(".jsonl") || name.ends_with(".json") {
            Some(CorpusFormat::Jsonl)
        } else if name.ends_with(".tsv") {
            Some(CorpusFormat::Tsv)
        } else {
            None
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or tsv)")),
        }
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

#[derive(Deserialize)]
struct MetaLine {
    #[allow(dead_code)]
    meta: serde_json::Value,
}

/// Reads and validates a corpus. Nothing is returned unless every line parses.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let reader = open_reader(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut examples = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match format {
            CorpusFormat::Jsonl => {
                if examples.is_empty() && line.trim_start().starts_with("{\"meta\"") {
                    serde_json::from_str::<MetaLine>(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
                    continue;
                }
                let ex: LabeledExample =
                    serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
                examples.push(ex);
            }
            CorpusFormat::Tsv => {
                if line.starts_with('#') {
                    continue;
                }
                if !header_seen {
                    if line.trim_end() != TSV_HEADER {
                        return Err(parse_err(lineno, format!("expected header {TSV_HEADER:?}")));
                    }
                    header_seen = true;
                    continue;
                }
                examples.push(parse_tsv_row(&line).map_err(|m| parse_err(lineno, m))?);
            }
        }
    }
    Corpus::new(examples)
}

fn parse_tsv_row(line: &str) -> std::result::Result<LabeledExample, String> {
    let cells: Vec<&str> = line.split('\t').collect();
    if cells.len() != 6 {
        return Err(format!("expected 6 tab-separated cells, found {}", cells.len()));
    }
    let embedding = cells[5]
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("embedding value {v:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(LabeledExample {
        id: cells[0].to_string(),
        group: cells[1].to_string(),
        lang: cells[2].to_string(),
        intent: (!cells[3].is_empty()).then(|| cells[3].to_string()),
        split: cells[4].parse()?,
        embedding,
    })
}

/// Serializes a corpus. `meta`, when given, becomes the leading meta line
/// (JSONL) or a `# meta` comment (TSV).
pub fn write_corpus<W: Write>(
    out: &mut W,
    corpus: &Corpus,
    format: CorpusFormat,
    meta: Option<&serde_json::Value>,
) -> std::io::Result<()> {
    match format {
        CorpusFormat::Jsonl => {
            if let Some(m) = meta {
                writeln!(out, "{}", serde_json::json!({ "meta": m }))?;
            }
            for ex in corpus.examples() {
                serde_json::to_writer(&mut *out, ex)?;
                out.write_all(b"\n")?;
            }
        }
        CorpusFormat::Tsv => {
            if let Some(m) = meta {
                writeln!(out, "# meta {m}")?;
            }
            writeln!(out, "{TSV_HEADER}")?;
            for ex in corpus.examples() {
                let emb: Vec<String> = ex.embedding.iter().map(|v| format!("{v:?}")).collect();
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    ex.id,
                    ex.group,
                    ex.lang,
                    ex.intent.as_deref().unwrap_or(""),
                    ex.split.as_str(),
                    emb.join(",")
                )?;
            }
        }
    }
    Ok(())
}

/// Writes to `path`, compressing when it ends in `.gz`.
pub fn save_corpus(
    path: &Path,
    corpus: &Corpus,
    format: CorpusFormat,
    meta: Option<&serde_json::Value>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_corpus(&mut enc, corpus, format, meta).and_then(|_| enc.finish()?.flush())
    } else {
        let mut w = BufWriter::new(file);
        write_corpus(&mut w, corpus, format, meta).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::corpus::{example, Split};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("emu-io-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn small() -> Corpus {
        Corpus::new(vec![
            example("a", "g1", "en", Some("pool"), Split::Train, vec![0.1, -2.5e-17, 3.0]),
            example("b", "g1", "de", Some("pool"), Split::Test, vec![1.0 / 3.0, 2.0, -0.0]),
            example("c", "g2", "de", None, Split::Train, vec![1e300, 5e-324, 7.25]),
        ])
        .unwrap()
    }

    #[test]
    fn round_trips_bit_exact() {
        let c = small();
        for (name, fmt) in [
            ("c.jsonl", CorpusFormat::Jsonl),
            ("c.tsv", CorpusFormat::Tsv),
            ("c.jsonl.gz", CorpusFormat::Jsonl),
            ("c.tsv.gz", CorpusFormat::Tsv),
        ] {
            let p = tmp(name);
            assert_eq!(CorpusFormat::from_path(&p), Some(fmt));
            save_corpus(&p, &c, fmt, Some(&serde_json::json!({"seed": 1}))).unwrap();
            let back = load_corpus(&p, fmt).unwrap();
            for (x, y) in c.examples().iter().zip(back.examples()) {
                assert_eq!(x.id, y.id);
                assert_eq!(x.intent, y.intent);
                let xb: Vec<u64> = x.embedding.iter().map(|v| v.to_bits()).collect();
                let yb: Vec<u64> = y.embedding.iter().map(|v| v.to_bits()).collect();
                assert_eq!(xb, yb, "{name}");
            }
            assert_eq!(back, c);
        }
    }

    #[test]
    fn empty_file_is_validation_error() {
        let p = tmp("empty.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_corpus(&p, CorpusFormat::Jsonl), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let p = tmp("bad.jsonl");
        let good = r#"{"id":"a","group":"g","lang":"en","intent":"x","split":"train","embedding":[1.0]}"#;
        std::fs::write(&p, format!("{good}\n{{not json\n")).unwrap();
        match load_corpus(&p, CorpusFormat::Jsonl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let p = tmp("bad.tsv");
        std::fs::write(&p, format!("{TSV_HEADER}\na\tg\ten\tx\ttrain\t1.0,zz\n")).unwrap();
        match load_corpus(&p, CorpusFormat::Tsv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
