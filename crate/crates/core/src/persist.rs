//! Textual model dump: a versioned header, a config echo, then named parameter
//! blocks written in shortest round-trip decimal so reloads are bit-exact.
//!
//! ```text
//! emu-model v1
//! config {...}
//! layout {...}
//! block encoder.0.weight 64 64
//! <one line of space-separated values per row>
//! ...
//! end
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::encoder::AdapterEncoder;
use crate::error::{Error, Result};
use crate::losses::{CenterBank, ClassifierHead};
use crate::nn::{Activation, AdamConfig, DenseLayer, Matrix};
use crate::trainer::SpecializationModel;

pub const MODEL_HEADER: &str = "emu-model v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Layout {
    dim: usize,
    classes: usize,
    residual: bool,
    activations: Vec<Activation>,
    center_rate: f64,
    intents: Vec<String>,
}

fn write_block(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "block {name} {} {}", m.rows(), m.cols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

/// Renders the encoder, head and centers. Optimizer state is not included.
pub fn dump_model(model: &SpecializationModel, config: &serde_json::Value) -> Result<String> {
    let layout = Layout {
        dim: model.encoder.dim(),
        classes: model.head.classes(),
        residual: model.encoder.residual(),
        activations: model.encoder.layers().iter().map(|l| l.activation()).collect(),
        center_rate: model.centers.rate(),
        intents: model.intents.clone(),
    };
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    let _ = writeln!(out, "config {}", to_json(config)?);
    let _ = writeln!(out, "layout {}", to_json(&layout)?);
    for (i, l) in model.encoder.layers().iter().enumerate() {
        write_block(&mut out, &format!("encoder.{i}.weight"), l.weight());
        write_block(&mut out, &format!("encoder.{i}.bias"), &Matrix::row_vector(l.bias())?);
    }
    write_block(&mut out, "head.weight", model.head.weight());
    write_block(&mut out, "head.bias", &Matrix::row_vector(model.head.bias())?);
    write_block(&mut out, "centers", model.centers.centers());
    out.push_str("end\n");
    Ok(out)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Data(format!("serialize: {e}")))
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| parse_err(0, format!("unexpected end of dump, expected {what}")))
    }

    fn tagged(&mut self, tag: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next(tag)?;
        line.strip_prefix(tag)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| (n, r))
            .ok_or_else(|| parse_err(n, format!("expected `{tag} ...`")))
    }

    fn block(&mut self, name: &str) -> Result<Matrix> {
        let (n, rest) = self.tagged("block")?;
        let parts: Vec<&str> = rest.split(' ').collect();
        if parts.len() != 3 || parts[0] != name {
            return Err(parse_err(n, format!("expected block {name}")));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|e| parse_err(n, format!("bad size {s:?}: {e}")));
        let (rows, cols) = (dim(parts[1])?, dim(parts[2])?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = self.next(name)?;
            let before = data.len();
            for tok in line.split(' ').filter(|t| !t.is_empty()) {
                data.push(tok.parse::<f64>().map_err(|e| parse_err(ln, format!("bad value {tok:?}: {e}")))?);
            }
            if data.len() - before != cols {
                return Err(parse_err(ln, format!("{name}: expected {cols} values")));
            }
        }
        Matrix::new(rows, cols, data)
    }
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse {
        path: "<model dump>".into(),
        line,
        message,
    }
}

/// Parses a dump back into a model (fresh optimizer state at `adam`).
/// Returns the model and its config echo.
pub fn load_model(text: &str, adam: AdamConfig) -> Result<(SpecializationModel, serde_json::Value)> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let (n, header) = r.next("header")?;
    if header != MODEL_HEADER {
        return Err(parse_err(n, format!("unsupported header {header:?}")));
    }
    let (n, cfg) = r.tagged("config")?;
    let config: serde_json::Value = serde_json::from_str(cfg).map_err(|e| parse_err(n, e.to_string()))?;
    let (n, lay) = r.tagged("layout")?;
    let layout: Layout = serde_json::from_str(lay).map_err(|e| parse_err(n, e.to_string()))?;
    let mut layers = Vec::with_capacity(layout.activations.len());
    for (i, act) in layout.activations.iter().enumerate() {
        let w = r.block(&format!("encoder.{i}.weight"))?;
        let b = r.block(&format!("encoder.{i}.bias"))?;
        layers.push(DenseLayer::new(w, b.into_data(), *act)?);
    }
    let encoder = AdapterEncoder::from_layers(layout.dim, layers, layout.residual, adam)?;
    let hw = r.block("head.weight")?;
    let hb = r.block("head.bias")?;
    let head = ClassifierHead::from_parts(hw, hb.into_data(), adam)?;
    let centers = CenterBank::from_centers(r.block("centers")?, layout.center_rate)?;
    let (n, end) = r.next("end")?;
    if end != "end" {
        return Err(parse_err(n, "expected `end`".into()));
    }
    if head.classes() != layout.classes || layout.intents.len() != layout.classes {
        return Err(Error::Validation("model dump: class count mismatch".into()));
    }
    Ok((
        SpecializationModel {
            encoder,
            head,
            centers,
            intents: layout.intents,
        },
        config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use crate::encoder::EncoderConfig;
    use crate::hyper::HyperParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let corpus = generate_synthetic(&SyntheticSpec {
            intents: 3,
            per_intent: 3,
            dim: 5,
            ..Default::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = EncoderConfig {
            identity_init: false,
            ..Default::default()
        };
        let model = SpecializationModel::new(&corpus, &HyperParams::default(), &cfg, &mut rng).unwrap();
        let text = dump_model(&model, &serde_json::json!({"seed": 1})).unwrap();
        let (back, config) = load_model(&text, AdamConfig::default()).unwrap();
        assert_eq!(config["seed"], 1);
        assert_eq!(back.encoder.flat_params(), model.encoder.flat_params());
        assert_eq!(back.head.flat_params(), model.head.flat_params());
        assert_eq!(back.centers, model.centers);
        assert_eq!(dump_model(&back, &config).unwrap(), text);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = load_model("emu-model v9\n", AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
