//! Run configuration: a flat JSON object with dotted keys (`"hp.alpha": 50`),
//! overridable from the command line with `--set key=value`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use emu_core::dataset::SyntheticSpec;
use emu_core::encoder::EncoderConfig;
use emu_core::evaluator::EvalOptions;
use emu_core::trainer::{Adversarial, LossKind, Variant, VariantSpec};
use emu_core::HyperParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Corpus file; absent means "generate from `synthetic.*`".
    pub path: Option<PathBuf>,
    /// `jsonl` or `tsv`; inferred from the extension when absent.
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    /// Overrides the named variant's loss.
    pub loss: Option<LossKind>,
    /// Overrides the named variant's adversarial mode.
    pub adversarial: Option<Adversarial>,
    pub train_languages: Vec<String>,
    pub adversarial_languages: Vec<String>,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            name: "emu".into(),
            loss: None,
            adversarial: None,
            train_languages: vec!["en".into()],
            adversarial_languages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub seeds: Vec<u64>,
    /// Variant names; empty means the full grid.
    pub variants: Vec<String>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            variants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub synthetic: SyntheticSpec,
    pub hp: HyperParams,
    pub encoder: EncoderConfig,
    pub variant: VariantConfig,
    pub eval: EvalOptions,
    pub ablate: AblateConfig,
    /// Not echoed into artifacts: two runs that differ only here are the same run.
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

const SECTIONS: [&str; 7] = ["corpus", "synthetic", "hp", "encoder", "variant", "eval", "ablate"];

fn section<T: DeserializeOwned>(name: &str, v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field `").and_then(|r| r.split_once('`')) {
            Some((field, _)) => CliError::Config(format!("unknown config key `{name}.{field}`")),
            None => CliError::Config(format!("{name}.*: {msg}")),
        }
    })
}

impl RunConfig {
    /// Builds a config from flat dotted keys, rejecting unknown keys.
    pub fn from_flat(flat: &Map<String, Value>) -> Result<Self, CliError> {
        let mut nested: BTreeMap<&str, Map<String, Value>> = BTreeMap::new();
        let mut out_dir = None;
        for (key, value) in flat {
            if key == "out_dir" {
                let s = value
                    .as_str()
                    .ok_or_else(|| CliError::Config("out_dir: expected a string".into()))?;
                out_dir = Some(PathBuf::from(s));
                continue;
            }
            let Some((sec, field)) = key.split_once('.') else {
                return Err(CliError::Config(format!("unknown config key `{key}`")));
            };
            let Some(sec) = SECTIONS.iter().find(|s| **s == sec) else {
                return Err(CliError::Config(format!("unknown config key `{key}`")));
            };
            nested.entry(sec).or_default().insert(field.to_string(), value.clone());
        }
        let mut take = |s: &str| Value::Object(nested.remove(s).unwrap_or_default());
        let cfg = RunConfig {
            corpus: section("corpus", take("corpus"))?,
            synthetic: section("synthetic", take("synthetic"))?,
            hp: section("hp", take("hp"))?,
            encoder: section("encoder", take("encoder"))?,
            variant: section("variant", take("variant"))?,
            eval: section("eval", take("eval"))?,
            ablate: section("ablate", take("ablate"))?,
            out_dir,
        };
        Ok(cfg)
    }

    pub fn parse_json(text: &str) -> Result<Map<String, Value>, CliError> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err(CliError::Config("config file must hold a JSON object".into())),
            Err(e) => Err(CliError::Config(format!("config file: {e}"))),
        }
    }

    /// Every resolved setting as flat dotted keys (sorted), `out_dir` excluded.
    pub fn to_flat(&self) -> Map<String, Value> {
        let mut out = Map::new();
        let Ok(Value::Object(nested)) = serde_json::to_value(self) else {
            return out;
        };
        for (sec, v) in nested {
            if let Value::Object(fields) = v {
                for (k, v) in fields {
                    out.insert(format!("{sec}.{k}"), v);
                }
            }
        }
        out
    }

    pub fn echo(&self) -> Value {
        Value::Object(self.to_flat())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.hp.validate()?;
        self.synthetic.validate()?;
        self.variant_spec()?;
        if !(self.eval.z.is_finite() && self.eval.z > 0.0) {
            return Err(CliError::Config("eval.z: must be finite and > 0".into()));
        }
        if self.ablate.seeds.is_empty() {
            return Err(CliError::Config("ablate.seeds: empty".into()));
        }
        self.ablate_variants()?;
        if let Some(f) = &self.corpus.format {
            f.parse::<emu_core::dataset::CorpusFormat>()
                .map_err(|e| CliError::Config(format!("corpus.format: {e}")))?;
        }
        Ok(())
    }

    /// The configured variant with any loss/adversarial overrides applied.
    pub fn variant_spec(&self) -> Result<VariantSpec, CliError> {
        let v = Variant::parse(&self.variant.name)
            .map_err(|_| CliError::Config(format!("variant.name: unknown variant {:?}", self.variant.name)))?;
        let mut spec = v.spec(&self.variant.train_languages, &self.variant.adversarial_languages);
        if let Some(l) = self.variant.loss {
            spec.loss = l;
        }
        if let Some(a) = self.variant.adversarial {
            spec.adversarial = a;
        }
        Ok(spec)
    }

    pub fn ablate_variants(&self) -> Result<Vec<Variant>, CliError> {
        if self.ablate.variants.is_empty() {
            return Ok(Variant::ALL.to_vec());
        }
        self.ablate
            .variants
            .iter()
            .map(|n| Variant::parse(n).map_err(|_| CliError::Config(format!("ablate.variants: unknown variant {n:?}"))))
            .collect()
    }
}

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {s:?}")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn flat(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn dotted_keys_reach_sections() {
        let c = RunConfig::from_flat(&flat(json!({"hp.alpha": 20.0, "synthetic.languages": 6, "out_dir": "x"}))).unwrap();
        assert_eq!(c.hp.alpha, 20.0);
        assert_eq!(c.synthetic.languages, 6);
        assert_eq!(c.out_dir, Some(PathBuf::from("x")));
    }

    #[test]
    fn unknown_keys_name_the_key() {
        for bad in [json!({"hp.alpah": 1}), json!({"nope.x": 1}), json!({"bare": 1})] {
            let e = RunConfig::from_flat(&flat(bad)).unwrap_err();
            let CliError::Config(msg) = e else { panic!() };
            assert!(msg.contains("alpah") || msg.contains("nope.x") || msg.contains("bare"), "{msg}");
        }
    }

    #[test]
    fn flat_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_flat(&c.to_flat()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_parse_json_or_string() {
        assert_eq!(parse_override("hp.k=3").unwrap(), ("hp.k".into(), json!(3)));
        assert_eq!(parse_override("variant.name=emu").unwrap(), ("variant.name".into(), json!("emu")));
        assert!(parse_override("novalue").is_err());
    }
}
