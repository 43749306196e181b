//! Per-command settings resolved from defaults, an optional JSON config file
//! and command-line flags, in increasing order of precedence.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

/// Loaded `--config` file: one object per command name, plus an optional
/// top-level `threads`.
#[derive(Debug, Default)]
pub struct ConfigFile(Map<String, Value>);

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("--config: cannot read {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(m)) => Ok(ConfigFile(m)),
            Ok(_) => Err(Failure::usage(format!("--config: {} must hold a JSON object", path.display()))),
            Err(e) => Err(Failure::usage(format!("--config: {}: {e}", path.display()))),
        }
    }

    fn section(&self, name: &str) -> Result<Map<String, Value>, Failure> {
        match self.0.get(name) {
            None => Ok(Map::new()),
            Some(Value::Object(m)) => Ok(m.clone()),
            Some(_) => Err(Failure::usage(format!("--config: `{name}` must be an object"))),
        }
    }

    pub fn threads(&self) -> Result<Option<usize>, Failure> {
        match self.0.get("threads") {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|t| Some(t as usize))
                .ok_or_else(|| Failure::usage("--config: `threads` must be a non-negative integer")),
        }
    }
}

/// Merge `defaults <- config[section] <- flags` and deserialize.
pub fn resolve<A, S>(section: &str, config: &ConfigFile, flags: &A) -> Result<S, Failure>
where
    A: Serialize,
    S: Serialize + DeserializeOwned + Default,
{
    let mut merged = match serde_json::to_value(S::default()).expect("settings serialize") {
        Value::Object(m) => m,
        _ => unreachable!("settings are structs"),
    };
    for (k, v) in config.section(section)? {
        if !merged.contains_key(&k) {
            return Err(Failure::usage(format!("--config: unknown key `{section}.{k}`")));
        }
        merged.insert(k, v);
    }
    if let Value::Object(m) = serde_json::to_value(flags).expect("flags serialize") {
        for (k, v) in m {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::usage(format!("{section} settings: {e}")))
}

pub fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::usage(format!("{flag} is required (flag or config file)")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabSettings {
    pub corpus: Option<PathBuf>,
    pub min_count: u64,
    pub max_tokens: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for VocabSettings {
    fn default() -> Self {
        VocabSettings {
            corpus: None,
            min_count: 5,
            max_tokens: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CooccurSettings {
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub max_tokens: Option<usize>,
    pub window: usize,
    /// Down-sampling threshold; 0 disables down-sampling.
    pub subsample: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub stats_out: Option<PathBuf>,
}

impl Default for CooccurSettings {
    fn default() -> Self {
        CooccurSettings {
            corpus: None,
            vocab: None,
            max_tokens: None,
            window: pmivec::corpus::DEFAULT_WINDOW,
            subsample: pmivec::corpus::DEFAULT_SUBSAMPLE,
            seed: 1,
            out: None,
            stats_out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub pmi: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub variant: String,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub negatives: usize,
    pub neg_target: String,
    pub shift: Option<f64>,
    pub seed: u64,
    pub mode: String,
    pub count_weighted: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = pmivec::TrainConfig::default();
        TrainSettings {
            pmi: None,
            vocab: None,
            stats: None,
            variant: c.variant.to_string(),
            dim: c.dim,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            optimizer: "adagrad".into(),
            alpha1: c.alpha1,
            alpha2: c.alpha2,
            negatives: c.negatives,
            neg_target: "min".into(),
            shift: None,
            seed: c.seed,
            mode: "deterministic".into(),
            count_weighted: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub embeddings: Option<PathBuf>,
    pub vectors: String,
    pub task: String,
    pub dataset: Option<PathBuf>,
    pub subset: String,
    pub format: String,
    pub rule: String,
    pub out: Option<PathBuf>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            embeddings: None,
            vectors: "A".into(),
            task: "similarity".into(),
            dataset: None,
            subset: "ALL".into(),
            format: "tsv".into(),
            rule: "norm".into(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySettings {
    pub embeddings: Option<PathBuf>,
    pub pmi: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub sample: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for GeometrySettings {
    fn default() -> Self {
        GeometrySettings {
            embeddings: None,
            pmi: None,
            stats: None,
            sample: 500,
            seed: 1,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ContoursSettings {
    pub embeddings: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub context: Option<String>,
    pub kind: String,
    pub centers: Vec<f64>,
    pub half_width: f64,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl Default for ContoursSettings {
    fn default() -> Self {
        ContoursSettings {
            embeddings: None,
            stats: None,
            context: None,
            kind: "context_given_target".into(),
            centers: vec![-6.8, -5.7, -4.5, -3.2],
            half_width: 0.4,
            out: None,
            plot: None,
        }
    }
}
