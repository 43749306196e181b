//! Run manifests: what a stage read, what it wrote, and how it was configured.
//!
//! A stage copies the history of every input that has a manifest next to it,
//! so the last manifest in a pipeline carries the configuration of every
//! stage before it. Digests let a reader check that each stage consumed the
//! exact files its predecessor wrote.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub threads: usize,
    #[serde(flatten)]
    pub record: StageRecord,
    /// Stage-specific results, such as evaluation scores.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<Value>,
    /// Earlier stages, oldest first.
    pub history: Vec<StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("{}: cannot open", path.display()))?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).with_context(|| format!("{}: read failed", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Manifest location for an output file or directory.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

pub struct ManifestBuilder {
    stage: String,
    config: Value,
    threads: usize,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    history: Vec<StageRecord>,
    report: Option<Value>,
}

impl ManifestBuilder {
    pub fn new(stage: &str, config: &impl Serialize, threads: usize) -> Self {
        ManifestBuilder {
            stage: stage.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            history: Vec::new(),
            report: None,
        }
    }

    /// Record an input, pulling in the history of its producer if that
    /// stage left a manifest beside it (or in its directory).
    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        self.inputs.push(FileRecord {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        let candidates = [
            manifest_path(path),
            path.parent().map(|p| p.join("manifest.json")).unwrap_or_default(),
        ];
        for m in candidates {
            if let Ok(text) = std::fs::read_to_string(&m) {
                if let Ok(prev) = serde_json::from_str::<RunManifest>(&text) {
                    if prev.record.outputs.iter().any(|o| o.path == path) {
                        for h in prev.history.into_iter().chain(std::iter::once(prev.record)) {
                            if !self.history.contains(&h) {
                                self.history.push(h);
                            }
                        }
                        break;
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn output(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        self.outputs.push(FileRecord {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn report(&mut self, report: &impl Serialize) -> &mut Self {
        self.report = Some(serde_json::to_value(report).expect("report serializes"));
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            threads: self.threads,
            record: StageRecord {
                stage: self.stage.clone(),
                config: self.config.clone(),
                inputs: self.inputs.clone(),
                outputs: self.outputs.clone(),
            },
            report: self.report.clone(),
            history: self.history.clone(),
        };
        let text = serde_json::to_string_pretty(&m)?;
        std::fs::write(path, text + "\n").with_context(|| format!("{}: cannot write manifest", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn history_follows_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "data").unwrap();
        let mut first = ManifestBuilder::new("one", &serde_json::json!({"k": 1}), 1);
        first.output("a", &a).unwrap();
        first.write(&manifest_path(&a)).unwrap();

        let mut second = ManifestBuilder::new("two", &serde_json::json!({}), 1);
        second.input("a", &a).unwrap();
        assert_eq!(second.history.len(), 1);
        assert_eq!(second.history[0].stage, "one");
        assert_eq!(second.inputs[0].sha256, second.history[0].outputs[0].sha256);
    }
}
