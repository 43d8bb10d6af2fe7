//! Output layout, metadata sidecars and upstream checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// A downstream command ran before the stage that produces its input.
#[derive(Debug)]
pub struct MissingArtifact {
    pub path: PathBuf,
    pub producer: String,
}

impl fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "missing upstream artifact {} (produced by `lingvec {}`)",
            self.path.display(),
            self.producer
        )
    }
}

impl std::error::Error for MissingArtifact {}

pub fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.to_string(),
        }
        .into())
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: PathBuf) -> Self {
        Layout { root }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn kinds_dir(&self, kinds: &str) -> PathBuf {
        self.root.join(kinds)
    }

    pub fn vocab(&self, kinds: &str) -> PathBuf {
        self.kinds_dir(kinds).join("vocab.tsv")
    }

    pub fn shards(&self, kinds: &str) -> PathBuf {
        self.kinds_dir(kinds).join("shards")
    }

    pub fn embedding(&self, kinds: &str) -> PathBuf {
        self.kinds_dir(kinds).join("embeddings.txt")
    }

    pub fn merged(&self, name: &str) -> PathBuf {
        self.root.join("merged").join(format!("{name}.txt"))
    }
}

/// Sidecar written next to every artifact as `<artifact>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub stage: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<String>,
    /// Config hashes of the inputs this artifact was built from.
    #[serde(default)]
    pub upstream: BTreeMap<String, String>,
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

pub fn write_meta(artifact: &Path, meta: &Meta) -> Result<()> {
    let path = meta_path(artifact);
    let text = serde_json::to_string_pretty(meta)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_meta(artifact: &Path) -> Option<Meta> {
    let text = std::fs::read_to_string(meta_path(artifact)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Returns the recorded config hash of `artifact`, warning when it differs
/// from the hash the current configuration would produce.
pub fn check_upstream(artifact: &Path, expected: &str) -> String {
    match read_meta(artifact) {
        Some(meta) => {
            if meta.config_hash != expected {
                log::warn!(
                    "{} was produced with config {} but the current config hashes to {}",
                    artifact.display(),
                    meta.config_hash,
                    expected
                );
            }
            meta.config_hash
        }
        None => {
            log::warn!("{} has no metadata sidecar; cannot verify its config", artifact.display());
            String::from("unknown")
        }
    }
}

/// Wall-clock time goes to its own file so the artifacts themselves stay
/// reproducible byte for byte.
pub fn write_timing(dir: &Path, stage: &str, elapsed: Duration) -> Result<()> {
    let path = dir.join(format!("{stage}.timing.txt"));
    std::fs::write(&path, format!("elapsed_seconds={:.3}\n", elapsed.as_secs_f64()))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
