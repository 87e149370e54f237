//! Run manifests: what went in, which seeds were used, how long each stage
//! took and digests of everything written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stage seed: first 8 bytes (little-endian) of
/// `sha256(master_seed_le || stage_name)`.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Digests of every file below `root` keyed by `/`-separated relative path.
/// Manifests themselves are skipped since they hold timings.
pub fn tree_digests(root: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| io_error(&dir, e))? {
            let path = entry.map_err(|e| io_error(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                let rel: Vec<String> = path
                    .strip_prefix(root)
                    .expect("below root")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                out.insert(rel.join("/"), file_digest(&path)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub status: StageStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub counters: BTreeMap<String, serde_json::Value>,
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let versions = [
            ("gradnap-cli", env!("CARGO_PKG_VERSION").to_string()),
            ("gradnap-core", gradnap_core::VERSION.to_string()),
            ("weights", "GNW1".to_string()),
            ("spectrogram", "GNS1".to_string()),
            ("dataset", gradnap_core::data::DATASET_VERSION.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        RunManifest {
            command: command.to_string(),
            config_hash: None,
            seeds: BTreeMap::new(),
            versions,
            inputs: BTreeMap::new(),
            stages: Vec::new(),
            counters: BTreeMap::new(),
            hyperparameters: BTreeMap::new(),
            warnings: Vec::new(),
            error: None,
            outputs: BTreeMap::new(),
        }
    }

    /// Records a digest for an input file, or for every file of an input
    /// directory (keys `label/relative/path`).
    pub fn add_input(&mut self, label: &str, path: &Path) -> CliResult<()> {
        if path.is_dir() {
            for (rel, digest) in tree_digests(path)? {
                self.inputs.insert(format!("{label}/{rel}"), digest);
            }
        } else {
            self.inputs.insert(label.to_string(), file_digest(path)?);
        }
        Ok(())
    }

    pub fn counter(&mut self, key: &str, value: impl Serialize) {
        self.counters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
    }

    pub fn hyper(&mut self, key: &str, value: impl Serialize) {
        self.hyperparameters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
    }

    /// Runs `f` as a named stage and records its wall time and outcome.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> CliResult<T>,
    ) -> CliResult<T> {
        let start = Instant::now();
        let result = f(self);
        self.stages.push(StageRecord {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
            status: if result.is_ok() {
                StageStatus::Ok
            } else {
                StageStatus::Failed
            },
        });
        result.map_err(|e| e.in_stage(name))
    }

    /// Fills output digests from `dir` and writes `dir/manifest.json`.
    pub fn finish(&mut self, dir: &Path) -> CliResult<PathBuf> {
        self.outputs = tree_digests(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::CliError::data(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_are_stable_and_distinct() {
        assert_eq!(stage_seed(1, "train"), stage_seed(1, "train"));
        assert_ne!(stage_seed(1, "train"), stage_seed(1, "data"));
        assert_ne!(stage_seed(1, "train"), stage_seed(2, "train"));
    }

    #[test]
    fn digests_skip_manifests_and_use_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/a.txt"), b"abc").unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), b"{}").unwrap();
        let d = tree_digests(dir.path()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(
            d["sub/a.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn failed_stage_is_recorded() {
        let mut m = RunManifest::new("test");
        let r: CliResult<()> = m.stage("boom", |_| Err(crate::error::CliError::data("bad input")));
        let e = r.unwrap_err();
        assert_eq!(e.stage.as_deref(), Some("boom"));
        assert_eq!(m.stages[0].status, StageStatus::Failed);
    }
}
