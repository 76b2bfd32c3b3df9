//! Run manifest: provenance and digests of every completed stage.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{sha256_file, AtomicFile, PipelineStats, StageStats};
use crate::error::{Error, Result};

use super::Stage;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Digest of the settings that can change this stage's output.
    pub config_digest: String,
    /// Logical input name -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the work directory -> sha256.
    pub outputs: BTreeMap<String, String>,
    pub stats: StageStats,
    /// Stage-specific summary values.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

/// Everything here is a pure function of config and input, so two runs of
/// the same configuration produce byte-identical manifests. Wall times live
/// in a separate timings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub run_id: String,
    pub config_hash: String,
    pub count_mode: String,
    /// Every seed that influences an output.
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(run_id: String, config_hash: String, seeds: BTreeMap<String, u64>) -> Self {
        RunManifest {
            version: MANIFEST_VERSION,
            run_id,
            config_hash,
            count_mode: "whitespace".into(),
            seeds,
            stages: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&raw)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Data(format!("{}: unsupported manifest version {}", path.display(), m.version)));
        }
        Ok(m)
    }

    /// Atomic replace: readers see the old or the new manifest, never a torn one.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = AtomicFile::create(path)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        f.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))?;
        f.commit()
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Inserts or replaces a stage entry, keeping pipeline order.
    pub fn upsert(&mut self, rec: StageRecord) {
        self.stages.retain(|s| s.name != rec.name);
        self.stages.push(rec);
        let rank = |n: &str| Stage::parse(n).map_or(usize::MAX, |s| s as usize);
        self.stages.sort_by_key(|s| rank(&s.name));
    }

    pub fn stats(&self) -> PipelineStats {
        PipelineStats {
            count_mode: self.count_mode.clone(),
            stages: self.stages.iter().map(|s| (s.name.clone(), s.stats.clone())).collect(),
        }
    }

    pub fn stage_stats(&self, name: &str) -> Result<&StageStats> {
        self.stage(name)
            .map(|s| &s.stats)
            .ok_or_else(|| Error::MissingStage(name.to_string()))
    }
}

impl StageRecord {
    /// First recorded output whose file is missing or has a different digest.
    pub fn first_stale_output(&self, work_dir: &Path) -> Result<Option<String>> {
        for (rel, digest) in &self.outputs {
            let p = work_dir.join(rel);
            if !p.is_file() || sha256_file(&p)? != *digest {
                return Ok(Some(rel.clone()));
            }
        }
        Ok(None)
    }
}
