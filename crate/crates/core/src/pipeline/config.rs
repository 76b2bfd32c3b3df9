//! The single TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bpe::TrainConfig;
use crate::corpus::{sha256_file, sha256_hex, FieldMap};
use crate::error::{Error, Result};
use crate::filters::{FilterConfig, Filters};
use crate::minhash::MinHashConfig;
use crate::mlm::MlmConfig;
use crate::phase1::{Boilerplate, ClaimRules, Phase1Config, DEFAULT_SORT_BUFFER};

use super::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub input: PathBuf,
    #[serde(default)]
    pub work_dir: PathBuf,
    /// Work partitions per stage. Never changes outputs.
    #[serde(default = "default_shards")]
    pub shards: usize,
}

fn default_shards() -> usize {
    8
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            input: PathBuf::new(),
            work_dir: PathBuf::new(),
            shards: default_shards(),
        }
    }
}

impl RunSection {
    /// A full run needs both paths; single-stage commands take theirs from flags.
    pub fn require_paths(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::config("run.input", "required for a pipeline run"));
        }
        if self.work_dir.as_os_str().is_empty() {
            return Err(Error::config("run.work_dir", "required for a pipeline run"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Section {
    /// Prefix list replacing the built-in boilerplate phrases.
    pub boilerplate: Option<PathBuf>,
    /// Regexes marking a claim as dependent.
    pub dependency_patterns: Option<Vec<String>>,
    pub sort_buffer: usize,
}

impl Default for Phase1Section {
    fn default() -> Self {
        Phase1Section {
            boilerplate: None,
            dependency_patterns: None,
            sort_buffer: DEFAULT_SORT_BUFFER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub fields: FieldMap,
    #[serde(default)]
    pub phase1: Phase1Section,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub dedup: MinHashConfig,
    #[serde(default)]
    pub tokenizer: TrainConfig,
    #[serde(default)]
    pub mlm: MlmConfig,
}

/// Maps a toml error to a config error keyed by the dotted path it points at.
fn toml_error(src: &str, e: toml::de::Error) -> Error {
    let key = e
        .span()
        .map(|span| {
            let token = src[span.clone()].trim().trim_matches('"');
            let section = src[..span.start]
                .lines()
                .filter_map(|l| l.trim().strip_prefix('[').and_then(|l| l.strip_suffix(']')))
                .next_back();
            let token = token.split(['=', ' ']).next().unwrap_or(token);
            match section {
                Some(s) if !token.starts_with('[') => format!("{}.{token}", s.trim()),
                _ => token.trim_matches(['[', ']']).to_string(),
            }
        })
        .unwrap_or_else(|| "<root>".to_string());
    Error::config(key, e.message().trim().to_string())
}

impl PipelineConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(src).map_err(|e| toml_error(src, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&src)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run.input);
        fix(&mut self.run.work_dir);
        if let Some(p) = &mut self.phase1.boilerplate {
            fix(p);
        }
        if let Some(p) = &mut self.filters.language.model {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.shards == 0 {
            return Err(Error::config("run.shards", "must be positive"));
        }
        if self.phase1.sort_buffer == 0 {
            return Err(Error::config("phase1.sort_buffer", "must be positive"));
        }
        if let Some(p) = &self.phase1.dependency_patterns {
            ClaimRules::new(p.iter().map(String::as_str)).map_err(|e| Error::config("phase1.dependency_patterns", e.to_string()))?;
        }
        self.filters.validate()?;
        self.dedup.validate()?;
        if self.tokenizer.vocab_size <= 5 {
            return Err(Error::config("tokenizer.vocab_size", "must exceed the five special tokens"));
        }
        if self.tokenizer.min_freq == 0 {
            return Err(Error::config("tokenizer.min_freq", "must be positive"));
        }
        self.mlm.validate()
    }

    pub fn phase1_config(&self) -> Result<Phase1Config> {
        let boilerplate = match &self.phase1.boilerplate {
            Some(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Boilerplate::parse(&src)?
            }
            None => Boilerplate::default(),
        };
        let claims = match &self.phase1.dependency_patterns {
            Some(p) => ClaimRules::new(p.iter().map(String::as_str))?,
            None => ClaimRules::default(),
        };
        Ok(Phase1Config {
            boilerplate,
            claims,
            sort_buffer: self.phase1.sort_buffer,
        })
    }

    pub fn filters(&self) -> Result<Filters> {
        Filters::new(self.filters.clone())
    }

    /// Settings that can change a stage's output. Paths, shard counts and
    /// buffer sizes are left out; referenced files enter by content digest.
    pub fn stage_settings(&self, stage: Stage) -> Result<serde_json::Value> {
        Ok(match stage {
            Stage::Phase1 => json!({
                "fields": self.fields,
                "boilerplate": self.phase1.boilerplate.as_deref().map(sha256_file).transpose()?,
                "dependency_patterns": self.phase1.dependency_patterns,
            }),
            Stage::Filter => {
                let mut f = self.filters.clone();
                let model = f.language.model.take().as_deref().map(sha256_file).transpose()?;
                json!({ "filters": f, "model": model })
            }
            Stage::Dedup => json!(self.dedup),
            Stage::Tok => json!(self.tokenizer),
            Stage::MlmPrep => json!(self.mlm),
        })
    }

    pub fn stage_digest(&self, stage: Stage) -> Result<String> {
        Ok(sha256_hex(self.stage_settings(stage)?.to_string().as_bytes()))
    }

    /// Digest over every stage's settings.
    pub fn config_hash(&self) -> Result<String> {
        let all: Vec<serde_json::Value> = Stage::ALL
            .iter()
            .map(|&s| self.stage_settings(s))
            .collect::<Result<_>>()?;
        Ok(sha256_hex(serde_json::Value::Array(all).to_string().as_bytes()))
    }
}
