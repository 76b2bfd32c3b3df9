//! Resumable orchestration of the five corpus stages.
//!
//! Stage outputs live under fixed names in the work directory. After every
//! completed stage the manifest is rewritten atomically with the digests of
//! the stage's inputs, settings and outputs; `resume` skips a stage only when
//! all three still match.

mod config;
mod manifest;
mod report;
mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bpe::BpeVocab;
use crate::corpus::sha256_file;
use crate::error::{Error, Result};
use crate::minhash::MinHashSeeds;
use crate::par::Execution;

pub use config::{Phase1Section, PipelineConfig, RunSection};
pub use manifest::{RunManifest, StageRecord, MANIFEST_VERSION};
pub use report::{thousands, ReductionReport, ReductionRow};
pub use stages::{
    read_clean_records, read_field_docs, run_dedup, run_filter, run_mlm_prep, run_phase1, run_tok_train, write_seeds, DedupOutputs,
    DedupSummary, MlmSummary, Phase1Summary, TokSummary, CHUNK,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "run_timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Phase1,
    Filter,
    Dedup,
    Tok,
    MlmPrep,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Phase1, Stage::Filter, Stage::Dedup, Stage::Tok, Stage::MlmPrep];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Phase1 => "phase1",
            Stage::Filter => "filter",
            Stage::Dedup => "dedup",
            Stage::Tok => "tok",
            Stage::MlmPrep => "mlm-prep",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Work-directory files this stage reads, besides the raw input.
    fn upstream_files(self) -> &'static [&'static str] {
        match self {
            Stage::Phase1 => &[],
            Stage::Filter => &[paths::CLEAN],
            Stage::Dedup => &[paths::KEPT],
            Stage::Tok => &[paths::RECORDS],
            Stage::MlmPrep => &[paths::RECORDS, paths::VOCAB],
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Output locations relative to the work directory.
pub mod paths {
    pub const CLEAN: &str = "phase1/clean.jsonl";
    pub const REJECTS: &str = "phase1/rejects.jsonl";
    pub const KEPT: &str = "filter/kept.jsonl";
    pub const DROPPED: &str = "filter/dropped.jsonl";
    pub const AUDIT: &str = "filter/audit.jsonl";
    pub const UNIQUE: &str = "dedup/unique.jsonl";
    pub const RECORDS: &str = "dedup/records.jsonl";
    pub const DUPLICATES: &str = "dedup/duplicates.jsonl";
    pub const SIGNATURES: &str = "dedup/signatures.bin";
    pub const SEEDS: &str = "dedup/seeds.json";
    pub const VOCAB: &str = "tok/vocab.json";
    pub const MLM_DIR: &str = "mlm";
    pub const MLM_STEM: &str = "train";
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stages to run; empty means all. Always executed in pipeline order.
    pub stages: Vec<Stage>,
    /// Skip stages whose recorded digests still match.
    pub resume: bool,
    /// Re-execute stages whose recorded outputs no longer match instead of failing.
    pub force: bool,
    pub exec: Execution,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
    pub wall_secs: BTreeMap<String, f64>,
}

/// Loads `config_path` and runs the requested stages.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = PipelineConfig::load(config_path)?;
    run_config(&cfg, opts)
}

pub fn run_config(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    cfg.run.require_paths()?;
    let work = cfg.run.work_dir.clone();
    std::fs::create_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    if !cfg.run.input.is_file() {
        return Err(Error::Data(format!("input {} does not exist", cfg.run.input.display())));
    }
    let input_digest = sha256_file(&cfg.run.input)?;
    let config_hash = cfg.config_hash()?;
    let run_id = crate::corpus::sha256_hex(format!("{config_hash}:{input_digest}").as_bytes())[..16].to_string();
    let seeds: BTreeMap<String, u64> = [("minhash".to_string(), cfg.dedup.seed), ("mlm".to_string(), cfg.mlm.seed)].into();

    let manifest_path = work.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.is_file() {
        RunManifest::load(&manifest_path)?
    } else {
        RunManifest::new(run_id.clone(), config_hash.clone(), seeds.clone())
    };
    manifest.run_id = run_id;
    manifest.config_hash = config_hash;
    manifest.seeds = seeds;

    let mut requested: Vec<Stage> = if opts.stages.is_empty() { Stage::ALL.to_vec() } else { opts.stages.clone() };
    requested.sort();
    requested.dedup();

    let mut summary = RunSummary {
        manifest: manifest.clone(),
        executed: Vec::new(),
        skipped: Vec::new(),
        wall_secs: BTreeMap::new(),
    };
    for stage in requested {
        let mut inputs = BTreeMap::new();
        if stage == Stage::Phase1 {
            inputs.insert("input".to_string(), input_digest.clone());
        }
        for rel in stage.upstream_files() {
            let p = work.join(rel);
            if !p.is_file() {
                return Err(Error::Data(format!("stage {stage} needs {}; run the upstream stage first", p.display())));
            }
            inputs.insert(rel.to_string(), sha256_file(&p)?);
        }
        let config_digest = cfg.stage_digest(stage)?;

        if opts.resume {
            if let Some(prev) = manifest.stage(stage.name()) {
                if prev.config_digest == config_digest && prev.inputs == inputs {
                    match prev.first_stale_output(&work)? {
                        None => {
                            log::info!("{stage}: digests match, skipping");
                            summary.skipped.push(stage);
                            continue;
                        }
                        Some(file) if !opts.force => {
                            log::error!("{stage}: recorded output {file} changed since the stage completed");
                            return Err(Error::DigestMismatch { stage: stage.name().to_string() });
                        }
                        Some(file) => log::warn!("{stage}: {file} changed; re-running (--force)"),
                    }
                }
            }
        }

        // Drop the stage's entry first so a crash mid-stage never leaves it marked complete.
        if manifest.stage(stage.name()).is_some() {
            manifest.stages.retain(|s| s.name != stage.name());
            manifest.save(&manifest_path)?;
        }
        log::info!("{stage}: running");
        let t0 = Instant::now();
        let (stats, details, outputs) = execute(stage, cfg, &work, opts.exec)?;
        let mut out_digests = BTreeMap::new();
        for rel in outputs {
            let d = sha256_file(&work.join(&rel))?;
            out_digests.insert(rel, d);
        }
        manifest.upsert(StageRecord {
            name: stage.name().to_string(),
            config_digest,
            inputs,
            outputs: out_digests,
            stats,
            details,
        });
        manifest.save(&manifest_path)?;
        let secs = t0.elapsed().as_secs_f64();
        log::info!("{stage}: done in {secs:.2}s");
        summary.wall_secs.insert(stage.name().to_string(), secs);
        summary.executed.push(stage);
    }
    stages::write_pretty(
        &work.join(TIMINGS_FILE),
        &json!({ "wall_secs": summary.wall_secs, "skipped": summary.skipped }),
    )?;
    summary.manifest = manifest;
    Ok(summary)
}

type StageResult = (crate::corpus::StageStats, serde_json::Value, Vec<String>);

fn execute(stage: Stage, cfg: &PipelineConfig, work: &Path, exec: Execution) -> Result<StageResult> {
    let at = |rel: &str| -> PathBuf { work.join(rel) };
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Ok(match stage {
        Stage::Phase1 => {
            let p1 = cfg.phase1_config()?;
            let s = run_phase1(&cfg.run.input, &cfg.fields, &p1, &at(paths::CLEAN), &at(paths::REJECTS), exec)?;
            let details = json!({ "cleaning": s.cleaning, "missing_family": s.missing_family });
            (s.stats, details, owned(&[paths::CLEAN, paths::REJECTS]))
        }
        Stage::Filter => {
            let filters = cfg.filters()?;
            let audit = cfg.filters.audit.then(|| at(paths::AUDIT));
            let stats = run_filter(&at(paths::CLEAN), &filters, &at(paths::KEPT), &at(paths::DROPPED), audit.as_deref(), exec)?;
            let mut outs = owned(&[paths::KEPT, paths::DROPPED]);
            if audit.is_some() {
                outs.push(paths::AUDIT.to_string());
            }
            (stats, serde_json::Value::Null, outs)
        }
        Stage::Dedup => {
            let seeds = MinHashSeeds::from_master(cfg.dedup.seed);
            write_seeds(&at(paths::SEEDS), &seeds)?;
            let s = run_dedup(
                &at(paths::KEPT),
                &cfg.dedup,
                &seeds,
                &DedupOutputs {
                    unique: &at(paths::UNIQUE),
                    records: Some(&at(paths::RECORDS)),
                    duplicates: &at(paths::DUPLICATES),
                    signatures: Some(&at(paths::SIGNATURES)),
                },
                exec,
            )?;
            let details = stages::details(&s);
            let outs = owned(&[paths::UNIQUE, paths::RECORDS, paths::DUPLICATES, paths::SIGNATURES, paths::SEEDS]);
            (s.stats, details, outs)
        }
        Stage::Tok => {
            let (_, s) = run_tok_train(&at(paths::RECORDS), &cfg.tokenizer, &at(paths::VOCAB), exec)?;
            let details = stages::details(&s);
            (s.stats, details, owned(&[paths::VOCAB]))
        }
        Stage::MlmPrep => {
            let vocab = BpeVocab::load(&at(paths::VOCAB))?;
            let dir = at(paths::MLM_DIR);
            let s = run_mlm_prep(&at(paths::RECORDS), &vocab, &cfg.mlm, cfg.run.shards, &dir, paths::MLM_STEM, exec)?;
            let rel = |p: &Path| format!("{}/{}", paths::MLM_DIR, p.file_name().unwrap_or_default().to_string_lossy());
            let mut outs: Vec<String> = s.shards.iter().map(|p| rel(p)).collect();
            outs.push(rel(&s.sidecar));
            let details = json!({
                "examples": s.examples,
                "body_tokens": s.body_tokens,
                "kept_body_tokens": s.kept_body_tokens,
            });
            (s.stats, details, outs)
        }
    })
}

/// Loads `work_dir/manifest.json` and builds the reductions table from it.
pub fn report_from_work_dir(work_dir: &Path) -> Result<ReductionReport> {
    ReductionReport::from_manifest(&RunManifest::load(&work_dir.join(MANIFEST_FILE))?)
}
