//! Stage bodies shared by `run` and the single-stage subcommands.
//!
//! Every stage streams or loads its input, works in fixed-size chunks through
//! [`par`], and writes outputs through [`AtomicFile`] so a killed stage never
//! leaves a partially written output under its final name.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bpe::{self, BpeVocab, TrainConfig, UNK};
use crate::corpus::{
    count_words, read_jsonl, read_records, reassemble, AtomicFile, CleanRecord, FieldDoc, FieldMap, JsonlWriter, PatentRecord,
    RecordReader, StageStats,
};
use crate::error::{Error, Result};
use crate::filters::{filter_docs, FilterVerdict, Filters};
use crate::minhash::{dedupe_fields, write_signatures, MinHashConfig, MinHashSeeds};
use crate::mlm::{build_examples, record_bodies, write_shards, MlmConfig, ShardSidecar};
use crate::par::{self, Execution};
use crate::phase1::{clean_record, family_dedupe, CleaningReport, Phase1Config, StagedRecord};

/// Records or field documents processed per parallel batch.
pub const CHUNK: usize = 8192;

/// A line of a stage input: either a field document or a whole cleaned record.
#[derive(Deserialize)]
#[serde(untagged)]
enum AnyDoc {
    Field(FieldDoc),
    Record(CleanRecord),
}

/// Reads field documents, splitting cleaned records into their fields.
pub fn read_field_docs(path: &Path) -> Result<Vec<FieldDoc>> {
    let mut out = Vec::new();
    for d in read_jsonl::<AnyDoc>(path)? {
        match d? {
            AnyDoc::Field(f) => out.push(f),
            AnyDoc::Record(r) => out.extend(r.fields()),
        }
    }
    Ok(out)
}

/// Reads cleaned records, regrouping field documents by publication.
pub fn read_clean_records(path: &Path) -> Result<Vec<CleanRecord>> {
    let mut records = Vec::new();
    let mut fields = Vec::new();
    for d in read_jsonl::<AnyDoc>(path)? {
        match d? {
            AnyDoc::Field(f) => fields.push(f),
            AnyDoc::Record(r) => records.push(r),
        }
    }
    if !fields.is_empty() {
        if !records.is_empty() {
            return Err(Error::Data(format!("{}: mixes field documents and records", path.display())));
        }
        records = reassemble(&fields);
    }
    Ok(records)
}

fn commit_jsonl(w: JsonlWriter<AtomicFile>) -> Result<()> {
    w.into_inner()?.commit()
}

#[derive(Serialize)]
struct RejectLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    line_no: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub_no: Option<&'a str>,
    reason: &'a str,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Phase1Summary {
    pub stats: StageStats,
    pub cleaning: CleaningReport,
    pub missing_family: u64,
}

/// Cleans records chunk by chunk, routing rejects and emptied records to the
/// rejects file and yielding the rest.
struct CleanStream<'a, R> {
    reader: RecordReader<R>,
    cfg: &'a Phase1Config,
    exec: Execution,
    ready: std::vec::IntoIter<StagedRecord>,
    stats: StageStats,
    report: CleaningReport,
    rejects: JsonlWriter<AtomicFile>,
    done: bool,
}

impl<R: std::io::BufRead> CleanStream<'_, R> {
    fn fill(&mut self) -> Result<()> {
        let mut chunk: Vec<PatentRecord> = Vec::with_capacity(CHUNK);
        while chunk.len() < CHUNK {
            let Some(item) = self.reader.next() else {
                self.done = true;
                break;
            };
            match item? {
                Ok(r) => chunk.push(r),
                Err(rej) => {
                    self.stats.docs_in += 1;
                    self.stats.docs_rejected += 1;
                    self.stats.note("malformed");
                    self.rejects.write(&RejectLine {
                        line_no: Some(rej.line_no),
                        pub_no: None,
                        reason: &rej.reason,
                    })?;
                }
            }
        }
        let cfg = self.cfg;
        let cleaned = par::map(&chunk, self.exec, |r| {
            let mut rep = CleaningReport::default();
            let s = clean_record(r, cfg, &mut rep);
            (s, rep)
        });
        let mut ready = Vec::with_capacity(cleaned.len());
        for (raw, (s, rep)) in chunk.iter().zip(cleaned) {
            self.stats.docs_in += 1;
            self.stats.tokens_in += raw.raw_token_count();
            self.report += &rep;
            if s.record.is_empty() {
                self.stats.docs_filtered += 1;
                self.stats.note("empty");
                self.rejects.write(&RejectLine {
                    line_no: None,
                    pub_no: Some(&raw.pub_no),
                    reason: "empty",
                })?;
            } else {
                ready.push(s);
            }
        }
        self.ready = ready.into_iter();
        Ok(())
    }
}

impl<R: std::io::BufRead> Iterator for CleanStream<'_, R> {
    type Item = Result<StagedRecord>;

    fn next(&mut self) -> Option<Result<StagedRecord>> {
        loop {
            if let Some(s) = self.ready.next() {
                return Some(Ok(s));
            }
            if self.done {
                return None;
            }
            if let Err(e) = self.fill() {
                self.done = true;
                return Some(Err(e));
            }
        }
    }
}

/// Extraction, cleanup and family deduplication.
///
/// Records that end up with no usable field are dropped before family
/// grouping, so an empty newest publication never hides an older usable one.
pub fn run_phase1(
    input: &Path,
    map: &FieldMap,
    cfg: &Phase1Config,
    output: &Path,
    rejects: &Path,
    exec: Execution,
) -> Result<Phase1Summary> {
    let mut stream = CleanStream {
        reader: read_records(input, map)?,
        cfg,
        exec,
        ready: Vec::new().into_iter(),
        stats: StageStats::default(),
        report: CleaningReport::default(),
        rejects: JsonlWriter::new(AtomicFile::create(rejects)?),
        done: false,
    };
    let mut survivors = family_dedupe(&mut stream, cfg.sort_buffer)?;
    let mut out = JsonlWriter::new(AtomicFile::create(output)?);
    let mut stats = std::mem::take(&mut stream.stats);
    for s in survivors.by_ref() {
        let s = s?;
        stats.docs_out += 1;
        stats.tokens_out += s.record.token_count();
        out.write(&s.record)?;
    }
    let dropped = survivors.dropped();
    stats.docs_filtered += dropped;
    if dropped > 0 {
        stats.reasons.insert("family_duplicate".into(), dropped);
    }
    stats.check_conservation()?;
    commit_jsonl(out)?;
    commit_jsonl(stream.rejects)?;
    Ok(Phase1Summary {
        stats,
        cleaning: stream.report,
        missing_family: survivors.missing_family(),
    })
}

#[derive(Serialize)]
struct Judged<'a> {
    doc_id: &'a str,
    field_kind: crate::corpus::FieldKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    passed: bool,
    trail: &'a [FilterVerdict],
}

/// Record-level ledger over field documents: a record is in if any of its
/// fields is, and out if any of its fields survives.
#[derive(Default)]
struct RecordLedger {
    seen_in: HashSet<String>,
    seen_out: HashSet<String>,
    stats: StageStats,
}

impl RecordLedger {
    fn input(&mut self, d: &FieldDoc) {
        self.stats.fields_in += 1;
        self.stats.tokens_in += count_words(&d.text);
        if !self.seen_in.contains(d.pub_no()) {
            self.seen_in.insert(d.pub_no().to_string());
        }
    }

    fn output(&mut self, d: &FieldDoc) {
        self.stats.fields_out += 1;
        self.stats.tokens_out += count_words(&d.text);
        if !self.seen_out.contains(d.pub_no()) {
            self.seen_out.insert(d.pub_no().to_string());
        }
    }

    fn finish(mut self) -> Result<StageStats> {
        self.stats.docs_in = self.seen_in.len() as u64;
        self.stats.docs_out = self.seen_out.len() as u64;
        self.stats.docs_filtered = self.stats.docs_in - self.stats.docs_out;
        self.stats.check_conservation()?;
        Ok(self.stats)
    }
}

/// Heuristic filter cascade over field documents. Kept documents keep input
/// order; dropped ones carry their verdict trail.
pub fn run_filter(
    input: &Path,
    filters: &Filters,
    kept: &Path,
    dropped: &Path,
    audit: Option<&Path>,
    exec: Execution,
) -> Result<StageStats> {
    let mut kept_w = JsonlWriter::new(AtomicFile::create(kept)?);
    let mut dropped_w = JsonlWriter::new(AtomicFile::create(dropped)?);
    let mut audit_w = audit.map(AtomicFile::create).transpose()?.map(JsonlWriter::new);
    let mut ledger = RecordLedger::default();
    let mut lines = read_jsonl::<AnyDoc>(input)?;
    let mut chunk: Vec<FieldDoc> = Vec::with_capacity(CHUNK);
    loop {
        chunk.clear();
        while chunk.len() < CHUNK {
            match lines.next() {
                Some(d) => match d? {
                    AnyDoc::Field(f) => chunk.push(f),
                    AnyDoc::Record(r) => chunk.extend(r.fields()),
                },
                None => break,
            }
        }
        if chunk.is_empty() {
            break;
        }
        let outcomes = filter_docs(&chunk, filters, exec);
        for (d, o) in chunk.iter().zip(&outcomes) {
            ledger.input(d);
            let judged = Judged {
                doc_id: &d.doc_id,
                field_kind: d.field_kind,
                text: (!o.passed).then_some(d.text.as_str()),
                passed: o.passed,
                trail: &o.trail,
            };
            if o.passed {
                ledger.output(d);
                kept_w.write(d)?;
                if let Some(a) = &mut audit_w {
                    a.write(&judged)?;
                }
            } else {
                *ledger.stats.reasons.entry(o.failing_rule().unwrap_or("unknown").to_string()).or_default() += 1;
                dropped_w.write(&judged)?;
            }
        }
    }
    let stats = ledger.finish()?;
    commit_jsonl(kept_w)?;
    commit_jsonl(dropped_w)?;
    if let Some(a) = audit_w {
        commit_jsonl(a)?;
    }
    Ok(stats)
}

pub struct DedupOutputs<'a> {
    pub unique: &'a Path,
    /// Survivors regrouped into records.
    pub records: Option<&'a Path>,
    pub duplicates: &'a Path,
    pub signatures: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupSummary {
    pub stats: StageStats,
    pub clusters: u64,
    pub removed: u64,
    pub seed_fingerprint: String,
}

/// MinHash-LSH near-duplicate removal within each field kind.
pub fn run_dedup(input: &Path, cfg: &MinHashConfig, seeds: &MinHashSeeds, out: &DedupOutputs<'_>, exec: Execution) -> Result<DedupSummary> {
    let docs = read_field_docs(input)?;
    let result = dedupe_fields(&docs, cfg, seeds, exec)?;
    let mut ledger = RecordLedger::default();
    docs.iter().for_each(|d| ledger.input(d));
    let survivors: Vec<&FieldDoc> = result.survivors.iter().map(|&i| &docs[i]).collect();
    survivors.iter().for_each(|d| ledger.output(d));
    let mut stats = ledger.finish()?;
    if !result.manifest.is_empty() {
        stats.reasons.insert("near_duplicate".into(), result.manifest.len() as u64);
    }
    crate::corpus::write_jsonl(out.unique, survivors.iter().copied())?;
    if let Some(p) = out.records {
        crate::corpus::write_jsonl(p, &reassemble(survivors.iter().copied()))?;
    }
    crate::corpus::write_jsonl(out.duplicates, &result.manifest)?;
    if let Some(p) = out.signatures {
        write_signatures(p, seeds, &result.signatures)?;
    }
    Ok(DedupSummary {
        stats,
        clusters: result.clusters.len() as u64,
        removed: result.manifest.len() as u64,
        seed_fingerprint: format!("{:016x}", seeds.fingerprint()),
    })
}

/// Writes seeds as pretty JSON.
pub fn write_seeds(path: &Path, seeds: &MinHashSeeds) -> Result<()> {
    write_pretty(path, seeds)
}

pub(crate) fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = AtomicFile::create(path)?;
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    f.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.commit()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokSummary {
    pub stats: StageStats,
    pub vocab_size: usize,
    pub merges: usize,
    /// Smallest pair frequency among chosen merges.
    pub min_merge_count: Option<u64>,
    /// BPE tokens over the training corpus.
    pub bpe_tokens: u64,
    pub token_entropy_bits: f64,
    pub unk_rate: f64,
}

/// Trains the tokenizer on every field of every record and reports encoding
/// statistics over that same corpus.
pub fn run_tok_train(input: &Path, cfg: &TrainConfig, vocab_out: &Path, exec: Execution) -> Result<(BpeVocab, TokSummary)> {
    let docs = read_field_docs(input)?;
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let (vocab, tstats) = bpe::train_detailed(&texts, cfg, exec)?;
    let mut f = AtomicFile::create(vocab_out)?;
    f.write_all(vocab.to_json().as_bytes()).map_err(|e| Error::io(vocab_out, e))?;
    f.commit()?;

    let encoded = par::map(&texts, exec, |t| bpe::encode(t, &vocab).ids);
    let mut hist = vec![0u64; vocab.len()];
    for ids in &encoded {
        for &i in ids {
            hist[i as usize] += 1;
        }
    }
    let total: u64 = hist.iter().sum();
    let pubs: HashSet<&str> = docs.iter().map(|d| d.pub_no()).collect();
    let words: u64 = texts.iter().map(|t| count_words(t)).sum();
    let stats = StageStats {
        docs_in: pubs.len() as u64,
        docs_out: pubs.len() as u64,
        tokens_in: words,
        tokens_out: words,
        fields_in: docs.len() as u64,
        fields_out: docs.len() as u64,
        ..Default::default()
    };
    let summary = TokSummary {
        stats,
        vocab_size: vocab.len(),
        merges: vocab.merge_count(),
        min_merge_count: tstats.merge_counts.iter().copied().min(),
        bpe_tokens: total,
        token_entropy_bits: bpe::entropy_bits(hist.iter().copied()),
        unk_rate: if total == 0 { 0.0 } else { hist[UNK as usize] as f64 / total as f64 },
    };
    Ok((vocab, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmSummary {
    pub stats: StageStats,
    pub sidecar: PathBuf,
    pub shards: Vec<PathBuf>,
    pub examples: u64,
    /// Body tokens before and after truncation to `max_len - 2`.
    pub body_tokens: u64,
    pub kept_body_tokens: u64,
}

/// Encodes records, packs them into examples and writes masked shards named
/// `<stem>-NNNNN.bin` plus `<stem>.json` under `out_dir`.
pub fn run_mlm_prep(
    input: &Path,
    vocab: &BpeVocab,
    cfg: &MlmConfig,
    shards: usize,
    out_dir: &Path,
    stem: &str,
    exec: Execution,
) -> Result<MlmSummary> {
    cfg.validate()?;
    let records = read_clean_records(input)?;
    let per_record = par::map(&records, exec, |r| record_bodies(r, vocab, cfg.concat_fields));
    let mut stats = StageStats::default();
    let mut bodies = Vec::new();
    for (r, b) in records.iter().zip(per_record) {
        let words = r.token_count();
        stats.docs_in += 1;
        stats.tokens_in += words;
        if b.is_empty() {
            stats.docs_filtered += 1;
            stats.note("no_tokens");
        } else {
            stats.docs_out += 1;
            stats.tokens_out += words;
            bodies.extend(b);
        }
    }
    stats.check_conservation()?;
    let body_tokens: u64 = bodies.iter().map(|b| b.len() as u64).sum();
    let kept_body_tokens: u64 = bodies.iter().map(|b| b.len().min(cfg.max_len - 2) as u64).sum();
    let examples = build_examples(&bodies, vocab.len() as u32, cfg, shards, exec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (sidecar, sc) = write_shards(out_dir, stem, &examples, cfg.examples_per_file, &ShardSidecar::for_config(cfg))?;
    Ok(MlmSummary {
        stats,
        sidecar,
        shards: sc.files.iter().map(|f| out_dir.join(&f.name)).collect(),
        examples: examples.len() as u64,
        body_tokens,
        kept_body_tokens,
    })
}

/// Stage summaries as manifest detail objects.
pub(crate) fn details<T: Serialize>(value: &T) -> serde_json::Value {
    let mut v = json!(value);
    if let Some(o) = v.as_object_mut() {
        o.remove("stats");
    }
    v
}
