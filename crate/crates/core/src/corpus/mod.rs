//! Record and field data model shared by every stage.

mod io;
mod stats;

use std::collections::HashMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::bpe::{self, BpeVocab};

pub use io::{
    read_jsonl, read_records, sha256_file, sha256_hex, write_jsonl, AtomicFile, FieldMap, JsonlIter, JsonlWriter, RecordReader,
    Reject,
};
pub use stats::{compute_reduction, PipelineStats, StageStats};

/// A raw patent record as ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub pub_no: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_id: Option<String>,
    pub pub_date: NaiveDate,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_raw: Option<String>,
    #[serde(rename = "claims", default)]
    pub claims_raw: Vec<String>,
    #[serde(rename = "dwpi", default, skip_serializing_if = "Option::is_none")]
    pub dwpi_raw: Option<String>,
}

impl PatentRecord {
    /// Whitespace token count over every raw text field.
    pub fn raw_token_count(&self) -> u64 {
        let mut n = 0;
        if let Some(t) = &self.abstract_raw {
            n += count_words(t);
        }
        for c in &self.claims_raw {
            n += count_words(c);
        }
        if let Some(t) = &self.dwpi_raw {
            n += count_words(t);
        }
        n
    }
}

/// Phase-1 output: cleaned fields of one surviving publication.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanRecord {
    pub pub_no: String,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_ind_claim: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwpi: Option<String>,
}

impl CleanRecord {
    pub fn is_empty(&self) -> bool {
        self.abstract_text.is_none() && self.first_ind_claim.is_none() && self.dwpi.is_none()
    }

    pub fn field(&self, kind: FieldKind) -> Option<&str> {
        match kind {
            FieldKind::Abstract => self.abstract_text.as_deref(),
            FieldKind::FirstClaim => self.first_ind_claim.as_deref(),
            FieldKind::Dwpi => self.dwpi.as_deref(),
        }
    }

    fn field_mut(&mut self, kind: FieldKind) -> &mut Option<String> {
        match kind {
            FieldKind::Abstract => &mut self.abstract_text,
            FieldKind::FirstClaim => &mut self.first_ind_claim,
            FieldKind::Dwpi => &mut self.dwpi,
        }
    }

    /// Splits the record into its present fields, in [`FieldKind::ALL`] order.
    pub fn fields(&self) -> Vec<FieldDoc> {
        FieldKind::ALL
            .iter()
            .filter_map(|&k| self.field(k).map(|t| FieldDoc::new(&self.pub_no, k, t)))
            .collect()
    }

    pub fn token_count(&self) -> u64 {
        FieldKind::ALL
            .iter()
            .filter_map(|&k| self.field(k))
            .map(count_words)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Abstract,
    FirstClaim,
    Dwpi,
}

impl FieldKind {
    pub const ALL: [FieldKind; 3] = [FieldKind::Abstract, FieldKind::FirstClaim, FieldKind::Dwpi];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Abstract => "abstract",
            FieldKind::FirstClaim => "first_claim",
            FieldKind::Dwpi => "dwpi",
        }
    }

    pub fn parse(s: &str) -> Option<FieldKind> {
        FieldKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One field of one record; the unit that filtering and near-dedup operate on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDoc {
    /// `<pub_no>#<field_kind>`
    pub doc_id: String,
    pub field_kind: FieldKind,
    pub text: String,
}

impl FieldDoc {
    pub fn new(pub_no: &str, kind: FieldKind, text: impl Into<String>) -> Self {
        FieldDoc {
            doc_id: format!("{pub_no}#{}", kind.as_str()),
            field_kind: kind,
            text: text.into(),
        }
    }

    pub fn pub_no(&self) -> &str {
        match self.doc_id.rsplit_once('#') {
            Some((p, suffix)) if suffix == self.field_kind.as_str() => p,
            _ => &self.doc_id,
        }
    }
}

/// Regroups surviving fields into records, in order of first appearance.
/// Records that lost every field never appear.
pub fn reassemble<'a>(docs: impl IntoIterator<Item = &'a FieldDoc>) -> Vec<CleanRecord> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<CleanRecord> = Vec::new();
    for d in docs {
        let pub_no = d.pub_no();
        let i = *index.entry(pub_no).or_insert_with(|| {
            out.push(CleanRecord {
                pub_no: pub_no.to_string(),
                ..Default::default()
            });
            out.len() - 1
        });
        *out[i].field_mut(d.field_kind) = Some(d.text.clone());
    }
    out
}

/// How tokens are counted for stage ledgers.
#[derive(Debug, Clone, Copy)]
pub enum CountMode<'a> {
    /// Maximal runs of non-whitespace.
    Whitespace,
    /// BPE tokens under a trained vocabulary.
    Vocab(&'a BpeVocab),
}

impl CountMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            CountMode::Whitespace => "whitespace",
            CountMode::Vocab(_) => "vocab",
        }
    }
}

pub fn count_tokens(text: &str, mode: CountMode<'_>) -> u64 {
    match mode {
        CountMode::Whitespace => count_words(text),
        CountMode::Vocab(v) => bpe::encode(text, v).ids.len() as u64,
    }
}

pub(crate) fn count_words(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
