//! Extraction, cleanup and family-level deduplication of raw records.

mod claims;
mod clean;
mod family;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanRecord, FieldKind, PatentRecord};

pub use claims::{first_independent_index, select_first_independent_claim, ClaimRules, DEFAULT_DEPENDENCY_PATTERNS};
pub use clean::{clean_text, normalize_chars, remove_boilerplate, strip_markup, Boilerplate, CleaningReport};
pub use family::{family_dedupe, FamilyDedup, FamilyGroup, FamilyKey, FamilyMember};

/// Default number of records held in memory by the family sort.
pub const DEFAULT_SORT_BUFFER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Phase1Config {
    pub boilerplate: Boilerplate,
    pub claims: ClaimRules,
    pub sort_buffer: usize,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            boilerplate: Boilerplate::default(),
            claims: ClaimRules::default(),
            sort_buffer: DEFAULT_SORT_BUFFER,
        }
    }
}

/// A cleaned record still carrying the keys needed for family grouping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedRecord {
    pub record: CleanRecord,
    pub family_id: Option<String>,
    pub pub_date: NaiveDate,
}

impl FamilyMember for StagedRecord {
    fn pub_no(&self) -> &str {
        &self.record.pub_no
    }
    fn family_id(&self) -> Option<&str> {
        self.family_id.as_deref()
    }
    fn pub_date(&self) -> NaiveDate {
        self.pub_date
    }
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

/// Cleans every field of one record and selects its first independent claim.
///
/// Claims are cleaned before selection so that dependency phrases hidden
/// behind markup are still detected.
pub fn clean_record(r: &PatentRecord, cfg: &Phase1Config, report: &mut CleaningReport) -> StagedRecord {
    let bp = &cfg.boilerplate;
    let abstract_text = r
        .abstract_raw
        .as_deref()
        .map(|t| clean::clean_text_with(t, FieldKind::Abstract, bp, report))
        .and_then(non_empty);
    let dwpi = r
        .dwpi_raw
        .as_deref()
        .map(|t| clean::clean_text_with(t, FieldKind::Dwpi, bp, report))
        .and_then(non_empty);
    let cleaned_claims: Vec<String> = r
        .claims_raw
        .iter()
        .map(|c| clean::clean_text_with(c, FieldKind::FirstClaim, bp, report))
        .filter(|c| !c.is_empty())
        .collect();
    let first_ind_claim = select_first_independent_claim(&cleaned_claims, &cfg.claims).map(str::to_string);
    StagedRecord {
        record: CleanRecord {
            pub_no: r.pub_no.clone(),
            abstract_text,
            first_ind_claim,
            dwpi,
        },
        family_id: r.family_id.clone(),
        pub_date: r.pub_date,
    }
}
