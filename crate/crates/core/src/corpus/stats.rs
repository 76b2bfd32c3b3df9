use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-stage document and token ledger.
///
/// Counters form a commutative monoid under `+`, so shards can be tallied
/// independently and combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub docs_in: u64,
    pub docs_out: u64,
    /// Inputs that could not be parsed or violated a record contract.
    pub docs_rejected: u64,
    /// Well-formed inputs removed on purpose (cleaning, filters, dedup).
    pub docs_filtered: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Field documents, for stages that work per field while counting records as docs.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fields_in: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fields_out: u64,
    /// Named per-reason drop counts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reasons: BTreeMap<String, u64>,
}

impl StageStats {
    pub fn note(&mut self, reason: &str) {
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }

    /// `docs_in = docs_out + docs_rejected + docs_filtered`.
    pub fn check_conservation(&self) -> Result<()> {
        if self.docs_in != self.docs_out + self.docs_rejected + self.docs_filtered {
            return Err(Error::Domain(format!(
                "ledger does not balance: in {} != out {} + rejected {} + filtered {}",
                self.docs_in, self.docs_out, self.docs_rejected, self.docs_filtered
            )));
        }
        Ok(())
    }

    /// Token reduction percentage, 2 decimals.
    pub fn reduction_pct(&self) -> Result<f64> {
        compute_reduction(self.tokens_in, self.tokens_out)
    }
}

impl AddAssign<&StageStats> for StageStats {
    fn add_assign(&mut self, o: &StageStats) {
        self.docs_in += o.docs_in;
        self.docs_out += o.docs_out;
        self.docs_rejected += o.docs_rejected;
        self.docs_filtered += o.docs_filtered;
        self.tokens_in += o.tokens_in;
        self.tokens_out += o.tokens_out;
        self.fields_in += o.fields_in;
        self.fields_out += o.fields_out;
        for (k, v) in &o.reasons {
            *self.reasons.entry(k.clone()).or_default() += v;
        }
    }
}

impl Add for StageStats {
    type Output = StageStats;

    fn add(mut self, o: StageStats) -> StageStats {
        self += &o;
        self
    }
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

/// Stage name -> ledger, plus the token counting basis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub count_mode: String,
    pub stages: BTreeMap<String, StageStats>,
}

/// `100 * (before - after) / before`, rounded to 2 decimals.
pub fn compute_reduction(before: u64, after: u64) -> Result<f64> {
    if before == 0 {
        return Err(Error::Domain("reduction undefined for before = 0".into()));
    }
    if after > before {
        return Err(Error::Domain(format!(
            "after ({after}) exceeds before ({before}); accounting bug"
        )));
    }
    // Integer numerator keeps 11-digit token counts exact.
    let pct = (before - after) as f64 * 100.0 / before as f64;
    Ok((pct * 100.0).round() / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_reduction() {
        assert_eq!(compute_reduction(47_791_818_029, 31_644_981_330).unwrap(), 33.79);
        assert_eq!(compute_reduction(100, 100).unwrap(), 0.0);
        // 80/150 = 0.5333...
        assert_eq!(compute_reduction(150_000_000, 70_000_000).unwrap(), 53.33);
    }

    #[test]
    fn reduction_domain_errors() {
        assert!(matches!(compute_reduction(0, 0), Err(Error::Domain(_))));
        assert!(matches!(compute_reduction(5, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn merge_is_associative() {
        let a = StageStats {
            docs_in: 3,
            docs_out: 2,
            docs_filtered: 1,
            tokens_in: 30,
            tokens_out: 20,
            ..Default::default()
        };
        let mut b = a.clone();
        b.note("x");
        let c = StageStats {
            docs_in: 1,
            docs_rejected: 1,
            ..Default::default()
        };
        assert_eq!(
            (a.clone() + b.clone()) + c.clone(),
            a.clone() + (b.clone() + c.clone())
        );
        let total = a + b + c;
        total.check_conservation().unwrap();
        assert_eq!(total.reasons["x"], 1);
    }

    proptest! {
        #[test]
        fn reduction_monotone_in_after(before in 1u64..1_000_000_000, a in 0u64..1_000_000_000, b in 0u64..1_000_000_000) {
            let (lo, hi) = (a.min(b) % (before + 1), a.max(b) % (before + 1));
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let r_lo = compute_reduction(before, lo).unwrap();
            let r_hi = compute_reduction(before, hi).unwrap();
            prop_assert!(r_lo >= r_hi);
            prop_assert_eq!(compute_reduction(before, before).unwrap(), 0.0);
            prop_assert!(compute_reduction(before, hi).unwrap() == 0.0 || hi < before);
        }
    }
}
