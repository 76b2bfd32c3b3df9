//! Summary of dataset size reductions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::compute_reduction;
use crate::error::Result;

use super::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub phase: String,
    pub unit: String,
    pub before: u64,
    pub after: u64,
    pub reduction_pct: f64,
}

impl ReductionRow {
    pub fn new(phase: &str, unit: &str, before: u64, after: u64) -> Result<Self> {
        Ok(ReductionRow {
            phase: phase.into(),
            unit: unit.into(),
            before,
            after,
            reduction_pct: compute_reduction(before, after)?,
        })
    }
}

/// Phase 1 in documents, phase 2 in tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub rows: Vec<ReductionRow>,
}

impl ReductionReport {
    pub fn from_counts(docs: (u64, u64), tokens: (u64, u64)) -> Result<Self> {
        Ok(ReductionReport {
            rows: vec![
                ReductionRow::new("phase1", "docs", docs.0, docs.1)?,
                ReductionRow::new("phase2", "tokens", tokens.0, tokens.1)?,
            ],
        })
    }

    /// Phase 1 is the phase1 stage ledger; phase 2 runs from filter input to dedup output.
    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        let p1 = m.stage_stats("phase1")?;
        let filter = m.stage_stats("filter")?;
        let dedup = m.stage_stats("dedup")?;
        Self::from_counts((p1.docs_in, p1.docs_out), (filter.tokens_in, dedup.tokens_out))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let header = ["phase", "unit", "before", "after", "reduction"];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.phase.clone(),
                    r.unit.clone(),
                    thousands(r.before),
                    thousands(r.after),
                    format!("-{:.2}%", r.reduction_pct),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 5]| {
            for (i, (c, w)) in row.iter().zip(width).enumerate() {
                let sep = if i == 0 { "" } else { "  " };
                if i < 2 {
                    let _ = write!(out, "{sep}{c:<w$}");
                } else {
                    let _ = write!(out, "{sep}{c:>w$}");
                }
            }
            out.push('\n');
        };
        line(&mut out, header);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
        }
        out
    }
}

/// `47791818029` -> `47,791,818,029`.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_reductions() {
        let r = ReductionReport::from_counts((150_000_000, 70_000_000), (47_791_818_029, 31_644_981_330)).unwrap();
        assert_eq!(r.rows[0].reduction_pct, 53.33);
        assert_eq!(r.rows[1].reduction_pct, 33.79);
        let text = r.to_text();
        assert!(text.contains("47,791,818,029"), "{text}");
        assert!(text.contains("-33.79%"), "{text}");
        let widths: Vec<usize> = text.lines().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{text}");
    }

    #[test]
    fn zero_reduction() {
        let r = ReductionReport::from_counts((5, 5), (9, 9)).unwrap();
        assert!(r.rows.iter().all(|x| x.reduction_pct == 0.0));
        assert!(r.to_text().contains("-0.00%"));
    }

    #[test]
    fn separators() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(1000), "1,000");
        assert_eq!(thousands(31_644_981_330), "31,644,981,330");
    }
}
