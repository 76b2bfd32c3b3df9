//! Repetition heuristics over lines, paragraphs and word n-grams.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{cascade, Comparison, FilterVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepetitionConfig {
    pub enabled: bool,
    pub max_dup_line_frac: f64,
    pub max_dup_para_frac: f64,
    pub max_top_2gram_frac: f64,
    pub max_top_3gram_frac: f64,
    pub max_top_4gram_frac: f64,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        RepetitionConfig {
            enabled: true,
            max_dup_line_frac: 0.30,
            max_dup_para_frac: 0.30,
            max_top_2gram_frac: 0.20,
            max_top_3gram_frac: 0.18,
            max_top_4gram_frac: 0.16,
        }
    }
}

/// Fraction of items that repeat an earlier item.
fn dup_frac<'a>(items: impl Iterator<Item = &'a str>) -> f64 {
    let mut seen = HashSet::new();
    let (mut total, mut dups) = (0usize, 0usize);
    for it in items {
        total += 1;
        if !seen.insert(it) {
            dups += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        dups as f64 / total as f64
    }
}

pub fn dup_line_frac(text: &str) -> f64 {
    dup_frac(text.lines().map(str::trim).filter(|l| !l.is_empty()))
}

pub fn dup_para_frac(text: &str) -> f64 {
    dup_frac(text.split("\n\n").map(str::trim).filter(|p| !p.is_empty()))
}

/// Share of word characters covered by the most frequent word n-gram.
///
/// An n-gram seen only once is not repetition, so the share is 0 unless the
/// top n-gram occurs at least twice. Ties on count go to the n-gram with
/// more characters.
pub fn top_ngram_frac(text: &str, n: usize) -> f64 {
    let words: Vec<&str> = text.split_whitespace().collect();
    if n == 0 || words.len() < n {
        return 0.0;
    }
    let total: usize = words.iter().map(|w| w.chars().count()).sum();
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    for g in words.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    let best = counts
        .iter()
        .map(|(g, &c)| (c, g.iter().map(|w| w.chars().count()).sum::<usize>()))
        .max()
        .unwrap_or((0, 0));
    if best.0 < 2 || total == 0 {
        return 0.0;
    }
    (best.0 * best.1) as f64 / total as f64
}

pub fn repetition_filter(text: &str, cfg: &RepetitionConfig) -> FilterVerdict {
    cascade(text, &[
        &|t: &str| FilterVerdict::check("dup_line_frac", dup_line_frac(t), Comparison::Le, cfg.max_dup_line_frac),
        &|t: &str| FilterVerdict::check("dup_para_frac", dup_para_frac(t), Comparison::Le, cfg.max_dup_para_frac),
        &|t: &str| FilterVerdict::check("top_2gram_frac", top_ngram_frac(t, 2), Comparison::Le, cfg.max_top_2gram_frac),
        &|t: &str| FilterVerdict::check("top_3gram_frac", top_ngram_frac(t, 3), Comparison::Le, cfg.max_top_3gram_frac),
        &|t: &str| FilterVerdict::check("top_4gram_frac", top_ngram_frac(t, 4), Comparison::Le, cfg.max_top_4gram_frac),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_identical_lines() {
        let text = ["the same line"; 10].join("\n");
        assert!((dup_line_frac(&text) - 0.9).abs() < 1e-12);
        let v = repetition_filter(&text, &RepetitionConfig::default());
        assert!(!v.passed);
        assert_eq!(v.rule, "dup_line_frac");
    }

    #[test]
    fn single_line_has_no_duplicates() {
        assert_eq!(dup_line_frac("one line only"), 0.0);
        assert_eq!(dup_para_frac("one line only"), 0.0);
    }

    #[test]
    fn varied_paragraph_passes() {
        let text = "A sensor module includes a housing, a printed circuit board and an optical window. \
                    The board carries a photodiode that receives light through the window. \
                    A controller compares the measured intensity with a stored reference value \
                    and raises an alarm when the difference exceeds a limit.";
        let v = repetition_filter(text, &RepetitionConfig::default());
        assert!(v.passed, "{v:?}");
    }

    #[test]
    fn ngram_share() {
        // "ab cd" appears three times: 3 * 4 chars over 4 * 3 + 2 chars
        let f = top_ngram_frac("ab cd ab cd ab cd ef", 2);
        assert!((f - 12.0 / 14.0).abs() < 1e-12);
        assert_eq!(top_ngram_frac("all words differ here", 2), 0.0);
        assert_eq!(top_ngram_frac("short", 3), 0.0);
    }
}
