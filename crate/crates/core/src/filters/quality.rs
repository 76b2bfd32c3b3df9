//! Word-level quality heuristics.

use serde::{Deserialize, Serialize};

use super::{cascade, Comparison, FilterVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub enabled: bool,
    pub min_words: u64,
    pub max_words: u64,
    pub min_mean_word_len: f64,
    pub max_mean_word_len: f64,
    pub max_symbol_word_ratio: f64,
    pub min_alpha_word_frac: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            enabled: true,
            min_words: 20,
            max_words: 100_000,
            min_mean_word_len: 3.0,
            max_mean_word_len: 10.0,
            max_symbol_word_ratio: 0.10,
            min_alpha_word_frac: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordStats {
    pub words: u64,
    pub mean_word_len: f64,
    pub symbol_word_ratio: f64,
    pub alpha_word_frac: f64,
}

/// Whitespace-token statistics. Symbols are `#`, `...` and `…`.
pub fn word_stats(text: &str) -> WordStats {
    let (mut words, mut chars, mut alpha) = (0u64, 0u64, 0u64);
    for w in text.split_whitespace() {
        words += 1;
        chars += w.chars().count() as u64;
        if w.chars().any(char::is_alphabetic) {
            alpha += 1;
        }
    }
    let symbols = text.matches('#').count() + text.matches("...").count() + text.matches('…').count();
    let per = |x: f64| if words == 0 { 0.0 } else { x / words as f64 };
    WordStats {
        words,
        mean_word_len: per(chars as f64),
        symbol_word_ratio: per(symbols as f64),
        alpha_word_frac: per(alpha as f64),
    }
}

pub fn quality_filter(text: &str, cfg: &QualityConfig) -> FilterVerdict {
    let s = word_stats(text);
    cascade(text, &[
        &|_: &str| FilterVerdict::check("min_words", s.words as f64, Comparison::Ge, cfg.min_words as f64),
        &|_: &str| FilterVerdict::check("max_words", s.words as f64, Comparison::Le, cfg.max_words as f64),
        &|_: &str| FilterVerdict::check("min_mean_word_len", s.mean_word_len, Comparison::Ge, cfg.min_mean_word_len),
        &|_: &str| FilterVerdict::check("max_mean_word_len", s.mean_word_len, Comparison::Le, cfg.max_mean_word_len),
        &|_: &str| FilterVerdict::check("symbol_word_ratio", s.symbol_word_ratio, Comparison::Le, cfg.max_symbol_word_ratio),
        &|_: &str| FilterVerdict::check("alpha_word_frac", s.alpha_word_frac, Comparison::Ge, cfg.min_alpha_word_frac),
    ])
}
