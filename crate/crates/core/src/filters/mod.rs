//! Per-field document filters: language identification followed by
//! repetition, word-quality and line-quality heuristics.
//!
//! Every rule yields a [`FilterVerdict`]; the cascade stops at the first
//! failing rule so a discarded document always names exactly one rule.

mod fineweb;
mod langid;
mod quality;
mod repetition;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::FieldDoc;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use fineweb::{bullet_line_frac, fineweb_filter, line_punct_ratio, short_line_frac, FinewebConfig};
pub use langid::{LangIdCounts, LangScore, LanguageIdentifier, NgramLangId};
pub use quality::{quality_filter, word_stats, QualityConfig, WordStats};
pub use repetition::{dup_line_frac, dup_para_frac, repetition_filter, top_ngram_frac, RepetitionConfig};

/// The comparison a measured value must satisfy against its threshold to pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparison::Lt => measured < threshold,
            Comparison::Le => measured <= threshold,
            Comparison::Gt => measured > threshold,
            Comparison::Ge => measured >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub passed: bool,
    pub rule: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
}

impl FilterVerdict {
    pub fn check(rule: &str, measured: f64, comparison: Comparison, threshold: f64) -> Self {
        FilterVerdict {
            passed: comparison.holds(measured, threshold),
            rule: rule.to_string(),
            measured,
            threshold,
            comparison,
        }
    }

    /// Verdict for text with no non-whitespace characters.
    pub fn empty() -> Self {
        FilterVerdict::check("empty", 0.0, Comparison::Gt, 0.0)
    }
}

impl fmt::Display for FilterVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.4} {} {:.4}",
            if self.passed { "pass" } else { "fail" },
            self.rule,
            self.measured,
            self.comparison.symbol(),
            self.threshold
        )
    }
}

/// Runs rules in order and returns the first failure, or the last verdict
/// when all pass.
pub(crate) fn cascade(text: &str, rules: &[&dyn Fn(&str) -> FilterVerdict]) -> FilterVerdict {
    if text.trim().is_empty() {
        return FilterVerdict::empty();
    }
    let mut last = None;
    for rule in rules {
        let v = rule(text);
        if !v.passed {
            return v;
        }
        last = Some(v);
    }
    last.unwrap_or_else(|| FilterVerdict::check("none", 0.0, Comparison::Ge, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageConfig {
    pub enabled: bool,
    pub target: String,
    /// Minimum posterior probability of `target`.
    pub threshold: f64,
    /// JSON n-gram count model replacing the built-in one.
    pub model: Option<PathBuf>,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig {
            enabled: true,
            target: "en".into(),
            threshold: 0.65,
            model: None,
        }
    }
}

/// Best language under the built-in model; `None` for empty text.
pub fn detect_language(text: &str) -> Option<LangScore> {
    if text.trim().is_empty() {
        return None;
    }
    NgramLangId::builtin().detect(text)
}

/// Passes when the posterior of the target language reaches the threshold.
/// With a threshold above 0.5 this implies the target is also the best language.
pub fn language_filter(text: &str, model: &dyn LanguageIdentifier, cfg: &LanguageConfig) -> FilterVerdict {
    if text.trim().is_empty() {
        return FilterVerdict::empty();
    }
    let p = model.probability(text, &cfg.target).unwrap_or(0.0);
    FilterVerdict::check("language", p, Comparison::Ge, cfg.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Language,
    Repetition,
    Quality,
    Fineweb,
}

impl FilterStage {
    pub const DEFAULT_ORDER: [FilterStage; 4] = [
        FilterStage::Language,
        FilterStage::Repetition,
        FilterStage::Quality,
        FilterStage::Fineweb,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub order: Vec<FilterStage>,
    /// Write the verdict trail of kept documents as well as dropped ones.
    pub audit: bool,
    pub language: LanguageConfig,
    pub repetition: RepetitionConfig,
    pub quality: QualityConfig,
    pub fineweb: FinewebConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            order: FilterStage::DEFAULT_ORDER.to_vec(),
            audit: false,
            language: LanguageConfig::default(),
            repetition: RepetitionConfig::default(),
            quality: QualityConfig::default(),
            fineweb: FinewebConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: FilterConfig = toml::from_str(s).map_err(|e| Error::config("filters", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&raw)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.order.iter().enumerate() {
            if self.order[..i].contains(s) {
                return Err(Error::config("filters.order", format!("{s:?} listed twice")));
            }
        }
        let l = &self.language;
        if !(l.threshold > 0.5 && l.threshold <= 1.0) {
            return Err(Error::config("filters.language.threshold", "must be in (0.5, 1]"));
        }
        let r = &self.repetition;
        let q = &self.quality;
        let f = &self.fineweb;
        let fracs = [
            ("repetition.max_dup_line_frac", r.max_dup_line_frac),
            ("repetition.max_dup_para_frac", r.max_dup_para_frac),
            ("repetition.max_top_2gram_frac", r.max_top_2gram_frac),
            ("repetition.max_top_3gram_frac", r.max_top_3gram_frac),
            ("repetition.max_top_4gram_frac", r.max_top_4gram_frac),
            ("quality.min_alpha_word_frac", q.min_alpha_word_frac),
            ("fineweb.min_line_punct_ratio", f.min_line_punct_ratio),
            ("fineweb.max_short_line_frac", f.max_short_line_frac),
            ("fineweb.max_bullet_line_frac", f.max_bullet_line_frac),
        ];
        for (key, v) in fracs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("filters.{key}"), "must be in [0, 1]"));
            }
        }
        if q.min_words > q.max_words {
            return Err(Error::config("filters.quality.min_words", "exceeds max_words"));
        }
        if !(q.min_mean_word_len.is_finite() && q.max_mean_word_len.is_finite())
            || q.min_mean_word_len > q.max_mean_word_len
        {
            return Err(Error::config("filters.quality.min_mean_word_len", "exceeds max_mean_word_len"));
        }
        if !(q.max_symbol_word_ratio >= 0.0 && q.max_symbol_word_ratio.is_finite()) {
            return Err(Error::config("filters.quality.max_symbol_word_ratio", "must be non-negative"));
        }
        if f.short_line_words == 0 {
            return Err(Error::config("filters.fineweb.short_line_words", "must be positive"));
        }
        Ok(())
    }

    pub fn enabled(&self, stage: FilterStage) -> bool {
        match stage {
            FilterStage::Language => self.language.enabled,
            FilterStage::Repetition => self.repetition.enabled,
            FilterStage::Quality => self.quality.enabled,
            FilterStage::Fineweb => self.fineweb.enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub passed: bool,
    /// One verdict per evaluated stage; for a failed doc the last entry is the failure.
    pub trail: Vec<FilterVerdict>,
}

impl FilterOutcome {
    pub fn failing_rule(&self) -> Option<&str> {
        self.trail.last().filter(|v| !v.passed).map(|v| v.rule.as_str())
    }
}

/// A validated configuration together with its language model.
#[derive(Clone)]
pub struct Filters {
    config: FilterConfig,
    langid: Arc<dyn LanguageIdentifier>,
}

impl fmt::Debug for Filters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Filters").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Filters {
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        let langid: Arc<dyn LanguageIdentifier> = match &config.language.model {
            Some(p) => Arc::new(NgramLangId::load(p)?),
            None => NgramLangId::builtin(),
        };
        Ok(Filters { config, langid })
    }

    pub fn with_identifier(config: FilterConfig, langid: Arc<dyn LanguageIdentifier>) -> Result<Self> {
        config.validate()?;
        Ok(Filters { config, langid })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Verdict of a single stage, ignoring whether it is enabled.
    pub fn stage(&self, stage: FilterStage, text: &str) -> FilterVerdict {
        let c = &self.config;
        match stage {
            FilterStage::Language => language_filter(text, self.langid.as_ref(), &c.language),
            FilterStage::Repetition => repetition_filter(text, &c.repetition),
            FilterStage::Quality => quality_filter(text, &c.quality),
            FilterStage::Fineweb => fineweb_filter(text, &c.fineweb),
        }
    }

    pub fn apply(&self, text: &str) -> FilterOutcome {
        let mut trail = Vec::with_capacity(self.config.order.len());
        if text.trim().is_empty() {
            trail.push(FilterVerdict::empty());
            return FilterOutcome { passed: false, trail };
        }
        for &stage in self.config.order.iter().filter(|s| self.config.enabled(**s)) {
            let v = self.stage(stage, text);
            let passed = v.passed;
            trail.push(v);
            if !passed {
                return FilterOutcome { passed: false, trail };
            }
        }
        FilterOutcome { passed: true, trail }
    }
}

pub fn apply_filters(doc: &FieldDoc, filters: &Filters) -> FilterOutcome {
    filters.apply(&doc.text)
}

pub fn filter_docs(docs: &[FieldDoc], filters: &Filters, exec: Execution) -> Vec<FilterOutcome> {
    par::map(docs, exec, |d| apply_filters(d, filters))
}
