//! Line-level heuristics in the style of the FineWeb quality filter.

use serde::{Deserialize, Serialize};

use super::{cascade, Comparison, FilterVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinewebConfig {
    pub enabled: bool,
    pub min_line_punct_ratio: f64,
    pub max_short_line_frac: f64,
    /// Lines with fewer words than this count as short.
    pub short_line_words: usize,
    pub max_bullet_line_frac: f64,
}

impl Default for FinewebConfig {
    fn default() -> Self {
        FinewebConfig {
            enabled: true,
            min_line_punct_ratio: 0.12,
            max_short_line_frac: 0.67,
            short_line_words: 4,
            max_bullet_line_frac: 0.9,
        }
    }
}

const TERMINAL: &[char] = &['.', '!', '?', '"', '\''];
const BULLETS: &[char] = &['•', '●', '▪', '‣', '◦', '·', '-', '*', '–', '—'];

fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn frac(text: &str, pred: impl Fn(&str) -> bool) -> f64 {
    let (mut n, mut hit) = (0usize, 0usize);
    for l in lines(text) {
        n += 1;
        if pred(l) {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

pub fn line_punct_ratio(text: &str) -> f64 {
    frac(text, |l| l.ends_with(TERMINAL))
}

pub fn short_line_frac(text: &str, short_words: usize) -> f64 {
    frac(text, |l| l.split_whitespace().count() < short_words)
}

pub fn bullet_line_frac(text: &str) -> f64 {
    frac(text, |l| l.starts_with(BULLETS))
}

pub fn fineweb_filter(text: &str, cfg: &FinewebConfig) -> FilterVerdict {
    cascade(text, &[
        &|t: &str| FilterVerdict::check("line_punct_ratio", line_punct_ratio(t), Comparison::Ge, cfg.min_line_punct_ratio),
        &|t: &str| {
            FilterVerdict::check("short_line_frac", short_line_frac(t, cfg.short_line_words), Comparison::Le, cfg.max_short_line_frac)
        },
        &|t: &str| FilterVerdict::check("bullet_line_frac", bullet_line_frac(t), Comparison::Le, cfg.max_bullet_line_frac),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_ending_mid_token_fail() {
        let mut lines: Vec<String> = (0..9).map(|i| format!("the signal line number {i} ends with a trunc")).collect();
        lines.push("This final line ends properly.".into());
        let text = lines.join("\n");
        assert!((line_punct_ratio(&text) - 0.1).abs() < 1e-12);
        let v = fineweb_filter(&text, &FinewebConfig::default());
        assert_eq!((v.passed, v.rule.as_str()), (false, "line_punct_ratio"));
    }

    #[test]
    fn well_formed_abstract_passes() {
        let text = "A pump assembly is disclosed. The assembly includes a motor and an impeller. \
                    The impeller is mounted on a shaft. A seal prevents leakage along the shaft. \
                    The motor is controlled by a variable frequency drive.";
        assert!(fineweb_filter(text, &FinewebConfig::default()).passed);
        assert!(fineweb_filter("A device comprising a lens and a sensor.", &FinewebConfig::default()).passed);
    }

    #[test]
    fn bullets() {
        let text = "- first item here now\n- second item here now\n* third item here now.";
        assert!((bullet_line_frac(text) - 1.0).abs() < 1e-12);
        let v = fineweb_filter(text, &FinewebConfig::default());
        assert_eq!(v.rule, "bullet_line_frac");
        assert!(!v.passed);
    }
}
