//! Character n-gram language identification.
//!
//! A multinomial naive Bayes classifier over character 1- to 4-grams of
//! space-padded lowercase words. The built-in model is trained at first use
//! from small embedded corpora; other models can be loaded from JSON or
//! supplied through [`LanguageIdentifier`].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangScore {
    pub language: String,
    /// Posterior probability in [0, 1].
    pub confidence: f64,
}

/// Pluggable language identification model.
pub trait LanguageIdentifier: Send + Sync {
    /// Posterior over all known languages, best first; `None` for text with
    /// no usable characters.
    fn scores(&self, text: &str) -> Option<Vec<LangScore>>;

    fn detect(&self, text: &str) -> Option<LangScore> {
        self.scores(text).and_then(|s| s.into_iter().next())
    }

    /// Posterior probability of one language.
    fn probability(&self, text: &str, language: &str) -> Option<f64> {
        let s = self.scores(text)?;
        Some(s.iter().find(|l| l.language == language).map_or(0.0, |l| l.confidence))
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("en", include_str!("../../data/langid/en.txt")),
    ("de", include_str!("../../data/langid/de.txt")),
    ("fr", include_str!("../../data/langid/fr.txt")),
    ("es", include_str!("../../data/langid/es.txt")),
    ("it", include_str!("../../data/langid/it.txt")),
    ("nl", include_str!("../../data/langid/nl.txt")),
    ("pt", include_str!("../../data/langid/pt.txt")),
    ("sv", include_str!("../../data/langid/sv.txt")),
    ("ru", include_str!("../../data/langid/ru.txt")),
    ("zh", include_str!("../../data/langid/zh.txt")),
];

static BUILTIN_MODEL: LazyLock<Arc<NgramLangId>> = LazyLock::new(|| {
    let corpora: Vec<(String, String)> = BUILTIN
        .iter()
        .map(|(l, t)| (l.to_string(), t.to_string()))
        .collect();
    Arc::new(NgramLangId::new(&LangIdCounts::train(&corpora, 4, 0.5)))
});

/// Serializable n-gram counts; the trained form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangIdCounts {
    pub languages: Vec<String>,
    pub max_order: usize,
    pub alpha: f64,
    /// gram -> per-language counts (same order as `languages`)
    pub grams: BTreeMap<String, Vec<u32>>,
}

impl LangIdCounts {
    pub fn train(corpora: &[(String, String)], max_order: usize, alpha: f64) -> Self {
        let languages: Vec<String> = corpora.iter().map(|(l, _)| l.clone()).collect();
        let mut grams: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (li, (_, text)) in corpora.iter().enumerate() {
            for_each_gram(text, max_order, |g| {
                grams.entry(g.to_string()).or_insert_with(|| vec![0; languages.len()])[li] += 1;
            });
        }
        LangIdCounts {
            languages,
            max_order,
            alpha,
            grams,
        }
    }
}

/// Compiled naive Bayes model.
#[derive(Debug, Clone)]
pub struct NgramLangId {
    languages: Vec<String>,
    max_order: usize,
    table: HashMap<u64, Vec<f32>>,
    unseen: Vec<f32>,
}

impl NgramLangId {
    pub fn new(c: &LangIdCounts) -> Self {
        let k = c.languages.len();
        let vocab = c.grams.len().max(1) as f64;
        let mut totals = vec![0f64; k];
        for counts in c.grams.values() {
            for (t, &n) in totals.iter_mut().zip(counts) {
                *t += n as f64;
            }
        }
        let denom: Vec<f64> = totals.iter().map(|t| t + c.alpha * vocab).collect();
        let table = c
            .grams
            .iter()
            .map(|(g, counts)| {
                let lp = counts
                    .iter()
                    .zip(&denom)
                    .map(|(&n, d)| ((n as f64 + c.alpha) / d).ln() as f32)
                    .collect();
                (xxh3_64(g.as_bytes()), lp)
            })
            .collect();
        let unseen = denom.iter().map(|d| (c.alpha / d).ln() as f32).collect();
        NgramLangId {
            languages: c.languages.clone(),
            max_order: c.max_order,
            table,
            unseen,
        }
    }

    /// The model trained from the embedded corpora.
    pub fn builtin() -> Arc<NgramLangId> {
        BUILTIN_MODEL.clone()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let counts: LangIdCounts = serde_json::from_str(&raw)
            .map_err(|e| Error::config("filters.lang_model", format!("{}: {e}", path.display())))?;
        if counts.languages.is_empty() || counts.grams.values().any(|v| v.len() != counts.languages.len()) {
            return Err(Error::config("filters.lang_model", "inconsistent language count"));
        }
        Ok(NgramLangId::new(&counts))
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }
}

impl LanguageIdentifier for NgramLangId {
    fn scores(&self, text: &str) -> Option<Vec<LangScore>> {
        let k = self.languages.len();
        let mut ll = vec![0f64; k];
        let mut n = 0usize;
        for_each_gram(text, self.max_order, |g| {
            n += 1;
            let row = self.table.get(&xxh3_64(g.as_bytes())).unwrap_or(&self.unseen);
            for (acc, &lp) in ll.iter_mut().zip(row) {
                *acc += lp as f64;
            }
        });
        if n == 0 {
            return None;
        }
        let max = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = ll.iter().map(|x| (x - max).exp()).sum();
        let mut out: Vec<LangScore> = self
            .languages
            .iter()
            .zip(&ll)
            .map(|(l, x)| LangScore {
                language: l.clone(),
                confidence: ((x - max).exp() / z).clamp(0.0, 1.0),
            })
            .collect();
        out.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then_with(|| a.language.cmp(&b.language))
        });
        Some(out)
    }
}

/// Calls `f` with every character n-gram (orders 1..=max_order) of every
/// space-padded lowercase word. Digits and punctuation separate words.
fn for_each_gram(text: &str, max_order: usize, mut f: impl FnMut(&str)) {
    let mut word = String::with_capacity(32);
    let mut bounds: Vec<usize> = Vec::with_capacity(34);
    let mut flush = |word: &mut String, bounds: &mut Vec<usize>| {
        if word.len() <= 1 {
            word.clear();
            word.push(' ');
            return;
        }
        word.push(' ');
        bounds.clear();
        bounds.extend(word.char_indices().map(|(i, _)| i));
        bounds.push(word.len());
        let nchars = bounds.len() - 1;
        for order in 1..=max_order {
            for start in 0..nchars.saturating_sub(order - 1) {
                let g = &word[bounds[start]..bounds[start + order]];
                if g != " " {
                    f(g);
                }
            }
        }
        word.clear();
        word.push(' ');
    };
    word.push(' ');
    for c in text.chars() {
        if c.is_alphabetic() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, &mut bounds);
        }
    }
    flush(&mut word, &mut bounds);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grams_of_one_word() {
        let mut g = Vec::new();
        for_each_gram("Ab", 3, |s| g.push(s.to_string()));
        assert_eq!(g, vec!["a", "b", " a", "ab", "b ", " ab", "ab "]);
        let mut none = 0;
        for_each_gram("123 !!", 3, |_| none += 1);
        assert_eq!(none, 0);
    }

    #[test]
    fn examples() {
        let m = NgramLangId::builtin();
        let en = m
            .detect("A semiconductor device comprising a substrate and a gate electrode.")
            .unwrap();
        assert_eq!(en.language, "en");
        assert!(en.confidence >= 0.9, "{en:?}");
        let de = m
            .detect("Vorrichtung zur Messung der Temperatur eines Substrats.")
            .unwrap();
        assert_ne!(de.language, "en");
        assert!(m.detect("").is_none());
        assert!(m.detect("12345 ...").is_none());
    }

    #[test]
    fn posterior_is_a_distribution() {
        let m = NgramLangId::builtin();
        let s = m.scores("Le signal est amplifié et filtré.").unwrap();
        let total: f64 = s.iter().map(|l| l.confidence).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(s.iter().all(|l| (0.0..=1.0).contains(&l.confidence)));
        assert_eq!(s[0].language, "fr");
    }

    #[test]
    fn counts_round_trip_through_json() {
        let c = LangIdCounts::train(
            &[("x".into(), "aaa bbb".into()), ("y".into(), "ccc ddd".into())],
            2,
            0.5,
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
        let m = NgramLangId::load(&p).unwrap();
        assert_eq!(m.detect("cc dd").unwrap().language, "y");
    }
}
