//! Byte-pair-encoding tokenizer trained from scratch.
//!
//! Text is NFKC-normalized and lowercased, split on whitespace, and each
//! word is segmented independently. The last symbol of a word carries the
//! [`END_OF_WORD`] marker, so decoding restores word boundaries.

mod train;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfkc_quick, IsNormalized, UnicodeNormalization};

use crate::error::{Error, Result};

pub use train::{train, train_detailed, TrainConfig, TrainStats};

pub const UNK: u32 = 0;
pub const PAD: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const SPECIALS: [&str; 5] = ["[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]"];

/// Suffix marking a word-final symbol. Uppercase, so it can never be
/// produced by normalized (lowercased) text.
pub const END_OF_WORD: &str = "</W>";

pub const FORMAT_VERSION: u32 = 1;

/// NFKC followed by lowercasing, repeated until stable.
pub fn normalize(text: &str) -> String {
    if text.is_ascii() {
        return text.to_ascii_lowercase();
    }
    let mut s: String = text.nfkc().collect::<String>().to_lowercase();
    for _ in 0..4 {
        if is_nfkc_quick(s.chars()) == IsNormalized::Yes && s.to_lowercase() == s {
            break;
        }
        s = s.nfkc().collect::<String>().to_lowercase();
    }
    s
}

/// Trained vocabulary and merge table.
#[derive(Debug, Clone)]
pub struct BpeVocab {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
    merges: Vec<(u32, u32)>,
    /// (left, right) -> (rank, result id)
    ranks: HashMap<(u32, u32), (u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    specials: Vec<String>,
    end_of_word: String,
    vocab: Vec<String>,
    merges: Vec<(String, String)>,
}

impl BpeVocab {
    /// Builds a vocabulary from tokens in id order and merges in rank order.
    /// Specials must occupy ids 0..5.
    pub fn from_parts(tokens: Vec<String>, merges: Vec<(String, String)>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Data("vocabulary must start with the five special tokens".into()));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate token {t:?}")));
            }
        }
        let lookup = |t: &str| {
            token_to_id
                .get(t)
                .copied()
                .filter(|&id| id as usize >= SPECIALS.len())
                .ok_or_else(|| Error::Data(format!("merge references unknown token {t:?}")))
        };
        let mut ids = Vec::with_capacity(merges.len());
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let (a, b) = (lookup(l)?, lookup(r)?);
            if l.ends_with(END_OF_WORD) {
                return Err(Error::Data(format!("merge left side {l:?} is word-final")));
            }
            let c = lookup(&format!("{l}{r}"))?;
            if ranks.insert((a, b), (rank as u32, c)).is_some() {
                return Err(Error::Data(format!("duplicate merge ({l:?}, {r:?})")));
            }
            ids.push((a, b));
        }
        // every non-special token must be a single symbol or a merge result
        let mut produced = vec![false; tokens.len()];
        for &(_, c) in ranks.values() {
            produced[c as usize] = true;
        }
        for (i, t) in tokens.iter().enumerate().skip(SPECIALS.len()) {
            let base = t.strip_suffix(END_OF_WORD).unwrap_or(t);
            if !produced[i] && base.chars().count() != 1 {
                return Err(Error::Data(format!("token {t:?} is neither a symbol nor a merge result")));
            }
        }
        Ok(BpeVocab {
            tokens,
            token_to_id,
            merges: ids,
            ranks,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Merges in rank order as token strings.
    pub fn merges(&self) -> Vec<(&str, &str)> {
        self.merges
            .iter()
            .map(|&(a, b)| (self.tokens[a as usize].as_str(), self.tokens[b as usize].as_str()))
            .collect()
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            version: FORMAT_VERSION,
            specials: SPECIALS.iter().map(|s| s.to_string()).collect(),
            end_of_word: END_OF_WORD.into(),
            vocab: self.tokens.clone(),
            merges: self
                .merges()
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocab serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(s)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported vocab version {}", file.version)));
        }
        if file.specials != SPECIALS || file.end_of_word != END_OF_WORD {
            return Err(Error::Data("vocab uses different special tokens".into()));
        }
        Self::from_parts(file.vocab, file.merges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }

    fn symbol(&self, c: char, last: bool, buf: &mut String) -> u32 {
        buf.clear();
        buf.push(c);
        if last {
            buf.push_str(END_OF_WORD);
        }
        self.id(buf).unwrap_or(UNK)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Encoding {
    pub ids: Vec<u32>,
    /// Byte spans of each token in the normalized text.
    pub offsets: Vec<(usize, usize)>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Segments one word (no whitespace) starting at byte `base` of the
/// normalized text.
fn encode_word(word: &str, base: usize, vocab: &BpeVocab, out: &mut Encoding) {
    let mut buf = String::new();
    let n = word.chars().count();
    // (id, start, end)
    let mut syms: Vec<(u32, usize, usize)> = word
        .char_indices()
        .enumerate()
        .map(|(k, (i, c))| (vocab.symbol(c, k + 1 == n, &mut buf), i, i + c.len_utf8()))
        .collect();
    loop {
        let best = syms
            .windows(2)
            .filter_map(|w| vocab.ranks.get(&(w[0].0, w[1].0)).map(|&(r, c)| (r, w[0].0, w[1].0, c)))
            .min();
        let Some((_, a, b, c)) = best else { break };
        let mut merged = Vec::with_capacity(syms.len());
        let mut i = 0;
        while i < syms.len() {
            if i + 1 < syms.len() && syms[i].0 == a && syms[i + 1].0 == b {
                merged.push((c, syms[i].1, syms[i + 1].2));
                i += 2;
            } else {
                merged.push(syms[i]);
                i += 1;
            }
        }
        syms = merged;
    }
    for (id, s, e) in syms {
        if id == UNK && out.ids.last() == Some(&UNK) && out.offsets.last().is_some_and(|o| o.1 == base + s) {
            out.offsets.last_mut().expect("checked").1 = base + e;
            continue;
        }
        out.ids.push(id);
        out.offsets.push((base + s, base + e));
    }
}

/// Encodes already-normalized text.
pub fn encode_normalized(norm: &str, vocab: &BpeVocab) -> Encoding {
    let mut out = Encoding::default();
    let mut start = None;
    for (i, c) in norm.char_indices().chain(std::iter::once((norm.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                encode_word(&norm[s..i], s, vocab, &mut out);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

pub fn encode(text: &str, vocab: &BpeVocab) -> Encoding {
    encode_normalized(&normalize(text), vocab)
}

/// Joins tokens, turning word-final markers into single spaces.
/// Specials are rendered by name unless `skip_specials` is set.
pub fn decode(ids: &[u32], vocab: &BpeVocab, skip_specials: bool) -> Result<String> {
    let mut out = String::new();
    for &id in ids {
        let tok = vocab
            .token(id)
            .ok_or_else(|| Error::Domain(format!("token id {id} out of range for vocab of {}", vocab.len())))?;
        if (id as usize) < SPECIALS.len() {
            if !skip_specials {
                if !out.is_empty() && !out.ends_with(' ') {
                    out.push(' ');
                }
                out.push_str(tok);
                out.push(' ');
            }
            continue;
        }
        match tok.strip_suffix(END_OF_WORD) {
            Some(t) => {
                out.push_str(t);
                out.push(' ');
            }
            None => out.push_str(tok),
        }
    }
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    Ok(out)
}

/// Shannon entropy in bits of a token histogram.
pub fn entropy_bits(counts: impl IntoIterator<Item = u64>) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Entropy of the empirical token distribution of an encoded sample.
pub fn token_entropy<S: AsRef<str>>(sample: &[S], vocab: &BpeVocab) -> Result<f64> {
    let mut hist: HashMap<u32, u64> = HashMap::new();
    for t in sample {
        for id in encode(t.as_ref(), vocab).ids {
            *hist.entry(id).or_insert(0) += 1;
        }
    }
    if hist.is_empty() {
        return Err(Error::Domain("token entropy of an empty sample".into()));
    }
    Ok(entropy_bits(hist.into_values()))
}

/// Fraction of emitted tokens that are [UNK].
pub fn unk_rate<S: AsRef<str>>(sample: &[S], vocab: &BpeVocab) -> Result<f64> {
    let (mut unk, mut total) = (0u64, 0u64);
    for t in sample {
        let e = encode(t.as_ref(), vocab);
        total += e.ids.len() as u64;
        unk += e.ids.iter().filter(|&&i| i == UNK).count() as u64;
    }
    if total == 0 {
        return Err(Error::Domain("unk rate of an empty sample".into()));
    }
    Ok(unk as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> BpeVocab {
        let docs = ["low lower lowest", "low low newer newest", "wider low"];
        train(docs.iter().copied(), &TrainConfig { vocab_size: 60, min_freq: 2 }).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("ＡＢＣ"), "abc");
        assert_eq!(normalize("abc"), "abc");
        assert_eq!(normalize("ﬁlter"), "filter");
        assert_eq!(normalize("ＡＢＣﬁ"), "abcfi");
    }

    #[test]
    fn whole_word_is_one_token() {
        let v = small();
        let e = encode("LOW", &v);
        assert_eq!(e.ids, vec![v.id("low</W>").unwrap()]);
        assert_eq!(e.offsets, vec![(0, 3)]);
    }

    #[test]
    fn unknown_chars_become_one_unk() {
        let v = small();
        let e = encode("low λλλ low", &v);
        assert_eq!(e.ids.iter().filter(|&&i| i == UNK).count(), 1);
        assert_eq!(e.offsets[1], (4, 10));
        assert_eq!(decode(&e.ids, &v, false).unwrap(), "low [UNK] low");
        assert_eq!(decode(&e.ids, &v, true).unwrap(), "low low");
    }

    #[test]
    fn decode_edges() {
        let v = small();
        assert_eq!(decode(&[], &v, false).unwrap(), "");
        assert!(decode(&[v.len() as u32], &v, false).is_err());
    }

    #[test]
    fn json_round_trip() {
        let v = small();
        let w = BpeVocab::from_json(&v.to_json()).unwrap();
        assert_eq!(v.tokens(), w.tokens());
        assert_eq!(v.merges(), w.merges());
        assert!(BpeVocab::from_json(&v.to_json().replace("[MASK]", "[M]")).is_err());
    }

    #[test]
    fn entropy_analytic() {
        assert_eq!(entropy_bits([7]), 0.0);
        assert!((entropy_bits([5, 5, 5, 5]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unk_rate_bounds() {
        let v = small();
        assert_eq!(unk_rate(&["low lower"], &v).unwrap(), 0.0);
        assert_eq!(unk_rate(&["λλ ωω"], &v).unwrap(), 1.0);
        assert!(unk_rate::<&str>(&[], &v).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn round_trip_in_alphabet(words in prop::collection::vec("[lowernstid]{1,8}", 1..8)) {
            let v = small();
            let text = words.join("  ");
            let e = encode(&text, &v);
            prop_assert!(!e.ids.contains(&UNK));
            prop_assert_eq!(decode(&e.ids, &v, false).unwrap(), words.join(" "));
            for w in e.offsets.windows(2) {
                prop_assert!(w[0].1 <= w[1].0);
            }
        }
    }
}
