//! Greedy BPE training.
//!
//! Words are counted exactly, then the most frequent adjacent symbol pair is
//! merged until the vocabulary is full or no pair reaches `min_freq`. Ties
//! go to the pair whose earliest live occurrence comes first, ordered by the
//! word's first appearance in the corpus and then by character offset within
//! the word. Two distinct pairs cannot share an earliest occurrence, so no
//! further tie rule is ever needed.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{normalize, BpeVocab, END_OF_WORD, SPECIALS};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Total vocabulary size including the five specials.
    pub vocab_size: usize,
    pub min_freq: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            vocab_size: 49_152,
            min_freq: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainStats {
    pub documents: u64,
    pub words: u64,
    pub distinct_words: usize,
    /// Symbols in the base alphabet, counting word-final forms separately.
    pub alphabet: usize,
    /// Pair frequency at the time each merge was chosen.
    pub merge_counts: Vec<u64>,
}

const CHUNK: usize = 4096;

pub fn train<I>(docs: I, cfg: &TrainConfig) -> Result<BpeVocab>
where
    I: IntoIterator,
    I::Item: AsRef<str> + Sync,
{
    train_detailed(docs, cfg, Execution::Parallel).map(|(v, _)| v)
}

/// Word counts in first-appearance order.
fn count_words<I>(docs: I, exec: Execution, stats: &mut TrainStats) -> Vec<(String, u64)>
where
    I: IntoIterator,
    I::Item: AsRef<str> + Sync,
{
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<(String, u64)> = Vec::new();
    let mut it = docs.into_iter().peekable();
    while it.peek().is_some() {
        let chunk: Vec<I::Item> = it.by_ref().take(CHUNK).collect();
        stats.documents += chunk.len() as u64;
        let normalized = par::map(&chunk, exec, |d| normalize(d.as_ref()));
        for n in &normalized {
            for w in n.split_whitespace() {
                stats.words += 1;
                match index.get(w) {
                    Some(&i) => words[i].1 += 1,
                    None => {
                        index.insert(w.to_string(), words.len());
                        words.push((w.to_string(), 1));
                    }
                }
            }
        }
    }
    words
}

struct PairStat {
    count: u64,
    words: BTreeSet<u32>,
}

struct Trainer {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
    /// characters per token, excluding the word-final marker
    sym_len: Vec<u32>,
    words: Vec<Vec<u32>>,
    counts: Vec<u64>,
    pairs: HashMap<(u32, u32), PairStat>,
    heap: BinaryHeap<(u64, Reverse<(u32, u32)>, (u32, u32))>,
}

impl Trainer {
    fn add_token(&mut self, t: String) -> u32 {
        if let Some(&id) = self.token_to_id.get(&t) {
            return id;
        }
        let id = self.tokens.len() as u32;
        let base = t.strip_suffix(END_OF_WORD).unwrap_or(&t);
        self.sym_len.push(base.chars().count() as u32);
        self.token_to_id.insert(t.clone(), id);
        self.tokens.push(t);
        id
    }

    /// (word index, char offset) of the earliest live occurrence.
    fn first_key(&self, pair: (u32, u32)) -> Option<(u32, u32)> {
        let w = *self.pairs.get(&pair)?.words.first()?;
        let mut off = 0;
        for s in self.words[w as usize].windows(2) {
            if (s[0], s[1]) == pair {
                return Some((w, off));
            }
            off += self.sym_len[s[0] as usize];
        }
        None
    }

    fn push(&mut self, pair: (u32, u32)) {
        if let Some(stat) = self.pairs.get(&pair) {
            if stat.count > 0 {
                let key = self.first_key(pair).expect("live pair has an occurrence");
                self.heap.push((stat.count, Reverse(key), pair));
            }
        }
    }

    fn pop(&mut self) -> Option<((u32, u32), u64)> {
        while let Some((count, Reverse(key), pair)) = self.heap.pop() {
            let live = self.pairs.get(&pair).map_or(0, |s| s.count);
            if live == count && self.first_key(pair) == Some(key) {
                return Some((pair, count));
            }
        }
        None
    }

    fn apply(&mut self, pair: (u32, u32), merged: u32) {
        let affected: Vec<u32> = match self.pairs.get(&pair) {
            Some(s) => s.words.iter().copied().collect(),
            None => return,
        };
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for w in affected {
            let old = std::mem::take(&mut self.words[w as usize]);
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == pair {
                    new.push(merged);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            let cnt = self.counts[w as usize];
            let old_pairs: HashSet<(u32, u32)> = old.windows(2).map(|s| (s[0], s[1])).collect();
            let new_pairs: HashSet<(u32, u32)> = new.windows(2).map(|s| (s[0], s[1])).collect();
            for s in old.windows(2) {
                let st = self.pairs.get_mut(&(s[0], s[1])).expect("counted pair");
                st.count -= cnt;
            }
            for s in new.windows(2) {
                let st = self.pairs.entry((s[0], s[1])).or_insert_with(|| PairStat {
                    count: 0,
                    words: BTreeSet::new(),
                });
                st.count += cnt;
            }
            for p in old_pairs.difference(&new_pairs) {
                self.pairs.get_mut(p).expect("counted pair").words.remove(&w);
            }
            for p in new_pairs.difference(&old_pairs) {
                self.pairs.get_mut(p).expect("inserted above").words.insert(w);
            }
            touched.extend(old_pairs);
            touched.extend(new_pairs);
            self.words[w as usize] = new;
        }
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if self.pairs.get(&p).is_some_and(|s| s.count == 0) {
                self.pairs.remove(&p);
            } else {
                self.push(p);
            }
        }
    }
}

pub fn train_detailed<I>(docs: I, cfg: &TrainConfig, exec: Execution) -> Result<(BpeVocab, TrainStats)>
where
    I: IntoIterator,
    I::Item: AsRef<str> + Sync,
{
    let mut stats = TrainStats::default();
    let words = count_words(docs, exec, &mut stats);
    if words.is_empty() {
        return Err(Error::Domain("cannot train a tokenizer on an empty corpus".into()));
    }
    let alphabet: BTreeSet<char> = words.iter().flat_map(|(w, _)| w.chars()).collect();
    stats.distinct_words = words.len();
    stats.alphabet = 2 * alphabet.len();
    if cfg.vocab_size <= SPECIALS.len() + stats.alphabet {
        return Err(Error::config(
            "tok.vocab_size",
            format!(
                "{} must exceed {} specials + {} alphabet symbols",
                cfg.vocab_size,
                SPECIALS.len(),
                stats.alphabet
            ),
        ));
    }

    let mut t = Trainer {
        tokens: Vec::new(),
        token_to_id: HashMap::new(),
        sym_len: Vec::new(),
        words: Vec::with_capacity(words.len()),
        counts: Vec::with_capacity(words.len()),
        pairs: HashMap::new(),
        heap: BinaryHeap::new(),
    };
    for s in SPECIALS {
        t.add_token(s.to_string());
    }
    for c in &alphabet {
        t.add_token(c.to_string());
        t.add_token(format!("{c}{END_OF_WORD}"));
    }
    for (wi, (w, n)) in words.iter().enumerate() {
        let len = w.chars().count();
        let syms: Vec<u32> = w
            .chars()
            .enumerate()
            .map(|(k, c)| {
                let tok = if k + 1 == len { format!("{c}{END_OF_WORD}") } else { c.to_string() };
                t.token_to_id[&tok]
            })
            .collect();
        for s in syms.windows(2) {
            let st = t.pairs.entry((s[0], s[1])).or_insert_with(|| PairStat {
                count: 0,
                words: BTreeSet::new(),
            });
            st.count += n;
            st.words.insert(wi as u32);
        }
        t.words.push(syms);
        t.counts.push(*n);
    }
    let mut initial: Vec<(u32, u32)> = t.pairs.keys().copied().collect();
    initial.sort_unstable();
    for p in initial {
        t.push(p);
    }

    let mut merges: Vec<(u32, u32)> = Vec::new();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    while t.tokens.len() < cfg.vocab_size {
        let Some((pair, count)) = t.pop() else { break };
        if count < cfg.min_freq {
            break;
        }
        let joined = format!("{}{}", t.tokens[pair.0 as usize], t.tokens[pair.1 as usize]);
        let merged = t.add_token(joined);
        // a pair can resurface when a later merge recreates an existing token;
        // it is applied again but recorded once
        if seen.insert(pair) {
            merges.push(pair);
            stats.merge_counts.push(count);
        }
        t.apply(pair, merged);
    }

    let merges = merges
        .into_iter()
        .map(|(a, b)| (t.tokens[a as usize].clone(), t.tokens[b as usize].clone()))
        .collect();
    let vocab = BpeVocab::from_parts(t.tokens, merges)?;
    Ok((vocab, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_word_merges() {
        let docs = vec!["aaaa"; 10];
        let (v, stats) = train_detailed(docs, &TrainConfig { vocab_size: 10, min_freq: 2 }, Execution::Sequential).unwrap();
        assert_eq!(
            v.merges(),
            vec![("a", "a"), ("aa", "a"), ("aaa", "a</W>")]
        );
        assert_eq!(stats.merge_counts, vec![20, 10, 10]);
        assert_eq!(v.len(), 10);
    }

    #[test]
    fn min_freq_blocks_all_merges() {
        let v = train(["ab cd"], &TrainConfig { vocab_size: 100, min_freq: 2 }).unwrap();
        assert_eq!(v.merge_count(), 0);
        assert_eq!(v.len(), 5 + 8);
    }

    #[test]
    fn errors() {
        assert!(train(Vec::<&str>::new(), &TrainConfig::default()).is_err());
        assert!(train(["   "], &TrainConfig::default()).is_err());
        assert!(train(["abc"], &TrainConfig { vocab_size: 11, min_freq: 2 }).is_err());
    }

    #[test]
    fn specials_first() {
        let v = train(["some words here"], &TrainConfig::default()).unwrap();
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(v.id(s), Some(i as u32));
        }
    }

    #[test]
    fn sequential_equals_parallel() {
        let docs: Vec<String> = (0..9000).map(|i| format!("token{} shared words {}", i % 37, i % 11)).collect();
        let cfg = TrainConfig { vocab_size: 200, min_freq: 2 };
        let (a, _) = train_detailed(&docs, &cfg, Execution::Sequential).unwrap();
        let (b, _) = train_detailed(&docs, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
