//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use patcorp::bpe::{normalize, END_OF_WORD, SPECIALS};
use patcorp::synth::{self, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of the reference trainer: tokens in id order, merges in rank
/// order and the pair count at the time each merge was chosen.
pub struct RefBpe {
    pub tokens: Vec<String>,
    pub merges: Vec<(String, String)>,
    pub counts: Vec<u64>,
}

fn base_len(sym: &str) -> usize {
    sym.strip_suffix(END_OF_WORD).unwrap_or(sym).chars().count()
}

/// Quadratic BPE: recount every adjacent pair of every word on every step.
/// Highest count wins; ties go to the pair seen first when scanning words in
/// first-appearance order and each word left to right.
pub fn reference_bpe<S: AsRef<str>>(texts: &[S], vocab_size: usize, min_freq: u64) -> RefBpe {
    let mut order: Vec<String> = Vec::new();
    let mut freq: HashMap<String, u64> = HashMap::new();
    for t in texts {
        for w in normalize(t.as_ref()).split_whitespace() {
            let e = freq.entry(w.to_string()).or_insert(0);
            if *e == 0 {
                order.push(w.to_string());
            }
            *e += 1;
        }
    }
    let alphabet: BTreeSet<char> = order.iter().flat_map(|w| w.chars()).collect();
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    for c in &alphabet {
        tokens.push(c.to_string());
        tokens.push(format!("{c}{END_OF_WORD}"));
    }
    let mut words: Vec<(Vec<String>, u64)> = order
        .iter()
        .map(|w| {
            let chars: Vec<char> = w.chars().collect();
            let syms = chars
                .iter()
                .enumerate()
                .map(|(k, c)| if k + 1 == chars.len() { format!("{c}{END_OF_WORD}") } else { c.to_string() })
                .collect();
            (syms, freq[w])
        })
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut counts = Vec::new();
    while tokens.len() < vocab_size {
        let mut tally: HashMap<(String, String), (u64, (usize, usize))> = HashMap::new();
        for (wi, (syms, n)) in words.iter().enumerate() {
            let mut off = 0;
            for k in 0..syms.len().saturating_sub(1) {
                let e = tally
                    .entry((syms[k].clone(), syms[k + 1].clone()))
                    .or_insert((0, (wi, off)));
                e.0 += n;
                off += base_len(&syms[k]);
            }
        }
        let Some((pair, (count, _))) = tally
            .into_iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        else {
            break;
        };
        if count < min_freq {
            break;
        }
        let joined = format!("{}{}", pair.0, pair.1);
        if !tokens.contains(&joined) {
            tokens.push(joined.clone());
        }
        if !merges.contains(&pair) {
            merges.push(pair.clone());
            counts.push(count);
        }
        for (syms, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
                    out.push(joined.clone());
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
    }
    RefBpe { tokens, merges, counts }
}

/// Connected components by breadth-first search, as sorted member lists
/// (singletons omitted), ordered by smallest member.
pub fn bfs_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    q.push_back(v);
                }
            }
        }
        if comp.len() > 1 {
            comp.sort_unstable();
            out.push(comp);
        }
    }
    out
}

/// Two shingle sets over a union of exactly `universe` random elements with
/// `round(s * universe)` shared elements and the rest split between them.
pub fn set_pair(rng: &mut ChaCha8Rng, s: f64, universe: usize) -> (Vec<u64>, Vec<u64>) {
    let mut elems: Vec<u64> = Vec::with_capacity(universe);
    let mut seen = HashSet::new();
    while elems.len() < universe {
        let x: u64 = rng.random();
        if seen.insert(x) {
            elems.push(x);
        }
    }
    let shared = (s * universe as f64).round() as usize;
    let a_only = (universe - shared) / 2;
    let a = elems[..shared + a_only].to_vec();
    let mut b = elems[..shared].to_vec();
    b.extend_from_slice(&elems[shared + a_only..]);
    (a, b)
}

pub fn exact_jaccard(a: &[u64], b: &[u64]) -> f64 {
    let sa: HashSet<u64> = a.iter().copied().collect();
    let sb: HashSet<u64> = b.iter().copied().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

/// Synthetic abstracts cut to at most `max_words` whitespace tokens.
pub fn abstract_fixture(max_words: usize, seed: u64) -> Vec<String> {
    let recs = synth::records(&SynthConfig {
        docs: 200,
        seed,
        ..Default::default()
    });
    let mut out = Vec::new();
    let mut n = 0;
    for r in recs {
        let Some(a) = r.abstract_raw else { continue };
        let words: Vec<&str> = a.split_whitespace().take(max_words - n).collect();
        n += words.len();
        out.push(words.join(" "));
        if n >= max_words {
            break;
        }
    }
    out
}

/// Short words over a three-letter alphabet: many equal pair counts.
pub fn tie_fixture(words: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters = ['a', 'b', 'c'];
    let ws: Vec<String> = (0..words)
        .map(|_| {
            let len = rng.random_range(1..=6);
            (0..len).map(|_| letters[rng.random_range(0..3)]).collect()
        })
        .collect();
    ws.chunks(20).map(|c| c.join(" ")).collect()
}

/// German and French sentences plus compatibility characters.
pub fn unicode_fixture() -> Vec<String> {
    let mut out: Vec<String> = include_str!("../data/heldout_de.txt").lines().map(str::to_string).collect();
    out.extend(
        [
            "Ｌｅｎｓ ＭＯＤＵＬＥ mit ﬁlter und ﬂansch",
            "Éléments optiques réfléchissants à base de ｇｌａｓｓ",
            "Straße STRASSE straße Ⅻ ① ㎏ ½",
            "Ａｎｓｐｒｕｃｈ 1: ﬁlterelement, ﬁlterelement.",
        ]
        .map(str::to_string),
    );
    out
}
