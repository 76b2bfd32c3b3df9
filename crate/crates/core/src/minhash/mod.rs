//! Near-duplicate detection with MinHash signatures and LSH banding.
//!
//! Each field document is reduced to a set of hashed word 5-gram shingles,
//! summarized by 112 64-bit minima, and bucketed into 14 bands of 8 rows.
//! Documents sharing any full band are joined with union-find and only one
//! representative per connected component survives.

mod cluster;
mod sigfile;

use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::corpus::{FieldDoc, FieldKind};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use cluster::{cluster, DuplicateCluster, UnionFind};
pub use sigfile::{read_signatures, write_signatures};

pub const NUM_PERM: usize = 112;
pub const BANDS: usize = 14;
pub const ROWS: usize = 8;

const _: () = assert!(BANDS * ROWS == NUM_PERM);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShingleKind {
    Word,
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentativeRule {
    /// Lexicographically smallest doc id.
    #[default]
    SmallestId,
    /// Longest text, ties to the smallest id.
    Longest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinHashConfig {
    pub shingle_kind: ShingleKind,
    pub shingle_size: usize,
    /// Master seed from which the 112 hash seeds are derived.
    pub seed: u64,
    pub representative: RepresentativeRule,
}

impl Default for MinHashConfig {
    fn default() -> Self {
        MinHashConfig {
            shingle_kind: ShingleKind::Word,
            shingle_size: 5,
            seed: 0x005e_ed0f_d0c5,
            representative: RepresentativeRule::SmallestId,
        }
    }
}

impl MinHashConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_size == 0 {
            return Err(Error::config("dedup.shingle_size", "must be positive"));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free shingle hashes of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub doc_id: String,
    pub shingles: Vec<u64>,
}

impl ShingleSet {
    pub fn from_hashes(doc_id: impl Into<String>, mut shingles: Vec<u64>) -> Self {
        shingles.sort_unstable();
        shingles.dedup();
        ShingleSet {
            doc_id: doc_id.into(),
            shingles,
        }
    }

    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }
}

/// Hashed shingles of `text`. Texts shorter than one window yield a single
/// shingle covering the whole text.
pub fn shingle_hashes(text: &str, kind: ShingleKind, n: usize) -> Result<Vec<u64>> {
    let lower = if text.is_ascii() { text.to_ascii_lowercase() } else { text.to_lowercase() };
    let units: Vec<u64> = match kind {
        ShingleKind::Word => lower.split_whitespace().map(|w| xxh3_64(w.as_bytes())).collect(),
        ShingleKind::Char => {
            let joined = lower.split_whitespace().collect::<Vec<_>>().join(" ");
            let mut buf = [0u8; 4];
            joined.chars().map(|c| xxh3_64(c.encode_utf8(&mut buf).as_bytes())).collect()
        }
    };
    if units.is_empty() {
        return Err(Error::Data("cannot shingle empty text".into()));
    }
    let mut bytes = Vec::with_capacity(8 * n.max(units.len().min(n)));
    let mut window = |w: &[u64]| {
        bytes.clear();
        for h in w {
            bytes.extend_from_slice(&h.to_le_bytes());
        }
        xxh3_64(&bytes)
    };
    if units.len() < n {
        return Ok(vec![window(&units)]);
    }
    Ok(units.windows(n).map(window).collect())
}

pub fn shingle(doc_id: &str, text: &str, cfg: &MinHashConfig) -> Result<ShingleSet> {
    Ok(ShingleSet::from_hashes(doc_id, shingle_hashes(text, cfg.shingle_kind, cfg.shingle_size)?))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit finalizer from MurmurHash3; a bijection on u64.
#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}

/// The per-position hash seeds. Position i hashes a shingle x as
/// `fmix64(x ^ seeds[i])`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSeeds {
    pub master: u64,
    pub seeds: Vec<u64>,
}

impl MinHashSeeds {
    pub fn from_master(master: u64) -> Self {
        let mut state = master;
        MinHashSeeds {
            master,
            seeds: (0..NUM_PERM).map(|_| splitmix64(&mut state)).collect(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        let bytes: Vec<u8> = self.seeds.iter().flat_map(|s| s.to_le_bytes()).collect();
        xxh3_64(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.len() != NUM_PERM {
            return Err(Error::Data(format!("expected {NUM_PERM} seeds, found {}", self.seeds.len())));
        }
        if *self != MinHashSeeds::from_master(self.master) {
            return Err(Error::Data("seed list does not derive from its master seed".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: MinHashSeeds = serde_json::from_str(&raw)?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: String,
    /// Band b, row r lives at index `b * ROWS + r`.
    pub values: Vec<u64>,
    pub seed_fingerprint: u64,
}

pub fn signature(shingles: &ShingleSet, seeds: &MinHashSeeds) -> Result<MinHashSignature> {
    Ok(MinHashSignature {
        doc_id: shingles.doc_id.clone(),
        values: signature_values(&shingles.shingles, seeds)?,
        seed_fingerprint: seeds.fingerprint(),
    })
}

/// Raw minima of a shingle collection (duplicates do not matter).
pub fn signature_values(shingles: &[u64], seeds: &MinHashSeeds) -> Result<Vec<u64>> {
    if shingles.is_empty() {
        return Err(Error::Data("cannot sign an empty shingle set".into()));
    }
    let mut mins = vec![u64::MAX; seeds.seeds.len()];
    for &x in shingles {
        for (m, &s) in mins.iter_mut().zip(&seeds.seeds) {
            let h = fmix64(x ^ s);
            if h < *m {
                *m = h;
            }
        }
    }
    Ok(mins)
}

/// Fraction of positions on which two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.seed_fingerprint != b.seed_fingerprint || a.values.len() != b.values.len() {
        return Err(Error::SeedMismatch {
            left: a.seed_fingerprint,
            right: b.seed_fingerprint,
        });
    }
    Ok(agreement(&a.values, &b.values))
}

pub(crate) fn agreement(a: &[u64], b: &[u64]) -> f64 {
    let eq = a.iter().zip(b).filter(|(x, y)| x == y).count();
    eq as f64 / a.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BandKey {
    pub band: u8,
    pub hash: u64,
}

fn band_hash(rows: &[u64]) -> u64 {
    let mut bytes = [0u8; 8 * ROWS];
    for (chunk, r) in bytes.chunks_exact_mut(8).zip(rows) {
        chunk.copy_from_slice(&r.to_le_bytes());
    }
    xxh3_64(&bytes[..8 * rows.len()])
}

pub fn lsh_buckets(sig: &MinHashSignature) -> Vec<BandKey> {
    band_keys(&sig.values)
}

pub(crate) fn band_keys(values: &[u64]) -> Vec<BandKey> {
    values
        .chunks(ROWS)
        .enumerate()
        .map(|(b, rows)| BandKey {
            band: b as u8,
            hash: band_hash(rows),
        })
        .collect()
}

/// Star edges between documents sharing a full band. Entries are grouped by
/// sorting (band, key, doc); equal keys are checked row by row so a 64-bit key
/// collision never produces an edge.
pub fn collision_edges(values: &[Vec<u64>], exec: Execution) -> Vec<(u32, u32)> {
    let keys = par::map(values, exec, |v| band_keys(v));
    let mut entries: Vec<(BandKey, u32)> = keys
        .iter()
        .enumerate()
        .flat_map(|(d, ks)| ks.iter().map(move |k| (*k, d as u32)))
        .collect();
    par::sort_unstable(&mut entries, exec);
    let rows = |d: u32, b: u8| &values[d as usize][b as usize * ROWS..(b as usize + 1) * ROWS];
    let mut edges = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let mut j = i + 1;
        while j < entries.len() && entries[j].0 == entries[i].0 {
            j += 1;
        }
        if j - i > 1 {
            let band = entries[i].0.band;
            let mut heads: Vec<u32> = Vec::new();
            for &(_, d) in &entries[i..j] {
                match heads.iter().find(|&&h| rows(h, band) == rows(d, band)) {
                    Some(&h) => edges.push((h, d)),
                    None => heads.push(d),
                }
            }
        }
        i = j;
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// One manifest line: a removed document and the survivor of its cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateEntry {
    pub removed_id: String,
    pub representative_id: String,
    /// Bands in which the removed document directly matches the representative.
    pub band_hits: u32,
}

#[derive(Debug, Clone, Default)]
pub struct DedupResult {
    /// Indices of surviving documents, ascending.
    pub survivors: Vec<usize>,
    pub manifest: Vec<DuplicateEntry>,
    pub clusters: Vec<DuplicateCluster>,
    pub signatures: Vec<MinHashSignature>,
}

fn check_ids(docs: &[FieldDoc]) -> Result<()> {
    let mut ids: Vec<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Data(format!("duplicate doc_id {}", w[0])));
    }
    Ok(())
}

/// Near-duplicate removal within one field partition.
pub fn dedupe_field(docs: &[FieldDoc], cfg: &MinHashConfig, seeds: &MinHashSeeds, exec: Execution) -> Result<DedupResult> {
    cfg.validate()?;
    seeds.validate()?;
    if let Some(d) = docs.iter().find(|d| d.field_kind != docs[0].field_kind) {
        return Err(Error::Data(format!(
            "dedupe_field expects one field kind, found {} and {}",
            docs[0].field_kind.as_str(),
            d.field_kind.as_str()
        )));
    }
    check_ids(docs)?;
    let values = par::map(docs, exec, |d| {
        shingle_hashes(&d.text, cfg.shingle_kind, cfg.shingle_size)
            .and_then(|s| signature_values(&s, seeds))
            .map_err(|e| Error::Data(format!("{}: {e}", d.doc_id)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let edges = collision_edges(&values, exec);
    let mut uf = UnionFind::new(docs.len());
    for &(a, b) in &edges {
        uf.union(a, b);
    }
    let rep_of = |g: &[u32]| -> u32 {
        let by_id = |i: &&u32| docs[**i as usize].doc_id.as_str();
        match cfg.representative {
            RepresentativeRule::SmallestId => *g.iter().min_by_key(by_id).expect("non-empty"),
            RepresentativeRule::Longest => *g
                .iter()
                .min_by(|&&a, &&b| {
                    let (da, db) = (&docs[a as usize], &docs[b as usize]);
                    db.text.len().cmp(&da.text.len()).then_with(|| da.doc_id.cmp(&db.doc_id))
                })
                .expect("non-empty"),
        }
    };

    let mut removed = vec![false; docs.len()];
    let mut manifest = Vec::new();
    let mut clusters = Vec::new();
    for g in uf.components() {
        let rep = rep_of(&g);
        let rep_keys = band_keys(&values[rep as usize]);
        let mut members: Vec<String> = g.iter().map(|&i| docs[i as usize].doc_id.clone()).collect();
        members.sort_unstable();
        for &m in g.iter().filter(|&&m| m != rep) {
            removed[m as usize] = true;
            let hits = band_keys(&values[m as usize])
                .iter()
                .zip(&rep_keys)
                .filter(|(a, b)| a == b)
                .count();
            manifest.push(DuplicateEntry {
                removed_id: docs[m as usize].doc_id.clone(),
                representative_id: docs[rep as usize].doc_id.clone(),
                band_hits: hits as u32,
            });
        }
        clusters.push(DuplicateCluster {
            member_ids: members,
            representative: docs[rep as usize].doc_id.clone(),
        });
    }
    clusters.sort_unstable_by(|a, b| a.representative.cmp(&b.representative));
    manifest.sort_unstable_by(|a, b| a.removed_id.cmp(&b.removed_id));
    let fp = seeds.fingerprint();
    Ok(DedupResult {
        survivors: (0..docs.len()).filter(|&i| !removed[i]).collect(),
        manifest,
        clusters,
        signatures: docs
            .iter()
            .zip(values)
            .map(|(d, v)| MinHashSignature {
                doc_id: d.doc_id.clone(),
                values: v,
                seed_fingerprint: fp,
            })
            .collect(),
    })
}

/// Runs [`dedupe_field`] separately on each field kind. Survivor indices
/// refer to `docs` and stay ascending.
pub fn dedupe_fields(docs: &[FieldDoc], cfg: &MinHashConfig, seeds: &MinHashSeeds, exec: Execution) -> Result<DedupResult> {
    let mut out = DedupResult::default();
    let mut sig_slots: Vec<Option<MinHashSignature>> = vec![None; docs.len()];
    for kind in FieldKind::ALL {
        let idx: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].field_kind == kind).collect();
        if idx.is_empty() {
            continue;
        }
        let part: Vec<FieldDoc> = idx.iter().map(|&i| docs[i].clone()).collect();
        let r = dedupe_field(&part, cfg, seeds, exec)?;
        out.survivors.extend(r.survivors.iter().map(|&s| idx[s]));
        out.manifest.extend(r.manifest);
        out.clusters.extend(r.clusters);
        for (k, s) in r.signatures.into_iter().enumerate() {
            sig_slots[idx[k]] = Some(s);
        }
    }
    out.survivors.sort_unstable();
    out.manifest.sort_unstable_by(|a, b| a.removed_id.cmp(&b.removed_id));
    out.clusters.sort_unstable_by(|a, b| a.representative.cmp(&b.representative));
    out.signatures = sig_slots.into_iter().map(|s| s.expect("every doc has a kind")).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds() -> MinHashSeeds {
        MinHashSeeds::from_master(7)
    }

    #[test]
    fn window_counts() {
        let six = shingle_hashes("a b c d e f", ShingleKind::Word, 5).unwrap();
        assert_eq!(six.len(), 2);
        assert_eq!(shingle_hashes("a b c d e", ShingleKind::Word, 5).unwrap().len(), 1);
        assert_eq!(shingle_hashes("a b", ShingleKind::Word, 5).unwrap().len(), 1);
        let rep = ShingleSet::from_hashes("x", shingle_hashes("a b a b a b a b a b", ShingleKind::Word, 5).unwrap());
        assert_eq!(rep.len(), 2);
        assert!(shingle_hashes("  ", ShingleKind::Word, 5).is_err());
    }

    #[test]
    fn signature_is_a_set_function() {
        let s = seeds();
        let a = signature_values(&[1, 2, 3], &s).unwrap();
        let b = signature_values(&[3, 2, 1, 1], &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), NUM_PERM);
        assert!(signature_values(&[], &s).is_err());
    }

    #[test]
    fn seed_mismatch_is_an_error() {
        let set = ShingleSet::from_hashes("d", vec![1, 2, 3]);
        let a = signature(&set, &MinHashSeeds::from_master(1)).unwrap();
        let b = signature(&set, &MinHashSeeds::from_master(2)).unwrap();
        assert!(matches!(estimate_jaccard(&a, &b), Err(Error::SeedMismatch { .. })));
        assert_eq!(estimate_jaccard(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn bands() {
        let s = seeds();
        let a = signature_values(&[10, 20, 30], &s).unwrap();
        assert_eq!(band_keys(&a), band_keys(&a));
        assert_eq!(band_keys(&a).len(), BANDS);
        let mut b = a.clone();
        for band in 0..BANDS {
            b[band * ROWS] ^= 1;
        }
        let edges = collision_edges(&[a.clone(), b, a], Execution::Sequential);
        assert_eq!(edges, vec![(0, 2)]);
    }

    #[test]
    fn exact_copies_collapse() {
        let docs: Vec<FieldDoc> = (0..4)
            .map(|i| FieldDoc::new(&format!("P{i}"), FieldKind::Abstract, "the same text appears in every one of these documents"))
            .collect();
        let r = dedupe_field(&docs, &MinHashConfig::default(), &seeds(), Execution::Sequential).unwrap();
        assert_eq!(r.survivors, vec![0]);
        assert_eq!(r.manifest.len(), 3);
        assert!(r.manifest.iter().all(|m| m.representative_id == "P0#abstract" && m.band_hits == BANDS as u32));
    }

    #[test]
    fn mixed_kinds_rejected() {
        let docs = vec![
            FieldDoc::new("P1", FieldKind::Abstract, "one two three"),
            FieldDoc::new("P1", FieldKind::Dwpi, "one two three"),
        ];
        assert!(dedupe_field(&docs, &MinHashConfig::default(), &seeds(), Execution::Sequential).is_err());
        let r = dedupe_fields(&docs, &MinHashConfig::default(), &seeds(), Execution::Sequential).unwrap();
        assert_eq!(r.survivors, vec![0, 1]);
    }

    #[test]
    fn longest_representative() {
        let cfg = MinHashConfig {
            representative: RepresentativeRule::Longest,
            ..MinHashConfig::default()
        };
        let docs = vec![
            FieldDoc::new("A", FieldKind::Abstract, "same words"),
            FieldDoc::new("B", FieldKind::Abstract, "Same  words"),
        ];
        let r = dedupe_field(&docs, &cfg, &seeds(), Execution::Sequential).unwrap();
        assert_eq!(r.survivors, vec![1]);
    }

    #[test]
    fn seeds_validate() {
        let mut s = seeds();
        assert!(s.validate().is_ok());
        s.seeds[3] ^= 1;
        assert!(s.validate().is_err());
    }
}
