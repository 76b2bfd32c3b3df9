//! Masked-LM example generation and training-schedule utilities.

mod schedule;
mod shard;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bpe::{self, BpeVocab, CLS, MASK, PAD, SEP, SPECIALS};
use crate::corpus::{CleanRecord, FieldKind};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use schedule::{lr_at_step, preset, LrSchedule, Preset, ScheduleShape, PRESET_NAMES};
pub use shard::{read_shard, write_shards, ShardFile, ShardSidecar, SpecialIds, SHARD_MAGIC};

/// Label of positions that carry no training signal. Never a valid token id.
pub const IGNORE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    /// 80% [MASK], 10% random token, 10% unchanged.
    Bert,
    /// Every selected position becomes [MASK].
    AllMask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub input_ids: Vec<u32>,
    pub labels: Vec<u32>,
    /// Positions before padding.
    pub seq_len: u32,
}

impl MaskedExample {
    pub fn supervised(&self) -> usize {
        self.labels.iter().filter(|&&l| l != IGNORE).count()
    }
}

fn is_special(id: u32) -> bool {
    (id as usize) < SPECIALS.len()
}

/// Selects each non-special position with probability `mask_rate` and
/// corrupts it according to `strategy`. Random replacements are drawn
/// uniformly from the non-special ids below `vocab_size`.
pub fn mask_sequence(ids: &[u32], mask_rate: f64, vocab_size: u32, seed: u64, strategy: MaskStrategy) -> Result<MaskedExample> {
    if !(0.0..=1.0).contains(&mask_rate) {
        return Err(Error::config("mlm.mask_rate", format!("{mask_rate} is outside [0, 1]")));
    }
    if (vocab_size as usize) <= SPECIALS.len() {
        return Err(Error::config("mlm.vocab_size", "vocabulary has no regular tokens"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut input_ids = ids.to_vec();
    let mut labels = vec![IGNORE; ids.len()];
    for (i, &id) in ids.iter().enumerate() {
        if is_special(id) || rng.random::<f64>() >= mask_rate {
            continue;
        }
        labels[i] = id;
        input_ids[i] = match strategy {
            MaskStrategy::AllMask => MASK,
            MaskStrategy::Bert => {
                let u = rng.random::<f64>();
                if u < 0.8 {
                    MASK
                } else if u < 0.9 {
                    rng.random_range(SPECIALS.len() as u32..vocab_size)
                } else {
                    id
                }
            }
        };
    }
    let seq_len = ids.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1) as u32;
    Ok(MaskedExample {
        input_ids,
        labels,
        seq_len,
    })
}

/// `[CLS] body [SEP]` with the body cut to `max_len - 2`, optionally padded
/// with [PAD] to exactly `max_len`.
pub fn pack_or_truncate(body: &[u32], max_len: usize, pad: bool) -> Result<Vec<u32>> {
    if max_len < 3 {
        return Err(Error::config("mlm.max_len", format!("{max_len} leaves no room for [CLS] body [SEP]")));
    }
    let take = body.len().min(max_len - 2);
    let mut out = Vec::with_capacity(if pad { max_len } else { take + 2 });
    out.push(CLS);
    out.extend_from_slice(&body[..take]);
    out.push(SEP);
    if pad {
        out.resize(max_len, PAD);
    }
    Ok(out)
}

/// Seed of the example at `index`; independent of how examples are sharded.
pub fn example_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlmConfig {
    pub mask_rate: f64,
    pub strategy: MaskStrategy,
    pub max_len: usize,
    pub seed: u64,
    /// Pad every example to `max_len`.
    pub pad: bool,
    /// One sequence per record with fields joined by [SEP] instead of one per field.
    pub concat_fields: bool,
    pub examples_per_file: usize,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            mask_rate: 0.30,
            strategy: MaskStrategy::Bert,
            max_len: 1024,
            seed: 17,
            pad: true,
            concat_fields: false,
            examples_per_file: 10_000,
        }
    }
}

impl MlmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return Err(Error::config("mlm.mask_rate", "must be in (0, 1)"));
        }
        if !(3..=8192).contains(&self.max_len) {
            return Err(Error::config("mlm.max_len", "must be in [3, 8192]"));
        }
        if self.examples_per_file == 0 {
            return Err(Error::config("mlm.examples_per_file", "must be positive"));
        }
        Ok(())
    }
}

/// Token bodies of a record: one per non-empty field, or one joined by [SEP].
pub fn record_bodies(rec: &CleanRecord, vocab: &BpeVocab, concat: bool) -> Vec<Vec<u32>> {
    let fields: Vec<Vec<u32>> = FieldKind::ALL
        .iter()
        .filter_map(|&k| rec.field(k))
        .map(|t| bpe::encode(t, vocab).ids)
        .filter(|ids| !ids.is_empty())
        .collect();
    if !concat || fields.is_empty() {
        return fields;
    }
    let mut joined = Vec::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            joined.push(SEP);
        }
        joined.extend(f);
    }
    vec![joined]
}

/// Packs and masks bodies; example `i` uses [`example_seed`]`(cfg.seed, i)`.
pub fn build_examples(bodies: &[Vec<u32>], vocab_size: u32, cfg: &MlmConfig, shards: usize, exec: Execution) -> Result<Vec<MaskedExample>> {
    cfg.validate()?;
    let indexed: Vec<(usize, &Vec<u32>)> = bodies.iter().enumerate().collect();
    let parts = par::map_shards(&indexed, shards, exec, |chunk| {
        chunk
            .iter()
            .map(|&(i, body)| {
                let ids = pack_or_truncate(body, cfg.max_len, cfg.pad)?;
                mask_sequence(&ids, cfg.mask_rate, vocab_size, example_seed(cfg.seed, i as u64), cfg.strategy)
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(bodies.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
