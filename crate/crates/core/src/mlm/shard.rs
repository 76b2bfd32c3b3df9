//! Binary example shards with a JSON sidecar.
//!
//! Little-endian layout: magic `PCMLMEX\0`, u32 version, u32 max_len,
//! u64 count, then per example a u32 length followed by that many u32 input
//! ids and that many u32 labels ([`IGNORE`] for unsupervised positions).

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MaskStrategy, MaskedExample, MlmConfig, IGNORE};
use crate::bpe::{CLS, MASK, PAD, SEP, UNK};
use crate::corpus::{sha256_file, AtomicFile};
use crate::error::{Error, Result};

pub const SHARD_MAGIC: &[u8; 8] = b"PCMLMEX\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardFile {
    pub name: String,
    pub examples: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSidecar {
    pub version: u32,
    pub max_len: u32,
    pub ignore_label: u32,
    pub special_ids: SpecialIds,
    pub mask_rate: f64,
    pub strategy: MaskStrategy,
    pub seed: u64,
    pub examples: u64,
    pub supervised_positions: u64,
    pub maskable_positions: u64,
    pub files: Vec<ShardFile>,
}

impl ShardSidecar {
    /// An empty sidecar carrying the masking settings of `cfg`.
    pub fn for_config(cfg: &MlmConfig) -> Self {
        ShardSidecar {
            version: VERSION,
            max_len: cfg.max_len as u32,
            ignore_label: IGNORE,
            special_ids: SpecialIds::default(),
            mask_rate: cfg.mask_rate,
            strategy: cfg.strategy,
            seed: cfg.seed,
            examples: 0,
            supervised_positions: 0,
            maskable_positions: 0,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialIds {
    pub unk: u32,
    pub pad: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl Default for SpecialIds {
    fn default() -> Self {
        SpecialIds {
            unk: UNK,
            pad: PAD,
            cls: CLS,
            sep: SEP,
            mask: MASK,
        }
    }
}

fn write_one(path: &Path, max_len: u32, examples: &[MaskedExample]) -> Result<()> {
    let mut f = AtomicFile::create(path)?;
    let io = |e| Error::io(path, e);
    let mut buf = Vec::with_capacity(24);
    buf.extend_from_slice(SHARD_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&max_len.to_le_bytes());
    buf.extend_from_slice(&(examples.len() as u64).to_le_bytes());
    f.write_all(&buf).map_err(io)?;
    for ex in examples {
        buf.clear();
        buf.extend_from_slice(&(ex.input_ids.len() as u32).to_le_bytes());
        for v in ex.input_ids.iter().chain(&ex.labels) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&buf).map_err(io)?;
    }
    f.commit()
}

/// Writes `examples` into `<dir>/<stem>-NNNNN.bin` files of at most
/// `per_file` examples and the sidecar `<dir>/<stem>.json`.
/// `template` supplies the masking settings recorded in the sidecar.
pub fn write_shards(dir: &Path, stem: &str, examples: &[MaskedExample], per_file: usize, template: &ShardSidecar) -> Result<(PathBuf, ShardSidecar)> {
    let per_file = per_file.max(1);
    let mut files = Vec::new();
    for (i, chunk) in examples.chunks(per_file).enumerate() {
        let name = format!("{stem}-{i:05}.bin");
        let path = dir.join(&name);
        write_one(&path, template.max_len, chunk)?;
        files.push(ShardFile {
            name,
            examples: chunk.len() as u64,
            sha256: sha256_file(&path)?,
        });
    }
    let sidecar = ShardSidecar {
        examples: examples.len() as u64,
        supervised_positions: examples.iter().map(|e| e.supervised() as u64).sum(),
        maskable_positions: examples
            .iter()
            .map(|e| e.input_ids.iter().zip(&e.labels).filter(|(&i, &l)| l != IGNORE || i as usize >= 5).count() as u64)
            .sum(),
        files,
        ..template.clone()
    };
    let path = dir.join(format!("{stem}.json"));
    let mut f = AtomicFile::create(&path)?;
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    f.write_all(json.as_bytes()).map_err(|e| Error::io(&path, e))?;
    f.commit()?;
    Ok((path, sidecar))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads one shard; returns its max_len and examples.
pub fn read_shard(path: &Path) -> Result<(u32, Vec<MaskedExample>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != SHARD_MAGIC {
        return Err(Error::Data(format!("{} is not an example shard", path.display())));
    }
    let version = read_u32(&mut r).map_err(io)?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported shard version {version}")));
    }
    let max_len = read_u32(&mut r).map_err(io)?;
    let mut c = [0u8; 8];
    r.read_exact(&mut c).map_err(io)?;
    let count = u64::from_le_bytes(c);
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let len = read_u32(&mut r).map_err(io)? as usize;
        if len > max_len as usize {
            return Err(Error::Data(format!("example of length {len} exceeds max_len {max_len}")));
        }
        let mut vals = Vec::with_capacity(2 * len);
        for _ in 0..2 * len {
            vals.push(read_u32(&mut r).map_err(io)?);
        }
        let labels = vals.split_off(len);
        let seq_len = vals.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1) as u32;
        out.push(MaskedExample {
            input_ids: vals,
            labels,
            seq_len,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Data(format!("trailing bytes in {}", path.display())));
    }
    Ok((max_len, out))
}
