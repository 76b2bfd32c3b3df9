//! Binary signature files.
//!
//! Little-endian layout: magic `PCMHSIG\0`, u32 version, u64 master seed,
//! u32 seed count, the seeds as u64, then per document a u32 id length, the
//! id bytes and one u64 per seed.

use std::fs::File;
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::Path;

use super::{MinHashSeeds, MinHashSignature};
use crate::corpus::AtomicFile;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PCMHSIG\0";
const VERSION: u32 = 1;

pub fn write_signatures(path: &Path, seeds: &MinHashSeeds, sigs: &[MinHashSignature]) -> Result<()> {
    let fp = seeds.fingerprint();
    let mut f = AtomicFile::create(path)?;
    let io = |e| Error::io(path, e);
    f.write_all(MAGIC).map_err(io)?;
    f.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    f.write_all(&seeds.master.to_le_bytes()).map_err(io)?;
    f.write_all(&(seeds.seeds.len() as u32).to_le_bytes()).map_err(io)?;
    for s in &seeds.seeds {
        f.write_all(&s.to_le_bytes()).map_err(io)?;
    }
    for sig in sigs {
        if sig.seed_fingerprint != fp || sig.values.len() != seeds.seeds.len() {
            return Err(Error::SeedMismatch {
                left: fp,
                right: sig.seed_fingerprint,
            });
        }
        f.write_all(&(sig.doc_id.len() as u32).to_le_bytes()).map_err(io)?;
        f.write_all(sig.doc_id.as_bytes()).map_err(io)?;
        for v in &sig.values {
            f.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    f.commit()
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_signatures(path: &Path) -> Result<(MinHashSeeds, Vec<MinHashSignature>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{} is not a signature file", path.display())));
    }
    let version = read_u32(&mut r).map_err(io)?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported signature file version {version}")));
    }
    let master = read_u64(&mut r).map_err(io)?;
    let n = read_u32(&mut r).map_err(io)? as usize;
    let seeds = MinHashSeeds {
        master,
        seeds: (0..n).map(|_| read_u64(&mut r)).collect::<std::io::Result<_>>().map_err(io)?,
    };
    let fp = seeds.fingerprint();
    let mut sigs = Vec::new();
    loop {
        let len = match read_u32(&mut r) {
            Ok(l) => l as usize,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(io(e)),
        };
        let mut id = vec![0u8; len];
        r.read_exact(&mut id).map_err(io)?;
        let doc_id = String::from_utf8(id).map_err(|_| Error::Data("signature id is not UTF-8".into()))?;
        let values = (0..n).map(|_| read_u64(&mut r)).collect::<std::io::Result<_>>().map_err(io)?;
        sigs.push(MinHashSignature {
            doc_id,
            values,
            seed_fingerprint: fp,
        });
    }
    Ok((seeds, sigs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minhash::{signature, ShingleSet};

    #[test]
    fn round_trip() {
        let seeds = MinHashSeeds::from_master(99);
        let sigs: Vec<MinHashSignature> = (0..3)
            .map(|i| signature(&ShingleSet::from_hashes(format!("doc{i}"), vec![i, i + 1]), &seeds).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sigs.bin");
        write_signatures(&p, &seeds, &sigs).unwrap();
        let (s2, back) = read_signatures(&p).unwrap();
        assert_eq!(s2, seeds);
        assert_eq!(back, sigs);
        let len = std::fs::metadata(&p).unwrap().len();
        assert_eq!(len, 8 + 4 + 8 + 4 + 112 * 8 + 3 * (4 + 4 + 112 * 8));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let seeds = MinHashSeeds::from_master(1);
        let sig = signature(&ShingleSet::from_hashes("d", vec![5]), &seeds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_signatures(&p, &seeds, &[sig]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_signatures(&p).is_err());
    }
}
