//! Bounded-memory external sort.
//!
//! Items are buffered up to a fixed count, sorted, and spilled as JSONL runs
//! into a temporary directory; runs are then k-way merged. Inputs that fit in
//! one buffer never touch disk.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::TempDir;

use crate::error::{Error, Result};

/// Environment variable naming the spill directory.
pub const SPILL_DIR_ENV: &str = "PATCORP_TMPDIR";

pub fn spill_dir() -> PathBuf {
    std::env::var_os(SPILL_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

/// Sorts `items` by `key` holding at most `buffer` items in memory at a time.
/// Keys must be a total order over the items for the output to be deterministic.
pub fn sort_by_key<T, K, I, F>(items: I, buffer: usize, key: F) -> Result<Sorted<T, K, F>>
where
    T: Serialize + DeserializeOwned,
    K: Ord,
    I: IntoIterator<Item = Result<T>>,
    F: Fn(&T) -> K,
{
    let buffer = buffer.max(1);
    let mut runs: Vec<PathBuf> = Vec::new();
    let mut buf: Vec<T> = Vec::new();
    let mut dir: Option<TempDir> = None;

    for item in items {
        buf.push(item?);
        if buf.len() >= buffer {
            if dir.is_none() {
                dir = Some(make_dir()?);
            }
            let d = dir.as_ref().expect("just created");
            runs.push(spill(d, runs.len(), &mut buf, &key)?);
        }
    }

    if runs.is_empty() {
        buf.sort_by_key(|t| key(t));
        return Ok(Sorted {
            inner: Inner::Memory(buf.into_iter()),
            key,
            _dir: None,
        });
    }
    if !buf.is_empty() {
        let d = dir.as_ref().expect("spill dir exists once a run was written");
        runs.push(spill(d, runs.len(), &mut buf, &key)?);
    }

    let mut readers = Vec::with_capacity(runs.len());
    for p in &runs {
        let f = File::open(p).map_err(|e| Error::io(p, e))?;
        readers.push(BufReader::new(f).lines());
    }
    let mut merge = Merge {
        readers,
        heap: BinaryHeap::new(),
        pending: Vec::new(),
    };
    for i in 0..merge.readers.len() {
        merge.pending.push(None);
        merge.refill(i, &key)?;
    }
    Ok(Sorted {
        inner: Inner::Merge(merge),
        key,
        _dir: dir,
    })
}

fn make_dir() -> Result<TempDir> {
    let base = spill_dir();
    std::fs::create_dir_all(&base).map_err(|e| Error::io(&base, e))?;
    tempfile::Builder::new()
        .prefix("patcorp-sort-")
        .tempdir_in(&base)
        .map_err(|e| Error::io(&base, e))
}

fn spill<T: Serialize, K: Ord, F: Fn(&T) -> K>(
    dir: &TempDir,
    idx: usize,
    buf: &mut Vec<T>,
    key: &F,
) -> Result<PathBuf> {
    buf.sort_by_key(|t| key(t));
    let path = dir.path().join(format!("run-{idx:05}.jsonl"));
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(f);
    for t in buf.drain(..) {
        serde_json::to_writer(&mut w, &t)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

struct Merge<T, K> {
    readers: Vec<Lines<BufReader<File>>>,
    // (key, run) heads; run index breaks ties so equal keys come out in run order.
    heap: BinaryHeap<Reverse<(K, usize)>>,
    pending: Vec<Option<T>>,
}

impl<T: DeserializeOwned, K: Ord> Merge<T, K> {
    fn refill<F: Fn(&T) -> K>(&mut self, run: usize, key: &F) -> Result<()> {
        if let Some(line) = self.readers[run].next() {
            let t: T = serde_json::from_str(&line?)?;
            self.heap.push(Reverse((key(&t), run)));
            self.pending[run] = Some(t);
        }
        Ok(())
    }
}

enum Inner<T, K> {
    Memory(std::vec::IntoIter<T>),
    Merge(Merge<T, K>),
}

/// Iterator over sorted items.
pub struct Sorted<T, K, F> {
    inner: Inner<T, K>,
    key: F,
    _dir: Option<TempDir>,
}

impl<T, K, F> Sorted<T, K, F> {
    pub fn spilled(&self) -> bool {
        matches!(self.inner, Inner::Merge(_))
    }
}

impl<T: DeserializeOwned, K: Ord, F: Fn(&T) -> K> Iterator for Sorted<T, K, F> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        match &mut self.inner {
            Inner::Memory(it) => it.next().map(Ok),
            Inner::Merge(m) => {
                let Reverse((_, run)) = m.heap.pop()?;
                let item = m.pending[run].take().expect("heap entry has a pending item");
                if let Err(e) = m.refill(run, &self.key) {
                    return Some(Err(e));
                }
                Some(Ok(item))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(v: &[i64], buffer: usize) -> (Vec<i64>, bool) {
        let s = sort_by_key(v.iter().map(|&x| Ok(x)), buffer, |x| *x).unwrap();
        let spilled = s.spilled();
        (s.map(|r| r.unwrap()).collect(), spilled)
    }

    #[test]
    fn spills_and_merges() {
        let v: Vec<i64> = (0..1000).map(|i| (i * 7919) % 1009 - 500).collect();
        let (out, spilled) = run(&v, 64);
        assert!(spilled);
        let mut expect = v.clone();
        expect.sort();
        assert_eq!(out, expect);
    }

    #[test]
    fn in_memory_when_small() {
        let (out, spilled) = run(&[3, 1, 2], 10);
        assert!(!spilled);
        assert_eq!(out, vec![1, 2, 3]);
        assert!(run(&[], 1).0.is_empty());
    }

    proptest! {
        #[test]
        fn matches_std_sort(v in proptest::collection::vec(-50i64..50, 0..200), buf in 1usize..40) {
            let mut expect = v.clone();
            expect.sort();
            prop_assert_eq!(run(&v, buf).0, expect);
        }
    }
}
