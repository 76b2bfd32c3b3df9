//! Streaming JSONL ingestion and emission.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use super::PatentRecord;
use crate::error::{Error, Result};

/// Maps record attributes to the JSON keys used by an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub pub_no: String,
    pub family_id: String,
    pub pub_date: String,
    #[serde(rename = "abstract")]
    pub abstract_key: String,
    pub claims: String,
    pub dwpi: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            pub_no: "pub_no".into(),
            family_id: "family_id".into(),
            pub_date: "pub_date".into(),
            abstract_key: "abstract".into(),
            claims: "claims".into(),
            dwpi: "dwpi".into(),
        }
    }
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_no: u64,
    pub reason: String,
}

/// Streams [`PatentRecord`]s from a JSONL file in file order.
///
/// Malformed lines, unparseable dates and repeated publication numbers come
/// out as `Err(Reject)` items; they never end the stream. Blank lines are skipped.
pub struct RecordReader<R> {
    lines: io::Lines<R>,
    line_no: u64,
    map: FieldMap,
    seen: HashSet<String>,
}

pub fn read_records(path: &Path, map: &FieldMap) -> Result<RecordReader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(RecordReader::new(BufReader::new(f), map.clone()))
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R, map: FieldMap) -> Self {
        RecordReader {
            lines: reader.lines(),
            line_no: 0,
            map,
            seen: HashSet::new(),
        }
    }

    fn parse(&mut self, line: &str) -> std::result::Result<PatentRecord, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| format!("malformed json: {e}"))?;
        let obj = v.as_object().ok_or("line is not a json object")?;
        let m = &self.map;

        let pub_no = match obj.get(&m.pub_no) {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(format!("missing or empty `{}`", m.pub_no)),
        };
        let family_id = match obj.get(&m.family_id) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
            Some(Value::Number(n)) => Some(n.to_string()),
            Some(Value::Null) | None => None,
            Some(Value::String(_)) => None,
            Some(_) => return Err(format!("`{}` is not a string", m.family_id)),
        };
        let pub_date = match obj.get(&m.pub_date) {
            Some(Value::String(s)) => {
                parse_date(s).ok_or_else(|| format!("unparseable date {s:?}"))?
            }
            Some(Value::Number(n)) => parse_date(&n.to_string())
                .ok_or_else(|| format!("unparseable date {n}"))?,
            _ => return Err(format!("missing `{}`", m.pub_date)),
        };
        let abstract_raw = opt_text(obj.get(&m.abstract_key), &m.abstract_key)?;
        let dwpi_raw = opt_text(obj.get(&m.dwpi), &m.dwpi)?;
        let claims_raw = match obj.get(&m.claims) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => items
                .iter()
                .map(|c| match c {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(format!("`{}` contains a non-string entry", m.claims)),
                })
                .collect::<std::result::Result<_, _>>()?,
            Some(_) => return Err(format!("`{}` is not an array", m.claims)),
        };

        if !self.seen.insert(pub_no.clone()) {
            return Err(format!("duplicate pub_no {pub_no:?}"));
        }
        Ok(PatentRecord {
            pub_no,
            family_id,
            pub_date,
            abstract_raw,
            claims_raw,
            dwpi_raw,
        })
    }
}

fn opt_text(v: Option<&Value>, key: &str) -> std::result::Result<Option<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("`{key}` is not a string")),
    }
}

/// Parses ISO-8601 dates, compact `YYYYMMDD`, and date-times (normalized to
/// the UTC calendar date; time of day is discarded).
pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y%m%d") {
            return Some(d);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    None
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<std::result::Result<PatentRecord, Reject>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::Stream(e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            return Some(Ok(self
                .parse(&line)
                .map_err(|reason| Reject { line_no, reason })));
        }
    }
}

/// Reads a JSONL file of `T`. Unlike [`read_records`], any malformed line is fatal.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlIter<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(JsonlIter {
        lines: BufReader::new(f).lines(),
        path: path.to_path_buf(),
        line_no: 0,
        _t: PhantomData,
    })
}

pub struct JsonlIter<T> {
    lines: io::Lines<BufReader<File>>,
    path: PathBuf,
    line_no: u64,
    _t: PhantomData<T>,
}

impl<T: DeserializeOwned> Iterator for JsonlIter<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&line).map_err(|e| {
                Error::Data(format!("{}:{}: {e}", self.path.display(), self.line_no))
            }));
        }
    }
}

/// Line-delimited JSON writer.
pub struct JsonlWriter<W: Write> {
    out: W,
    count: u64,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter { out, count: 0 }
    }

    pub fn write<T: Serialize + ?Sized>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item)?;
        self.out.write_all(b"\n")?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// A file written under a temporary name and renamed into place on
/// [`AtomicFile::commit`]; dropping it uncommitted leaves the target untouched.
pub struct AtomicFile {
    tmp: BufWriter<NamedTempFile>,
    target: PathBuf,
}

impl AtomicFile {
    pub fn create(target: &Path) -> Result<Self> {
        let dir = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(AtomicFile {
            tmp: BufWriter::new(tmp),
            target: target.to_path_buf(),
        })
    }

    pub fn commit(self) -> Result<()> {
        let tmp = self
            .tmp
            .into_inner()
            .map_err(|e| Error::io(&self.target, e.into_error()))?;
        tmp.as_file()
            .sync_all()
            .map_err(|e| Error::io(&self.target, e))?;
        tmp.persist(&self.target)
            .map_err(|e| Error::io(&self.target, e.error))?;
        Ok(())
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tmp.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.tmp.flush()
    }
}

/// Writes every item to `path` atomically; returns the number of lines.
pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<u64>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = JsonlWriter::new(AtomicFile::create(path)?);
    for it in items {
        w.write(it)?;
    }
    let n = w.count();
    w.into_inner()?.commit()?;
    Ok(n)
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lowercase hex SHA-256 of a file, streamed.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read_str(s: &str) -> (Vec<PatentRecord>, Vec<Reject>) {
        let mut ok = Vec::new();
        let mut bad = Vec::new();
        for item in RecordReader::new(Cursor::new(s.to_string()), FieldMap::default()) {
            match item.unwrap() {
                Ok(r) => ok.push(r),
                Err(r) => bad.push(r),
            }
        }
        (ok, bad)
    }

    const GOOD: &str = r#"{"pub_no":"A","family_id":"F1","pub_date":"2020-01-01","abstract":"x","claims":["1. A lens."],"dwpi":null}
{"pub_no":"B","family_id":"F1","pub_date":"2021-05-05","abstract":"y","claims":[]}
{"pub_no":"C","pub_date":"2019-03-04T22:30:00-05:00","claims":["c"]}
"#;

    #[test]
    fn valid_file() {
        let (ok, bad) = read_str(GOOD);
        assert_eq!(ok.len(), 3);
        assert!(bad.is_empty());
        assert_eq!(ok[0].pub_no, "A");
        assert_eq!(ok[2].family_id, None);
        // 22:30 at UTC-5 is already the next day in UTC.
        assert_eq!(ok[2].pub_date, NaiveDate::from_ymd_opt(2019, 3, 5).unwrap());
    }

    #[test]
    fn truncated_line_is_rejected() {
        let s = r#"{"pub_no":"A","pub_date":"2020-01-01"}
{"pub_no":"B","pub_da
{"pub_no":"C","pub_date":"2020-01-01"}
"#;
        let (ok, bad) = read_str(s);
        assert_eq!(ok.len(), 2);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].line_no, 2);
        assert!(bad[0].reason.contains("malformed"));
    }

    #[test]
    fn empty_input() {
        let (ok, bad) = read_str("");
        assert!(ok.is_empty() && bad.is_empty());
    }

    #[test]
    fn bad_dates_and_duplicates_quarantined() {
        let s = r#"{"pub_no":"A","pub_date":"2020-13-45"}
{"pub_no":"B","pub_date":"20200101"}
{"pub_no":"B","pub_date":"2020-01-02"}
{"pub_no":"","pub_date":"2020-01-02"}
"#;
        let (ok, bad) = read_str(s);
        assert_eq!(ok.len(), 1);
        assert_eq!(bad.iter().map(|r| r.line_no).collect::<Vec<_>>(), vec![1, 3, 4]);
        assert!(bad[0].reason.contains("date"));
        assert!(bad[1].reason.contains("duplicate"));
    }

    #[test]
    fn custom_field_map() {
        let map = FieldMap {
            pub_no: "id".into(),
            pub_date: "date".into(),
            ..FieldMap::default()
        };
        let rows: Vec<_> = RecordReader::new(Cursor::new(r#"{"id":"Z","date":"2001-02-03"}"#), map)
            .map(|r| r.unwrap().unwrap())
            .collect();
        assert_eq!(rows[0].pub_no, "Z");
    }

    #[test]
    fn atomic_file_commits_only_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.jsonl");
        {
            let mut f = AtomicFile::create(&p).unwrap();
            f.write_all(b"x").unwrap();
        }
        assert!(!p.exists());
        write_jsonl(&p, &[1u32, 2, 3]).unwrap();
        let back: Vec<u32> = read_jsonl(&p).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(back, vec![1, 2, 3]);
    }
}
