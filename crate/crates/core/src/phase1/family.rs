//! Family-level deduplication: one publication per patent family.

use std::cmp::Reverse;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::PatentRecord;
use crate::error::Result;
use crate::extsort;

/// Anything that can be grouped into patent families.
pub trait FamilyMember {
    fn pub_no(&self) -> &str;
    fn family_id(&self) -> Option<&str>;
    fn pub_date(&self) -> NaiveDate;
}

impl FamilyMember for PatentRecord {
    fn pub_no(&self) -> &str {
        &self.pub_no
    }
    fn family_id(&self) -> Option<&str> {
        self.family_id.as_deref()
    }
    fn pub_date(&self) -> NaiveDate {
        self.pub_date
    }
}

/// Grouping key. Records without a family id form singleton families keyed
/// by their own publication number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyKey {
    Family(String),
    Singleton(String),
}

impl FamilyKey {
    pub fn of<T: FamilyMember>(r: &T) -> FamilyKey {
        match r.family_id() {
            Some(f) => FamilyKey::Family(f.to_string()),
            None => FamilyKey::Singleton(r.pub_no().to_string()),
        }
    }
}

/// Members of one family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyGroup {
    pub family_id: String,
    pub members: Vec<(String, NaiveDate)>,
}

impl FamilyGroup {
    /// Most recent publication; equal dates go to the greatest `pub_no`.
    pub fn representative(&self) -> Option<&str> {
        self.members
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
            .map(|(p, _)| p.as_str())
    }
}

type SortKey = (FamilyKey, Reverse<NaiveDate>, Reverse<String>);

fn sort_key<T: FamilyMember>(r: &T) -> SortKey {
    (FamilyKey::of(r), Reverse(r.pub_date()), Reverse(r.pub_no().to_string()))
}

/// Keeps exactly one record per family: the latest `pub_date`, ties broken by
/// the lexicographically greatest `pub_no`.
///
/// Runs as an external sort by family followed by a group scan, so memory is
/// bounded by `buffer` records. Survivors come out ordered by family key.
pub fn family_dedupe<T, I>(records: I, buffer: usize) -> Result<FamilyDedup<T>>
where
    T: FamilyMember + Serialize + DeserializeOwned + 'static,
    I: IntoIterator<Item = Result<T>>,
{
    let sorted = extsort::sort_by_key(records, buffer, sort_key::<T> as fn(&T) -> SortKey)?;
    Ok(FamilyDedup {
        sorted: Box::new(sorted),
        last: None,
        dropped: 0,
        singletons: 0,
    })
}

pub struct FamilyDedup<T> {
    sorted: Box<dyn Iterator<Item = Result<T>>>,
    last: Option<FamilyKey>,
    dropped: u64,
    singletons: u64,
}

impl<T> FamilyDedup<T> {
    /// Records discarded so far as older family members.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Records seen without a family id.
    pub fn missing_family(&self) -> u64 {
        self.singletons
    }
}

impl<T: FamilyMember> Iterator for FamilyDedup<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        loop {
            let r = match self.sorted.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            let key = FamilyKey::of(&r);
            if self.last.as_ref() == Some(&key) {
                self.dropped += 1;
                continue;
            }
            if matches!(key, FamilyKey::Singleton(_)) {
                log::debug!("record {} has no family_id; treated as its own family", r.pub_no());
                self.singletons += 1;
            }
            self.last = Some(key);
            return Some(Ok(r));
        }
    }
}
