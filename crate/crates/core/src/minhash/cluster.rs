//! Union-find connected components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns true when `a` and `b` were in different sets.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] || (self.size[ra as usize] == self.size[rb as usize] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    /// Components with more than one member, each sorted, ordered by smallest member.
    pub fn components(&mut self) -> Vec<Vec<u32>> {
        let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for x in 0..self.parent.len() as u32 {
            let r = self.find(x);
            groups.entry(r).or_default().push(x);
        }
        let mut out: Vec<Vec<u32>> = groups.into_values().filter(|g| g.len() > 1).collect();
        out.sort_unstable_by_key(|g| g[0]);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    /// Sorted member ids.
    pub member_ids: Vec<String>,
    pub representative: String,
}

/// Connected components of a collision stream. Representatives are the
/// lexicographically smallest member; output is sorted by representative.
pub fn cluster<S: AsRef<str>>(collisions: impl IntoIterator<Item = (S, S)>) -> Vec<DuplicateCluster> {
    let pairs: Vec<(S, S)> = collisions.into_iter().collect();
    let mut ids: BTreeMap<&str, u32> = BTreeMap::new();
    for (a, b) in &pairs {
        ids.insert(a.as_ref(), 0);
        ids.insert(b.as_ref(), 0);
    }
    let names: Vec<&str> = ids.keys().copied().collect();
    for (i, v) in ids.values_mut().enumerate() {
        *v = i as u32;
    }
    let mut uf = UnionFind::new(names.len());
    for (a, b) in &pairs {
        uf.union(ids[a.as_ref()], ids[b.as_ref()]);
    }
    // indices follow lexicographic order, so the smallest index is the smallest id
    uf.components()
        .into_iter()
        .map(|g| DuplicateCluster {
            representative: names[g[0] as usize].to_string(),
            member_ids: g.iter().map(|&i| names[i as usize].to_string()).collect(),
        })
        .collect()
}
