//! Server identifiers and bitset-backed node sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node id (exclusive) a [`NodeSet`] can hold.
pub const MAX_NODE_ID: u32 = 64;

/// Opaque server identifier. Ordered and hashable; iteration order over sets
/// always follows this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub fn new(id: u32) -> Result<Self> {
        if id >= MAX_NODE_ID {
            return Err(Error::Domain(format!(
                "node id {id} out of range (must be < {MAX_NODE_ID})"
            )));
        }
        Ok(NodeId(id))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    fn bit(self) -> u64 {
        1u64 << self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite set of [`NodeId`]s stored as a 64-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn new() -> Self {
        NodeSet(0)
    }

    pub fn from_bits(bits: u64) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(id: NodeId) -> Self {
        NodeSet(id.bit())
    }

    /// Builds a set from raw ids, failing on ids outside the supported range.
    pub fn try_from_ids<I: IntoIterator<Item = u32>>(ids: I) -> Result<Self> {
        let mut set = NodeSet::new();
        for id in ids {
            set.insert(NodeId::new(id)?);
        }
        Ok(set)
    }

    /// Panicking convenience for literals in tests and fixtures.
    pub fn of(ids: &[u32]) -> Self {
        Self::try_from_ids(ids.iter().copied()).expect("node id out of range")
    }

    pub fn insert(&mut self, id: NodeId) -> bool {
        let fresh = self.0 & id.bit() == 0;
        self.0 |= id.bit();
        fresh
    }

    pub fn remove(&mut self, id: NodeId) {
        self.0 &= !id.bit();
    }

    pub fn contains(self, id: NodeId) -> bool {
        self.0 & id.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: NodeSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> Iter {
        Iter(self.0)
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<NodeId> {
        self.iter().next()
    }

    /// All subsets of `self`, including the empty set and `self`, in
    /// increasing order of their bit patterns.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, id) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

impl PartialOrd for NodeSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by cardinality first, then lexicographically by members, so that
/// printed families read `{1,2}` before `{1,2,3}` before `{1,3,4}`.
impl Ord for NodeSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        let mut set = NodeSet::new();
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl IntoIterator for NodeSet {
    type Item = NodeId;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl Serialize for NodeSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<u32>::deserialize(deserializer)?;
        NodeSet::try_from_ids(ids).map_err(serde::de::Error::custom)
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.0 == 0 {
            return None;
        }
        let tz = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(NodeId(tz))
    }
}

pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = NodeSet;

    fn next(&mut self) -> Option<NodeSet> {
        let cur = self.next?;
        // Standard submask enumeration in increasing order.
        self.next = if cur == self.mask {
            None
        } else {
            Some(((cur | !self.mask).wrapping_add(1)) & self.mask)
        };
        Some(NodeSet(cur))
    }
}

/// Formats a family of sets as `{{1,2},{3}}`.
pub fn fmt_family<'a, I: IntoIterator<Item = &'a NodeSet>>(family: I) -> String {
    let parts: Vec<String> = family.into_iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}
