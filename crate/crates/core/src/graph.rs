//! Knowledge graph data model: dictionaries, triple splits and the
//! known-triple index used for filtering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// An integer-id `(head, relation, tail)` fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self { head, relation, tail }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of {train, valid, test}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitSet {
    pub train: bool,
    pub valid: bool,
    pub test: bool,
}

impl SplitSet {
    pub const NONE: SplitSet = SplitSet { train: false, valid: false, test: false };
    pub const ALL: SplitSet = SplitSet { train: true, valid: true, test: true };
    pub const TRAIN_VALID: SplitSet = SplitSet { train: true, valid: true, test: false };
    pub const TRAIN: SplitSet = SplitSet { train: true, valid: false, test: false };

    pub fn contains(&self, split: Split) -> bool {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.train || self.valid || self.test)
    }

    pub fn iter(&self) -> impl Iterator<Item = Split> + '_ {
        Split::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// Parses a comma-separated list such as `train,valid`. `none` and the
    /// empty string both mean no filtering.
    pub fn parse(s: &str) -> Result<Self> {
        let mut set = SplitSet::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "train" => set.train = true,
                "valid" => set.valid = true,
                "test" => set.test = true,
                "none" => {}
                "all" => set = SplitSet::ALL,
                other => return Err(Error::InvalidConfig(alloc::format!("unknown split `{other}`"))),
            }
        }
        Ok(set)
    }
}

impl fmt::Display for SplitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let mut first = true;
        for s in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            f.write_str(s.name())?;
        }
        Ok(())
    }
}

/// Set-structured index over known triples, keyed both by `(head, relation)`
/// and by `(relation, tail)`. The value lists are sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnownIndex {
    tails: BTreeMap<(u32, u32), Vec<u32>>,
    heads: BTreeMap<(u32, u32), Vec<u32>>,
    len: usize,
}

impl KnownIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut tails: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        let mut heads: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for t in triples {
            tails.entry((t.head, t.relation)).or_default().push(t.tail);
            heads.entry((t.relation, t.tail)).or_default().push(t.head);
        }
        let mut len = 0;
        for v in tails.values_mut() {
            v.sort_unstable();
            v.dedup();
            len += v.len();
        }
        for v in heads.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Self { tails, heads, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.tails.get(&(t.head, t.relation)).is_some_and(|v| v.binary_search(&t.tail).is_ok())
    }

    /// Known tails of `(head, relation, ?)`, sorted.
    pub fn tails_of(&self, head: u32, relation: u32) -> &[u32] {
        self.tails.get(&(head, relation)).map_or(&[], |v| v.as_slice())
    }

    /// Known heads of `(?, relation, tail)`, sorted.
    pub fn heads_of(&self, relation: u32, tail: u32) -> &[u32] {
        self.heads.get(&(relation, tail)).map_or(&[], |v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.tails.iter().flat_map(|(&(h, r), ts)| ts.iter().map(move |&t| Triple::new(h, r, t)))
    }
}

/// A validated knowledge graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    train_index: KnownIndex,
}

impl KnowledgeGraph {
    /// Builds a graph, checking id bounds and per-split uniqueness.
    pub fn new(
        entity_names: Vec<String>,
        relation_names: Vec<String>,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let n_e = entity_names.len();
        let n_r = relation_names.len();
        for (split, triples) in [(Split::Train, &train), (Split::Valid, &valid), (Split::Test, &test)] {
            let mut seen = BTreeSet::new();
            for t in triples {
                check_triple(t, n_e, n_r)?;
                if !seen.insert(*t) {
                    return Err(Error::DuplicateTriple { split, triple: *t });
                }
            }
        }
        let train_index = KnownIndex::from_triples(&train);
        Ok(Self { entity_names, relation_names, train, valid, test, train_index })
    }

    /// Graph with generated names `e<i>` / `r<i>`.
    pub fn unnamed(
        entity_count: usize,
        relation_count: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let entities = (0..entity_count).map(|i| alloc::format!("e{i}")).collect();
        let relations = (0..relation_count).map(|i| alloc::format!("r{i}")).collect();
        Self::new(entities, relations, train, valid, test)
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    /// Index over the train split, used by the negative samplers.
    pub fn train_index(&self) -> &KnownIndex {
        &self.train_index
    }

    pub fn known_index(&self, splits: SplitSet) -> KnownIndex {
        KnownIndex::from_triples(splits.iter().flat_map(|s| self.split(s)))
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        check_triple(t, self.entity_count(), self.relation_count())
    }
}

fn check_triple(t: &Triple, n_e: usize, n_r: usize) -> Result<()> {
    for id in [t.head, t.tail] {
        if id as usize >= n_e {
            return Err(Error::EntityOutOfRange { id, count: n_e });
        }
    }
    if t.relation as usize >= n_r {
        return Err(Error::RelationOutOfRange { id: t.relation, count: n_r });
    }
    Ok(())
}
