//! Fixed-depth incremental Merkle tree jointly accumulating note
//! commitments and nullifiers.
//!
//! Leaves are stored as-is (commitment and nullifier digests); interior
//! nodes use the domain-separated field-native node hash, so a leaf value
//! can never be reinterpreted as an interior node. Unoccupied slots take
//! per-level defaults derived from the empty-leaf hash. Every root the tree
//! has ever had stays recognizable.

use std::collections::HashSet;

use thiserror::Error;

use crate::digest::Digest32;
use crate::hashc;

pub const DEFAULT_DEPTH: usize = 16;

/// What a leaf records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafKind {
    Commitment,
    Nullifier,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree is full ({0} leaves)")]
    Full(usize),
    #[error("leaf position {0} out of range")]
    OutOfRange(u64),
}

/// Membership path: bottom-up sibling hashes plus the leaf position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerklePath {
    pub siblings: Vec<Digest32>,
    pub pos: u64,
}

impl MerklePath {
    /// An all-defaults placeholder path (used to zero-fill unused witness
    /// slots so the witness shape stays uniform).
    pub fn placeholder(depth: usize) -> MerklePath {
        MerklePath {
            siblings: vec![Digest32::ZERO; depth],
            pos: 0,
        }
    }
}

/// The joint commitment/nullifier accumulator.
#[derive(Clone, Debug)]
pub struct CombinedTree {
    depth: usize,
    /// levels[0] are the leaves; levels[depth] is the single root slot.
    levels: Vec<Vec<Digest32>>,
    kinds: Vec<LeafKind>,
    empty: Vec<Digest32>,
    root_history: Vec<Digest32>,
    known_roots: HashSet<Digest32>,
}

impl CombinedTree {
    pub fn new(depth: usize) -> CombinedTree {
        assert!(depth >= 1 && depth <= 32, "supported depth range is 1..=32");
        let mut empty = Vec::with_capacity(depth + 1);
        empty.push(hashc::hc_empty_leaf());
        for level in 0..depth {
            let below = empty[level];
            empty.push(hashc::hc_node(&below, &below));
        }
        let genesis = empty[depth];
        CombinedTree {
            depth,
            levels: vec![Vec::new(); depth + 1],
            kinds: Vec::new(),
            empty,
            root_history: vec![genesis],
            known_roots: HashSet::from([genesis]),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn capacity(&self) -> usize {
        1usize << self.depth
    }

    pub fn root(&self) -> Digest32 {
        *self.root_history.last().expect("history is never empty")
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, LeafKind, &Digest32)> {
        self.levels[0]
            .iter()
            .enumerate()
            .map(|(i, d)| (i, self.kinds[i], d))
    }

    fn node_at(&self, level: usize, index: usize) -> Digest32 {
        self.levels[level]
            .get(index)
            .copied()
            .unwrap_or(self.empty[level])
    }

    /// Appends a leaf at the next free position and refreshes the root.
    pub fn append(&mut self, leaf: Digest32, kind: LeafKind) -> Result<u64, TreeError> {
        let pos = self.leaf_count();
        if pos >= self.capacity() {
            return Err(TreeError::Full(pos));
        }
        self.levels[0].push(leaf);
        self.kinds.push(kind);
        let mut index = pos;
        for level in 0..self.depth {
            let parent = index / 2;
            let node = hashc::hc_node(
                &self.node_at(level, parent * 2),
                &self.node_at(level, parent * 2 + 1),
            );
            if self.levels[level + 1].len() <= parent {
                self.levels[level + 1].push(node);
            } else {
                self.levels[level + 1][parent] = node;
            }
            index = parent;
        }
        let root = self.levels[self.depth][0];
        self.root_history.push(root);
        self.known_roots.insert(root);
        Ok(pos as u64)
    }

    /// Membership path for `pos` against the current root.
    pub fn path(&self, pos: u64) -> Result<MerklePath, TreeError> {
        if pos as usize >= self.leaf_count() {
            return Err(TreeError::OutOfRange(pos));
        }
        let mut siblings = Vec::with_capacity(self.depth);
        let mut index = pos as usize;
        for level in 0..self.depth {
            siblings.push(self.node_at(level, index ^ 1));
            index /= 2;
        }
        Ok(MerklePath { siblings, pos })
    }

    pub fn leaf_at(&self, pos: u64) -> Option<Digest32> {
        self.levels[0].get(pos as usize).copied()
    }

    /// True iff `rt` is the current root or any past root.
    pub fn is_known_root(&self, rt: &Digest32) -> bool {
        self.known_roots.contains(rt)
    }
}

/// Folds a leaf up through the siblings according to the position bits;
/// total and deterministic.
pub fn verify_path(root: &Digest32, leaf: &Digest32, path: &MerklePath) -> bool {
    let mut cur = *leaf;
    for (level, sibling) in path.siblings.iter().enumerate() {
        cur = if (path.pos >> level) & 1 == 0 {
            hashc::hc_node(&cur, sibling)
        } else {
            hashc::hc_node(sibling, &cur)
        };
    }
    cur == *root
}
