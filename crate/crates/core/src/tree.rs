//! Fully populated binary partition of `0..N` into contiguous ranges.
//!
//! Nodes are numbered breadth-first from 1: the root is 1 and the children
//! of `τ` are `2τ` and `2τ + 1`. Level `ℓ` holds nodes `2^ℓ .. 2^(ℓ+1)`.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexTree {
    n: usize,
    levels: usize,
    target_leaf: usize,
    /// Indexed by node number; entry 0 is unused.
    ranges: Vec<Range<usize>>,
}

pub const ROOT: usize = 1;

/// Splits until every leaf holds at most `target_leaf` indices; each split
/// gives the left child `ceil(n/2)` indices.
pub fn build_tree(n: usize, target_leaf: usize) -> Result<IndexTree> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "tree needs at least one index".into(),
        ));
    }
    if target_leaf < 2 {
        return Err(Error::InvalidArgument(format!(
            "target leaf size must be >= 2, got {target_leaf}"
        )));
    }
    let mut levels = 0;
    while target_leaf << levels < n {
        levels += 1;
    }
    IndexTree::with_levels(n, levels, target_leaf)
}

impl IndexTree {
    /// Tree with exactly `levels` levels below the root.
    pub fn with_levels(n: usize, levels: usize, target_leaf: usize) -> Result<Self> {
        if n < 1 << levels {
            return Err(Error::InvalidArgument(format!(
                "{n} indices cannot fill {} leaves",
                1usize << levels
            )));
        }
        let count = 2usize << levels;
        let mut ranges = vec![0..0; count];
        ranges[ROOT] = 0..n;
        for tau in 1..(1 << levels) {
            let r = ranges[tau].clone();
            let mid = r.start + r.len().div_ceil(2);
            ranges[2 * tau] = r.start..mid;
            ranges[2 * tau + 1] = mid..r.end;
        }
        Ok(Self {
            n,
            levels,
            target_leaf,
            ranges,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Depth `L`; leaves sit on level `L`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn target_leaf(&self) -> usize {
        self.target_leaf
    }

    /// Number of nodes, `2^(L+1) - 1`.
    pub fn node_count(&self) -> usize {
        self.ranges.len() - 1
    }

    pub fn nodes(&self) -> Range<usize> {
        1..self.ranges.len()
    }

    pub fn range(&self, node: usize) -> Range<usize> {
        self.ranges[node].clone()
    }

    pub fn level_nodes(&self, level: usize) -> Range<usize> {
        (1 << level)..(2 << level)
    }

    pub fn leaves(&self) -> Range<usize> {
        self.level_nodes(self.levels)
    }

    pub fn level_of(&self, node: usize) -> usize {
        (usize::BITS - 1 - node.leading_zeros()) as usize
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.level_of(node) == self.levels
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(node)).then_some((2 * node, 2 * node + 1))
    }

    pub fn max_leaf_size(&self) -> usize {
        self.leaves()
            .map(|t| self.ranges[t].len())
            .max()
            .unwrap_or(0)
    }
}
