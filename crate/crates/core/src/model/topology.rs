use serde::{Deserialize, Serialize};

use crate::error::{Result, SrtError};

/// Largest supported depth; keeps `2^(D+1)` comfortably inside `usize` and
/// parameter matrices within memory.
pub const MAX_DEPTH: usize = 20;

/// Complete binary tree of uniform depth with heap numbering: the root is node 1,
/// node `t` has children `2t` and `2t + 1`, branch nodes are `1..2^D` and leaves
/// are `2^D..2^(D+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    depth: usize,
}

impl TreeTopology {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(SrtError::invalid(format!(
                "tree depth must be in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        Ok(Self { depth })
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn n_branch(&self) -> usize {
        (1 << self.depth) - 1
    }

    #[inline]
    pub fn n_leaf(&self) -> usize {
        1 << self.depth
    }

    #[inline]
    pub fn first_leaf(&self) -> usize {
        1 << self.depth
    }

    #[inline]
    pub fn is_branch(&self, t: usize) -> bool {
        t >= 1 && t < self.first_leaf()
    }

    #[inline]
    pub fn is_leaf(&self, t: usize) -> bool {
        t >= self.first_leaf() && t < 2 * self.first_leaf()
    }

    #[inline]
    pub fn contains(&self, t: usize) -> bool {
        t >= 1 && t < 2 * self.first_leaf()
    }

    pub fn branch_nodes(&self) -> std::ops::Range<usize> {
        1..self.first_leaf()
    }

    pub fn leaf_nodes(&self) -> std::ops::Range<usize> {
        self.first_leaf()..2 * self.first_leaf()
    }

    #[inline]
    pub fn children(t: usize) -> (usize, usize) {
        (2 * t, 2 * t + 1)
    }

    #[inline]
    pub fn parent(t: usize) -> usize {
        t / 2
    }

    /// Level of node `t` (root is level 0).
    #[inline]
    pub fn level(t: usize) -> usize {
        debug_assert!(t >= 1);
        (usize::BITS - 1 - t.leading_zeros()) as usize
    }

    /// Column of a branch node in the `omega` matrix.
    #[inline]
    pub fn branch_slot(&self, t: usize) -> usize {
        debug_assert!(self.is_branch(t));
        t - 1
    }

    /// Column of a leaf node in the `beta` matrix.
    #[inline]
    pub fn leaf_slot(&self, t: usize) -> usize {
        debug_assert!(self.is_leaf(t));
        t - self.first_leaf()
    }

    /// Ancestors of `t` from the root down, each paired with `true` when the
    /// path to `t` leaves that ancestor through its left branch.
    pub fn ancestors(&self, t: usize) -> Vec<(usize, bool)> {
        let mut out = Vec::with_capacity(Self::level(t));
        let mut node = t;
        while node > 1 {
            let parent = Self::parent(node);
            out.push((parent, node & 1 == 0));
            node = parent;
        }
        out.reverse();
        out
    }

    /// `A_L(t)`: ancestors whose left branch lies on the path to `t`.
    pub fn left_ancestors(&self, t: usize) -> Vec<usize> {
        self.ancestors(t)
            .into_iter()
            .filter_map(|(a, left)| left.then_some(a))
            .collect()
    }

    /// `A_R(t)`: ancestors whose right branch lies on the path to `t`.
    pub fn right_ancestors(&self, t: usize) -> Vec<usize> {
        self.ancestors(t)
            .into_iter()
            .filter_map(|(a, left)| (!left).then_some(a))
            .collect()
    }

    /// Branch nodes strictly below `t`, in heap order.
    pub fn descendant_branches(&self, t: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lo = 2 * t;
        let mut width = 2;
        while lo < self.first_leaf() {
            out.extend(lo..lo + width);
            lo *= 2;
            width *= 2;
        }
        out
    }

    /// Leaves below `t` (or `t` itself when it is a leaf), as a contiguous range.
    pub fn descendant_leaves(&self, t: usize) -> std::ops::Range<usize> {
        let shift = self.depth - Self::level(t);
        (t << shift)..((t + 1) << shift)
    }

    /// Whether `node` lies in the subtree rooted at `root` (inclusive).
    #[inline]
    pub fn in_subtree(root: usize, node: usize) -> bool {
        let (lr, ln) = (Self::level(root), Self::level(node));
        ln >= lr && (node >> (ln - lr)) == root
    }

    /// 1-based left-to-right ordinal of a leaf.
    #[inline]
    pub fn leaf_ordinal(&self, t: usize) -> usize {
        self.leaf_slot(t) + 1
    }
}
