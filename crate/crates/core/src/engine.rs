//! Insertion by unzipping and deletion by zipping, written once against a
//! storage trait so the ephemeral, just-in-time and persistent trees share
//! the exact same update loops.

use crate::ranks::Key;
use crate::ziptree::TreeStats;

pub(crate) type NodeId = u32;

pub(crate) trait ZipStore {
    fn root(&self) -> Option<NodeId>;
    fn set_root(&mut self, root: Option<NodeId>);
    fn key(&self, id: NodeId) -> Key;
    fn left(&self, id: NodeId) -> Option<NodeId>;
    fn right(&self, id: NodeId) -> Option<NodeId>;
    fn set_left(&mut self, id: NodeId, child: Option<NodeId>);
    fn set_right(&mut self, id: NodeId, child: Option<NodeId>);
    /// True iff `a` must be an ancestor of `b`. May refine ranks (JIT).
    fn dominates(&mut self, a: NodeId, b: NodeId) -> bool;
}

/// Node holding `key` and the number of nodes on the search path
/// (1-based; a miss counts the nodes visited before falling off).
pub(crate) fn find<S: ZipStore + ?Sized>(s: &S, key: Key) -> (Option<NodeId>, usize) {
    let mut cur = s.root();
    let mut depth = 0;
    while let Some(c) = cur {
        depth += 1;
        let k = s.key(c);
        if key == k {
            return (Some(c), depth);
        }
        cur = if key < k { s.left(c) } else { s.right(c) };
    }
    (None, depth)
}

/// Links node `x`, whose key is absent from the tree. Both of `x`'s child
/// links are overwritten.
pub(crate) fn insert_node<S: ZipStore + ?Sized>(s: &mut S, x: NodeId) {
    let key = s.key(x);
    let mut cur = s.root();
    let mut prev: Option<NodeId> = None;
    while let Some(c) = cur {
        if !s.dominates(c, x) {
            break;
        }
        prev = Some(c);
        cur = if key < s.key(c) { s.left(c) } else { s.right(c) };
    }

    match prev {
        None => s.set_root(Some(x)),
        Some(p) if key < s.key(p) => s.set_left(p, Some(x)),
        Some(p) => s.set_right(p, Some(x)),
    }

    let Some(c) = cur else {
        s.set_left(x, None);
        s.set_right(x, None);
        return;
    };
    if key < s.key(c) {
        s.set_right(x, Some(c));
    } else {
        s.set_left(x, Some(c));
    }

    // Unzip the rest of the search path: `prev` trails `cur`, `fix` is the
    // last node whose child pointer on the other side is still dangling.
    let mut prev = x;
    let mut cur = Some(c);
    while let Some(mut c) = cur {
        let fix = prev;
        if s.key(c) < key {
            loop {
                prev = c;
                cur = s.right(c);
                match cur {
                    Some(n) if s.key(n) < key => c = n,
                    _ => break,
                }
            }
        } else {
            loop {
                prev = c;
                cur = s.left(c);
                match cur {
                    Some(n) if s.key(n) > key => c = n,
                    _ => break,
                }
            }
        }
        if s.key(fix) > key || (fix == x && s.key(prev) > key) {
            s.set_left(fix, cur);
        } else {
            s.set_right(fix, cur);
        }
    }
}

/// Unlinks the node holding `key`, if any, and returns it.
pub(crate) fn delete_node<S: ZipStore + ?Sized>(s: &mut S, key: Key) -> Option<NodeId> {
    let mut cur = s.root();
    let mut prev: Option<NodeId> = None;
    let x = loop {
        let c = cur?;
        let k = s.key(c);
        if k == key {
            break c;
        }
        prev = Some(c);
        cur = if key < k { s.left(c) } else { s.right(c) };
    };

    let mut left = s.left(x);
    let mut right = s.right(x);
    let top = match (left, right) {
        (None, r) => r,
        (l, None) => l,
        (Some(l), Some(r)) => {
            if s.dominates(l, r) {
                Some(l)
            } else {
                Some(r)
            }
        }
    };
    match prev {
        None => s.set_root(top),
        Some(p) if key < s.key(p) => s.set_left(p, top),
        Some(p) => s.set_right(p, top),
    }

    // Zip the right spine of the left subtree with the left spine of the
    // right subtree, top down, in dominance order.
    while let (Some(mut l), Some(r)) = (left, right) {
        if s.dominates(l, r) {
            let mut last;
            loop {
                last = l;
                left = s.right(l);
                match left {
                    Some(n) if s.dominates(n, r) => l = n,
                    _ => break,
                }
            }
            s.set_right(last, right);
        } else {
            let mut r = r;
            let mut last;
            loop {
                last = r;
                right = s.left(r);
                match right {
                    Some(n) if !s.dominates(l, n) => r = n,
                    _ => break,
                }
            }
            s.set_left(last, left);
        }
    }
    Some(x)
}

/// Node ids in key order.
pub(crate) fn in_order_ids<S: ZipStore + ?Sized>(s: &S) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    let mut cur = s.root();
    loop {
        while let Some(c) = cur {
            stack.push(c);
            cur = s.left(c);
        }
        let Some(c) = stack.pop() else { break };
        out.push(c);
        cur = s.right(c);
    }
    out
}

/// Depths, height, root `r1` and `r1` rank-group sizes, with `r1` read
/// through the given accessor.
pub(crate) fn shape_stats<S: ZipStore + ?Sized>(s: &S, r1: impl Fn(NodeId) -> u64) -> TreeStats {
    let mut per_key_depth = Vec::new();
    let mut group_sizes: Vec<u32> = Vec::new();
    let mut height = 0u32;
    let child_group = |parent: NodeId, child: NodeId, group: usize, sizes: &mut Vec<u32>| {
        if r1(parent) == r1(child) {
            group
        } else {
            sizes.push(0);
            sizes.len() - 1
        }
    };
    // (node, depth, group)
    let mut stack: Vec<(NodeId, u32, usize)> = Vec::new();
    let mut cur: Option<(NodeId, u32, usize)> = s.root().map(|r| {
        group_sizes.push(0);
        (r, 1, 0)
    });
    loop {
        while let Some((id, depth, group)) = cur {
            group_sizes[group] += 1;
            height = height.max(depth);
            stack.push((id, depth, group));
            cur = s
                .left(id)
                .map(|c| (c, depth + 1, child_group(id, c, group, &mut group_sizes)));
        }
        let Some((id, depth, group)) = stack.pop() else { break };
        per_key_depth.push((s.key(id), depth));
        cur = s
            .right(id)
            .map(|c| (c, depth + 1, child_group(id, c, group, &mut group_sizes)));
    }
    TreeStats {
        per_key_depth,
        height,
        root_r1: s.root().map_or(0, &r1),
        rank_group_sizes: group_sizes,
    }
}
