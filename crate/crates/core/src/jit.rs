//! Just-in-time zip-zip trees.
//!
//! Each node keeps a geometric `r1` and a secondary rank `r2` that starts as
//! an empty bit string. Bits are drawn only when two nodes with the same
//! `r1` are compared and neither string orders them yet.

use std::fmt::{self, Write as _};

use rand::RngCore;

use crate::engine::{self, NodeId, ZipStore};
use crate::error::{Error, Result};
use crate::ranks::{dominates, BitString, JitRank, Key, KeyedRng, RankPolicy};
use crate::ziptree::TreeStats;

#[derive(Clone, Debug)]
struct JitNode {
    key: Key,
    rank: JitRank,
    left: Option<NodeId>,
    right: Option<NodeId>,
}

/// Extends `a.r2` and `b.r2` until they differ, revealing one position per
/// round: a string that already has a bit there keeps it, the other gets a
/// fresh one. Returns the number of rounds.
pub fn resolve_tie<R: RngCore + ?Sized>(a: &mut JitRank, b: &mut JitRank, rng: &mut R) -> Result<usize> {
    if a.r1 != b.r1 || a.r2.compare_fraction(&b.r2).is_ok() {
        return Err(Error::NotTied);
    }
    let mut rounds = 0;
    let mut pos = a.r2.len().min(b.r2.len());
    let mut word = 0u64;
    let mut avail = 0u32;
    let mut bit = |rng: &mut R| {
        if avail == 0 {
            word = rng.next_u64();
            avail = 64;
        }
        avail -= 1;
        let b = word & 1 == 1;
        word >>= 1;
        b
    };
    loop {
        rounds += 1;
        if a.r2.len() <= pos {
            a.r2.push(bit(rng));
        }
        if b.r2.len() <= pos {
            b.r2.push(bit(rng));
        }
        if a.r2.get(pos) != b.r2.get(pos) {
            return Ok(rounds);
        }
        pos += 1;
    }
}

/// Tie-resolution activity since the last reset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JitCounters {
    pub comparisons: u64,
    /// Comparisons that needed new bits.
    pub ties: u64,
    pub rounds: u64,
}

/// Rank metadata size under a fixed encoding: each non-root node stores
/// `parent.r1 - r1` in unary (`d + 1` bits) plus its `r2` bits; the root
/// stores its `r1` in `ceil(log2(r1 + 2))` bits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetadataReport {
    pub n: usize,
    pub r1_diff_bits: u64,
    /// Sum of the parent-relative differences themselves.
    pub r1_diff_sum: u64,
    pub r2_bits: u64,
    pub root_bits: u64,
    pub bits_per_node: f64,
}

impl MetadataReport {
    pub fn r2_bits_per_node(&self) -> f64 {
        per_node(self.r2_bits, self.n)
    }

    pub fn r1_bits_per_node(&self) -> f64 {
        per_node(self.r1_diff_bits + self.root_bits, self.n)
    }

    pub fn total_bits(&self) -> u64 {
        self.r1_diff_bits + self.r2_bits + self.root_bits
    }
}

fn per_node(bits: u64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        bits as f64 / n as f64
    }
}

/// Bits needed by the root's absolute `r1`.
pub fn root_charge(r1: u64) -> u64 {
    // ceil(log2(r1 + 2)) = bit length of r1 + 1
    u64::from(64 - (r1 + 1).leading_zeros())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JitViolation {
    BstOrder {
        key: Key,
    },
    HeapOrder {
        parent: Key,
        child: Key,
    },
    /// Parent and child ranks cannot be ordered by the bits drawn so far.
    Unresolved {
        parent: Key,
        child: Key,
    },
    SizeMismatch {
        recorded: usize,
        reachable: usize,
    },
}

impl fmt::Display for JitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JitViolation::BstOrder { key } => write!(f, "BST order violated at key {key}"),
            JitViolation::HeapOrder { parent, child } => {
                write!(
                    f,
                    "heap order violated: key {parent} does not dominate its child {child}"
                )
            }
            JitViolation::Unresolved { parent, child } => {
                write!(f, "ranks of {parent} and its child {child} are still tied")
            }
            JitViolation::SizeMismatch { recorded, reachable } => {
                write!(f, "size mismatch: recorded {recorded}, reachable {reachable}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct JitTree {
    nodes: Vec<JitNode>,
    free: Vec<NodeId>,
    root: Option<NodeId>,
    len: usize,
    policy: RankPolicy,
    rng: KeyedRng,
    counters: JitCounters,
}

impl ZipStore for JitTree {
    fn root(&self) -> Option<NodeId> {
        self.root
    }

    fn set_root(&mut self, root: Option<NodeId>) {
        self.root = root;
    }

    fn key(&self, id: NodeId) -> Key {
        self.nodes[id as usize].key
    }

    fn left(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].left
    }

    fn right(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].right
    }

    fn set_left(&mut self, id: NodeId, child: Option<NodeId>) {
        self.nodes[id as usize].left = child;
    }

    fn set_right(&mut self, id: NodeId, child: Option<NodeId>) {
        self.nodes[id as usize].right = child;
    }

    fn dominates(&mut self, a: NodeId, b: NodeId) -> bool {
        self.counters.comparisons += 1;
        loop {
            let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
            if let Ok(d) = dominates((&na.rank, na.key), (&nb.rank, nb.key)) {
                return d;
            }
            self.counters.ties += 1;
            let (lo, hi) = (a.min(b) as usize, a.max(b) as usize);
            let (head, tail) = self.nodes.split_at_mut(hi);
            let (x, y) = (&mut head[lo].rank, &mut tail[0].rank);
            let rounds = resolve_tie(x, y, self.rng.stream()).expect("ranks were tied");
            self.counters.rounds += rounds as u64;
        }
    }
}

impl JitTree {
    /// `policy` supplies `r1` (its `p`); the secondary rank is always
    /// drawn bit by bit.
    pub fn new(policy: RankPolicy, rng: KeyedRng) -> Self {
        JitTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: None,
            len: 0,
            policy,
            rng,
            counters: JitCounters::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counters(&self) -> JitCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = JitCounters::default();
    }

    pub fn contains(&self, key: Key) -> bool {
        engine::find(self, key).0.is_some()
    }

    /// Search depth (root = 1); never draws bits.
    pub fn search(&self, key: Key) -> (bool, usize) {
        let (node, depth) = engine::find(self, key);
        (node.is_some(), depth)
    }

    pub fn rank_of(&self, key: Key) -> Option<&JitRank> {
        engine::find(self, key).0.map(|id| &self.nodes[id as usize].rank)
    }

    /// Inserts `key` with a fresh `r1` and an empty `r2`.
    pub fn insert(&mut self, key: Key) -> Result<bool> {
        if self.contains(key) {
            return Ok(false);
        }
        let r1 = self.rng.make_rank(&self.policy, key)?.r1;
        let node = JitNode {
            key,
            rank: JitRank {
                r1,
                r2: BitString::new(),
            },
            left: None,
            right: None,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                u32::try_from(self.nodes.len() - 1).expect("more than 2^32 nodes")
            }
        };
        engine::insert_node(self, id);
        self.len += 1;
        Ok(true)
    }

    /// Bits already drawn on surviving nodes are kept.
    pub fn delete(&mut self, key: Key) -> bool {
        match engine::delete_node(self, key) {
            Some(id) => {
                self.free.push(id);
                self.len -= 1;
                true
            }
            None => false,
        }
    }

    pub fn keys(&self) -> Vec<Key> {
        engine::in_order_ids(self).into_iter().map(|id| self.key(id)).collect()
    }

    pub fn stats(&self) -> TreeStats {
        engine::shape_stats(self, |id| self.nodes[id as usize].rank.r1)
    }

    pub fn metadata(&self) -> MetadataReport {
        let mut report = MetadataReport {
            n: self.len,
            ..Default::default()
        };
        let Some(root) = self.root else {
            return report;
        };
        report.root_bits = root_charge(self.nodes[root as usize].rank.r1);
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            report.r2_bits += node.rank.r2.len() as u64;
            for c in [node.left, node.right].into_iter().flatten() {
                let d = node.rank.r1.saturating_sub(self.nodes[c as usize].rank.r1);
                report.r1_diff_sum += d;
                report.r1_diff_bits += d + 1;
                stack.push(c);
            }
        }
        report.bits_per_node = per_node(report.total_bits(), report.n);
        report
    }

    /// Symmetric order and fraction-compared dominance on every edge.
    pub fn validate(&self) -> Vec<JitViolation> {
        let mut violations = Vec::new();
        let mut reachable = 0usize;
        let mut stack: Vec<(NodeId, Option<Key>, Option<Key>)> =
            self.root.map(|r| (r, None, None)).into_iter().collect();
        while let Some((id, lo, hi)) = stack.pop() {
            reachable += 1;
            if reachable > self.nodes.len() {
                break;
            }
            let node = &self.nodes[id as usize];
            if lo.is_some_and(|lo| node.key <= lo) || hi.is_some_and(|hi| node.key >= hi) {
                violations.push(JitViolation::BstOrder { key: node.key });
            }
            for (child, bounds) in [(node.left, (lo, Some(node.key))), (node.right, (Some(node.key), hi))] {
                if let Some(c) = child {
                    let cn = &self.nodes[c as usize];
                    match dominates((&node.rank, node.key), (&cn.rank, cn.key)) {
                        Ok(true) => {}
                        Ok(false) => violations.push(JitViolation::HeapOrder {
                            parent: node.key,
                            child: cn.key,
                        }),
                        Err(_) => violations.push(JitViolation::Unresolved {
                            parent: node.key,
                            child: cn.key,
                        }),
                    }
                    stack.push((c, bounds.0, bounds.1));
                }
            }
        }
        if reachable != self.len {
            violations.push(JitViolation::SizeMismatch {
                recorded: self.len,
                reachable,
            });
        }
        violations
    }

    /// Pre-order lines `(key,r1,bits)`, laid out like the binary tree's text
    /// form.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(NodeId, usize, &str)> = self.root.map(|r| (r, 0, "")).into_iter().collect();
        while let Some((id, depth, side)) = stack.pop() {
            let n = &self.nodes[id as usize];
            let _ = writeln!(
                out,
                "{:indent$}{side}({},{},{})",
                "",
                n.key,
                n.rank.r1,
                n.rank.r2,
                indent = 2 * depth
            );
            if let Some(r) = n.right {
                stack.push((r, depth + 1, "R:"));
            }
            if let Some(l) = n.left {
                stack.push((l, depth + 1, "L:"));
            }
        }
        out
    }
}

impl fmt::Display for JitTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranks::testing::ScriptedRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rank(r1: u64, bits: &str) -> JitRank {
        JitRank {
            r1,
            r2: bits.parse().unwrap(),
        }
    }

    #[test]
    fn single_round_tie() {
        let (mut a, mut b) = (rank(0, ""), rank(0, ""));
        // a takes bit 0 of the word (1), b takes bit 1 (0)
        let rounds = resolve_tie(&mut a, &mut b, &mut ScriptedRng::new(&[0b01])).unwrap();
        assert_eq!(rounds, 1);
        assert_eq!((a.r2.to_string(), b.r2.to_string()), ("1".into(), "0".into()));
        assert_eq!(dominates((&a, 5), (&b, 1)), Ok(true));
    }

    /// `a = "10"`, `b = "1"`: position 1 is revealed for `b` only, after
    /// which both grow together. Every two-round outcome is checked
    /// against the prefix rule.
    #[test]
    fn prefix_tie_all_two_round_outcomes() {
        for word in 0u64..8 {
            let (mut a, mut b) = (rank(2, "10"), rank(2, "1"));
            // bits 3 and 4 settle a third round if one is needed
            let res = resolve_tie(&mut a, &mut b, &mut ScriptedRng::new(&[word | 0b01000]));
            let rounds = res.unwrap();
            assert!(a.r2.to_string().starts_with("10"));
            assert!(b.r2.to_string().starts_with('1'));
            let b1 = word & 1;
            if b1 == 1 {
                assert_eq!(rounds, 1);
                assert_eq!(b.r2.to_string(), "11");
                assert_eq!(a.r2.to_string(), "10");
            } else {
                // position 2: a then b
                let (x, y) = ((word >> 1) & 1, (word >> 2) & 1);
                assert_eq!(a.r2.len(), b.r2.len());
                assert_eq!(a.r2.get(2), Some(x == 1));
                assert_eq!(b.r2.get(2), Some(y == 1));
                assert_eq!(rounds, if x != y { 2 } else { 3 });
            }
            assert!(a.r2.compare_fraction(&b.r2).is_ok());
        }
    }

    #[test]
    fn not_tied_is_an_error() {
        let mut rng = ScriptedRng::new(&[0]);
        assert_eq!(
            resolve_tie(&mut rank(1, ""), &mut rank(0, ""), &mut rng),
            Err(Error::NotTied)
        );
        assert_eq!(
            resolve_tie(&mut rank(1, "0"), &mut rank(1, "1"), &mut rng),
            Err(Error::NotTied)
        );
    }

    #[test]
    fn mean_rounds_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 1_000_000;
        let mut total = 0usize;
        for _ in 0..trials {
            total += resolve_tie(&mut rank(0, ""), &mut rank(0, ""), &mut rng).unwrap();
        }
        let mean = total as f64 / trials as f64;
        // rounds ~ Geometric(1/2) on {1, 2, ...}: sd = sqrt(2), se ~ 0.0014
        assert!((mean - 2.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn root_charge_values() {
        assert_eq!(root_charge(0), 1);
        assert_eq!(root_charge(1), 2);
        assert_eq!(root_charge(2), 2);
        assert_eq!(root_charge(3), 3);
        for r in 0..1000u64 {
            assert_eq!(root_charge(r), ((r + 2) as f64).log2().ceil() as u64);
        }
    }

    fn tree(seed: u64) -> JitTree {
        JitTree::new(RankPolicy::original(), KeyedRng::fresh(seed))
    }

    #[test]
    fn empty_and_single() {
        let mut t = tree(1);
        assert_eq!(t.metadata(), MetadataReport::default());
        assert!(t.insert(4).unwrap());
        assert!(t.rank_of(4).unwrap().r2.is_empty());
        assert!(!t.insert(4).unwrap());
        let m = t.metadata();
        assert_eq!(m.r1_diff_bits, 0);
        assert_eq!(m.root_bits, root_charge(t.rank_of(4).unwrap().r1));
    }

    #[test]
    fn same_group_edge_costs_one_bit() {
        let mut t = tree(1);
        t.nodes = vec![
            JitNode {
                key: 1,
                rank: rank(2, "1"),
                left: None,
                right: Some(1),
            },
            JitNode {
                key: 2,
                rank: rank(2, "0"),
                left: None,
                right: None,
            },
        ];
        t.root = Some(0);
        t.len = 2;
        assert!(t.validate().is_empty());
        let m = t.metadata();
        assert_eq!(m.r1_diff_bits, 1);
        assert_eq!(m.r2_bits, 2);
        assert_eq!(m.root_bits, 2);
        assert_eq!(m.bits_per_node, 2.5);
    }

    #[test]
    fn validator_flags_unresolved_edge() {
        let mut t = tree(1);
        t.nodes = vec![
            JitNode {
                key: 1,
                rank: rank(2, "1"),
                left: None,
                right: Some(1),
            },
            JitNode {
                key: 2,
                rank: rank(2, "10"),
                left: None,
                right: None,
            },
        ];
        t.root = Some(0);
        t.len = 2;
        assert_eq!(t.validate(), vec![JitViolation::Unresolved { parent: 1, child: 2 }]);
    }

    #[test]
    fn sequential_and_mixed_updates_stay_valid() {
        let mut t = tree(3);
        for k in 0..2000 {
            t.insert(k).unwrap();
        }
        assert!(t.validate().is_empty());
        assert_eq!(t.keys(), (0..2000).collect::<Vec<_>>());
        let before = t.metadata().r2_bits;
        for k in (0..2000).step_by(3) {
            assert!(t.search(k).0);
        }
        assert_eq!(t.metadata().r2_bits, before, "search drew bits");
        for k in (0..2000).step_by(2) {
            assert!(t.delete(k));
            assert!(!t.delete(k));
        }
        assert!(t.validate().is_empty());
        assert_eq!(t.len(), 1000);
    }
}
