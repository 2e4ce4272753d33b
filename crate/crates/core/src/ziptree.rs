//! The binary zip tree.
//!
//! Nodes live in an arena and are addressed by index; deleted slots are
//! recycled. All update loops are iterative, so degenerate trees (long
//! equal-rank paths) cannot overflow the stack.

use std::fmt::{self, Write as _};

use crate::engine::{self, NodeId, ZipStore};
use crate::error::{Error, Result};
use crate::ranks::{Key, KeyedRng, RankPair, RankPolicy};

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    rank: RankPair,
    left: Option<NodeId>,
    right: Option<NodeId>,
}

/// Rank comparisons made by the update loops, and how many of them found
/// two identical ranks (settled by key).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RankCounters {
    pub comparisons: u64,
    pub ties: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub found: bool,
    /// Nodes on the comparison path, root = 1. A miss counts the nodes
    /// visited before falling off the tree.
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct ZipTree {
    nodes: Vec<Node>,
    free: Vec<NodeId>,
    root: Option<NodeId>,
    len: usize,
    policy: RankPolicy,
    rng: KeyedRng,
    counters: RankCounters,
}

impl ZipStore for ZipTree {
    #[inline]
    fn root(&self) -> Option<NodeId> {
        self.root
    }

    #[inline]
    fn set_root(&mut self, root: Option<NodeId>) {
        self.root = root;
    }

    #[inline]
    fn key(&self, id: NodeId) -> Key {
        self.nodes[id as usize].key
    }

    #[inline]
    fn left(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].left
    }

    #[inline]
    fn right(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].right
    }

    #[inline]
    fn set_left(&mut self, id: NodeId, child: Option<NodeId>) {
        self.nodes[id as usize].left = child;
    }

    #[inline]
    fn set_right(&mut self, id: NodeId, child: Option<NodeId>) {
        self.nodes[id as usize].right = child;
    }

    #[inline]
    fn dominates(&mut self, a: NodeId, b: NodeId) -> bool {
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        self.counters.comparisons += 1;
        if na.rank == nb.rank {
            self.counters.ties += 1;
        }
        na.rank.dominates(na.key, &nb.rank, nb.key)
    }
}

impl ZipTree {
    pub fn new(policy: RankPolicy, rng: KeyedRng) -> Self {
        ZipTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: None,
            len: 0,
            policy,
            rng,
            counters: RankCounters::default(),
        }
    }

    pub fn with_capacity(policy: RankPolicy, rng: KeyedRng, capacity: usize) -> Self {
        let mut tree = Self::new(policy, rng);
        tree.nodes.reserve(capacity);
        tree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn policy(&self) -> &RankPolicy {
        &self.policy
    }

    pub fn rng(&self) -> &KeyedRng {
        &self.rng
    }

    pub fn counters(&self) -> RankCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = RankCounters::default();
    }

    pub fn search(&self, key: Key) -> SearchOutcome {
        let (node, depth) = engine::find(self, key);
        SearchOutcome {
            found: node.is_some(),
            depth,
        }
    }

    pub fn contains(&self, key: Key) -> bool {
        engine::find(self, key).0.is_some()
    }

    pub fn rank_of(&self, key: Key) -> Option<RankPair> {
        engine::find(self, key).0.map(|id| self.nodes[id as usize].rank)
    }

    /// `(key, rank)` of every node a search for `key` visits, root first.
    pub fn search_path(&self, key: Key) -> Vec<(Key, RankPair)> {
        let mut out = Vec::new();
        let mut cur = self.root;
        while let Some(c) = cur {
            let n = &self.nodes[c as usize];
            out.push((n.key, n.rank));
            if n.key == key {
                break;
            }
            cur = if key < n.key { n.left } else { n.right };
        }
        out
    }

    pub fn root_key(&self) -> Option<Key> {
        self.root.map(|id| self.key(id))
    }

    /// Inserts `key` with a rank drawn from the tree's policy. Returns
    /// `false`, drawing nothing, if the key is already present.
    pub fn insert(&mut self, key: Key) -> Result<bool> {
        if self.contains(key) {
            return Ok(false);
        }
        let rank = self.rng.make_rank(&self.policy, key)?;
        self.link(key, rank);
        Ok(true)
    }

    /// Inserts `key` with a caller-chosen rank.
    pub fn insert_with_rank(&mut self, key: Key, rank: RankPair) -> bool {
        if self.contains(key) {
            return false;
        }
        self.link(key, rank);
        true
    }

    fn link(&mut self, key: Key, rank: RankPair) {
        let x = self.alloc(key, rank);
        engine::insert_node(self, x);
        self.len += 1;
    }

    fn alloc(&mut self, key: Key, rank: RankPair) -> NodeId {
        let node = Node {
            key,
            rank,
            left: None,
            right: None,
        };
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                u32::try_from(self.nodes.len() - 1).expect("more than 2^32 nodes")
            }
        }
    }

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

    /// Builds the unique tree on `pairs` directly from the definition: the
    /// dominant pair is the root and each side is built the same way.
    ///
    /// This is a test oracle independent of the update loops.
    pub fn build_canonical(pairs: &[(Key, RankPair)], policy: RankPolicy, rng: KeyedRng) -> Result<Self> {
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateKey(w[0].0));
            }
            if w[0].0 > w[1].0 {
                return Err(Error::UnsortedKeys {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        let mut tree = Self::with_capacity(policy, rng, pairs.len());
        for &(key, rank) in pairs {
            tree.alloc(key, rank);
        }
        tree.len = pairs.len();

        // (lo, hi, parent, attach-as-left)
        let mut work: Vec<(usize, usize, Option<NodeId>, bool)> = vec![(0, pairs.len(), None, false)];
        while let Some((lo, hi, parent, as_left)) = work.pop() {
            if lo >= hi {
                continue;
            }
            let mut top = lo;
            for i in lo + 1..hi {
                let (k, r) = pairs[i];
                let (tk, tr) = pairs[top];
                if r.dominates(k, &tr, tk) {
                    top = i;
                }
            }
            let id = top as NodeId;
            match parent {
                None => tree.root = Some(id),
                Some(p) if as_left => tree.nodes[p as usize].left = Some(id),
                Some(p) => tree.nodes[p as usize].right = Some(id),
            }
            work.push((lo, top, Some(id), true));
            work.push((top + 1, hi, Some(id), false));
        }
        Ok(tree)
    }

    /// `(key, rank)` pairs in key order.
    pub fn in_order(&self) -> Vec<(Key, RankPair)> {
        self.in_order_ids()
            .into_iter()
            .map(|id| {
                let n = &self.nodes[id as usize];
                (n.key, n.rank)
            })
            .collect()
    }

    pub fn keys(&self) -> Vec<Key> {
        self.in_order_ids().into_iter().map(|id| self.key(id)).collect()
    }

    fn in_order_ids(&self) -> Vec<NodeId> {
        engine::in_order_ids(self)
    }

    /// Checks symmetric order, dominance-heap order and the size count.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen = vec![false; self.nodes.len()];
        let mut reachable = 0usize;
        // (node, exclusive lower bound, exclusive upper bound)
        let mut stack: Vec<(NodeId, Option<Key>, Option<Key>)> =
            self.root.map(|r| (r, None, None)).into_iter().collect();
        while let Some((id, lo, hi)) = stack.pop() {
            let node = &self.nodes[id as usize];
            if std::mem::replace(&mut seen[id as usize], true) {
                violations.push(Violation::Cycle { key: node.key });
                continue;
            }
            reachable += 1;
            if lo.is_some_and(|lo| node.key <= lo) || hi.is_some_and(|hi| node.key >= hi) {
                violations.push(Violation::BstOrder { key: node.key });
            }
            for (child, bounds) in [(node.left, (lo, Some(node.key))), (node.right, (Some(node.key), hi))] {
                if let Some(c) = child {
                    let cn = &self.nodes[c as usize];
                    if !node.rank.dominates(node.key, &cn.rank, cn.key) {
                        violations.push(Violation::HeapOrder {
                            parent: node.key,
                            child: cn.key,
                        });
                    }
                    stack.push((c, bounds.0, bounds.1));
                }
            }
        }
        if reachable != self.len {
            violations.push(Violation::SizeMismatch {
                recorded: self.len,
                reachable,
            });
        }
        violations
    }

    /// Depths, height, root rank and `r1` rank-group sizes.
    pub fn stats(&self) -> TreeStats {
        engine::shape_stats(self, |id| self.nodes[id as usize].rank.r1)
    }

    /// Checks that the tree is the one dual to the skip list whose level-`i`
    /// list holds the keys with `r1 >= i`.
    ///
    /// Each `r1` rank group must consist of exactly the level-`r` keys lying
    /// strictly between two consecutive keys of level above `r` (or the
    /// sentinels), and must hang from the lower of those two bounding keys.
    pub fn check_skiplist_isomorphism(&self) -> Result<bool> {
        let variant = self.policy.variant();
        if !variant.has_geometric_r1() {
            return Err(Error::NonGeometricPolicy(variant.name()));
        }
        if self
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::Cycle { .. } | Violation::SizeMismatch { .. }))
        {
            return Ok(false);
        }
        let order = self.in_order_ids();
        let n = order.len();
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, &id) in order.iter().enumerate() {
            index[id as usize] = i;
        }
        let node = |i: usize| &self.nodes[order[i] as usize];
        let mut parent = vec![None; n];
        for (i, &id) in order.iter().enumerate() {
            for c in [self.left(id), self.right(id)].into_iter().flatten() {
                parent[index[c as usize]] = Some(i);
            }
        }

        // Group label = in-order index of the group's top node.
        let mut group = vec![usize::MAX; n];
        let mut stack: Vec<usize> = self.root.map(|r| index[r as usize]).into_iter().collect();
        while let Some(i) = stack.pop() {
            group[i] = match parent[i] {
                Some(p) if node(p).rank.r1 == node(i).rank.r1 => group[p],
                _ => i,
            };
            let id = order[i];
            for c in [self.left(id), self.right(id)].into_iter().flatten() {
                stack.push(index[c as usize]);
            }
        }

        // Nearest strictly higher level on each side.
        let r1 = |i: usize| node(i).rank.r1;
        let mut before = vec![None; n];
        let mut after = vec![None; n];
        let mut mono: Vec<usize> = Vec::new();
        for i in 0..n {
            while mono.last().is_some_and(|&j| r1(j) <= r1(i)) {
                mono.pop();
            }
            before[i] = mono.last().copied();
            mono.push(i);
        }
        mono.clear();
        for i in (0..n).rev() {
            while mono.last().is_some_and(|&j| r1(j) <= r1(i)) {
                mono.pop();
            }
            after[i] = mono.last().copied();
            mono.push(i);
        }

        let mut run_of_group = std::collections::HashMap::new();
        let mut group_of_run = std::collections::HashMap::new();
        for i in 0..n {
            let run = (before[i], after[i]);
            if *run_of_group.entry(group[i]).or_insert(run) != run {
                return Ok(false);
            }
            if *group_of_run.entry(run).or_insert(group[i]) != group[i] {
                return Ok(false);
            }
        }
        for (&top, &(lo, hi)) in &run_of_group {
            let expected = match (lo, hi) {
                (None, None) => None,
                (Some(a), None) => Some(a),
                (None, Some(b)) => Some(b),
                (Some(a), Some(b)) => {
                    let (na, nb) = (node(a), node(b));
                    if na.rank.dominates(na.key, &nb.rank, nb.key) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            };
            if parent[top] != expected {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Pre-order text form, one node per line as `(key,r1,r2)` with `-` for
    /// an absent `r2`; children are indented two spaces and prefixed `L:` or
    /// `R:`.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(NodeId, usize, &str)> = self.root.map(|r| (r, 0, "")).into_iter().collect();
        while let Some((id, depth, side)) = stack.pop() {
            let n = &self.nodes[id as usize];
            let _ = writeln!(out, "{:indent$}{side}({},{})", "", n.key, n.rank, indent = 2 * depth);
            if let Some(r) = n.right {
                stack.push((r, depth + 1, "R:"));
            }
            if let Some(l) = n.left {
                stack.push((l, depth + 1, "L:"));
            }
        }
        out
    }

    /// Rebuilds a tree from [`to_canonical_string`](Self::to_canonical_string)
    /// output. The shape is taken as given, invalid or not.
    pub fn from_canonical_str(text: &str, policy: RankPolicy, rng: KeyedRng) -> Result<Self> {
        let mut tree = Self::new(policy, rng);
        // (depth, node) along the current root path
        let mut path: Vec<(usize, NodeId)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let body = line.trim_start_matches(' ');
            let indent = line.len() - body.len();
            if indent % 2 != 0 {
                return Err(err("odd indentation"));
            }
            let depth = indent / 2;
            let (side, body) = match body.split_at_checked(2) {
                Some(("L:", rest)) => (Some(true), rest),
                Some(("R:", rest)) => (Some(false), rest),
                _ => (None, body),
            };
            let fields = body
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .ok_or_else(|| err("expected (key,r1,r2)"))?;
            let parts: Vec<&str> = fields.split(',').collect();
            let [k, r1, r2] = parts[..] else {
                return Err(err("expected three fields"));
            };
            let key = k.parse().map_err(|_| err("bad key"))?;
            let r1 = r1.parse().map_err(|_| err("bad r1"))?;
            let r2 = match r2 {
                "-" => None,
                s => Some(s.parse().map_err(|_| err("bad r2"))?),
            };
            let id = tree.alloc(key, RankPair { r1, r2 });
            tree.len += 1;
            path.truncate(depth);
            match (depth, side, path.last()) {
                (0, None, _) if tree.root.is_none() => tree.root = Some(id),
                (d, Some(left), Some(&(pd, p))) if d == pd + 1 => {
                    let slot = if left {
                        &mut tree.nodes[p as usize].left
                    } else {
                        &mut tree.nodes[p as usize].right
                    };
                    if slot.replace(id).is_some() {
                        return Err(err("child given twice"));
                    }
                }
                _ => return Err(err("node does not attach to a parent")),
            }
            path.push((depth, id));
        }
        Ok(tree)
    }

    /// Swaps the children of the node holding `key`. Breaks the tree on
    /// purpose; used as a negative control for the validators.
    pub fn swap_children(&mut self, key: Key) -> bool {
        match engine::find(self, key).0 {
            Some(id) => {
                let n = &mut self.nodes[id as usize];
                std::mem::swap(&mut n.left, &mut n.right);
                true
            }
            None => false,
        }
    }

    /// Same shape, keys and ranks.
    pub fn same_structure(&self, other: &ZipTree) -> bool {
        let mut a: Vec<(Option<NodeId>, Option<NodeId>)> = vec![(self.root, other.root)];
        while let Some(pair) = a.pop() {
            match pair {
                (None, None) => {}
                (Some(x), Some(y)) => {
                    let (nx, ny) = (&self.nodes[x as usize], &other.nodes[y as usize]);
                    if nx.key != ny.key || nx.rank != ny.rank {
                        return false;
                    }
                    a.push((nx.left, ny.left));
                    a.push((nx.right, ny.right));
                }
                _ => return false,
            }
        }
        true
    }
}

impl PartialEq for ZipTree {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.same_structure(other)
    }
}

impl fmt::Display for ZipTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    BstOrder { key: Key },
    HeapOrder { parent: Key, child: Key },
    SizeMismatch { recorded: usize, reachable: usize },
    Cycle { key: Key },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BstOrder { key } => write!(f, "BST order violated at key {key}"),
            Violation::HeapOrder { parent, child } => {
                write!(
                    f,
                    "heap order violated: key {parent} does not dominate its child {child}"
                )
            }
            Violation::SizeMismatch { recorded, reachable } => {
                write!(f, "size mismatch: recorded {recorded}, reachable {reachable}")
            }
            Violation::Cycle { key } => write!(f, "node with key {key} reached twice"),
        }
    }
}

/// Shape statistics of one tree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeStats {
    /// `(key, depth)` in key order; the root has depth 1.
    pub per_key_depth: Vec<(Key, u32)>,
    pub height: u32,
    pub root_r1: u64,
    pub rank_group_sizes: Vec<u32>,
}

impl TreeStats {
    pub fn n(&self) -> usize {
        self.per_key_depth.len()
    }

    pub fn depth_of(&self, key: Key) -> Option<u32> {
        self.per_key_depth
            .binary_search_by_key(&key, |&(k, _)| k)
            .ok()
            .map(|i| self.per_key_depth[i].1)
    }

    pub fn smallest_depth(&self) -> Option<u32> {
        self.per_key_depth.first().map(|&(_, d)| d)
    }

    pub fn largest_depth(&self) -> Option<u32> {
        self.per_key_depth.last().map(|&(_, d)| d)
    }

    pub fn mean_depth(&self) -> f64 {
        if self.per_key_depth.is_empty() {
            return 0.0;
        }
        let total: u64 = self.per_key_depth.iter().map(|&(_, d)| u64::from(d)).sum();
        total as f64 / self.per_key_depth.len() as f64
    }
}
