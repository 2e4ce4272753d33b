//! External zip-zip trees: items live in the leaves, internal nodes carry
//! ranked routing keys.
//!
//! An internal node's routing key is the smallest item in its right subtree,
//! so every item except the smallest one routes exactly one internal node.
//! Ranks belong to routing keys; under keyed randomness the internal nodes
//! form the ordinary zip tree on all items but the smallest.

use std::fmt::{self, Write as _};

use crate::error::Result;
use crate::ranks::{Key, KeyedRng, RankPair, RankPolicy};

type Id = u32;

#[derive(Clone, Debug)]
struct ENode {
    key: Key,
    /// `None` for an external node.
    rank: Option<RankPair>,
    left: Option<Id>,
    right: Option<Id>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtViolation {
    /// In-order items are not strictly increasing, or a routing key falls
    /// outside its subtree's range.
    Order {
        key: Key,
    },
    HeapOrder {
        parent: Key,
        child: Key,
    },
    /// Routing key differs from the smallest item of the right subtree.
    Routing {
        key: Key,
        expected: Key,
    },
    /// The smallest item also appears as a routing key.
    SmallestRouted {
        key: Key,
    },
    /// An internal node lacks a child or an external node has one.
    Arity {
        key: Key,
    },
    Counts {
        internal: usize,
        external: usize,
        size: usize,
    },
}

impl fmt::Display for ExtViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtViolation::Order { key } => write!(f, "symmetric order violated at key {key}"),
            ExtViolation::HeapOrder { parent, child } => {
                write!(f, "heap order violated: routing key {parent} does not dominate {child}")
            }
            ExtViolation::Routing { key, expected } => {
                write!(f, "routing key {key} should be {expected}")
            }
            ExtViolation::SmallestRouted { key } => write!(f, "smallest item {key} is also a routing key"),
            ExtViolation::Arity { key } => write!(f, "node {key} has the wrong number of children"),
            ExtViolation::Counts {
                internal,
                external,
                size,
            } => {
                write!(f, "{internal} internal and {external} external nodes for {size} items")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtTree {
    nodes: Vec<ENode>,
    free: Vec<Id>,
    root: Option<Id>,
    len: usize,
    policy: RankPolicy,
    rng: KeyedRng,
    lemma_failures: u64,
}

impl ExtTree {
    pub fn new(policy: RankPolicy, rng: KeyedRng) -> Self {
        ExtTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: None,
            len: 0,
            policy,
            rng,
            lemma_failures: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Insertions whose larger-keys path ended at an external node without
    /// the new item being a new minimum and the smaller-keys path empty.
    /// Stays zero for a correct tree.
    pub fn lemma_failures(&self) -> u64 {
        self.lemma_failures
    }

    fn node(&self, id: Id) -> &ENode {
        &self.nodes[id as usize]
    }

    fn is_leaf(&self, id: Id) -> bool {
        self.node(id).rank.is_none()
    }

    fn alloc(&mut self, key: Key, rank: Option<RankPair>) -> Id {
        let node = ENode {
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

    fn dominates(&self, a: Id, b: Id) -> bool {
        let (na, nb) = (self.node(a), self.node(b));
        match (na.rank, nb.rank) {
            (Some(ra), Some(rb)) => ra.dominates(na.key, &rb, nb.key),
            _ => unreachable!("ranks compared on an external node"),
        }
    }

    fn attach(&mut self, parent: Option<(Id, bool)>, child: Option<Id>) {
        match parent {
            None => self.root = child,
            Some((p, true)) => self.nodes[p as usize].left = child,
            Some((p, false)) => self.nodes[p as usize].right = child,
        }
    }

    /// Whether `key` is stored, and the number of nodes on its search path
    /// including the external node reached.
    pub fn search(&self, key: Key) -> (bool, usize) {
        let mut cur = self.root;
        let mut depth = 0;
        while let Some(c) = cur {
            depth += 1;
            let n = self.node(c);
            if n.rank.is_none() {
                return (n.key == key, depth);
            }
            cur = if key < n.key { n.left } else { n.right };
        }
        (false, depth)
    }

    pub fn contains(&self, key: Key) -> bool {
        self.search(key).0
    }

    fn min_item(&self) -> Option<Key> {
        let mut cur = self.root?;
        while let Some(l) = self.node(cur).left {
            cur = l;
        }
        Some(self.node(cur).key)
    }

    pub fn insert(&mut self, key: Key) -> Result<bool> {
        let Some(min) = self.min_item() else {
            let leaf = self.alloc(key, None);
            self.root = Some(leaf);
            self.len = 1;
            return Ok(true);
        };
        if self.contains(key) {
            return Ok(false);
        }
        // A new minimum displaces the old one into an internal node.
        let new_min = key < min;
        let routing = if new_min { min } else { key };
        let rank = self.rng.make_rank(&self.policy, routing)?;
        let x = self.alloc(routing, Some(rank));
        let leaf = self.alloc(key, None);

        let mut parent: Option<(Id, bool)> = None;
        let mut cur = self.root.expect("non-empty");
        while !self.is_leaf(cur) && self.dominates(cur, x) {
            let go_left = key < self.node(cur).key;
            parent = Some((cur, go_left));
            let n = self.node(cur);
            cur = if go_left { n.left } else { n.right }.expect("internal nodes have two children");
        }
        self.attach(parent, Some(x));

        // Unzip the rest of the path, internal nodes only.
        let mut p_path = Vec::new();
        let mut q_path = Vec::new();
        while !self.is_leaf(cur) {
            let n = self.node(cur);
            if n.key < key {
                p_path.push(cur);
                cur = n.right.expect("internal");
            } else {
                q_path.push(cur);
                cur = n.left.expect("internal");
            }
        }
        let terminal = cur;
        let terminal_on_q = self.node(terminal).key > key;
        if terminal_on_q != new_min || (terminal_on_q && !p_path.is_empty()) {
            self.lemma_failures += 1;
        }
        let (before, after) = if terminal_on_q {
            (leaf, terminal)
        } else {
            (terminal, leaf)
        };

        let mut hook = (x, true);
        for &p in &p_path {
            self.attach(Some(hook), Some(p));
            hook = (p, false);
        }
        self.attach(Some(hook), Some(before));
        let mut hook = (x, false);
        for &q in &q_path {
            self.attach(Some(hook), Some(q));
            hook = (q, true);
        }
        self.attach(Some(hook), Some(after));
        self.len += 1;
        Ok(true)
    }

    pub fn delete(&mut self, key: Key) -> bool {
        let mut parent: Option<(Id, bool)> = None;
        let Some(mut cur) = self.root else {
            return false;
        };
        loop {
            let n = self.node(cur);
            if n.rank.is_none() {
                if n.key != key {
                    return false;
                }
                // Smallest item: drop it and its parent, which keeps only
                // its right subtree.
                match parent {
                    None => self.root = None,
                    Some((p, _)) => {
                        let up = self.parent_slot(p);
                        let right = self.node(p).right;
                        self.attach(up, right);
                        self.free.push(p);
                    }
                }
                self.free.push(cur);
                self.len -= 1;
                return true;
            }
            if n.key == key {
                break;
            }
            let go_left = key < n.key;
            parent = Some((cur, go_left));
            cur = if go_left { n.left } else { n.right }.expect("internal");
        }

        let x = cur;
        let mut lefts = Vec::new();
        let mut c = self.node(x).left.expect("internal");
        while !self.is_leaf(c) {
            lefts.push(c);
            c = self.node(c).right.expect("internal");
        }
        let kept_leaf = c;
        let mut rights = Vec::new();
        let mut c = self.node(x).right.expect("internal");
        while !self.is_leaf(c) {
            rights.push(c);
            c = self.node(c).left.expect("internal");
        }
        debug_assert_eq!(self.node(c).key, key);
        let dropped_leaf = c;

        // Merge the two spines top down by dominance.
        let mut hook = parent;
        let (mut i, mut j) = (0, 0);
        while i < lefts.len() || j < rights.len() {
            let take_left = j == rights.len() || (i < lefts.len() && self.dominates(lefts[i], rights[j]));
            let (node, from_left) = if take_left {
                i += 1;
                (lefts[i - 1], true)
            } else {
                j += 1;
                (rights[j - 1], false)
            };
            self.attach(hook, Some(node));
            hook = Some((node, !from_left));
        }
        self.attach(hook, Some(kept_leaf));
        self.free.push(x);
        self.free.push(dropped_leaf);
        self.len -= 1;
        true
    }

    /// Where `id` hangs, found by searching for its routing key.
    fn parent_slot(&self, id: Id) -> Option<(Id, bool)> {
        let key = self.node(id).key;
        let mut parent = None;
        let mut cur = self.root?;
        while cur != id {
            let n = self.node(cur);
            let go_left = key < n.key;
            parent = Some((cur, go_left));
            cur = if go_left { n.left } else { n.right }.expect("id is reachable");
        }
        parent
    }

    /// Stored items in order.
    pub fn keys(&self) -> Vec<Key> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack: Vec<Id> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            let n = self.node(id);
            if n.rank.is_none() {
                out.push(n.key);
            }
            stack.extend(n.right);
            stack.extend(n.left);
        }
        out
    }

    /// Routing keys in order.
    pub fn routing_keys(&self) -> Vec<Key> {
        let mut out = Vec::new();
        let mut stack: Vec<Id> = self.root.into_iter().collect();
        let mut order = Vec::new();
        while let Some(id) = stack.pop() {
            order.push(id);
            let n = self.node(id);
            stack.extend(n.left);
            stack.extend(n.right);
        }
        for id in order {
            if !self.is_leaf(id) {
                out.push(self.node(id).key);
            }
        }
        out.sort_unstable();
        out
    }

    /// `(internal, external)` node counts reachable from the root.
    pub fn node_counts(&self) -> (usize, usize) {
        let mut counts = (0, 0);
        let mut stack: Vec<Id> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            let n = self.node(id);
            if n.rank.is_some() {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
            stack.extend(n.left);
            stack.extend(n.right);
        }
        counts
    }

    pub fn validate(&self) -> Vec<ExtViolation> {
        let mut v = Vec::new();
        let Some(root) = self.root else {
            if self.len != 0 {
                v.push(ExtViolation::Counts {
                    internal: 0,
                    external: 0,
                    size: self.len,
                });
            }
            return v;
        };
        // Post-order pass computing each subtree's smallest item; the
        // in-order item sequence is checked along the way.
        let mut internal = 0usize;
        let mut external = 0usize;
        let mut min_of = vec![None::<Key>; self.nodes.len()];
        let mut last_item: Option<Key> = None;
        let mut visits = 0usize;
        // (node, children done)
        let mut stack = vec![(root, false)];
        let mut in_order_stack: Vec<Id> = Vec::new();
        let mut cur = Some(root);
        // In-order pass for item order.
        loop {
            while let Some(c) = cur {
                visits += 1;
                if visits > self.nodes.len() {
                    v.push(ExtViolation::Order { key: self.node(c).key });
                    return v;
                }
                in_order_stack.push(c);
                cur = self.node(c).left;
            }
            let Some(c) = in_order_stack.pop() else { break };
            let n = self.node(c);
            if n.rank.is_none() {
                external += 1;
                if last_item.is_some_and(|l| n.key <= l) {
                    v.push(ExtViolation::Order { key: n.key });
                }
                last_item = Some(n.key);
                if n.left.is_some() || n.right.is_some() {
                    v.push(ExtViolation::Arity { key: n.key });
                }
            } else {
                internal += 1;
                if n.left.is_none() || n.right.is_none() {
                    v.push(ExtViolation::Arity { key: n.key });
                }
                if last_item.is_some_and(|l| n.key <= l) {
                    v.push(ExtViolation::Order { key: n.key });
                }
            }
            cur = n.right;
        }
        while let Some((id, done)) = stack.pop() {
            let n = self.node(id);
            if n.rank.is_none() {
                min_of[id as usize] = Some(n.key);
                continue;
            }
            if !done {
                stack.push((id, true));
                stack.extend(n.right.map(|c| (c, false)));
                stack.extend(n.left.map(|c| (c, false)));
                continue;
            }
            min_of[id as usize] = n.left.and_then(|c| min_of[c as usize]);
            if let Some(expected) = n.right.and_then(|c| min_of[c as usize]) {
                if expected != n.key {
                    v.push(ExtViolation::Routing { key: n.key, expected });
                }
            }
            for c in [n.left, n.right].into_iter().flatten() {
                if !self.is_leaf(c) && !self.dominates(id, c) {
                    v.push(ExtViolation::HeapOrder {
                        parent: n.key,
                        child: self.node(c).key,
                    });
                }
            }
        }
        if let Some(min) = min_of[root as usize] {
            if self.routing_keys().binary_search(&min).is_ok() {
                v.push(ExtViolation::SmallestRouted { key: min });
            }
        }
        if external != self.len || internal + 1 != external {
            v.push(ExtViolation::Counts {
                internal,
                external,
                size: self.len,
            });
        }
        v
    }

    /// Overwrites the routing key of the internal node currently routing
    /// `key`. Breaks the tree on purpose; for validator tests.
    pub fn corrupt_routing_key(&mut self, key: Key, new_key: Key) -> bool {
        let mut cur = self.root;
        while let Some(c) = cur {
            let n = &self.nodes[c as usize];
            if n.rank.is_none() {
                return false;
            }
            if n.key == key {
                self.nodes[c as usize].key = new_key;
                return true;
            }
            cur = if key < n.key { n.left } else { n.right };
        }
        false
    }

    /// Pre-order lines: internal nodes as `(key,r1,r2)`, external nodes as
    /// `[key]`, children indented two spaces with `L:`/`R:` prefixes.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(Id, usize, &str)> = self.root.map(|r| (r, 0, "")).into_iter().collect();
        while let Some((id, depth, side)) = stack.pop() {
            let n = self.node(id);
            let _ = match n.rank {
                Some(r) => writeln!(out, "{:indent$}{side}({},{})", "", n.key, r, indent = 2 * depth),
                None => writeln!(out, "{:indent$}{side}[{}]", "", n.key, indent = 2 * depth),
            };
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

impl PartialEq for ExtTree {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.to_canonical_string() == other.to_canonical_string()
    }
}

impl fmt::Display for ExtTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ziptree::ZipTree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn tree(seed: u64) -> ExtTree {
        ExtTree::new(RankPolicy::zipzip(1 << 10), KeyedRng::keyed(seed))
    }

    #[test]
    fn empty_and_single() {
        let mut t = tree(1);
        assert!(t.validate().is_empty());
        assert_eq!(t.search(5), (false, 0));
        assert!(t.insert(5).unwrap());
        assert_eq!(t.to_canonical_string(), "[5]\n");
        assert_eq!(t.node_counts(), (0, 1));
        assert_eq!(t.search(5), (true, 1));
        assert_eq!(t.search(9), (false, 1));
        assert!(t.delete(5));
        assert!(t.is_empty());
        assert_eq!(t.to_canonical_string(), "");
    }

    #[test]
    fn two_items_either_order() {
        let mut a = tree(4);
        a.insert(3).unwrap();
        a.insert(5).unwrap();
        let mut b = tree(4);
        b.insert(5).unwrap();
        b.insert(3).unwrap();
        let r = KeyedRng::keyed(4).make_rank(&RankPolicy::zipzip(1 << 10), 5).unwrap();
        let expected = format!("(5,{r})\n  L:[3]\n  R:[5]\n");
        assert_eq!(a.to_canonical_string(), expected);
        assert_eq!(b.to_canonical_string(), expected);
        assert_eq!(a.lemma_failures() + b.lemma_failures(), 0);
        assert!(a.delete(3));
        assert_eq!(a.to_canonical_string(), "[5]\n");
        assert!(a.validate().is_empty());
    }

    #[test]
    fn routing_keys_are_all_but_smallest() {
        for seed in 0..20 {
            let mut t = tree(seed);
            for k in [2, 1, 3] {
                t.insert(k).unwrap();
            }
            assert_eq!(t.routing_keys(), vec![2, 3]);
            assert!(t.validate().is_empty());
        }
    }

    #[test]
    fn corrupted_routing_key_is_reported() {
        let mut t = tree(2);
        for k in 0..20 {
            t.insert(k * 2).unwrap();
        }
        assert!(t.validate().is_empty());
        assert!(t.corrupt_routing_key(10, 11));
        assert!(!t.validate().is_empty());
    }

    /// The internal nodes, read with leaves dropped, are the binary zip tree
    /// on all items but the smallest.
    #[test]
    fn internal_skeleton_is_the_binary_tree() {
        let policy = RankPolicy::zipzip(1 << 10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..50 {
            let mut t = ExtTree::new(policy.clone(), KeyedRng::keyed(seed));
            let mut items = BTreeSet::new();
            for _ in 0..60 {
                let k = rng.random_range(0..100);
                if rng.random_bool(0.7) {
                    t.insert(k).unwrap();
                    items.insert(k);
                } else {
                    t.delete(k);
                    items.remove(&k);
                }
            }
            assert!(t.validate().is_empty());
            assert_eq!(t.keys(), items.iter().copied().collect::<Vec<_>>());
            let mut z = ZipTree::new(policy.clone(), KeyedRng::keyed(seed));
            for &k in items.iter().skip(1) {
                z.insert(k).unwrap();
            }
            let skeleton: String = t
                .to_canonical_string()
                .lines()
                .filter(|l| !l.trim_start().trim_start_matches(['L', 'R', ':']).starts_with('['))
                .map(|l| format!("{l}\n"))
                .collect();
            assert_eq!(skeleton, z.to_canonical_string());
        }
    }

    #[test]
    fn delete_then_reinsert_restores_tree() {
        let mut t = tree(6);
        for k in [8, 3, 12, 1, 5, 10, 14] {
            t.insert(k).unwrap();
        }
        let before = t.to_canonical_string();
        for k in [8, 3, 12, 1, 5, 10, 14] {
            assert!(t.delete(k));
            assert!(!t.delete(k));
            assert!(t.validate().is_empty());
            t.insert(k).unwrap();
            assert_eq!(t.to_canonical_string(), before, "key {k}");
        }
        assert_eq!(t.lemma_failures(), 0);
    }
}
