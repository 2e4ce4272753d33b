//! Partially persistent zip trees built from fat nodes.
//!
//! Every update creates a version. Child links are lists of
//! `(version, child)` slots; reading a past version takes the last slot not
//! newer than it. Updates run the same unzip/zip loops as the ephemeral
//! tree against the newest version, so each changed link costs one slot.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::engine::{self, NodeId, ZipStore};
use crate::error::{Error, Result};
use crate::ranks::{Key, KeyedRng, RankPair, RankPolicy};

pub type VersionId = usize;

type Slots = Vec<(u32, Option<NodeId>)>;

#[derive(Clone, Debug)]
struct FatNode {
    key: Key,
    rank: RankPair,
    left: Slots,
    right: Slots,
}

fn at(slots: &Slots, version: u32) -> Option<NodeId> {
    let i = slots.partition_point(|&(v, _)| v <= version);
    if i == 0 {
        None
    } else {
        slots[i - 1].1
    }
}

fn newest(slots: &Slots) -> Option<NodeId> {
    slots.last().and_then(|s| s.1)
}

/// Records `child` at `version`. Returns the change in the number of slots.
fn write(slots: &mut Slots, version: u32, child: Option<NodeId>) -> isize {
    if newest(slots) == child {
        return 0;
    }
    match slots.last_mut() {
        Some(last) if last.0 == version => {
            // Rewritten within one update: keep a single slot, or none if
            // the link is back to what the previous version saw.
            let before = if slots.len() >= 2 {
                slots[slots.len() - 2].1
            } else {
                None
            };
            if before == child {
                slots.pop();
                -1
            } else {
                slots.last_mut().expect("non-empty").1 = child;
                0
            }
        }
        _ => {
            slots.push((version, child));
            1
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpaceStats {
    pub versions: usize,
    pub nodes: usize,
    pub slot_entries: usize,
    pub slots_per_update: f64,
}

/// One row of the space trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceSample {
    pub version: VersionId,
    pub cumulative_slots: usize,
    pub slots_per_update: f64,
}

#[derive(Clone, Debug)]
pub struct PersistentTree {
    nodes: Vec<FatNode>,
    by_key: HashMap<Key, NodeId>,
    /// Root of each version; version 0 is empty.
    roots: Vec<Option<NodeId>>,
    sizes: Vec<usize>,
    policy: RankPolicy,
    rng: KeyedRng,
    /// Fat-node slots plus root changes.
    slot_entries: usize,
    trace: Vec<usize>,
}

impl ZipStore for PersistentTree {
    fn root(&self) -> Option<NodeId> {
        *self.roots.last().expect("version 0 exists")
    }

    fn set_root(&mut self, root: Option<NodeId>) {
        let n = self.roots.len();
        let before = self.roots[n - 2];
        let cur = self.roots[n - 1];
        if cur == root {
            return;
        }
        match (cur == before, root == before) {
            (true, false) => self.slot_entries += 1,
            (false, true) => self.slot_entries -= 1,
            _ => {}
        }
        self.roots[n - 1] = root;
    }

    fn key(&self, id: NodeId) -> Key {
        self.nodes[id as usize].key
    }

    fn left(&self, id: NodeId) -> Option<NodeId> {
        newest(&self.nodes[id as usize].left)
    }

    fn right(&self, id: NodeId) -> Option<NodeId> {
        newest(&self.nodes[id as usize].right)
    }

    fn set_left(&mut self, id: NodeId, child: Option<NodeId>) {
        let v = self.current();
        let d = write(&mut self.nodes[id as usize].left, v, child);
        self.slot_entries = self.slot_entries.wrapping_add_signed(d);
    }

    fn set_right(&mut self, id: NodeId, child: Option<NodeId>) {
        let v = self.current();
        let d = write(&mut self.nodes[id as usize].right, v, child);
        self.slot_entries = self.slot_entries.wrapping_add_signed(d);
    }

    fn dominates(&mut self, a: NodeId, b: NodeId) -> bool {
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        na.rank.dominates(na.key, &nb.rank, nb.key)
    }
}

impl PersistentTree {
    /// Ranks are keyed by `seed`, so a deleted key comes back with the same
    /// rank and its fat node can be reused.
    pub fn new(policy: RankPolicy, seed: u64) -> Self {
        PersistentTree {
            nodes: Vec::new(),
            by_key: HashMap::new(),
            roots: vec![None],
            sizes: vec![0],
            policy,
            rng: KeyedRng::keyed(seed),
            slot_entries: 0,
            trace: vec![0],
        }
    }

    fn current(&self) -> u32 {
        u32::try_from(self.roots.len() - 1).expect("more than 2^32 versions")
    }

    pub fn newest_version(&self) -> VersionId {
        self.roots.len() - 1
    }

    fn check(&self, version: VersionId) -> Result<u32> {
        if version > self.newest_version() {
            return Err(Error::UnknownVersion {
                version,
                newest: self.newest_version(),
            });
        }
        Ok(version as u32)
    }

    fn begin(&mut self) {
        let root = self.root();
        self.roots.push(root);
        self.sizes.push(*self.sizes.last().expect("version 0 exists"));
    }

    fn finish(&mut self) -> VersionId {
        self.trace.push(self.slot_entries);
        self.newest_version()
    }

    pub fn insert(&mut self, key: Key) -> Result<VersionId> {
        // Draw first so a failed draw leaves no half-made version.
        let fresh = if self.by_key.contains_key(&key) {
            None
        } else {
            Some(self.rng.make_rank(&self.policy, key)?)
        };
        self.begin();
        if engine::find(self, key).0.is_none() {
            let id = match fresh {
                Some(rank) => {
                    self.nodes.push(FatNode {
                        key,
                        rank,
                        left: Vec::new(),
                        right: Vec::new(),
                    });
                    let id = u32::try_from(self.nodes.len() - 1).expect("more than 2^32 nodes");
                    self.by_key.insert(key, id);
                    id
                }
                None => self.by_key[&key],
            };
            engine::insert_node(self, id);
            *self.sizes.last_mut().expect("exists") += 1;
        }
        Ok(self.finish())
    }

    pub fn delete(&mut self, key: Key) -> VersionId {
        self.begin();
        if engine::delete_node(self, key).is_some() {
            *self.sizes.last_mut().expect("exists") -= 1;
        }
        self.finish()
    }

    pub fn search(&self, version: VersionId, key: Key) -> Result<bool> {
        let v = self.check(version)?;
        let mut cur = self.roots[version];
        while let Some(c) = cur {
            let n = &self.nodes[c as usize];
            if n.key == key {
                return Ok(true);
            }
            cur = if key < n.key { at(&n.left, v) } else { at(&n.right, v) };
        }
        Ok(false)
    }

    pub fn len_at(&self, version: VersionId) -> Result<usize> {
        self.check(version)?;
        Ok(self.sizes[version])
    }

    /// Keys present in `version`, in order.
    pub fn keys_at(&self, version: VersionId) -> Result<Vec<Key>> {
        let v = self.check(version)?;
        let mut out = Vec::new();
        let mut stack = Vec::new();
        let mut cur = self.roots[version];
        loop {
            while let Some(c) = cur {
                stack.push(c);
                cur = at(&self.nodes[c as usize].left, v);
            }
            let Some(c) = stack.pop() else { break };
            out.push(self.nodes[c as usize].key);
            cur = at(&self.nodes[c as usize].right, v);
        }
        Ok(out)
    }

    /// The text form used by the ephemeral tree, for `version`.
    pub fn canonical_string_at(&self, version: VersionId) -> Result<String> {
        let v = self.check(version)?;
        let mut out = String::new();
        let mut stack: Vec<(NodeId, usize, &str)> = self.roots[version].map(|r| (r, 0, "")).into_iter().collect();
        while let Some((id, depth, side)) = stack.pop() {
            let n = &self.nodes[id as usize];
            let _ = writeln!(out, "{:indent$}{side}({},{})", "", n.key, n.rank, indent = 2 * depth);
            if let Some(r) = at(&n.right, v) {
                stack.push((r, depth + 1, "R:"));
            }
            if let Some(l) = at(&n.left, v) {
                stack.push((l, depth + 1, "L:"));
            }
        }
        Ok(out)
    }

    pub fn space_stats(&self) -> SpaceStats {
        let updates = self.newest_version();
        SpaceStats {
            versions: self.roots.len(),
            nodes: self.nodes.len(),
            slot_entries: self.slot_entries,
            slots_per_update: if updates == 0 {
                0.0
            } else {
                self.slot_entries as f64 / updates as f64
            },
        }
    }

    /// Cumulative slot count after every version.
    pub fn space_trace(&self) -> Vec<SpaceSample> {
        self.trace
            .iter()
            .enumerate()
            .map(|(version, &cumulative_slots)| SpaceSample {
                version,
                cumulative_slots,
                slots_per_update: if version == 0 {
                    0.0
                } else {
                    cumulative_slots as f64 / version as f64
                },
            })
            .collect()
    }

    /// Recounts slots from scratch; equals `space_stats().slot_entries`.
    pub fn recount_slots(&self) -> usize {
        let nodes: usize = self.nodes.iter().map(|n| n.left.len() + n.right.len()).sum();
        let roots = self.roots.windows(2).filter(|w| w[0] != w[1]).count();
        nodes + roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ziptree::ZipTree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn tree() -> PersistentTree {
        PersistentTree::new(RankPolicy::zipzip(1 << 10), 5)
    }

    #[test]
    fn slot_write_rules() {
        let mut s: Slots = Vec::new();
        assert_eq!(write(&mut s, 1, None), 0);
        assert_eq!(write(&mut s, 1, Some(3)), 1);
        assert_eq!(write(&mut s, 1, Some(4)), 0);
        assert_eq!(s, vec![(1, Some(4))]);
        assert_eq!(write(&mut s, 1, None), -1);
        assert!(s.is_empty());
        write(&mut s, 2, Some(7));
        write(&mut s, 5, Some(8));
        assert_eq!(at(&s, 0), None);
        assert_eq!(at(&s, 2), Some(7));
        assert_eq!(at(&s, 4), Some(7));
        assert_eq!(at(&s, 9), Some(8));
    }

    #[test]
    fn empty_tree() {
        let t = tree();
        assert_eq!(
            t.space_stats(),
            SpaceStats {
                versions: 1,
                nodes: 0,
                slot_entries: 0,
                slots_per_update: 0.0
            }
        );
        assert_eq!(t.search(0, 1), Ok(false));
        assert!(matches!(
            t.search(1, 1),
            Err(Error::UnknownVersion { version: 1, newest: 0 })
        ));
    }

    #[test]
    fn insert_then_delete() {
        let mut t = tree();
        assert_eq!(t.insert(4).unwrap(), 1);
        assert_eq!(t.delete(4), 2);
        assert_eq!(t.delete(4), 3);
        assert_eq!(t.search(1, 4), Ok(true));
        assert_eq!(t.search(2, 4), Ok(false));
        assert_eq!(t.keys_at(3).unwrap(), Vec::<Key>::new());
        assert_eq!(t.insert(4).unwrap(), 4);
        assert_eq!(t.space_stats().nodes, 1);
        assert_eq!(t.recount_slots(), t.space_stats().slot_entries);
    }

    #[test]
    fn random_history_matches_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = tree();
        let mut set = BTreeSet::new();
        let mut snapshots = vec![(Vec::new(), String::new())];
        for _ in 0..400 {
            let k = rng.random_range(0..60);
            if rng.random_bool(0.6) {
                t.insert(k).unwrap();
                set.insert(k);
            } else {
                t.delete(k);
                set.remove(&k);
            }
            let v = t.newest_version();
            snapshots.push((
                set.iter().copied().collect::<Vec<_>>(),
                t.canonical_string_at(v).unwrap(),
            ));
        }
        for (v, (keys, text)) in snapshots.iter().enumerate() {
            assert_eq!(&t.keys_at(v).unwrap(), keys, "version {v}");
            assert_eq!(&t.canonical_string_at(v).unwrap(), text, "version {v}");
            assert_eq!(t.len_at(v).unwrap(), keys.len());
            for k in 0..60 {
                assert_eq!(t.search(v, k).unwrap(), keys.binary_search(&k).is_ok());
            }
        }
        let mut z = ZipTree::new(RankPolicy::zipzip(1 << 10), KeyedRng::keyed(5));
        for &k in &set {
            z.insert(k).unwrap();
        }
        assert_eq!(
            t.canonical_string_at(t.newest_version()).unwrap(),
            z.to_canonical_string()
        );
        assert_eq!(t.recount_slots(), t.space_stats().slot_entries);
        let trace = t.space_trace();
        assert_eq!(trace.len(), 401);
        assert_eq!(trace.last().unwrap().cumulative_slots, t.space_stats().slot_entries);
    }
}
