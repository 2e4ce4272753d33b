//! Keyed ranks make the shape a function of the key set alone.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zipzip::external::ExtTree;
use zipzip::persist::PersistentTree;
use zipzip::{Key, KeyedRng, RankPolicy, Variant, ZipTree};

#[derive(Clone, Copy, Debug)]
enum Op {
    Insert(Key),
    Delete(Key),
}

/// A random history and a different one reaching the same key set: the
/// final keys inserted in shuffled order, with inserted-then-deleted noise.
fn sequence_pair(rng: &mut impl Rng, universe: Key, len: usize) -> (Vec<Op>, Vec<Op>) {
    let mut set = BTreeSet::new();
    let mut a = Vec::with_capacity(len);
    for _ in 0..len {
        let k = rng.random_range(0..universe);
        if rng.random_bool(0.65) {
            a.push(Op::Insert(k));
            set.insert(k);
        } else {
            a.push(Op::Delete(k));
            set.remove(&k);
        }
    }
    let mut keys: Vec<Key> = set.iter().copied().collect();
    keys.shuffle(rng);
    let mut b = Vec::new();
    for k in keys {
        b.push(Op::Insert(k));
        if rng.random_bool(0.2) {
            let noise = rng.random_range(0..universe);
            if !set.contains(&noise) {
                b.push(Op::Insert(noise));
                b.push(Op::Delete(noise));
            }
        }
    }
    (a, b)
}

fn zip(policy: &RankPolicy, seed: u64, ops: &[Op]) -> ZipTree {
    let mut t = ZipTree::new(policy.clone(), KeyedRng::keyed(seed));
    for &op in ops {
        match op {
            Op::Insert(k) => {
                t.insert(k).unwrap();
            }
            Op::Delete(k) => {
                t.delete(k);
            }
        }
    }
    t
}

#[test]
fn binary_variants() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for variant in [Variant::Original, Variant::Uniform, Variant::ZipZip] {
        let policy = RankPolicy::for_variant(variant, 256);
        for seed in 0..200 {
            let (a, b) = sequence_pair(&mut rng, 64, 120);
            let (ta, tb) = (zip(&policy, seed, &a), zip(&policy, seed, &b));
            assert!(ta == tb, "{variant} seed {seed}\n{ta}\nvs\n{tb}");
        }
    }
}

#[test]
fn external_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = RankPolicy::zipzip(256);
    for seed in 0..200 {
        let (a, b) = sequence_pair(&mut rng, 64, 120);
        let run = |ops: &[Op]| {
            let mut t = ExtTree::new(policy.clone(), KeyedRng::keyed(seed));
            for &op in ops {
                match op {
                    Op::Insert(k) => {
                        t.insert(k).unwrap();
                    }
                    Op::Delete(k) => {
                        t.delete(k);
                    }
                }
            }
            assert_eq!(t.lemma_failures(), 0);
            t
        };
        assert!(run(&a) == run(&b), "seed {seed}");
    }
}

#[test]
fn persistent_newest_version() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let policy = RankPolicy::zipzip(256);
    for seed in 0..200 {
        let (a, b) = sequence_pair(&mut rng, 64, 120);
        let run = |ops: &[Op]| {
            let mut t = PersistentTree::new(policy.clone(), seed);
            for &op in ops {
                match op {
                    Op::Insert(k) => {
                        t.insert(k).unwrap();
                    }
                    Op::Delete(k) => {
                        t.delete(k);
                    }
                }
            }
            t.canonical_string_at(t.newest_version()).unwrap()
        };
        let (sa, sb) = (run(&a), run(&b));
        assert_eq!(sa, sb, "seed {seed}");
        assert_eq!(sa, zip(&policy, seed, &b).to_canonical_string());
    }
}

#[test]
fn fresh_mode_is_not_keyed() {
    // Control: with one shared stream, insertion order changes the ranks.
    let policy = RankPolicy::zipzip(256);
    let mut differ = 0;
    for seed in 0..20 {
        let mut a = ZipTree::new(policy.clone(), KeyedRng::fresh(seed));
        let mut b = ZipTree::new(policy.clone(), KeyedRng::fresh(seed));
        for k in 0..32 {
            a.insert(k).unwrap();
            b.insert(31 - k).unwrap();
        }
        differ += usize::from(a != b);
    }
    assert!(differ > 15);
}
