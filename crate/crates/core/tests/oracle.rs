//! Incremental updates against the direct recursive construction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zipzip::{Key, KeyedRng, RankPair, RankPolicy, ZipTree};

fn canonical(pairs: &[(Key, RankPair)]) -> ZipTree {
    ZipTree::build_canonical(pairs, RankPolicy::original(), KeyedRng::keyed(0)).unwrap()
}

fn incremental(pairs: &[(Key, RankPair)], order: &[usize]) -> ZipTree {
    let mut t = ZipTree::new(RankPolicy::original(), KeyedRng::keyed(0));
    for &i in order {
        assert!(t.insert_with_rank(pairs[i].0, pairs[i].1));
    }
    t
}

/// Every rank vector in {0,1,2}^n for n <= 9, with and without secondary
/// ranks, in three insertion orders, plus one deletion each.
#[test]
fn exhaustive_small_rank_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0usize;
    for n in 1..=9usize {
        let keys: Vec<Key> = (0..n as u64).map(|i| 10 * i + 3).collect();
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let r1: Vec<u64> = (0..n)
                .map(|_| {
                    let d = c % 3;
                    c /= 3;
                    d as u64
                })
                .collect();
            for with_r2 in [false, true] {
                let pairs: Vec<(Key, RankPair)> = keys
                    .iter()
                    .zip(&r1)
                    .map(|(&k, &r)| {
                        let rank = if with_r2 {
                            RankPair::pair(r, rng.random_range(1..=2))
                        } else {
                            RankPair::new(r)
                        };
                        (k, rank)
                    })
                    .collect();
                let expected = canonical(&pairs);
                let mut shuffled: Vec<usize> = (0..n).collect();
                shuffled.shuffle(&mut rng);
                let orders = [(0..n).collect::<Vec<_>>(), (0..n).rev().collect(), shuffled];
                for order in &orders {
                    let mut t = incremental(&pairs, order);
                    assert!(t == expected, "order {order:?}\n{t}\nvs\n{expected}");
                    let gone = rng.random_range(0..n);
                    assert!(t.delete(pairs[gone].0));
                    let mut rest = pairs.clone();
                    rest.remove(gone);
                    assert!(t == canonical(&rest), "after deleting {}", pairs[gone].0);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 6 * (1..=9).map(|n| 3usize.pow(n)).sum::<usize>());
}

#[test]
fn randomized_thousand_key_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let policy = RankPolicy::zipzip(1000);
    for _ in 0..200 {
        let n = 1000;
        let mut keys: Vec<Key> = (0..n).map(|_| rng.random_range(0..1_000_000)).collect();
        keys.sort_unstable();
        keys.dedup();
        let pairs: Vec<(Key, RankPair)> = keys.iter().map(|&k| (k, policy.draw(k, &mut rng).unwrap())).collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let mut t = incremental(&pairs, &order);
        assert!(t == canonical(&pairs));
        order.truncate(pairs.len() / 2);
        for &i in &order {
            assert!(t.delete(pairs[i].0));
        }
        let mut gone = order.clone();
        gone.sort_unstable();
        let rest: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| gone.binary_search(i).is_err())
            .map(|(_, p)| *p)
            .collect();
        assert!(t == canonical(&rest));
        assert!(t.validate().is_empty());
    }
}

#[test]
fn canonical_builder_rejects_bad_input() {
    let r = RankPair::new(0);
    assert!(ZipTree::build_canonical(&[(1, r), (1, r)], RankPolicy::original(), KeyedRng::keyed(0)).is_err());
    assert!(ZipTree::build_canonical(&[(2, r), (1, r)], RankPolicy::original(), KeyedRng::keyed(0)).is_err());
    assert!(
        ZipTree::build_canonical(&[], RankPolicy::original(), KeyedRng::keyed(0))
            .unwrap()
            .is_empty()
    );
}
