//! Pass/fail checks: history independence, fuzzed validation, oracle
//! agreement and persistence.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zipzip::external::ExtTree;
use zipzip::jit::JitTree;
use zipzip::persist::PersistentTree;
use zipzip::ranks::{seed_mix, WeightFn};
use zipzip::{Key, KeyedRng, RankPair, RankPolicy, Variant, ZipTree};

use crate::table::Table;

/// A structure under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Binary(Variant),
    Jit,
    External,
    Persistent,
}

impl Target {
    pub const ALL: [Target; 8] = [
        Target::Binary(Variant::Original),
        Target::Binary(Variant::Uniform),
        Target::Binary(Variant::ZipZip),
        Target::Binary(Variant::VariableP),
        Target::Binary(Variant::Biased),
        Target::Jit,
        Target::External,
        Target::Persistent,
    ];

    /// Structures whose shape depends only on the key set.
    pub const HISTORY_INDEPENDENT: [Target; 5] = [
        Target::Binary(Variant::Original),
        Target::Binary(Variant::Uniform),
        Target::Binary(Variant::ZipZip),
        Target::External,
        Target::Persistent,
    ];
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Binary(v) => write!(f, "{v}"),
            Target::Jit => f.write_str("jit"),
            Target::External => f.write_str("external"),
            Target::Persistent => f.write_str("persistent"),
        }
    }
}

impl FromStr for Target {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jit" => Ok(Target::Jit),
            "external" => Ok(Target::External),
            "persistent" | "persist" => Ok(Target::Persistent),
            other => match other.parse::<Variant>() {
                Ok(v) => Ok(Target::Binary(v)),
                Err(e) => bail!("{e}"),
            },
        }
    }
}

pub fn parse_targets(s: &str) -> Result<Vec<Target>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Insert(Key),
    Delete(Key),
    Search(Key),
}

/// Policy used by the checks; small ranges keep ties common.
fn check_policy(variant: Variant, n_cap: u64) -> RankPolicy {
    match variant {
        Variant::Biased => RankPolicy::biased(n_cap, WeightFn::new(|k| Some(k % 7 + 1))),
        Variant::VariableP => RankPolicy::variable_p(0.2).expect("valid p"),
        v => RankPolicy::for_variant(v, n_cap),
    }
}

/// A random history and a different one reaching the same key set: the
/// final keys in shuffled order, with inserted-then-deleted noise.
pub fn sequence_pair(rng: &mut impl Rng, universe: Key, len: usize) -> (Vec<Op>, Vec<Op>) {
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

/// Canonical text of `target` after `ops` with keyed ranks.
fn final_shape(target: Target, seed: u64, ops: &[Op]) -> Result<String> {
    let n_cap = 256;
    Ok(match target {
        Target::Binary(v) => {
            let mut t = ZipTree::new(check_policy(v, n_cap), KeyedRng::keyed(seed));
            for &op in ops {
                match op {
                    Op::Insert(k) => {
                        t.insert(k)?;
                    }
                    Op::Delete(k) => {
                        t.delete(k);
                    }
                    Op::Search(_) => {}
                }
            }
            t.to_canonical_string()
        }
        Target::External => {
            let mut t = ExtTree::new(RankPolicy::zipzip(n_cap), KeyedRng::keyed(seed));
            for &op in ops {
                match op {
                    Op::Insert(k) => {
                        t.insert(k)?;
                    }
                    Op::Delete(k) => {
                        t.delete(k);
                    }
                    Op::Search(_) => {}
                }
            }
            t.to_canonical_string()
        }
        Target::Persistent => {
            let mut t = PersistentTree::new(RankPolicy::zipzip(n_cap), seed);
            for &op in ops {
                match op {
                    Op::Insert(k) => {
                        t.insert(k)?;
                    }
                    Op::Delete(k) => {
                        t.delete(k);
                    }
                    Op::Search(_) => {}
                }
            }
            t.canonical_string_at(t.newest_version())?
        }
        Target::Jit => bail!("jit trees are not history independent"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HiStatus {
    Pass,
    Fail { first_seed: u64 },
    Exempt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiRow {
    pub target: Target,
    pub pairs: usize,
    pub seed: u64,
    pub failures: usize,
    pub status: HiStatus,
}

/// Sequence-pair equivalence for each target. A failing row names the
/// first pair seed that reproduces the mismatch.
pub fn hi_check(targets: &[Target], pairs: usize, seed: u64) -> Result<Vec<HiRow>> {
    let mut rows = Vec::new();
    for &target in targets {
        if target == Target::Jit {
            rows.push(HiRow {
                target,
                pairs: 0,
                seed,
                failures: 0,
                status: HiStatus::Exempt,
            });
            continue;
        }
        let mut failures = 0;
        let mut first = None;
        for i in 0..pairs {
            let pair_seed = seed_mix(&[seed, i as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
            let (a, b) = sequence_pair(&mut rng, 64, 120);
            if final_shape(target, pair_seed, &a)? != final_shape(target, pair_seed, &b)? {
                failures += 1;
                first.get_or_insert(pair_seed);
            }
        }
        rows.push(HiRow {
            target,
            pairs,
            seed,
            failures,
            status: match first {
                None => HiStatus::Pass,
                Some(first_seed) => HiStatus::Fail { first_seed },
            },
        });
    }
    Ok(rows)
}

pub fn hi_table(rows: &[HiRow]) -> Table {
    let mut t = Table::new(&["variant", "pairs", "seed", "failures", "status", "reproducer_seed"]);
    for r in rows {
        let (status, repro) = match r.status {
            HiStatus::Pass => ("pass", String::new()),
            HiStatus::Fail { first_seed } => ("fail", first_seed.to_string()),
            HiStatus::Exempt => ("exempt", String::new()),
        };
        t.push(vec![
            r.target.to_string().into(),
            r.pairs.into(),
            r.seed.into(),
            r.failures.into(),
            status.into(),
            repro.into(),
        ]);
    }
    t
}

/// Outcome of one check: how many cases ran and what went wrong.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub name: String,
    pub cases: u64,
    pub failures: Vec<String>,
}

impl CheckReport {
    fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        // keep reports readable when something breaks everywhere
        if self.failures.len() < 20 {
            self.failures.push(msg);
        }
    }
}

pub fn report_table(reports: &[CheckReport], seed: u64) -> Table {
    let mut t = Table::new(&["check", "seed", "cases", "failures", "status", "first_failure"]);
    for r in reports {
        t.push(vec![
            r.name.as_str().into(),
            seed.into(),
            r.cases.into(),
            r.failures.len().into(),
            if r.passed() { "pass" } else { "fail" }.into(),
            r.failures.first().cloned().unwrap_or_default().into(),
        ]);
    }
    t
}

fn random_ops(rng: &mut ChaCha8Rng, universe: Key, count: usize) -> Vec<Op> {
    (0..count)
        .map(|_| {
            let k = rng.random_range(0..universe);
            match rng.random_range(0..6) {
                0..3 => Op::Insert(k),
                3..5 => Op::Delete(k),
                _ => Op::Search(k),
            }
        })
        .collect()
}

/// Where to break a structure on purpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    /// Operation index after which the fault is injected.
    pub after_op: usize,
}

/// Runs `ops` random operations against `target`, comparing with a set and
/// validating after every operation.
pub fn fuzz_target(target: Target, ops: usize, seed: u64, fault: Option<Fault>) -> Result<CheckReport> {
    let mut rep = CheckReport::new(format!("fuzz {target}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0xf022]));
    let universe = 200;
    let script = random_ops(&mut rng, universe, ops);
    let mut set = BTreeSet::new();
    let tree_seed = rng.random();
    match target {
        Target::Binary(v) => {
            let mut t = ZipTree::new(check_policy(v, 64), KeyedRng::fresh(tree_seed));
            for (i, &op) in script.iter().enumerate() {
                match op {
                    Op::Insert(k) => {
                        if t.insert(k)? != set.insert(k) {
                            rep.fail(format!("op {i}: insert({k}) disagrees with the reference set"));
                        }
                    }
                    Op::Delete(k) => {
                        if t.delete(k) != set.remove(&k) {
                            rep.fail(format!("op {i}: delete({k}) disagrees with the reference set"));
                        }
                    }
                    Op::Search(k) => {
                        if t.search(k).found != set.contains(&k) {
                            rep.fail(format!("op {i}: search({k}) disagrees with the reference set"));
                        }
                    }
                }
                if fault.is_some_and(|f| f.after_op == i) {
                    if let Some(r) = t.root_key() {
                        t.swap_children(r);
                    }
                }
                if let Some(v) = t.validate().first() {
                    rep.fail(format!("op {i}: {v}"));
                    break;
                }
                if v.has_geometric_r1() && !t.check_skiplist_isomorphism()? {
                    rep.fail(format!("op {i}: skip-list isomorphism fails"));
                    break;
                }
            }
            if rep.passed() && t.keys() != set.iter().copied().collect::<Vec<_>>() {
                rep.fail("final key set differs".into());
            }
        }
        Target::Jit => {
            let mut t = JitTree::new(RankPolicy::original(), KeyedRng::fresh(tree_seed));
            for (i, &op) in script.iter().enumerate() {
                let ok = match op {
                    Op::Insert(k) => t.insert(k)? == set.insert(k),
                    Op::Delete(k) => t.delete(k) == set.remove(&k),
                    Op::Search(k) => t.search(k).0 == set.contains(&k),
                };
                if !ok {
                    rep.fail(format!("op {i}: {op:?} disagrees with the reference set"));
                }
                if let Some(v) = t.validate().first() {
                    rep.fail(format!("op {i}: {v}"));
                    break;
                }
            }
            if rep.passed() && t.keys() != set.iter().copied().collect::<Vec<_>>() {
                rep.fail("final key set differs".into());
            }
        }
        Target::External => {
            let mut t = ExtTree::new(RankPolicy::zipzip(64), KeyedRng::keyed(tree_seed));
            for (i, &op) in script.iter().enumerate() {
                let ok = match op {
                    Op::Insert(k) => t.insert(k)? == set.insert(k),
                    Op::Delete(k) => t.delete(k) == set.remove(&k),
                    Op::Search(k) => t.search(k).0 == set.contains(&k),
                };
                if !ok {
                    rep.fail(format!("op {i}: {op:?} disagrees with the reference set"));
                }
                if fault.is_some_and(|f| f.after_op == i) {
                    if let Some(&k) = t.routing_keys().first() {
                        t.corrupt_routing_key(k, k + 1);
                    }
                }
                if let Some(v) = t.validate().first() {
                    rep.fail(format!("op {i}: {v}"));
                    break;
                }
            }
            if t.lemma_failures() > 0 {
                rep.fail(format!(
                    "{} insertions broke the leaf placement rule",
                    t.lemma_failures()
                ));
            }
            if rep.passed() && t.keys() != set.iter().copied().collect::<Vec<_>>() {
                rep.fail("final key set differs".into());
            }
        }
        Target::Persistent => {
            let mut t = PersistentTree::new(RankPolicy::zipzip(64), tree_seed);
            let mut snapshots = vec![Vec::new()];
            for &op in &script {
                match op {
                    Op::Insert(k) => {
                        t.insert(k)?;
                        set.insert(k);
                    }
                    Op::Delete(k) | Op::Search(k) => {
                        t.delete(k);
                        set.remove(&k);
                    }
                }
                snapshots.push(set.iter().copied().collect::<Vec<_>>());
            }
            for (v, keys) in snapshots.iter().enumerate() {
                if t.keys_at(v)? != *keys {
                    rep.fail(format!("version {v} does not match its snapshot"));
                }
            }
            if t.recount_slots() != t.space_stats().slot_entries {
                rep.fail("slot accounting drifted".into());
            }
            let mut z = ZipTree::new(RankPolicy::zipzip(64), KeyedRng::keyed(tree_seed));
            for &k in &set {
                z.insert(k)?;
            }
            if t.canonical_string_at(t.newest_version())? != z.to_canonical_string() {
                rep.fail("newest version differs from a fresh tree".into());
            }
        }
    }
    rep.cases = ops as u64;
    Ok(rep)
}

fn incremental(pairs: &[(Key, RankPair)], order: &[usize]) -> ZipTree {
    let mut t = ZipTree::new(RankPolicy::original(), KeyedRng::fresh(0));
    for &i in order {
        t.insert_with_rank(pairs[i].0, pairs[i].1);
    }
    t
}

/// Incremental insertion (and one deletion) against the recursive
/// definition, for every `r1` assignment in `{0,1,2}^n`, `n <= max_n`,
/// with and without `r2 in {1,2}` drawn per key.
pub fn oracle_exhaustive(max_n: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new("oracle exhaustive");
    for n in 0..=max_n {
        let count = 3usize.pow(n as u32);
        for code in 0..count {
            for with_r2 in [false, true] {
                let mut c = code;
                let pairs: Vec<(Key, RankPair)> = (0..n)
                    .map(|i| {
                        let r1 = (c % 3) as u64;
                        c /= 3;
                        let rank = if with_r2 {
                            RankPair::pair(r1, 1 + ((code >> i) & 1) as u64)
                        } else {
                            RankPair::new(r1)
                        };
                        (i as Key * 10, rank)
                    })
                    .collect();
                let canon = ZipTree::build_canonical(&pairs, RankPolicy::original(), KeyedRng::fresh(0))?;
                let forward: Vec<usize> = (0..n).collect();
                let backward: Vec<usize> = (0..n).rev().collect();
                let mut mixed: Vec<usize> = (0..n).collect();
                mixed.shuffle(&mut ChaCha8Rng::seed_from_u64(code as u64));
                for order in [&forward, &backward, &mixed] {
                    rep.cases += 1;
                    let t = incremental(&pairs, order);
                    if t != canon {
                        rep.fail(format!("n={n} ranks {pairs:?} order {order:?}"));
                    }
                }
                if n > 0 {
                    rep.cases += 1;
                    let gone = code % n;
                    let mut t = incremental(&pairs, &forward);
                    t.delete(pairs[gone].0);
                    let rest: Vec<(Key, RankPair)> = pairs
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != gone)
                        .map(|(_, p)| *p)
                        .collect();
                    if t != ZipTree::build_canonical(&rest, RankPolicy::original(), KeyedRng::fresh(0))? {
                        rep.fail(format!("n={n} ranks {pairs:?} delete {}", pairs[gone].0));
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Random rank sets of `n` keys, inserted in random order with a tenth of
/// them deleted, against the recursive definition.
pub fn oracle_random(instances: usize, n: usize, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("oracle random");
    let policy = RankPolicy::zipzip(16);
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0x0a11, i as u64]));
        let mut pairs: Vec<(Key, RankPair)> = Vec::with_capacity(n);
        for k in 0..n as Key {
            pairs.push((k, policy.draw(k, &mut rng)?));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut t = incremental(&pairs, &order);
        let doomed: BTreeSet<Key> = (0..n / 10).map(|_| rng.random_range(0..n as Key)).collect();
        for &k in &doomed {
            t.delete(k);
        }
        let rest: Vec<(Key, RankPair)> = pairs.into_iter().filter(|(k, _)| !doomed.contains(k)).collect();
        rep.cases += 1;
        if t != ZipTree::build_canonical(&rest, RankPolicy::original(), KeyedRng::fresh(0))? {
            rep.fail(format!("instance {i} differs"));
        }
    }
    Ok(rep)
}

/// Every sequence of at most `max_len` inserts and deletes over `keys`
/// keys; all versions of each full-length sequence are checked, which
/// covers every shorter prefix too.
pub fn persist_exhaustive(max_len: usize, keys: Key, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("persistence exhaustive");
    let policy = RankPolicy::zipzip(keys.max(2));
    let mut tree = PersistentTree::new(policy, seed);
    let mut history: Vec<u32> = vec![0];
    persist_dfs(&mut tree, &mut history, max_len, keys, &mut rep)?;
    Ok(rep)
}

fn persist_dfs(
    tree: &mut PersistentTree,
    history: &mut Vec<u32>,
    remaining: usize,
    keys: Key,
    rep: &mut CheckReport,
) -> Result<()> {
    if remaining == 0 {
        rep.cases += 1;
        for (v, &mask) in history.iter().enumerate() {
            for k in 0..keys {
                if tree.search(v, k)? != (mask >> k & 1 == 1) {
                    rep.fail(format!("history {history:?}: version {v}, key {k}"));
                }
            }
        }
        return Ok(());
    }
    let mask = *history.last().expect("version 0");
    for k in 0..keys {
        for insert in [true, false] {
            let mut next = tree.clone();
            let m = if insert {
                next.insert(k)?;
                mask | 1 << k
            } else {
                next.delete(k);
                mask & !(1 << k)
            };
            history.push(m);
            persist_dfs(&mut next, history, remaining - 1, keys, rep)?;
            history.pop();
        }
    }
    Ok(())
}

pub struct ValidateOptions {
    pub targets: Vec<Target>,
    pub ops: usize,
    pub seed: u64,
    pub inject_fault: bool,
    /// Run the exhaustive oracle and persistence checks.
    pub exhaustive: bool,
}

pub fn validate(opts: &ValidateOptions) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let fault = opts.inject_fault.then_some(Fault { after_op: opts.ops / 2 });
    for &target in &opts.targets {
        let rep = fuzz_target(target, opts.ops, seed_mix(&[opts.seed, target_tag(target)]), fault)?;
        out.push(rep);
    }
    if opts.exhaustive {
        out.push(oracle_exhaustive(7)?);
        out.push(oracle_random(50, 1000, opts.seed)?);
        out.push(persist_exhaustive(5, 4, opts.seed)?);
    }
    Ok(out)
}

fn target_tag(target: Target) -> u64 {
    Target::ALL.iter().position(|&t| t == target).unwrap_or(0) as u64
}
