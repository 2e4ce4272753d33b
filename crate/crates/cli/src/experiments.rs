//! Monte Carlo experiments. Each one returns structured rows plus a table.
//!
//! Trials run in parallel with per-trial seeds and are gathered in trial
//! order, so the output does not depend on scheduling.

use anyhow::{bail, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use zipzip::jit::JitTree;
use zipzip::persist::PersistentTree;
use zipzip::ranks::{seed_mix, WeightFn};
use zipzip::stats::{
    expected_depth_profile, fit_line, fit_loglog, mean_and_se, DepthSummary, FitResult, TrialRecord, XTransform,
};
use zipzip::{Key, KeyedRng, RankPair, RankPolicy, Variant, ZipTree};

use crate::config::{insertion_keys, trial_seed, ExperimentConfig, Order};
use crate::svg::Chart;
use crate::table::{Cell, Table};

/// Policy for one of the binary variants, sized for `n` keys.
pub fn policy_for(variant: Variant, n: usize, cfg: &ExperimentConfig) -> Result<RankPolicy> {
    let n_cap = n.max(2) as u64;
    let policy = match variant {
        Variant::VariableP => RankPolicy::variable_p(cfg.p)?,
        Variant::Biased => RankPolicy::biased(n_cap, WeightFn::new(|_| Some(1))),
        v => RankPolicy::for_variant(v, n_cap),
    };
    let policy = policy.with_c(cfg.c)?;
    Ok(match variant {
        Variant::Original | Variant::Uniform => policy,
        _ => policy.with_p(cfg.p)?,
    })
}

/// Builds one tree over keys `0..n`.
pub fn build_tree(policy: &RankPolicy, n: usize, order: Order, seed: u64) -> Result<ZipTree> {
    let mut t = ZipTree::with_capacity(policy.clone(), KeyedRng::fresh(seed), n);
    for k in insertion_keys(n, order, seed) {
        t.insert(k)?;
    }
    Ok(t)
}

/// Shape numbers of one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeTrial {
    pub record: TrialRecord,
    pub group_count: usize,
    pub group_max: u32,
}

fn shape_trial(policy: &RankPolicy, n: usize, order: Order, seed: u64) -> Result<ShapeTrial> {
    let s = build_tree(policy, n, order, seed)?.stats();
    Ok(ShapeTrial {
        record: TrialRecord::from(&s),
        group_count: s.rank_group_sizes.len(),
        group_max: s.rank_group_sizes.iter().copied().max().unwrap_or(0),
    })
}

/// Summary of one `(variant, n)` cell of a depth experiment. Depths are in
/// levels (root = 1); the `_edges` helpers subtract the root level.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthRow {
    pub label: String,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub summary: DepthSummary,
    pub se_smallest: f64,
    pub se_largest: f64,
    pub se_mean: f64,
    pub se_height: f64,
    /// Total keys over total groups.
    pub group_mean: f64,
    pub group_max: u32,
    pub trial_heights: Vec<u32>,
}

impl DepthRow {
    pub fn smallest_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_depth_smallest)
    }

    pub fn largest_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_depth_largest)
    }

    pub fn mean_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_depth_all)
    }

    pub fn height_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_height)
    }

    pub fn mean_edges_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_depth_all - 1.0)
    }

    pub fn height_edges_scaled(&self) -> f64 {
        self.summary.scaled(self.summary.mean_height - 1.0)
    }
}

/// Runs `trials` trees of `n` keys under `policy`.
pub fn depth_row(label: &str, policy: &RankPolicy, n: usize, cfg: &ExperimentConfig) -> Result<DepthRow> {
    let trials: Vec<ShapeTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| shape_trial(policy, n, cfg.order, trial_seed(cfg.seed, label, n, t)))
        .collect::<Result<_>>()?;
    let records: Vec<TrialRecord> = trials.iter().map(|t| t.record).collect();
    let summary = DepthSummary::from_records(n, &records)?;
    let se = |f: fn(&TrialRecord) -> f64| mean_and_se(&records.iter().map(f).collect::<Vec<_>>()).1;
    let groups: usize = trials.iter().map(|t| t.group_count).sum();
    Ok(DepthRow {
        label: label.to_string(),
        n,
        trials: cfg.trials,
        seed: cfg.seed,
        summary,
        se_smallest: se(|r| r.depth_smallest),
        se_largest: se(|r| r.depth_largest),
        se_mean: se(|r| r.depth_mean),
        se_height: se(|r| r.height),
        group_mean: if groups == 0 {
            0.0
        } else {
            (n * cfg.trials) as f64 / groups as f64
        },
        group_max: trials.iter().map(|t| t.group_max).max().unwrap_or(0),
        trial_heights: records.iter().map(|r| r.height as u32).collect(),
    })
}

/// Every `(variant, n)` pair of the config.
pub fn depth_rows(cfg: &ExperimentConfig) -> Result<Vec<DepthRow>> {
    let mut rows = Vec::new();
    for &v in &cfg.variants {
        for &n in &cfg.n_list {
            rows.push(depth_row(v.name(), &policy_for(v, n, cfg)?, n, cfg)?);
        }
    }
    Ok(rows)
}

pub fn check_depth_variants(cfg: &ExperimentConfig) -> Result<()> {
    if let Some(v) = cfg
        .variants
        .iter()
        .find(|v| !matches!(v, Variant::Original | Variant::Uniform | Variant::ZipZip))
    {
        bail!("variant {v} is not supported here (expected original, uniform or zipzip)");
    }
    Ok(())
}

pub fn discrepancy_table(rows: &[DepthRow]) -> Table {
    let mut t = Table::new(&[
        "variant",
        "n",
        "trials",
        "seed",
        "depth_smallest",
        "depth_largest",
        "smallest_over_log2n",
        "largest_over_log2n",
        "se_smallest",
        "se_largest",
    ]);
    for r in rows {
        t.push(vec![
            r.label.as_str().into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            r.summary.mean_depth_smallest.into(),
            r.summary.mean_depth_largest.into(),
            r.smallest_scaled().into(),
            r.largest_scaled().into(),
            r.se_smallest.into(),
            r.se_largest.into(),
        ]);
    }
    t
}

pub fn discrepancy_chart(rows: &[DepthRow]) -> Chart {
    let mut series = Vec::new();
    for label in labels(rows) {
        let pick = |f: fn(&DepthRow) -> f64| {
            rows.iter()
                .filter(|r| r.label == label)
                .map(|r| (r.n as f64, f(r)))
                .collect()
        };
        series.push((format!("{label} smallest"), pick(DepthRow::smallest_scaled)));
        series.push((format!("{label} largest"), pick(DepthRow::largest_scaled)));
    }
    Chart {
        title: "Depth of the smallest and largest keys".into(),
        x_label: "n".into(),
        y_label: "depth / log2 n".into(),
        log_x: true,
        series,
    }
}

const SHAPE_COLUMNS: [&str; 12] = [
    "avg_depth",
    "height",
    "avg_depth_over_log2n",
    "height_over_log2n",
    "avg_edges_over_log2n",
    "height_edges_over_log2n",
    "se_avg_depth",
    "se_height",
    "root_r1",
    "root_r1_over_loglog2n",
    "mean_group_size",
    "max_group_size",
];

fn shape_cells(r: &DepthRow) -> Vec<Cell> {
    vec![
        r.summary.mean_depth_all.into(),
        r.summary.mean_height.into(),
        r.mean_scaled().into(),
        r.height_scaled().into(),
        r.mean_edges_scaled().into(),
        r.height_edges_scaled().into(),
        r.se_mean.into(),
        r.se_height.into(),
        r.summary.mean_root_r1.into(),
        r.summary.scaled_root_r1().into(),
        r.group_mean.into(),
        r.group_max.into(),
    ]
}

pub fn depth_height_table(rows: &[DepthRow]) -> Table {
    let mut header = vec!["variant", "n", "trials", "seed"];
    header.extend(SHAPE_COLUMNS);
    let mut t = Table::new(&header);
    for r in rows {
        let mut row: Vec<Cell> = vec![r.label.as_str().into(), r.n.into(), r.trials.into(), r.seed.into()];
        row.extend(shape_cells(r));
        t.push(row);
    }
    t
}

pub fn depth_height_chart(rows: &[DepthRow]) -> Chart {
    let mut series = Vec::new();
    for label in labels(rows) {
        let pick = |f: fn(&DepthRow) -> f64| {
            rows.iter()
                .filter(|r| r.label == label)
                .map(|r| (r.n as f64, f(r)))
                .collect()
        };
        series.push((format!("{label} depth"), pick(DepthRow::mean_edges_scaled)));
        series.push((format!("{label} height"), pick(DepthRow::height_edges_scaled)));
    }
    Chart {
        title: "Average depth and height".into(),
        x_label: "n".into(),
        y_label: "edges / log2 n".into(),
        log_x: true,
        series,
    }
}

fn labels(rows: &[DepthRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.label) {
            out.push(r.label.clone());
        }
    }
    out
}

/// Mean and standard error of every key's depth over `trials` trees.
pub fn depth_profile(policy: &RankPolicy, n: usize, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let per_trial: Vec<Vec<u32>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let tree = build_tree(policy, n, Order::Sequential, trial_seed(seed, "profile", n, t))?;
            Ok(tree.stats().per_key_depth.iter().map(|&(_, d)| d).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let xs: Vec<f64> = per_trial.iter().map(|d| f64::from(d[j])).collect();
        out.push(mean_and_se(&xs));
    }
    Ok(out)
}

/// Positions whose sample mean lies within `z` standard errors of the
/// analytic expectation.
pub fn profile_agreement(profile: &[(f64, f64)], z: f64) -> Result<usize> {
    let expected = expected_depth_profile(profile.len() as u64)?;
    Ok(profile
        .iter()
        .zip(expected)
        .filter(|((m, se), e)| (m - e).abs() <= z * se.max(1e-12))
        .count())
}

/// Where a rank sits in one total order of all ranks of a policy, as
/// `(group, position within group)`: `idx = group * span + pos - 1`.
#[derive(Clone, Copy, Debug)]
struct RankLattice {
    span: u64,
    /// Success probability of the group draw; `None` means one group.
    p: Option<f64>,
}

impl RankLattice {
    fn of(policy: &RankPolicy) -> Result<Self> {
        match policy.variant() {
            Variant::Uniform => Ok(RankLattice {
                span: policy.uniform_range(),
                p: None,
            }),
            Variant::ZipZip => Ok(RankLattice {
                span: policy.secondary_range(),
                p: Some(policy.p()),
            }),
            v => bail!("rank ties are measured for uniform and zipzip, not {v}"),
        }
    }

    fn split(&self, r: &RankPair) -> (u64, u64) {
        match self.p {
            None => (0, r.r1),
            Some(_) => (r.r1, r.r2.unwrap_or(1)),
        }
    }

    fn p_group(&self, g: u64) -> f64 {
        match self.p {
            None => f64::from(u8::from(g == 0)),
            Some(p) => p * (1.0 - p).powf(g as f64),
        }
    }

    fn p_group_below(&self, g: u64) -> f64 {
        match self.p {
            None => f64::from(u8::from(g > 0)),
            Some(p) => 1.0 - (1.0 - p).powf(g as f64),
        }
    }

    /// `P(rank <= (g, u))` for a fresh rank.
    fn cdf(&self, g: u64, u: u64) -> f64 {
        self.p_group_below(g) + self.p_group(g) * u as f64 / self.span as f64
    }

    /// The position just below `(g, u)`, or `None` at the very bottom.
    fn pred(&self, g: u64, u: u64) -> Option<(u64, u64)> {
        if u > 1 {
            Some((g, u - 1))
        } else if g > 0 {
            Some((g - 1, self.span))
        } else {
            None
        }
    }
}

/// Expected rank comparisons and full-rank ties of inserting `key` into
/// `tree`, averaged over the new key's rank.
///
/// Insertion compares the new rank with each node on the search path until
/// it wins; a node is reached iff the new rank lost to everything above it.
fn expected_insert_cost(tree: &ZipTree, lattice: &RankLattice, key: Key) -> (f64, f64) {
    let mut bound: Option<Option<(u64, u64)>> = None; // None: unbounded
    let mut comparisons = 0.0;
    let mut ties = 0.0;
    for (k, rank) in tree.search_path(key) {
        let reach = match bound {
            None => 1.0,
            Some(None) => 0.0,
            Some(Some((g, u))) => lattice.cdf(g, u),
        };
        if reach == 0.0 {
            break;
        }
        comparisons += reach;
        let (g, u) = lattice.split(&rank);
        let below_bound = match bound {
            None => true,
            Some(None) => false,
            Some(Some(b)) => (g, u) <= b,
        };
        if below_bound {
            ties += lattice.p_group(g) / lattice.span as f64;
        }
        // the new key passes this node iff its rank is below it, or equal
        // with this node holding the smaller key
        let pass = if k < key { Some((g, u)) } else { lattice.pred(g, u) };
        bound = Some(match (bound, pass) {
            (None, p) => p,
            (Some(None), _) | (_, None) => None,
            (Some(Some(b)), Some(p)) => Some(b.min(p)),
        });
    }
    (comparisons, ties)
}

/// Tie statistics of building one tree.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TieTrial {
    pub expected_comparisons: f64,
    pub expected_ties: f64,
    pub comparisons: u64,
    pub ties: u64,
}

pub fn tie_trial(policy: &RankPolicy, n: usize, order: Order, seed: u64) -> Result<TieTrial> {
    let lattice = RankLattice::of(policy)?;
    let mut tree = ZipTree::with_capacity(policy.clone(), KeyedRng::fresh(seed), n);
    let mut out = TieTrial::default();
    for k in insertion_keys(n, order, seed) {
        let (c, t) = expected_insert_cost(&tree, &lattice, k);
        out.expected_comparisons += c;
        out.expected_ties += t;
        tree.insert(k)?;
    }
    let counters = tree.counters();
    out.comparisons = counters.comparisons;
    out.ties = counters.ties;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TieRow {
    pub variant: Variant,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub expected_ties_per_comparison: f64,
    pub expected_ties_per_insert: f64,
    pub observed_ties_per_comparison: f64,
    pub observed_ties_per_insert: f64,
    pub comparisons_per_insert: f64,
}

impl TieRow {
    /// The quantity fitted for this variant.
    pub fn rate(&self) -> f64 {
        match self.variant {
            Variant::Uniform => self.expected_ties_per_comparison,
            _ => self.expected_ties_per_insert,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TieResult {
    pub rows: Vec<TieRow>,
    pub fits: Vec<(Variant, FitResult)>,
}

pub fn rank_ties(cfg: &ExperimentConfig) -> Result<TieResult> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &v in &cfg.variants {
        if !matches!(v, Variant::Uniform | Variant::ZipZip) {
            bail!("rank ties are measured for uniform and zipzip, not {v}");
        }
        let mut points = Vec::new();
        for &n in &cfg.n_list {
            let policy = policy_for(v, n, cfg)?;
            let trials: Vec<TieTrial> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| tie_trial(&policy, n, cfg.order, trial_seed(cfg.seed, v.name(), n, t)))
                .collect::<Result<_>>()?;
            let sum = |f: fn(&TieTrial) -> f64| trials.iter().map(f).sum::<f64>();
            let (ec, et) = (sum(|t| t.expected_comparisons), sum(|t| t.expected_ties));
            let (oc, ot) = (sum(|t| t.comparisons as f64), sum(|t| t.ties as f64));
            let inserts = (n * cfg.trials) as f64;
            let row = TieRow {
                variant: v,
                n,
                trials: cfg.trials,
                seed: cfg.seed,
                expected_ties_per_comparison: et / ec,
                expected_ties_per_insert: et / inserts,
                observed_ties_per_comparison: if oc > 0.0 { ot / oc } else { 0.0 },
                observed_ties_per_insert: ot / inserts,
                comparisons_per_insert: ec / inserts,
            };
            points.push((n as f64, row.rate()));
            rows.push(row);
        }
        if points.len() >= 3 && points.iter().all(|p| p.1 > 0.0) {
            let transform = if v == Variant::Uniform {
                XTransform::Log
            } else {
                XTransform::LogLog
            };
            fits.push((v, fit_loglog(&points, transform)?));
        }
    }
    Ok(TieResult { rows, fits })
}

pub fn ties_table(res: &TieResult) -> Table {
    let mut t = Table::new(&[
        "variant",
        "n",
        "trials",
        "seed",
        "expected_ties_per_comparison",
        "expected_ties_per_insert",
        "observed_ties_per_comparison",
        "observed_ties_per_insert",
        "comparisons_per_insert",
    ]);
    for r in &res.rows {
        t.push(vec![
            r.variant.name().into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            r.expected_ties_per_comparison.into(),
            r.expected_ties_per_insert.into(),
            r.observed_ties_per_comparison.into(),
            r.observed_ties_per_insert.into(),
            r.comparisons_per_insert.into(),
        ]);
    }
    t
}

pub fn ties_fit_table(res: &TieResult) -> Table {
    let mut t = Table::new(&["variant", "x_axis", "slope", "intercept", "r_squared"]);
    for (v, f) in &res.fits {
        let axis = if *v == Variant::Uniform {
            "log2 n"
        } else {
            "log2 log2 n"
        };
        t.push(vec![
            v.name().into(),
            axis.into(),
            f.slope.into(),
            f.intercept.into(),
            f.r_squared.into(),
        ]);
    }
    t
}

pub fn ties_chart(res: &TieResult) -> Chart {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &res.rows {
        let name = r.variant.name().to_string();
        let point = (r.n as f64, r.rate().log2());
        match series.iter_mut().find(|s| s.0 == name) {
            Some(s) => s.1.push(point),
            None => series.push((name, vec![point])),
        }
    }
    Chart {
        title: "Rank ties".into(),
        x_label: "n".into(),
        y_label: "log2 tie rate".into(),
        log_x: true,
        series,
    }
}

/// Metadata of one JIT tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JitTrial {
    pub r1_diff_bits: f64,
    pub r2_bits: f64,
    pub r1_bits: f64,
    pub total_bits: f64,
    pub rounds: f64,
}

pub fn jit_trial(n: usize, p: f64, order: Order, seed: u64) -> Result<JitTrial> {
    let mut t = JitTree::new(RankPolicy::original().with_p(p)?, KeyedRng::fresh(seed));
    for k in insertion_keys(n, order, seed) {
        t.insert(k)?;
    }
    let m = t.metadata();
    let n = n as f64;
    Ok(JitTrial {
        r1_diff_bits: m.r1_diff_bits as f64 / n,
        r2_bits: m.r2_bits_per_node(),
        r1_bits: m.r1_bits_per_node(),
        total_bits: m.total_bits() as f64 / n,
        rounds: t.counters().rounds as f64 / n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JitRow {
    pub order: Order,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub r1_diff_bits_per_node: f64,
    pub r2_bits_per_node: f64,
    pub r1_bits_per_node: f64,
    pub total_bits_per_node: f64,
    pub max_total_bits_per_node: f64,
    pub rounds_per_insert: f64,
}

/// Both insertion orders unless `orders` narrows them.
pub fn jit_bits(cfg: &ExperimentConfig, orders: &[Order]) -> Result<Vec<JitRow>> {
    let mut rows = Vec::new();
    for &order in orders {
        for &n in &cfg.n_list {
            let label = format!("jit-{order}");
            let trials: Vec<JitTrial> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| jit_trial(n, cfg.p, order, trial_seed(cfg.seed, &label, n, t)))
                .collect::<Result<_>>()?;
            let mean = |f: fn(&JitTrial) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
            rows.push(JitRow {
                order,
                n,
                trials: cfg.trials,
                seed: cfg.seed,
                r1_diff_bits_per_node: mean(|t| t.r1_diff_bits),
                r2_bits_per_node: mean(|t| t.r2_bits),
                r1_bits_per_node: mean(|t| t.r1_bits),
                total_bits_per_node: mean(|t| t.total_bits),
                max_total_bits_per_node: trials.iter().map(|t| t.total_bits).fold(0.0, f64::max),
                rounds_per_insert: mean(|t| t.rounds),
            });
        }
    }
    Ok(rows)
}

pub fn jit_table(rows: &[JitRow]) -> Table {
    let mut t = Table::new(&[
        "variant",
        "n",
        "trials",
        "seed",
        "order",
        "r1_diff_bits_per_node",
        "r2_bits_per_node",
        "r1_bits_per_node",
        "total_bits_per_node",
        "max_total_bits_per_node",
        "tie_rounds_per_insert",
    ]);
    for r in rows {
        t.push(vec![
            "jit".into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            r.order.to_string().into(),
            r.r1_diff_bits_per_node.into(),
            r.r2_bits_per_node.into(),
            r.r1_bits_per_node.into(),
            r.total_bits_per_node.into(),
            r.max_total_bits_per_node.into(),
            r.rounds_per_insert.into(),
        ]);
    }
    t
}

pub fn jit_chart(rows: &[JitRow]) -> Chart {
    let mut series = Vec::new();
    for order in [Order::Sequential, Order::Random] {
        let sel: Vec<&JitRow> = rows.iter().filter(|r| r.order == order).collect();
        if sel.is_empty() {
            continue;
        }
        series.push((
            format!("r2 {order}"),
            sel.iter().map(|r| (r.n as f64, r.r2_bits_per_node)).collect(),
        ));
        series.push((
            format!("total {order}"),
            sel.iter().map(|r| (r.n as f64, r.total_bits_per_node)).collect(),
        ));
    }
    Chart {
        title: "Rank metadata of just-in-time trees".into(),
        x_label: "n".into(),
        y_label: "bits per node".into(),
        log_x: true,
        series,
    }
}

pub const DEFAULT_P_LIST: [f64; 12] = [1e-5, 1e-4, 2e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999];

/// Geometric `p` sweep at the largest size of the config.
pub fn vary_p(cfg: &ExperimentConfig, ps: &[f64]) -> Result<Vec<(f64, DepthRow)>> {
    let n = *cfg.n_list.iter().max().expect("checked config");
    ps.iter()
        .map(|&p| {
            let policy = RankPolicy::variable_p(p)?;
            Ok((p, depth_row(&format!("p={p}"), &policy, n, cfg)?))
        })
        .collect()
}

pub fn vary_p_table(rows: &[(f64, DepthRow)]) -> Table {
    let mut header = vec!["variant", "n", "trials", "seed", "p"];
    header.extend(SHAPE_COLUMNS);
    let mut t = Table::new(&header);
    for (p, r) in rows {
        let mut row: Vec<Cell> = vec![
            "variable_p".into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            (*p).into(),
        ];
        row.extend(shape_cells(r));
        t.push(row);
    }
    t
}

pub fn vary_p_chart(rows: &[(f64, DepthRow)]) -> Chart {
    let pick = |f: fn(&DepthRow) -> f64| rows.iter().map(|(p, r)| (*p, f(r))).collect();
    Chart {
        title: "Varying the geometric parameter".into(),
        x_label: "p".into(),
        y_label: "per log2 n (rank per log2 log2 n)".into(),
        log_x: true,
        series: vec![
            ("depth".into(), pick(DepthRow::mean_edges_scaled)),
            ("height".into(), pick(DepthRow::height_edges_scaled)),
            ("root r1".into(), pick(|r| r.summary.scaled_root_r1())),
        ],
    }
}

/// Weight of the single heavy key; every other key weighs 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// `sqrt(n)`
    Sqrt,
    /// `n`
    Linear,
    /// `n^2`
    Square,
    /// `n - 1`, half of the total weight.
    Half,
    /// No heavy key.
    Equal,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::Sqrt,
        Profile::Linear,
        Profile::Square,
        Profile::Half,
        Profile::Equal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Sqrt => "sqrt_n",
            Profile::Linear => "n",
            Profile::Square => "n_squared",
            Profile::Half => "half",
            Profile::Equal => "equal",
        }
    }

    pub fn heavy_weight(self, n: usize) -> u64 {
        let n = n as u64;
        match self {
            Profile::Sqrt => ((n as f64).sqrt().round() as u64).max(1),
            Profile::Linear => n,
            Profile::Square => n.saturating_mul(n),
            Profile::Half => n.saturating_sub(1).max(1),
            Profile::Equal => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasedRow {
    pub profile: Profile,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub heavy_key: Key,
    pub heavy_weight: u64,
    pub total_weight: u64,
    pub log_ratio: f64,
    pub depth_mean: f64,
    pub depth_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasedResult {
    pub rows: Vec<BiasedRow>,
    /// Heavy-key depth against `log2(W / w)` over the sqrt, n and n^2
    /// profiles.
    pub fit: Option<FitResult>,
}

pub fn biased(cfg: &ExperimentConfig, profiles: &[Profile]) -> Result<BiasedResult> {
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        for &profile in profiles {
            let heavy_key = (n / 2) as Key;
            let w = profile.heavy_weight(n);
            let weights = WeightFn::new(move |k| Some(if k == heavy_key { w } else { 1 }));
            let policy = RankPolicy::biased(n.max(2) as u64, weights)
                .with_c(cfg.c)?
                .with_p(cfg.p)?;
            let label = format!("biased-{}", profile.name());
            let depths: Vec<f64> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let tree = build_tree(&policy, n, cfg.order, trial_seed(cfg.seed, &label, n, t))?;
                    Ok(f64::from(tree.search(heavy_key).depth as u32))
                })
                .collect::<Result<_>>()?;
            let (depth_mean, depth_se) = mean_and_se(&depths);
            let total_weight = (n as u64 - 1) + w;
            rows.push(BiasedRow {
                profile,
                n,
                trials: cfg.trials,
                seed: cfg.seed,
                heavy_key,
                heavy_weight: w,
                total_weight,
                log_ratio: (total_weight as f64 / w as f64).log2(),
                depth_mean,
                depth_se,
            });
        }
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| matches!(r.profile, Profile::Sqrt | Profile::Linear | Profile::Square))
        .map(|r| (r.log_ratio, r.depth_mean))
        .collect();
    let fit = if points.len() >= 3 {
        fit_line(&points).ok()
    } else {
        None
    };
    Ok(BiasedResult { rows, fit })
}

pub fn biased_table(res: &BiasedResult) -> Table {
    let mut t = Table::new(&[
        "variant",
        "n",
        "trials",
        "seed",
        "profile",
        "heavy_key",
        "heavy_weight",
        "total_weight",
        "log2_total_over_heavy",
        "heavy_depth",
        "se_heavy_depth",
    ]);
    for r in &res.rows {
        t.push(vec![
            "biased".into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            r.profile.name().into(),
            r.heavy_key.into(),
            r.heavy_weight.into(),
            r.total_weight.into(),
            r.log_ratio.into(),
            r.depth_mean.into(),
            r.depth_se.into(),
        ]);
    }
    t
}

pub fn biased_chart(res: &BiasedResult) -> Chart {
    let mut pts: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.log_ratio, r.depth_mean)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut series = vec![("heavy key".to_string(), pts)];
    if let Some(f) = res.fit {
        let xs: Vec<f64> = res.rows.iter().map(|r| r.log_ratio).collect();
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        series.push((
            "fit".into(),
            vec![(lo, f.intercept + f.slope * lo), (hi, f.intercept + f.slope * hi)],
        ));
    }
    Chart {
        title: "Depth of a heavy key".into(),
        x_label: "log2(W / w)".into(),
        y_label: "depth".into(),
        log_x: false,
        series,
    }
}

/// One random update workload on a persistent tree.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistTrial {
    pub updates: usize,
    pub versions: usize,
    pub nodes: usize,
    pub slot_entries: usize,
    pub slots_per_update: f64,
    /// Worst cumulative slots per update over all checkpoints.
    pub worst_checkpoint: f64,
    pub queries: usize,
    pub mismatches: usize,
    pub trace: Vec<(usize, usize, f64)>,
}

/// `n` inserts in random order, then `n` mixed inserts and deletes over a
/// universe of `2n` keys. Every version is checked against a per-key
/// history with random point queries, and every `checkpoint` versions
/// against a full snapshot.
pub fn persist_trial(policy: &RankPolicy, n: usize, seed: u64, checkpoint: usize) -> Result<PersistTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0x9e75]));
    let universe = 2 * n as Key;
    let mut tree = PersistentTree::new(policy.clone(), seed);
    // versions at which each key flips membership
    let mut flips: Vec<Vec<usize>> = vec![Vec::new(); universe as usize];
    let mut present: Vec<Key> = Vec::new();
    let mut pos: Vec<Option<usize>> = vec![None; universe as usize];
    let mut snapshots = vec![(0usize, Vec::<Key>::new())];
    let checkpoint = checkpoint.max(1);

    let mut first: Vec<Key> = (0..universe).collect();
    first.shuffle(&mut rng);
    first.truncate(n);
    let mut script: Vec<(bool, Key)> = first.into_iter().map(|k| (true, k)).collect();
    for _ in 0..n {
        script.push((rng.random_bool(0.5), rng.random_range(0..universe)));
    }
    for (i, (insert, mut k)) in script.into_iter().enumerate() {
        // mixed phase: insert an absent key, delete a present one
        if i >= n {
            if insert {
                while pos[k as usize].is_some() {
                    k = rng.random_range(0..universe);
                }
            } else if let Some(&pick) = present.get(rng.random_range(0..present.len().max(1))) {
                k = pick;
            }
        }
        let v = if insert {
            let v = tree.insert(k)?;
            if pos[k as usize].is_none() {
                pos[k as usize] = Some(present.len());
                present.push(k);
                flips[k as usize].push(v);
            }
            v
        } else {
            let v = tree.delete(k);
            if let Some(at) = pos[k as usize].take() {
                present.swap_remove(at);
                if let Some(&moved) = present.get(at) {
                    pos[moved as usize] = Some(at);
                }
                flips[k as usize].push(v);
            }
            v
        };
        if v % checkpoint == 0 {
            let mut keys = present.clone();
            keys.sort_unstable();
            snapshots.push((v, keys));
        }
    }

    let newest = tree.newest_version();
    let mut mismatches = 0;
    for (v, keys) in &snapshots {
        if tree.keys_at(*v)? != *keys {
            mismatches += 1;
        }
    }
    let queries = 4 * newest;
    for _ in 0..queries {
        let v = rng.random_range(0..=newest);
        let k = rng.random_range(0..universe);
        let expected = flips[k as usize].partition_point(|&f| f <= v) % 2 == 1;
        if tree.search(v, k)? != expected {
            mismatches += 1;
        }
    }
    let stats = tree.space_stats();
    let trace: Vec<(usize, usize, f64)> = tree
        .space_trace()
        .into_iter()
        .filter(|s| s.version % checkpoint == 0 || s.version == newest)
        .map(|s| (s.version, s.cumulative_slots, s.slots_per_update))
        .collect();
    Ok(PersistTrial {
        updates: newest,
        versions: stats.versions,
        nodes: stats.nodes,
        slot_entries: stats.slot_entries,
        slots_per_update: stats.slots_per_update,
        worst_checkpoint: trace.iter().map(|t| t.2).fold(0.0, f64::max),
        queries: queries + snapshots.len(),
        mismatches,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersistRow {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub updates: usize,
    pub nodes: f64,
    pub slots_per_update: f64,
    pub worst_checkpoint: f64,
    pub queries: usize,
    pub mismatches: usize,
    /// Trace of the first trial.
    pub trace: Vec<(usize, usize, f64)>,
}

pub fn persist_space(cfg: &ExperimentConfig) -> Result<Vec<PersistRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let policy = policy_for(Variant::ZipZip, 2 * n, cfg)?;
        let checkpoint = (n / 64).max(1);
        let trials: Vec<PersistTrial> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| persist_trial(&policy, n, trial_seed(cfg.seed, "persistent", n, t), checkpoint))
            .collect::<Result<_>>()?;
        let mean = |f: fn(&PersistTrial) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
        rows.push(PersistRow {
            n,
            trials: cfg.trials,
            seed: cfg.seed,
            updates: trials[0].updates,
            nodes: mean(|t| t.nodes as f64),
            slots_per_update: mean(|t| t.slots_per_update),
            worst_checkpoint: trials.iter().map(|t| t.worst_checkpoint).fold(0.0, f64::max),
            queries: trials.iter().map(|t| t.queries).sum(),
            mismatches: trials.iter().map(|t| t.mismatches).sum(),
            trace: trials[0].trace.clone(),
        });
    }
    Ok(rows)
}

pub fn persist_table(rows: &[PersistRow]) -> Table {
    let mut t = Table::new(&[
        "variant",
        "n",
        "trials",
        "seed",
        "updates",
        "nodes",
        "slots_per_update",
        "worst_checkpoint_slots_per_update",
        "queries",
        "mismatches",
    ]);
    for r in rows {
        t.push(vec![
            "persistent".into(),
            r.n.into(),
            r.trials.into(),
            r.seed.into(),
            r.updates.into(),
            r.nodes.into(),
            r.slots_per_update.into(),
            r.worst_checkpoint.into(),
            r.queries.into(),
            r.mismatches.into(),
        ]);
    }
    t
}

pub fn persist_chart(rows: &[PersistRow]) -> Chart {
    Chart {
        title: "Slot entries per update".into(),
        x_label: "version".into(),
        y_label: "cumulative slots / updates".into(),
        log_x: false,
        series: rows
            .iter()
            .map(|r| {
                (
                    format!("n={}", r.n),
                    r.trace.iter().filter(|t| t.0 > 0).map(|t| (t.0 as f64, t.2)).collect(),
                )
            })
            .collect(),
    }
}
