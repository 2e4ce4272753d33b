//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness.

use std::process::ExitCode;
use std::time::Instant;

use zipzip::{RankPolicy, Variant};
use zipzip_cli::checks::{self, HiStatus, Target};
use zipzip_cli::config::ExperimentConfig;
use zipzip_cli::experiments::{self as ex, Profile};

const SEED: u64 = 20240601;
const N: usize = 1 << 16;
const LOG_N: f64 = 16.0;

type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn cfg(variants: &[Variant], n_list: &[usize], trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        variants: variants.to_vec(),
        n_list: n_list.to_vec(),
        trials,
        seed: SEED,
        ..ExperimentConfig::default()
    }
}

fn depth_row(variant: Variant, trials: usize) -> ex::DepthRow {
    let c = cfg(&[variant], &[N], trials);
    let policy = ex::policy_for(variant, N, &c).unwrap();
    ex::depth_row(variant.name(), &policy, N, &c).unwrap()
}

/// Rows shared by several criteria.
struct Shared {
    original_1000: ex::DepthRow,
    zipzip_1000: ex::DepthRow,
}

fn c1(s: &Shared) -> Outcome {
    let r = &s.original_1000;
    let (lo, hi) = (r.smallest_scaled(), r.largest_scaled());
    outcome(
        within(lo, 0.45, 0.55) && within(hi, 0.95, 1.05),
        format!(
            "original, {} trials: smallest {lo:.4}, largest {hi:.4} (x log2 n)",
            r.trials
        ),
    )
}

fn c2(s: &Shared) -> Outcome {
    let r = &s.zipzip_1000;
    let (lo, hi) = (r.smallest_scaled(), r.largest_scaled());
    let gap = (r.summary.mean_depth_smallest - r.summary.mean_depth_largest).abs();
    outcome(
        gap <= 0.03 * LOG_N && within(lo, 0.64, 0.74) && within(hi, 0.64, 0.74),
        format!("zipzip: smallest {lo:.4}, largest {hi:.4}, gap {gap:.3} levels"),
    )
}

fn c3() -> Outcome {
    let o = depth_row(Variant::Original, 100);
    let z = depth_row(Variant::ZipZip, 100);
    let u = depth_row(Variant::Uniform, 100);
    let ok_o = within(o.mean_edges_scaled(), 1.25, 1.35) && within(o.height_edges_scaled(), 2.81, 3.11);
    let ok_zu = [&z, &u]
        .iter()
        .all(|r| within(r.mean_edges_scaled(), 1.16, 1.26) && within(r.height_edges_scaled(), 2.22, 2.52));
    let close = (z.summary.mean_depth_all - u.summary.mean_depth_all).abs() <= 0.02 * LOG_N;
    let show = |r: &ex::DepthRow| {
        format!(
            "{} {:.3}/{:.3}",
            r.label,
            r.mean_edges_scaled(),
            r.height_edges_scaled()
        )
    };
    outcome(
        ok_o && ok_zu && close,
        format!(
            "depth/height in edges x log2 n: {}, {}, {}",
            show(&o),
            show(&z),
            show(&u)
        ),
    )
}

fn c4() -> Outcome {
    let n = 64;
    let trials = 100_000;
    let profile = ex::depth_profile(&RankPolicy::zipzip(n as u64), n, trials, SEED).unwrap();
    let agree = ex::profile_agreement(&profile, 3.0).unwrap();
    outcome(
        agree >= 60,
        format!("zipzip n=64, {trials} trials: {agree}/64 positions within 3 SE"),
    )
}

fn c5(s: &Shared) -> Outcome {
    let bound = 3.82 * LOG_N;
    let r = &s.zipzip_1000;
    let ok = r.trial_heights.iter().filter(|&&h| f64::from(h) <= bound).count();
    let max = r.trial_heights.iter().max().copied().unwrap_or(0);
    outcome(
        ok >= 999,
        format!(
            "{ok}/{} zipzip trials with height <= {bound:.2} (max {max} levels)",
            r.trial_heights.len()
        ),
    )
}

fn c6() -> Outcome {
    let n_list: Vec<usize> = (8..=16).map(|e| 1 << e).collect();
    let res = ex::rank_ties(&cfg(&[Variant::Uniform, Variant::ZipZip], &n_list, 100)).unwrap();
    let mut pass = res.fits.len() == 2;
    let mut parts = Vec::new();
    for (v, f) in &res.fits {
        pass &= within(f.slope, -3.3, -2.7) && f.r_squared >= 0.9;
        parts.push(format!("{v} slope {:.3} r2 {:.4}", f.slope, f.r_squared));
    }
    outcome(pass, parts.join(", "))
}

fn c7() -> Outcome {
    let r = depth_row(Variant::ZipZip, 100);
    outcome(
        within(r.group_mean, 1.95, 2.05) && f64::from(r.group_max) <= 2.0 * LOG_N,
        format!("zipzip r1 groups: mean {:.4}, max {}", r.group_mean, r.group_max),
    )
}

fn c8() -> Outcome {
    let rows = ex::jit_bits(&cfg(&[], &[N], 100), &[zipzip_cli::config::Order::Sequential]).unwrap();
    let r = &rows[0];
    outcome(
        within(r.r2_bits_per_node, 1.5, 2.5) && r.total_bits_per_node <= 5.0 && r.max_total_bits_per_node <= 30.0,
        format!(
            "r2 {:.3} bits/node, total {:.3} bits/node, worst trial {:.3}",
            r.r2_bits_per_node, r.total_bits_per_node, r.max_total_bits_per_node
        ),
    )
}

fn c9() -> Outcome {
    let rows = ex::vary_p(&cfg(&[], &[N], 100), &[0.0002]).unwrap();
    let r = &rows[0].1;
    let (d, h) = (r.mean_edges_scaled(), r.height_edges_scaled());
    outcome(
        within(d, 1.16, 1.26) && within(h, 2.22, 2.52),
        format!("p=0.0002: depth {d:.3}, height {h:.3} (edges x log2 n)"),
    )
}

fn c10() -> Outcome {
    let a = checks::oracle_exhaustive(9).unwrap();
    let b = checks::oracle_random(1000, 1000, SEED).unwrap();
    outcome(
        a.passed() && b.passed(),
        format!(
            "exhaustive {} cases, {} mismatches; random {} instances, {} mismatches",
            a.cases,
            a.failures.len(),
            b.cases,
            b.failures.len()
        ),
    )
}

fn c11() -> Outcome {
    let rows = checks::hi_check(&Target::HISTORY_INDEPENDENT, 1000, SEED).unwrap();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    let pass = rows.iter().all(|r| r.status == HiStatus::Pass && r.pairs == 1000);
    outcome(
        pass,
        format!("{} structures x 1000 pairs, {failures} failures", rows.len()),
    )
}

fn c12() -> Outcome {
    let ex_rep = checks::persist_exhaustive(8, 4, SEED).unwrap();
    let rows = ex::persist_space(&cfg(&[], &[1 << 14], 100)).unwrap();
    let r = &rows[0];
    outcome(
        ex_rep.passed() && r.mismatches == 0 && r.worst_checkpoint <= 30.0,
        format!(
            "{} exhaustive histories ({} failures); 100 workloads: {} queries, {} mismatches, worst {:.3} slots/update",
            ex_rep.cases,
            ex_rep.failures.len(),
            r.queries,
            r.mismatches,
            r.worst_checkpoint
        ),
    )
}

fn c13() -> Outcome {
    let res = ex::biased(
        &cfg(&[], &[1 << 14], 200),
        &[Profile::Sqrt, Profile::Linear, Profile::Square, Profile::Half],
    )
    .unwrap();
    let half = res.rows.iter().find(|r| r.profile == Profile::Half).unwrap();
    match res.fit {
        Some(f) => outcome(
            f.r_squared >= 0.95 && half.depth_mean <= 6.0,
            format!(
                "fit slope {:.3}, r2 {:.4}; half-weight key depth {:.3}",
                f.slope, f.r_squared, half.depth_mean
            ),
        ),
        None => outcome(false, "no fit".into()),
    }
}

fn c14() -> Outcome {
    let mut total = 0;
    let mut bad = Vec::new();
    for t in Target::ALL {
        let rep = checks::fuzz_target(t, 100_000, SEED, None).unwrap();
        total += rep.cases;
        if !rep.passed() {
            bad.push(format!("{t}: {}", rep.failures[0]));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{total} operations over {} structures; {}",
            Target::ALL.len(),
            if bad.is_empty() {
                "no violations".to_string()
            } else {
                bad.join("; ")
            }
        ),
    )
}

fn main() -> ExitCode {
    // libtest-style flags (e.g. from `cargo test -- --list`) are ignored
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let shared = Shared {
        original_1000: depth_row(Variant::Original, 1000),
        zipzip_1000: depth_row(Variant::ZipZip, 1000),
    };
    let criteria: Vec<Criterion> = vec![
        (1, "depth discrepancy", Box::new(|| c1(&shared))),
        (2, "zip-zip symmetry", Box::new(|| c2(&shared))),
        (3, "average depth and height", Box::new(c3)),
        (4, "exact harmonic depths", Box::new(c4)),
        (5, "height tail", Box::new(|| c5(&shared))),
        (6, "rank-tie scaling", Box::new(c6)),
        (7, "rank groups", Box::new(c7)),
        (8, "jit metadata", Box::new(c8)),
        (9, "variable-p crossover", Box::new(c9)),
        (10, "oracle equivalence", Box::new(c10)),
        (11, "history independence", Box::new(c11)),
        (12, "persistence", Box::new(c12)),
        (13, "biased depth scaling", Box::new(c13)),
        (14, "fuzzed validators", Box::new(c14)),
    ];
    let mut failed = 0;
    for (id, name, check) in &criteria {
        let t = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {id:>2} {:<26} {}  {} [{:.1}s]",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
