use zipzip::{RankPolicy, Variant};
use zipzip_cli::config::{ExperimentConfig, Order};
use zipzip_cli::experiments::{self as ex, Profile};

fn cfg(variants: &[Variant], n_list: &[usize], trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        variants: variants.to_vec(),
        n_list: n_list.to_vec(),
        trials,
        seed: 5,
        ..ExperimentConfig::default()
    }
}

#[test]
fn smaller_range_exponent_gives_shallower_tie_decay() {
    let n_list: Vec<usize> = (6..=12).map(|e| 1 << e).collect();
    let c1 = ExperimentConfig {
        c: 1,
        ..cfg(&[Variant::Uniform], &n_list, 10)
    };
    let res = ex::rank_ties(&c1).unwrap();
    let slope = res.fits[0].1.slope;
    assert!((slope + 1.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn half_probability_matches_original_variant() {
    let c = cfg(&[], &[4096], 60);
    let varied = ex::vary_p(&c, &[0.5]).unwrap().remove(0).1;
    let original = ex::depth_row("original", &RankPolicy::original(), 4096, &c).unwrap();
    let gap = (varied.summary.mean_depth_all - original.summary.mean_depth_all).abs();
    assert!(gap < 4.0 * (varied.se_mean + original.se_mean), "gap {gap}");
}

#[test]
fn near_one_probability_is_worse() {
    let rows = ex::vary_p(&cfg(&[], &[4096], 5), &[0.5, 0.999]).unwrap();
    assert!(rows[1].1.summary.mean_depth_all > 2.0 * rows[0].1.summary.mean_depth_all);
    assert!(rows[1].1.summary.mean_height > rows[0].1.summary.mean_height);
}

#[test]
fn harmonic_profile_agrees_at_small_n() {
    let profile = ex::depth_profile(&RankPolicy::zipzip(16), 16, 20_000, 3).unwrap();
    assert!(ex::profile_agreement(&profile, 4.0).unwrap() >= 15);
}

#[test]
fn equal_weights_match_zipzip_depth() {
    let n = 1024;
    let res = ex::biased(&cfg(&[], &[n], 200), &[Profile::Equal]).unwrap();
    // the median key of a tree with unique priorities
    let expected = zipzip::stats::expected_depth(n as u64 / 2 + 1, n as u64).unwrap();
    let r = &res.rows[0];
    assert!(
        (r.depth_mean - expected).abs() < 4.0 * r.depth_se + 0.3,
        "{} vs {expected}",
        r.depth_mean
    );
}

#[test]
fn jit_orders_both_stay_constant() {
    let rows = ex::jit_bits(&cfg(&[], &[1024, 8192], 8), &[Order::Sequential, Order::Random]).unwrap();
    for r in &rows {
        assert!(r.total_bits_per_node < 5.0, "{r:?}");
        assert!(r.r2_bits_per_node > 1.0, "{r:?}");
    }
}
