//! Analytic depth oracle, line fitting and trial summaries.

use crate::error::{Error, Result};
use crate::ziptree::TreeStats;

/// `H_m`, summed in ascending order.
pub fn harmonic(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::ZeroHarmonic);
    }
    Ok((1..=m).map(|i| 1.0 / i as f64).sum())
}

/// Expected (1-based) depth of the `j`-th smallest of `n` keys in a tree
/// whose ancestors are decided by unique maximal priorities:
/// `H_j + H_{n-j+1} - 1`.
pub fn expected_depth(j: u64, n: u64) -> Result<f64> {
    if j == 0 || j > n {
        return Err(Error::PositionOutOfRange { j, n });
    }
    Ok(harmonic(j)? + harmonic(n - j + 1)? - 1.0)
}

/// [`expected_depth`] for every position `1..=n` in O(n).
pub fn expected_depth_profile(n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = vec![0.0f64; n as usize + 1];
    for i in 1..=n as usize {
        h[i] = h[i - 1] + 1.0 / i as f64;
    }
    Ok((1..=n as usize).map(|j| h[j] + h[n as usize - j + 1] - 1.0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XTransform {
    /// `x -> log2 x`
    Log,
    /// `x -> log2 log2 x`
    LogLog,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log2 y` on the transformed `x`.
pub fn fit_loglog(points: &[(f64, f64)], transform: XTransform) -> Result<FitResult> {
    let mut xy = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if y.is_nan() || y <= 0.0 {
            return Err(Error::NonPositive(y));
        }
        let tx = match transform {
            XTransform::Log if x > 0.0 => x.log2(),
            XTransform::LogLog if x > 1.0 => x.log2().log2(),
            _ => return Err(Error::NonPositive(x)),
        };
        xy.push((tx, y.log2()));
    }
    fit_line(&xy)
}

/// Ordinary least squares on raw coordinates.
pub fn fit_line(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON {
        1.0
    } else {
        let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The per-trial numbers a depth summary averages.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub depth_smallest: f64,
    pub depth_largest: f64,
    pub depth_mean: f64,
    pub height: f64,
    pub root_r1: f64,
}

impl From<&TreeStats> for TrialRecord {
    fn from(s: &TreeStats) -> Self {
        TrialRecord {
            n: s.n(),
            depth_smallest: f64::from(s.smallest_depth().unwrap_or(0)),
            depth_largest: f64::from(s.largest_depth().unwrap_or(0)),
            depth_mean: s.mean_depth(),
            height: f64::from(s.height),
            root_r1: s.root_r1 as f64,
        }
    }
}

/// Means over trials, in tree levels (root = depth 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthSummary {
    pub n: usize,
    pub trials: usize,
    pub mean_depth_smallest: f64,
    pub mean_depth_largest: f64,
    pub mean_depth_all: f64,
    pub mean_height: f64,
    pub mean_root_r1: f64,
}

impl DepthSummary {
    pub fn from_records(n: usize, records: &[TrialRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoRuns);
        }
        if let Some(bad) = records.iter().find(|r| r.n != n) {
            return Err(Error::MixedSizes {
                expected: n,
                found: bad.n,
            });
        }
        let t = records.len() as f64;
        let mean = |f: fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / t;
        Ok(DepthSummary {
            n,
            trials: records.len(),
            mean_depth_smallest: mean(|r| r.depth_smallest),
            mean_depth_largest: mean(|r| r.depth_largest),
            mean_depth_all: mean(|r| r.depth_mean),
            mean_height: mean(|r| r.height),
            mean_root_r1: mean(|r| r.root_r1),
        })
    }

    /// `log2 n`, the scale of the depth columns.
    pub fn log_n(&self) -> f64 {
        (self.n as f64).log2()
    }

    /// Divides by `log2 n`; NaN when `n < 2`.
    pub fn scaled(&self, levels: f64) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            levels / self.log_n()
        }
    }

    /// Root rank divided by `log2 log2 n`; NaN when `n < 4`.
    pub fn scaled_root_r1(&self) -> f64 {
        if self.n < 4 {
            f64::NAN
        } else {
            self.mean_root_r1 / self.log_n().log2()
        }
    }
}

/// Means of `runs`, all of which must hold `n` keys.
pub fn summarize(runs: &[TreeStats], n: usize) -> Result<DepthSummary> {
    let records: Vec<TrialRecord> = runs.iter().map(TrialRecord::from).collect();
    DepthSummary::from_records(n, &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert_eq!(harmonic(2).unwrap(), 1.5);
        assert!((harmonic(4).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        assert_eq!(harmonic(0), Err(Error::ZeroHarmonic));
    }

    #[test]
    fn expected_depth_values() {
        assert_eq!(expected_depth(1, 1).unwrap(), 1.0);
        assert!(expected_depth(0, 3).is_err());
        assert!(expected_depth(4, 3).is_err());
        for n in [1u64, 10, 1000] {
            assert!((expected_depth(1, n).unwrap() - harmonic(n).unwrap()).abs() < 1e-12);
        }
    }

    /// Average over all 3! priority orders of how many keys are ancestors of
    /// (or equal to) the middle key.
    #[test]
    fn middle_of_three_by_enumeration() {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut total = 0usize;
        for prio in perms {
            // key i is an ancestor of key 1 iff it has the top priority
            // among the keys between them, inclusive
            let depth = (0..3)
                .filter(|&i| {
                    let (lo, hi) = (i.min(1), i.max(1));
                    (lo..=hi).all(|m| prio[i] >= prio[m])
                })
                .count();
            total += depth;
        }
        let mean = total as f64 / 6.0;
        assert_eq!(mean, 2.0);
        assert!((expected_depth(2, 3).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_pointwise() {
        let prof = expected_depth_profile(64).unwrap();
        for j in 1..=64u64 {
            assert!((prof[j as usize - 1] - expected_depth(j, 64).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_depth_is_symmetric_and_bounded() {
        for n in 1..=5_000u64 {
            let prof = expected_depth_profile(n).unwrap();
            let ends = harmonic(n).unwrap();
            // 2 ln n - 1 drops lower-order terms and first holds at n = 17
            let upper = if n >= 17 {
                2.0 * (n as f64).ln() - 1.0 + 1e-9
            } else {
                2.0 * (n as f64).ln() + 1.0
            };
            for j in 0..n as usize {
                let mirror = prof[n as usize - 1 - j];
                assert!((prof[j] - mirror).abs() < 1e-9, "n={n} j={j}");
                assert!(prof[j] >= ends - 1e-9 && prof[j] <= upper, "n={n} j={j}: {}", prof[j]);
            }
        }
    }

    #[test]
    fn corollary_end_bound() {
        // H_n < ln n + gamma + 1/(2n)
        let gamma = 0.577_215_664_901_532_9;
        for n in [2u64, 64, 1 << 16] {
            let h = harmonic(n).unwrap();
            assert!(h < (n as f64).ln() + gamma + 0.5 / n as f64);
        }
    }

    #[test]
    fn fit_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|i| (2f64.powi(i), 2f64.powi(i).powi(-3))).collect();
        let fit = fit_loglog(&pts, XTransform::Log).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64 * 10.0, 4.0)).collect();
        assert!(fit_loglog(&flat, XTransform::Log).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_planted_slopes() {
        for slope in [-3.0, -1.0, 0.5, 2.25] {
            let pts: Vec<(f64, f64)> = (8..=16)
                .map(|e| {
                    let x = 2f64.powi(e);
                    (x, 7.0 * x.log2().powf(slope))
                })
                .collect();
            let fit = fit_loglog(&pts, XTransform::LogLog).unwrap();
            assert!((fit.slope - slope).abs() < 1e-6, "{fit:?}");
        }
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_loglog(&[(2.0, 1.0), (4.0, 1.0)], XTransform::Log),
            Err(Error::TooFewPoints(2))
        );
        assert_eq!(
            fit_loglog(&[(2.0, 1.0), (4.0, 0.0), (8.0, 1.0)], XTransform::Log),
            Err(Error::NonPositive(0.0))
        );
    }

    #[test]
    fn summary_of_one_and_duplicated_runs() {
        let run = TreeStats {
            per_key_depth: vec![(0, 2), (1, 1), (2, 3)],
            height: 3,
            root_r1: 4,
            rank_group_sizes: vec![1, 2],
        };
        let one = summarize(std::slice::from_ref(&run), 3).unwrap();
        assert_eq!(one.mean_depth_smallest, 2.0);
        assert_eq!(one.mean_depth_largest, 3.0);
        assert_eq!(one.mean_depth_all, 2.0);
        assert_eq!(one.mean_height, 3.0);
        assert_eq!(one.mean_root_r1, 4.0);
        let two = summarize(&[run.clone(), run.clone()], 3).unwrap();
        assert_eq!(DepthSummary { trials: 1, ..two }, one);
        assert_eq!(summarize(&[], 3), Err(Error::NoRuns));
        assert!(matches!(summarize(&[run], 4), Err(Error::MixedSizes { .. })));
    }

    #[test]
    fn mean_and_se_basic() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-12);
    }
}
