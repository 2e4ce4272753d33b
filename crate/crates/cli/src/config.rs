//! Experiment settings shared by all commands.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use zipzip::ranks::{mix64, seed_mix};
use zipzip::{Key, Variant};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Order {
    #[default]
    Sequential,
    Random,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::Sequential => "sequential",
            Order::Random => "random",
        })
    }
}

impl FromStr for Order {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Order::Sequential),
            "random" => Ok(Order::Random),
            _ => bail!("unknown order {s:?} (expected sequential or random)"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Svg,
    Both,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "both" => Ok(Format::Both),
            _ => bail!("unknown format {s:?} (expected csv, svg or both)"),
        }
    }
}

/// `256..65536` (powers of two from one bound to the other), a comma list,
/// or a single size.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let list: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().with_context(|| format!("bad lower bound in {s:?}"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad upper bound in {s:?}"))?;
        if !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
            bail!("range {s:?} must run between powers of two, low to high");
        }
        std::iter::successors(Some(lo), |&n| (n < hi).then_some(n * 2)).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad size {t:?}")))
            .collect::<Result<_>>()?
    };
    if list.is_empty() || list.contains(&0) {
        bail!("sizes must be positive");
    }
    Ok(list)
}

pub fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    s.split(',')
        .map(|t| t.trim().parse::<Variant>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

pub fn parse_p_list(s: &str) -> Result<Vec<f64>> {
    let ps: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad probability {t:?}"))
        })
        .collect::<Result<_>>()?;
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        bail!("probabilities must lie in (0, 1), got {p}");
    }
    Ok(ps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub variants: Vec<Variant>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub c: u32,
    pub p: f64,
    pub order: Order,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variants: vec![Variant::Original, Variant::Uniform, Variant::ZipZip],
            n_list: (8..=16).map(|e| 1 << e).collect(),
            trials: 100,
            seed: 1,
            c: 3,
            p: 0.5,
            order: Order::Sequential,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_list.is_empty() {
            bail!("no sizes given");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            bail!("p must lie in (0, 1), got {}", self.p);
        }
        if self.c == 0 {
            bail!("c must be at least 1");
        }
        Ok(())
    }
}

/// Label hashed into per-trial seeds.
pub fn label_tag(label: &str) -> u64 {
    label
        .bytes()
        .fold(0x51_7c_c1_b7_27_22_0a_95, |h, b| mix64(h ^ u64::from(b)))
}

/// Seed of one trial; independent of scheduling.
pub fn trial_seed(master: u64, label: &str, n: usize, trial: usize) -> u64 {
    seed_mix(&[master, label_tag(label), n as u64, trial as u64])
}

/// Keys `0..n` in the requested order.
pub fn insertion_keys(n: usize, order: Order, seed: u64) -> Vec<Key> {
    let mut keys: Vec<Key> = (0..n as u64).collect();
    if order == Order::Random {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0x5eed]));
        keys.shuffle(&mut rng);
    }
    keys
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_lists() {
        assert_eq!(parse_n_list("256..2048").unwrap(), vec![256, 512, 1024, 2048]);
        assert_eq!(parse_n_list("1..1").unwrap(), vec![1]);
        assert_eq!(parse_n_list("64, 100").unwrap(), vec![64, 100]);
        assert!(parse_n_list("100..200").is_err());
        assert!(parse_n_list("512..256").is_err());
        assert!(parse_n_list("0").is_err());
        assert!(parse_n_list("x").is_err());
    }

    #[test]
    fn variants_and_ps() {
        assert_eq!(
            parse_variants("original,zipzip").unwrap(),
            vec![Variant::Original, Variant::ZipZip]
        );
        assert!(parse_variants("splay").is_err());
        assert_eq!(parse_p_list("0.5,0.0002").unwrap(), vec![0.5, 0.0002]);
        assert!(parse_p_list("1.0").is_err());
    }

    #[test]
    fn seeds_and_orders() {
        assert_ne!(trial_seed(1, "zipzip", 8, 0), trial_seed(1, "zipzip", 8, 1));
        assert_ne!(trial_seed(1, "zipzip", 8, 0), trial_seed(1, "uniform", 8, 0));
        assert_eq!(insertion_keys(4, Order::Sequential, 0), vec![0, 1, 2, 3]);
        let mut r = insertion_keys(100, Order::Random, 3);
        assert_eq!(r, insertion_keys(100, Order::Random, 3));
        r.sort_unstable();
        assert_eq!(r, (0..100).collect::<Vec<_>>());
    }
}
