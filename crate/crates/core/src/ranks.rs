//! Rank generation and the priority order shared by every variant.
//!
//! Every tree in this crate orders nodes by *dominance*: `a` dominates `b`
//! when `a` would be `b`'s ancestor, i.e. `a` has the larger rank, or the
//! ranks are equal and `a` has the smaller key.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Key = u64;

/// Number of failures before the first success in Bernoulli(`p`) trials.
///
/// At `p = 1/2` each trial is one bit of the stream, least significant bit
/// first, a set bit being a success. Other moderate `p` use one
/// `random_bool` per trial. Very small `p` would need ~1/p trials per draw, so
/// below [`TRIAL_LOOP_MIN_P`] the draw is delegated to an inverse-CDF sampler.
pub fn gen_geometric<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.5 {
        let mut failures = 0u64;
        loop {
            let word = rng.next_u64();
            if word != 0 {
                return Ok(failures + u64::from(word.trailing_zeros()));
            }
            failures += 64;
        }
    }
    if p >= TRIAL_LOOP_MIN_P {
        let mut failures = 0u64;
        while !rng.random_bool(p) {
            failures += 1;
        }
        return Ok(failures);
    }
    let geo = rand_distr::Geometric::new(p).map_err(|_| Error::InvalidProbability(p))?;
    Ok(geo.sample(rng))
}

/// Smallest success probability sampled by literal trial repetition.
pub const TRIAL_LOOP_MIN_P: f64 = 0.25;

/// Unbiased integer in `[lo, hi]`.
pub fn gen_uniform_rank<R: RngCore + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> Result<u64> {
    if lo > hi {
        return Err(Error::EmptyInterval { lo, hi });
    }
    if lo == hi {
        return Ok(lo);
    }
    let dist = Uniform::new_inclusive(lo, hi).map_err(|_| Error::EmptyInterval { lo, hi })?;
    Ok(dist.sample(rng))
}

/// A static rank: geometric primary rank plus optional uniform secondary
/// rank, compared lexicographically.
///
/// The uniform-variant rank lives in `r1` with `r2` absent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankPair {
    pub r1: u64,
    pub r2: Option<u64>,
}

impl RankPair {
    pub const fn new(r1: u64) -> Self {
        RankPair { r1, r2: None }
    }

    pub const fn pair(r1: u64, r2: u64) -> Self {
        RankPair { r1, r2: Some(r2) }
    }

    /// True iff `(self, key)` would be the ancestor of `(other, other_key)`.
    #[inline]
    pub fn dominates(&self, key: Key, other: &RankPair, other_key: Key) -> bool {
        match self.cmp(other) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => key < other_key,
        }
    }
}

impl fmt::Display for RankPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.r2 {
            Some(r2) => write!(f, "{},{}", self.r1, r2),
            None => write!(f, "{},-", self.r1),
        }
    }
}

/// Raised when two just-in-time ranks cannot be ordered yet: one secondary
/// bit string is a prefix of the other, so more bits are needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnresolvedTie;

impl fmt::Display for UnresolvedTie {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unresolved rank tie")
    }
}

impl std::error::Error for UnresolvedTie {}

/// Anything that can be ranked against a value of the same type.
///
/// `Ok(Equal)` means a genuine tie, settled by key; `Err` means the
/// comparison cannot be decided with the information currently drawn.
pub trait Priority {
    fn compare(&self, other: &Self) -> Result<Ordering, UnresolvedTie>;
}

impl Priority for RankPair {
    fn compare(&self, other: &Self) -> Result<Ordering, UnresolvedTie> {
        Ok(self.cmp(other))
    }
}

/// Dominance over any [`Priority`]: higher rank wins, equal ranks go to the
/// smaller key.
pub fn dominates<P: Priority>(a: (&P, Key), b: (&P, Key)) -> Result<bool, UnresolvedTie> {
    Ok(match a.0.compare(b.0)? {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    })
}

/// Growable bit string read as a binary fraction `0.b0 b1 b2 ...`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.words[i / 64] >> (i % 64) & 1 == 1)
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Fraction order. Strings where one is a prefix of the other
    /// (including equal strings) are unresolved.
    pub fn compare_fraction(&self, other: &BitString) -> Result<Ordering, UnresolvedTie> {
        let common = self.len.min(other.len);
        for w in 0..common.div_ceil(64) {
            let mut diff = self.words[w] ^ other.words[w];
            let valid = (common - w * 64).min(64);
            if valid < 64 {
                diff &= (1u64 << valid) - 1;
            }
            if diff != 0 {
                let bit = diff.trailing_zeros();
                return Ok(if self.words[w] >> bit & 1 == 1 {
                    Ordering::Greater
                } else {
                    Ordering::Less
                });
            }
        }
        Err(UnresolvedTie)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) == Some(true) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BitString {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut bits = BitString::new();
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(format!("invalid bit {other:?}")),
            }
        }
        Ok(bits)
    }
}

/// Just-in-time rank: geometric `r1` and a lazily grown `r2` fraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JitRank {
    pub r1: u64,
    pub r2: BitString,
}

impl Priority for JitRank {
    fn compare(&self, other: &Self) -> Result<Ordering, UnresolvedTie> {
        match self.r1.cmp(&other.r1) {
            Ordering::Equal => self.r2.compare_fraction(&other.r2),
            ord => Ok(ord),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Original,
    Uniform,
    ZipZip,
    VariableP,
    Biased,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Uniform => "uniform",
            Variant::ZipZip => "zipzip",
            Variant::VariableP => "variable_p",
            Variant::Biased => "biased",
        }
    }

    /// Whether `r1` is a plain geometric draw.
    pub fn has_geometric_r1(self) -> bool {
        matches!(self, Variant::Original | Variant::ZipZip | Variant::VariableP)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "uniform" => Ok(Variant::Uniform),
            "zipzip" | "zip-zip" => Ok(Variant::ZipZip),
            "variable_p" | "variable-p" => Ok(Variant::VariableP),
            "biased" => Ok(Variant::Biased),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

/// Key weights for the biased policy.
#[derive(Clone)]
pub struct WeightFn(Arc<dyn Fn(Key) -> Option<u64> + Send + Sync>);

impl WeightFn {
    pub fn new(f: impl Fn(Key) -> Option<u64> + Send + Sync + 'static) -> Self {
        WeightFn(Arc::new(f))
    }

    pub fn from_map(weights: HashMap<Key, u64>) -> Self {
        WeightFn::new(move |k| weights.get(&k).copied())
    }

    pub fn weight(&self, key: Key) -> Option<u64> {
        (self.0)(key)
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("WeightFn(..)")
    }
}

/// The rule for drawing a key's rank.
///
/// Ranges that depend on the tree size use `n_cap`, fixed at construction,
/// so a key's rank never has to change as the tree grows.
#[derive(Clone, Debug)]
pub struct RankPolicy {
    variant: Variant,
    p: f64,
    c: u32,
    n_cap: u64,
    weights: Option<WeightFn>,
}

impl RankPolicy {
    fn with_variant(variant: Variant, n_cap: u64) -> Self {
        RankPolicy {
            variant,
            p: 0.5,
            c: 3,
            n_cap: n_cap.max(1),
            weights: None,
        }
    }

    pub fn original() -> Self {
        Self::with_variant(Variant::Original, 1)
    }

    pub fn uniform(n_cap: u64) -> Self {
        Self::with_variant(Variant::Uniform, n_cap)
    }

    pub fn zipzip(n_cap: u64) -> Self {
        Self::with_variant(Variant::ZipZip, n_cap)
    }

    pub fn variable_p(p: f64) -> Result<Self> {
        Self::with_variant(Variant::VariableP, 1).with_p(p)
    }

    pub fn biased(n_cap: u64, weights: WeightFn) -> Self {
        RankPolicy {
            weights: Some(weights),
            ..Self::with_variant(Variant::Biased, n_cap)
        }
    }

    /// Policy for `variant` with default parameters (`p = 1/2`, `c = 3`).
    /// Biased policies start with unit weights for every key.
    pub fn for_variant(variant: Variant, n_cap: u64) -> Self {
        match variant {
            Variant::Biased => Self::biased(n_cap, WeightFn::new(|_| Some(1))),
            v => Self::with_variant(v, n_cap),
        }
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        self.p = p;
        Ok(self)
    }

    pub fn with_c(mut self, c: u32) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidExponent);
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_n_cap(mut self, n_cap: u64) -> Self {
        self.n_cap = n_cap.max(1);
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn n_cap(&self) -> u64 {
        self.n_cap
    }

    pub fn weights(&self) -> Option<&WeightFn> {
        self.weights.as_ref()
    }

    /// Upper end of the uniform-variant range, `n_cap^c` (saturating).
    pub fn uniform_range(&self) -> u64 {
        self.n_cap.saturating_pow(self.c)
    }

    /// Upper end of the secondary range, `ceil(log2(n_cap)^c)`, at least 1.
    pub fn secondary_range(&self) -> u64 {
        let log = (self.n_cap as f64).log2();
        let r = log.powi(self.c as i32).ceil();
        if r >= u64::MAX as f64 {
            u64::MAX
        } else {
            (r as u64).max(1)
        }
    }

    /// Draws a rank from `rng` according to the policy.
    pub fn draw<R: RngCore + ?Sized>(&self, key: Key, rng: &mut R) -> Result<RankPair> {
        match self.variant {
            Variant::Original | Variant::VariableP => Ok(RankPair::new(gen_geometric(rng, self.p)?)),
            Variant::Uniform => Ok(RankPair::new(gen_uniform_rank(rng, 1, self.uniform_range())?)),
            Variant::ZipZip => {
                let r1 = gen_geometric(rng, self.p)?;
                let r2 = gen_uniform_rank(rng, 1, self.secondary_range())?;
                Ok(RankPair::pair(r1, r2))
            }
            Variant::Biased => {
                let w = self
                    .weights
                    .as_ref()
                    .and_then(|w| w.weight(key))
                    .ok_or(Error::MissingWeight(key))?;
                if w == 0 {
                    return Err(Error::ZeroWeight(key));
                }
                let r1 = log2_floor(w) + gen_geometric(rng, self.p)?;
                let r2 = gen_uniform_rank(rng, 1, self.secondary_range())?;
                Ok(RankPair::pair(r1, r2))
            }
        }
    }
}

/// `floor(log2 w)` for `w >= 1`, via bit length.
pub fn log2_floor(w: u64) -> u64 {
    u64::from(63 - w.leading_zeros())
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words.
pub fn seed_mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &p| {
        mix64(acc ^ mix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngMode {
    /// One stream, consumed by successive insertions.
    Fresh,
    /// Each key's rank is a pure function of `(master_seed, key)`.
    Keyed,
}

/// Random source for rank draws.
///
/// The internal stream also supplies the tie-breaking bits of
/// just-in-time trees, in both modes.
#[derive(Clone, Debug)]
pub struct KeyedRng {
    master_seed: u64,
    mode: RngMode,
    stream: ChaCha8Rng,
}

impl KeyedRng {
    pub fn fresh(master_seed: u64) -> Self {
        KeyedRng {
            master_seed,
            mode: RngMode::Fresh,
            stream: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    pub fn keyed(master_seed: u64) -> Self {
        KeyedRng {
            mode: RngMode::Keyed,
            ..Self::fresh(master_seed)
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn mode(&self) -> RngMode {
        self.mode
    }

    /// The shared stream.
    pub fn stream(&mut self) -> &mut ChaCha8Rng {
        &mut self.stream
    }

    /// Rank for `key` under `policy`.
    pub fn make_rank(&mut self, policy: &RankPolicy, key: Key) -> Result<RankPair> {
        match self.mode {
            RngMode::Fresh => policy.draw(key, &mut self.stream),
            RngMode::Keyed => policy.draw(key, &mut self.key_stream(key)),
        }
    }

    /// A private stream for `key`, independent of everything else drawn.
    pub fn key_stream(&self, key: Key) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed_mix(&[self.master_seed, key]))
    }
}

/// Free-function form of [`KeyedRng::make_rank`].
pub fn make_rank(policy: &RankPolicy, key: Key, rng: &mut KeyedRng) -> Result<RankPair> {
    rng.make_rank(policy, key)
}
