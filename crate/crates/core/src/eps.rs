//! Extended probability space.
//!
//! A signed number `s` in `[-1, 1]` is carried as the excess of a two-state
//! probability vector `P` over a fixed reference vector `V = (v, 1 - v)`.
//! Multiplying the excess by `k = 1 - g` is a positive stochastic map (the
//! swap matrix) that leaves `V` untouched, so products of signed factors can
//! be simulated with ordinary random choices and read off as counts in
//! state 0 minus `v * H`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{chunks, StreamFactory};

/// Tolerance for the algebraic identities of 2x2 products.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Global reference level; valid for every `g` in `[0, 2]`.
pub const DEFAULT_V: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Nonnegative components summing to one.
    Probability,
    /// Components of the form `(w, -w)`.
    Quasiprobability,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsPair {
    pub p0: f64,
    pub p1: f64,
    pub flavor: Flavor,
}

impl EpsPair {
    pub fn probability(p0: f64, p1: f64) -> Result<Self> {
        if p0 < -ALGEBRA_TOL || p1 < -ALGEBRA_TOL || (p0 + p1 - 1.0).abs() > ALGEBRA_TOL {
            return Err(invalid(format!("probability pair ({p0}, {p1}) must be nonnegative and sum to 1")));
        }
        Ok(Self { p0, p1, flavor: Flavor::Probability })
    }

    /// The reference vector `V = (v, 1 - v)`.
    pub fn reference(v: f64) -> Result<Self> {
        check_unit("v", v)?;
        Self::probability(v, 1.0 - v)
    }

    /// A signed number `s` as `(s, -s)`.
    pub fn quasi(s: f64) -> Self {
        Self { p0: s, p1: -s, flavor: Flavor::Quasiprobability }
    }

    /// Excess of component 0 over the reference level `v`.
    pub fn excess(&self, v: f64) -> f64 {
        match self.flavor {
            Flavor::Probability => self.p0 - v,
            Flavor::Quasiprobability => self.p0,
        }
    }
}

/// Positive 2x2 column-stochastic matrix multiplying EPS excesses by `1 - g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapMatrix {
    pub g: f64,
    pub v: f64,
}

impl SwapMatrix {
    pub fn m00(&self) -> f64 {
        1.0 - self.g * (1.0 - self.v)
    }
    pub fn m01(&self) -> f64 {
        self.g * self.v
    }
    pub fn m10(&self) -> f64 {
        self.g * (1.0 - self.v)
    }
    pub fn m11(&self) -> f64 {
        1.0 - self.g * self.v
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        [[self.m00(), self.m01()], [self.m10(), self.m11()]]
    }

    /// The EPS number this matrix multiplies by.
    pub fn k(&self) -> f64 {
        1.0 - self.g
    }

    /// Probability of leaving state 0 (to 1).
    #[inline]
    pub fn leave0(&self) -> f64 {
        self.m10()
    }

    /// Probability of leaving state 1 (to 0).
    #[inline]
    pub fn leave1(&self) -> f64 {
        self.m01()
    }

    pub fn apply(&self, p: &EpsPair) -> EpsPair {
        EpsPair {
            p0: self.m00() * p.p0 + self.m01() * p.p1,
            p1: self.m10() * p.p0 + self.m11() * p.p1,
            flavor: p.flavor,
        }
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("{name} = {x} must lie in [0, 1]")));
    }
    Ok(())
}

pub fn swap_matrix(g: f64, v: f64) -> Result<SwapMatrix> {
    if !(0.0..=2.0).contains(&g) {
        return Err(invalid(format!("g = {g} must lie in [0, 2]")));
    }
    check_unit("v", v)?;
    if g * (1.0 - v) > 1.0 {
        return Err(Error::SwapConstraint(format!("g(1-v) = {} > 1 (g = {g}, v = {v})", g * (1.0 - v))));
    }
    if g * v > 1.0 {
        return Err(Error::SwapConstraint(format!("gv = {} > 1 (g = {g}, v = {v})", g * v)));
    }
    Ok(SwapMatrix { g, v })
}

/// Closed interval `[lo, hi]` of reference levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - ALGEBRA_TOL && x <= self.hi + ALGEBRA_TOL
    }
}

/// Reference levels `v` for which every entry of `swap_matrix(g, v)` is
/// nonnegative.
pub fn valid_v_interval(g: f64) -> Result<Interval> {
    if !(0.0..=2.0).contains(&g) {
        return Err(invalid(format!("g = {g} must lie in [0, 2]")));
    }
    if g <= 1.0 {
        Ok(Interval { lo: 0.0, hi: 1.0 })
    } else {
        Ok(Interval { lo: (g - 1.0) / g, hi: 1.0 / g })
    }
}

pub fn apply(m: &SwapMatrix, p: &EpsPair) -> EpsPair {
    m.apply(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub ks: Vec<f64>,
    pub w: f64,
    pub v: f64,
}

impl ChainSpec {
    pub fn new(ks: Vec<f64>, w: f64, v: f64) -> Result<Self> {
        let spec = Self { ks, w, v };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("v", self.v)?;
        if !(-1.0..=1.0).contains(&self.w) {
            return Err(invalid(format!("w = {} must lie in [-1, 1]", self.w)));
        }
        let lambda = self.w + self.v;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("w + v = {lambda} must lie in [0, 1] to be an initial probability")));
        }
        for &k in &self.ks {
            if !(-1.0..=1.0).contains(&k) {
                return Err(invalid(format!("k = {k} must lie in [-1, 1]")));
            }
            swap_matrix(1.0 - k, self.v)?;
        }
        Ok(())
    }

    /// Initial probability of state 0.
    pub fn lambda(&self) -> f64 {
        self.w + self.v
    }

    pub fn matrices(&self) -> Vec<SwapMatrix> {
        self.ks.iter().map(|&k| SwapMatrix { g: 1.0 - k, v: self.v }).collect()
    }

    /// Exact final distribution `M_n ... M_1 Po`.
    pub fn final_distribution(&self) -> EpsPair {
        let start = EpsPair { p0: self.lambda(), p1: 1.0 - self.lambda(), flavor: Flavor::Probability };
        self.matrices().iter().fold(start, |p, m| m.apply(&p))
    }

    /// Exact expectation of the sampled excess.
    pub fn expected_excess(&self) -> f64 {
        self.final_distribution().p0 - self.v
    }
}

/// A Monte Carlo estimate of an EPS excess.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Histories ending in state 0 and state 1.
    pub counts: [u64; 2],
    pub histories: u64,
}

impl Estimate {
    fn from_counts(h0: u64, h1: u64, v: f64) -> Self {
        let h = h0 + h1;
        let frac = if h == 0 { 0.0 } else { h0 as f64 / h as f64 };
        let std_error = if h == 0 { 0.0 } else { (frac * (1.0 - frac) / h as f64).sqrt() };
        Self { value: frac - v, std_error, counts: [h0, h1], histories: h }
    }

    pub fn z_score(&self, expected: f64) -> f64 {
        if self.std_error == 0.0 {
            if (self.value - expected).abs() <= ALGEBRA_TOL {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - expected) / self.std_error
        }
    }
}

#[inline]
pub(crate) fn step_state<R: Rng>(state: u8, m: &SwapMatrix, rng: &mut R) -> u8 {
    let r: f64 = rng.gen();
    if state == 0 {
        if r < m.leave0() {
            1
        } else {
            0
        }
    } else if r < m.leave1() {
        0
    } else {
        1
    }
}

fn check_histories(histories: u64) -> Result<()> {
    if histories == 0 {
        return Err(invalid("histories must be >= 1"));
    }
    Ok(())
}

/// Counts of histories ending in state 0, run in parallel chunks.
fn count_state0<F>(histories: u64, seed: u64, per_history: F) -> u64
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync,
{
    let streams = StreamFactory::new(seed);
    chunks(histories)
        .into_par_iter()
        .map(|(start, len)| {
            (start..start + len)
                .filter(|&i| {
                    let mut rng = streams.history(i);
                    per_history(&mut rng)
                })
                .count() as u64
        })
        .sum()
}

pub fn simulate_chain(spec: &ChainSpec, histories: u64, seed: u64) -> Result<Estimate> {
    spec.validate()?;
    check_histories(histories)?;
    let lambda = spec.lambda();
    let mats = spec.matrices();
    let h0 = count_state0(histories, seed, |rng| {
        let mut state = if rng.gen::<f64>() < lambda { 0 } else { 1 };
        for m in &mats {
            state = step_state(state, m, rng);
        }
        state == 0
    });
    Ok(Estimate::from_counts(h0, histories - h0, spec.v))
}

/// Estimates `s = k * w` with a single swap.
pub fn simulate_product(k: f64, w: f64, v: f64, histories: u64, seed: u64) -> Result<Estimate> {
    simulate_chain(&ChainSpec::new(vec![k], w, v)?, histories, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationEstimate {
    /// Excess over `v` of the merged histogram; estimates `s + (-s) = 0`.
    pub total: Estimate,
    /// State 0/1 counts of histories that chose `+s`.
    pub plus: [u64; 2],
    /// State 0/1 counts of histories that chose `-s`.
    pub minus: [u64; 2],
}

/// Simulates `0 = s + (-s)`: each history picks `+w` or `-w` with equal
/// probability and then runs the single-swap product with the shared `v`.
pub fn simulate_cancellation(k: f64, w: f64, v: f64, histories: u64, seed: u64) -> Result<CancellationEstimate> {
    ChainSpec::new(vec![k], w, v)?;
    ChainSpec::new(vec![k], -w, v)?;
    check_histories(histories)?;
    let m = SwapMatrix { g: 1.0 - k, v };
    let streams = StreamFactory::new(seed);
    // [plus0, plus1, minus0, minus1]
    let counts = chunks(histories)
        .into_par_iter()
        .map(|(start, len)| {
            let mut c = [0u64; 4];
            for i in start..start + len {
                let mut rng = streams.history(i);
                let plus = rng.gen::<bool>();
                let lambda = if plus { v + w } else { v - w };
                let init = if rng.gen::<f64>() < lambda { 0 } else { 1 };
                let state = step_state(init, &m, &mut rng);
                c[if plus { 0 } else { 2 } + state as usize] += 1;
            }
            c
        })
        .reduce(|| [0u64; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    let h0 = counts[0] + counts[2];
    Ok(CancellationEstimate {
        total: Estimate::from_counts(h0, histories - h0, v),
        plus: [counts[0], counts[1]],
        minus: [counts[2], counts[3]],
    })
}
