//! First-principles Monte Carlo over lattice paths and EPS states.
//!
//! Every history walks the Langevin lattice and, with the same random
//! successor choice, applies one stochastic swap per chained slice. The
//! quantum bin probability is the excess of state-0 counts over `v` times
//! the bin total, rescaled by the deterministic factor `N_scale`.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eps::{step_state, valid_v_interval, SwapMatrix, DEFAULT_V};
use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;
use crate::lattice::{wigner_init, InitialState, KernelTables, LatticeSpec, TransitionTable, WignerTable};
use crate::potential::PotentialSchedule;
use crate::rng::{chunks, with_workers, StreamFactory};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    /// Initial pair and successors drawn uniformly over the grid.
    #[default]
    Uniform,
    /// Initial pair drawn by `|W|`, successors by `|k|`; signs and row
    /// masses ride on the swaps.
    Importance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub histories: u64,
    pub seed: u64,
    pub v: f64,
    pub strategy: SamplingStrategy,
    pub lattice: LatticeSpec,
    pub potential: PotentialSchedule,
    pub kernel: KernelSpec,
    pub initial: InitialState,
}

impl RunConfig {
    pub fn new(lattice: LatticeSpec, potential: PotentialSchedule, initial: InitialState) -> Self {
        Self {
            histories: 1_000_000,
            seed: 0,
            v: DEFAULT_V,
            strategy: SamplingStrategy::Uniform,
            lattice,
            potential,
            kernel: KernelSpec::default(),
            initial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.histories == 0 {
            return Err(invalid("histories must be >= 1"));
        }
        if !(self.v > 0.0 && self.v < 1.0) {
            return Err(invalid(format!("v = {} must lie in (0, 1)", self.v)));
        }
        self.lattice.validate()?;
        self.kernel.validate()
    }
}

/// Wigner table and kernel tables shared by the sampler and the oracles.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub wigner: WignerTable,
    pub tables: KernelTables,
}

impl Prepared {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let psi0 = config.initial.sample(&config.lattice.grid())?;
        let wigner = wigner_init(&psi0, config.potential.at(0), &config.lattice, config.v)?;
        let tables = KernelTables::build(&config.potential, &config.lattice, &config.kernel)?;
        let prepared = Self { config, wigner, tables };
        prepared.check_reference()?;
        Ok(prepared)
    }

    /// Same tables, different reference level.
    pub fn with_reference(&self, v: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.v = v;
        config.validate()?;
        let prepared = Self { config, wigner: self.wigner.with_reference(v)?, tables: self.tables.clone() };
        prepared.check_reference()?;
        Ok(prepared)
    }

    pub fn with_strategy(&self, strategy: SamplingStrategy) -> Result<Self> {
        let mut out = self.clone();
        out.config.strategy = strategy;
        out.check_reference()?;
        Ok(out)
    }

    fn importance(&self) -> ImportancePlan {
        ImportancePlan::new(&self.wigner, &self.tables)
    }

    /// Every swap the run can apply must be a valid matrix at `v`.
    fn check_reference(&self) -> Result<()> {
        let v = self.config.v;
        let min_k = match self.config.strategy {
            SamplingStrategy::Uniform => self.tables.iter().map(|t| t.min_weight().min(0.0)).fold(0.0, f64::min),
            SamplingStrategy::Importance => self.importance().min_k(),
        };
        let g = 1.0 - min_k;
        let interval = valid_v_interval(g.min(2.0))?;
        if !interval.contains(v) {
            return Err(invalid(format!(
                "v = {v} is outside the valid interval [{:.6}, {:.6}] for the most negative kernel weight {min_k:.6}",
                interval.lo, interval.hi
            )));
        }
        Ok(())
    }

    pub fn n_scale(&self) -> f64 {
        let n = self.config.lattice.n_points as f64;
        match self.config.strategy {
            SamplingStrategy::Uniform => n.powi(self.tables.steps() as i32 + 2) / self.wigner.scale,
            SamplingStrategy::Importance => self.importance().n_scale(self.config.v),
        }
    }
}

/// Cumulative distributions for importance sampling.
struct ImportancePlan {
    pair_cdf: Vec<f64>,
    pair_total: f64,
    /// Per slice, per pair row: cumulative `|k|` over the row entries.
    row_cdf: Vec<Vec<Vec<f64>>>,
    max_row_mass: Vec<f64>,
}

impl ImportancePlan {
    fn new(wigner: &WignerTable, tables: &KernelTables) -> Self {
        let n = wigner.n;
        let mut pair_cdf = Vec::with_capacity(n * n);
        let mut acc = 0.0;
        for p in 0..n * n {
            acc += wigner.weight(p / n, p % n).abs();
            pair_cdf.push(acc);
        }
        let mut row_cdf = Vec::new();
        let mut max_row_mass = Vec::new();
        for t in tables.iter() {
            let rows: Vec<Vec<f64>> = t
                .rows
                .iter()
                .map(|r| {
                    let mut acc = 0.0;
                    r.weights
                        .iter()
                        .map(|w| {
                            acc += w.abs();
                            acc
                        })
                        .collect()
                })
                .collect();
            max_row_mass.push(t.max_abs_mass());
            row_cdf.push(rows);
        }
        Self { pair_cdf, pair_total: acc, row_cdf, max_row_mass }
    }

    fn n_scale(&self, v: f64) -> f64 {
        self.pair_total * self.max_row_mass.iter().product::<f64>() / v.min(1.0 - v)
    }

    fn min_k(&self) -> f64 {
        // the most negative effective factor is -(row mass)/(max row mass)
        let mut min: f64 = 0.0;
        for (rows, max) in self.row_cdf.iter().zip(&self.max_row_mass) {
            if *max > 0.0 {
                for r in rows {
                    if let Some(total) = r.last() {
                        min = min.min(-total / max);
                    }
                }
            }
        }
        min
    }
}

fn draw_from_cdf<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("nonempty cdf");
    let r = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= r).min(cdf.len() - 1)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_row_leakage: f64,
    pub kernel_max_abs_weight: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub wigner_mass: f64,
    pub predicted_rel_se: f64,
    /// Not serialized, so result files stay reproducible.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub bin_centers: Vec<f64>,
    pub h0: Vec<u64>,
    pub h1: Vec<u64>,
    pub histories: u64,
    pub n_scale: f64,
    pub q_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub v: f64,
    pub seed: u64,
    pub strategy: SamplingStrategy,
    pub diagnostics: Diagnostics,
}

/// Excess per bin, `n_scale (h0 - v (h0 + h1)) / H`, with the standard error
/// of the per-history contribution (values `n_scale (1 - v)`, `-n_scale v`, 0).
pub fn excess(h0: &[u64], h1: &[u64], v: f64, n_scale: f64, histories: u64) -> (Vec<f64>, Vec<f64>) {
    let h = histories as f64;
    h0.iter()
        .zip(h1)
        .map(|(&a, &b)| {
            if histories == 0 {
                return (0.0, 0.0);
            }
            let p0 = a as f64 / h;
            let p1 = b as f64 / h;
            let mean = p0 * (1.0 - v) - p1 * v;
            let second = p0 * (1.0 - v) * (1.0 - v) + p1 * v * v;
            let var = (second - mean * mean).max(0.0);
            (n_scale * mean, n_scale * (var / h).sqrt())
        })
        .unzip()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuntimeClass {
    Seconds,
    Minutes,
    Hours,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub n_scale: f64,
    /// Bound on the standard error of the total probability.
    pub predicted_rel_se: f64,
    /// Product over chained slices of the largest `|k|`.
    pub weight_bound: f64,
    pub chained_steps: usize,
    pub runtime: RuntimeClass,
    pub feasible: bool,
}

pub fn estimate_cost(prepared: &Prepared) -> CostEstimate {
    let cfg = &prepared.config;
    let n_scale = prepared.n_scale();
    let h = cfg.histories as f64;
    let predicted_rel_se = n_scale * cfg.v.max(1.0 - cfg.v) / h.sqrt();
    let weight_bound = prepared.tables.iter().map(|t| t.max_abs_weight()).product();
    let work = h * cfg.lattice.n_slices as f64;
    let runtime = if work < 1e9 {
        RuntimeClass::Seconds
    } else if work < 1e11 {
        RuntimeClass::Minutes
    } else {
        RuntimeClass::Hours
    };
    CostEstimate {
        n_scale,
        predicted_rel_se,
        weight_bound,
        chained_steps: prepared.tables.steps(),
        runtime,
        feasible: predicted_rel_se <= 1.0 && n_scale.is_finite(),
    }
}

pub fn run(config: RunConfig) -> Result<RunResult> {
    let prepared = Prepared::new(config)?;
    Ok(run_prepared(&prepared))
}

/// Runs on a pool capped at `workers` threads.
pub fn run_with_workers(prepared: &Prepared, workers: Option<usize>) -> RunResult {
    with_workers(workers, || run_prepared(prepared))
}

pub fn run_prepared(prepared: &Prepared) -> RunResult {
    let started = Instant::now();
    let cfg = &prepared.config;
    let n = cfg.lattice.n_points;
    let v = cfg.v;
    let streams = StreamFactory::new(cfg.seed);
    let tables: Vec<&TransitionTable> = prepared.tables.iter().collect();
    let wigner = &prepared.wigner;
    let plan = match cfg.strategy {
        SamplingStrategy::Importance => Some(prepared.importance()),
        SamplingStrategy::Uniform => None,
    };
    let m = v.min(1.0 - v);

    let (h0, h1) = chunks(cfg.histories)
        .into_par_iter()
        .map(|(start, len)| {
            let mut h0 = vec![0u64; n];
            let mut h1 = vec![0u64; n];
            for i in start..start + len {
                let mut rng = streams.history(i);
                let (bin, state) = match &plan {
                    None => uniform_history(&mut rng, n, wigner, &tables, v),
                    Some(plan) => importance_history(&mut rng, n, wigner, &tables, plan, v, m),
                };
                if state == 0 {
                    h0[bin] += 1;
                } else {
                    h1[bin] += 1;
                }
            }
            (h0, h1)
        })
        .reduce(
            || (vec![0u64; n], vec![0u64; n]),
            |mut a, b| {
                for j in 0..n {
                    a.0[j] += b.0[j];
                    a.1[j] += b.1[j];
                }
                a
            },
        );

    let n_scale = prepared.n_scale();
    let (q_hat, stderr) = excess(&h0, &h1, v, n_scale, cfg.histories);
    let cost = estimate_cost(prepared);
    let (lambda_min, lambda_max) = wigner.lambda_range();
    RunResult {
        bin_centers: cfg.lattice.grid().points(),
        h0,
        h1,
        histories: cfg.histories,
        n_scale,
        q_hat,
        stderr,
        v,
        seed: cfg.seed,
        strategy: cfg.strategy,
        diagnostics: Diagnostics {
            max_row_leakage: prepared.tables.max_leakage(),
            kernel_max_abs_weight: prepared.tables.max_abs_weight(),
            lambda_min,
            lambda_max,
            wigner_mass: wigner.mass,
            predicted_rel_se: cost.predicted_rel_se,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    }
}

fn uniform_history<R: Rng>(
    rng: &mut R,
    n: usize,
    wigner: &WignerTable,
    tables: &[&TransitionTable],
    v: f64,
) -> (usize, u8) {
    let mut a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n);
    let mut state = if rng.gen::<f64>() < wigner.lambda(a, b) { 0 } else { 1 };
    for t in tables {
        let c = rng.gen_range(0..n);
        let k = t.row(a, b).weight(c);
        state = step_state(state, &SwapMatrix { g: 1.0 - k, v }, rng);
        a = b;
        b = c;
    }
    (b, state)
}

fn importance_history<R: Rng>(
    rng: &mut R,
    n: usize,
    wigner: &WignerTable,
    tables: &[&TransitionTable],
    plan: &ImportancePlan,
    v: f64,
    m: f64,
) -> (usize, u8) {
    let pair = draw_from_cdf(&plan.pair_cdf, rng);
    let (mut a, mut b) = (pair / n, pair % n);
    let lambda = v + wigner.weight(a, b).signum() * m;
    let mut state = if rng.gen::<f64>() < lambda { 0 } else { 1 };
    for (l, t) in tables.iter().enumerate() {
        let row = t.row(a, b);
        let cdf = &plan.row_cdf[l][a * n + b];
        let total = cdf.last().copied().unwrap_or(0.0);
        let (c, k) = if total > 0.0 {
            let j = draw_from_cdf(cdf, rng);
            (row.start + j, row.weights[j].signum() * total / plan.max_row_mass[l])
        } else {
            // dead row: any successor, excess reset to zero
            (rng.gen_range(0..n), 0.0)
        };
        state = step_state(state, &SwapMatrix { g: 1.0 - k, v }, rng);
        a = b;
        b = c;
    }
    (b, state)
}

/// Exact expectation of `q_hat`, from the joint distribution over
/// `(pair, EPS state)` that the sampler's Markov chain induces.
pub fn expected_q_hat(prepared: &Prepared) -> Vec<f64> {
    let (p0, p1) = state_distribution(prepared);
    let v = prepared.config.v;
    let s = prepared.n_scale();
    p0.iter().zip(&p1).map(|(a, b)| s * (a - v * (a + b))).collect()
}

/// Final-bin probabilities of ending in state 0 and in state 1.
pub fn state_distribution(prepared: &Prepared) -> (Vec<f64>, Vec<f64>) {
    let cfg = &prepared.config;
    let n = cfg.lattice.n_points;
    let v = cfg.v;
    let wigner = &prepared.wigner;
    let m = v.min(1.0 - v);
    let plan = match cfg.strategy {
        SamplingStrategy::Importance => Some(prepared.importance()),
        SamplingStrategy::Uniform => None,
    };
    // dist[pair] = [P(state 0), P(state 1)]
    let mut dist: Vec<[f64; 2]> = (0..n * n)
        .map(|p| {
            let (a, b) = (p / n, p % n);
            match &plan {
                None => {
                    let l = wigner.lambda(a, b);
                    let w = 1.0 / (n * n) as f64;
                    [w * l, w * (1.0 - l)]
                }
                Some(plan) => {
                    let w = wigner.weight(a, b);
                    let prob = w.abs() / plan.pair_total;
                    let l = v + w.signum() * m;
                    [prob * l, prob * (1.0 - l)]
                }
            }
        })
        .collect();
    for (l, t) in prepared.tables.iter().enumerate() {
        let mut next = vec![[0.0; 2]; n * n];
        for a in 0..n {
            for b in 0..n {
                let d = dist[a * n + b];
                if d == [0.0, 0.0] {
                    continue;
                }
                let row = t.row(a, b);
                let mut push = |c: usize, prob: f64, k: f64| {
                    let mat = SwapMatrix { g: 1.0 - k, v };
                    let e = mat.entries();
                    let slot = &mut next[b * n + c];
                    slot[0] += prob * (e[0][0] * d[0] + e[0][1] * d[1]);
                    slot[1] += prob * (e[1][0] * d[0] + e[1][1] * d[1]);
                };
                match &plan {
                    None => {
                        for c in 0..n {
                            push(c, 1.0 / n as f64, row.weight(c));
                        }
                    }
                    Some(plan) => {
                        let total = row.abs_mass();
                        if total > 0.0 {
                            for (c, k) in row.entries() {
                                if k != 0.0 {
                                    push(c, k.abs() / total, k.signum() * total / plan.max_row_mass[l]);
                                }
                            }
                        } else {
                            for c in 0..n {
                                push(c, 1.0 / n as f64, 0.0);
                            }
                        }
                    }
                }
            }
        }
        dist = next;
    }
    let mut p0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    for b in 0..n {
        for c in 0..n {
            p0[c] += dist[b * n + c][0];
            p1[c] += dist[b * n + c][1];
        }
    }
    (p0, p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn excess_examples() {
        let (q, se) = excess(&[600], &[400], 0.5, 1.0, 1000);
        assert!((q[0] - 0.1).abs() < 1e-15);
        assert!(se[0] > 0.0);
        let (q, se) = excess(&[0], &[0], 0.5, 10.0, 1000);
        assert_eq!((q[0], se[0]), (0.0, 0.0));
        let (q, _) = excess(&[300], &[700], 0.3, 2.0, 5000);
        assert!(q[0].abs() < 1e-15);
    }

    #[test]
    fn excess_stderr_matches_sample_variance() {
        // X = 1 - v (h0 of them), -v (h1), 0 (rest)
        let (h0, h1, h, v) = (120u64, 80u64, 1000u64, 0.4);
        let mut xs = vec![1.0 - v; h0 as usize];
        xs.extend(vec![-v; h1 as usize]);
        xs.extend(vec![0.0; (h - h0 - h1) as usize]);
        let mean = xs.iter().sum::<f64>() / h as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / h as f64;
        let (q, se) = excess(&[h0], &[h1], v, 1.0, h);
        assert!((q[0] - mean).abs() < 1e-14);
        assert!((se[0] - (var / h as f64).sqrt()).abs() < 1e-14);
    }

    fn tiny() -> RunConfig {
        let lattice =
            LatticeSpec { n_slices: 3, epsilon: 1.0, mass: 1.0, hbar: 1.0, u_min: -2.0, u_max: 2.0, n_points: 9 };
        let mut cfg = RunConfig::new(
            lattice,
            Potential::zero().into(),
            InitialState::Gaussian { center: 0.0, width: 0.7, momentum: 0.0 },
        );
        cfg.histories = 20_000;
        cfg
    }

    #[test]
    fn counts_add_up() {
        let r = run(tiny()).unwrap();
        let total: u64 = r.h0.iter().chain(r.h1.iter()).sum();
        assert_eq!(total, r.histories);
    }

    #[test]
    fn rejects_zero_histories_and_bad_v() {
        let mut cfg = tiny();
        cfg.histories = 0;
        assert!(run(cfg).unwrap_err().to_string().contains("histories must be >= 1"));
        let mut cfg = tiny();
        cfg.v = 1.0;
        assert!(run(cfg).is_err());
    }

    #[test]
    fn n_scale_counts_chained_steps() {
        let mut cfg = tiny();
        cfg.lattice.n_slices = 2;
        let p = Prepared::new(cfg).unwrap();
        assert_eq!(p.tables.steps(), 1);
        let expect = 9f64.powi(3) / p.wigner.scale;
        assert!((p.n_scale() - expect).abs() < 1e-9 * expect);
    }
}
