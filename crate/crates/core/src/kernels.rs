//! Real-valued short-time transition kernels.
//!
//! For a potential `U` the kernel is
//!
//! ```text
//! K(y, u) = (1/2pi) * integral over w of cos(y w + phi_u(w))
//! ```
//!
//! where `phi_u` is the odd series in `w` built from the odd derivatives of
//! order >= 3 of `U` at `u`. The convention integrates to one in `y`, so a
//! potential without such derivatives gives `K = delta(y)`.
//!
//! Three evaluators exist: the delta row (no pointwise density), the Airy
//! closed form for a purely cubic phase, and contour quadrature for anything
//! else. Polynomial potentials make the phase series finite.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airy::airy_ai;
use crate::error::{invalid, Error, Result};
use crate::lattice::UniformGrid;
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelStrategy {
    #[default]
    Auto,
    Delta,
    Airy,
    Quadrature,
}

/// Coefficients of the odd phase series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesConvention {
    /// `2 * w^(2k+1) / (2k+1)! * U^(2k+1)(u)`.
    #[default]
    Printed,
    /// `2 * (w/2)^(2k+1) / (2k+1)! * U^(2k+1)(u)`, the Taylor expansion of
    /// `U(u + w/2) - U(u - w/2)`.
    Taylor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub strategy: KernelStrategy,
    pub series: SeriesConvention,
    /// Agreement required between the two contour offsets.
    pub tolerance: f64,
    /// Allowed deviation of a row mass from one before it is reported.
    pub tail_tolerance: f64,
    /// Hard cap on quadrature nodes per contour.
    pub max_nodes: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            strategy: KernelStrategy::Auto,
            series: SeriesConvention::Printed,
            tolerance: 1e-8,
            tail_tolerance: 0.01,
            max_nodes: 4_000_000,
        }
    }
}

impl KernelSpec {
    pub fn with_strategy(strategy: KernelStrategy) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(invalid("kernel.tolerance must be > 0"));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(invalid("kernel.tail_tolerance must be > 0"));
        }
        if self.max_nodes < 64 {
            return Err(invalid("kernel.max_nodes must be >= 64"));
        }
        Ok(())
    }

    /// Strategy for a whole potential: delta when every odd derivative of
    /// order >= 3 vanishes identically, airy when only the third survives.
    pub fn resolve(&self, potential: &Potential) -> Result<KernelStrategy> {
        let natural = if potential.degree() < 3 {
            KernelStrategy::Delta
        } else if potential.degree() < 5 {
            KernelStrategy::Airy
        } else {
            KernelStrategy::Quadrature
        };
        match (self.strategy, natural) {
            (KernelStrategy::Auto, n) => Ok(n),
            (KernelStrategy::Delta, KernelStrategy::Delta) => Ok(KernelStrategy::Delta),
            (KernelStrategy::Delta, _) => {
                Err(invalid("delta kernel strategy requires vanishing odd derivatives of order >= 3"))
            }
            (KernelStrategy::Airy, KernelStrategy::Quadrature) => {
                Err(invalid("airy kernel strategy requires a potential of degree <= 4"))
            }
            (KernelStrategy::Airy, _) => Ok(KernelStrategy::Airy),
            (KernelStrategy::Quadrature, _) => Ok(KernelStrategy::Quadrature),
        }
    }
}

/// Phase polynomial `y w + sum_k a_k w^(2k+1)` at a fixed `u`; `odd[k-1]`
/// holds `a_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub odd: Vec<f64>,
}

impl Phase {
    pub fn at(u: f64, potential: &Potential, series: SeriesConvention) -> Self {
        let mut odd = Vec::new();
        let mut order = 3;
        while order <= potential.degree() {
            let fact: f64 = (1..=order).map(|x| x as f64).product();
            let scale = match series {
                SeriesConvention::Printed => 1.0,
                SeriesConvention::Taylor => 0.5_f64.powi(order as i32),
            };
            odd.push(2.0 * scale * potential.derivative(order, u) / fact);
            order += 2;
        }
        while odd.last() == Some(&0.0) {
            odd.pop();
        }
        Self { odd }
    }

    pub fn is_trivial(&self) -> bool {
        self.odd.is_empty()
    }

    pub fn is_cubic(&self) -> bool {
        self.odd.len() == 1
    }

    /// `sum_k a_k w^(2k+1)` (without the linear term).
    pub fn series(&self, w: f64) -> f64 {
        let w2 = w * w;
        let mut p = w * w2;
        let mut acc = 0.0;
        for a in &self.odd {
            acc += a * p;
            p *= w2;
        }
        acc
    }

    fn eval(&self, y: f64, z: Complex64) -> Complex64 {
        let z2 = z * z;
        let mut p = z * z2;
        let mut acc = z * y;
        for a in &self.odd {
            acc += p * *a;
            p *= z2;
        }
        acc
    }

    fn deriv(&self, y: f64, z: Complex64) -> Complex64 {
        let z2 = z * z;
        let mut p = z2;
        let mut acc = Complex64::new(y, 0.0);
        for (k, a) in self.odd.iter().enumerate() {
            acc += p * (a * (2 * k + 3) as f64);
            p *= z2;
        }
        acc
    }

    fn second_deriv(&self, z: Complex64) -> Complex64 {
        let z2 = z * z;
        let mut p = z;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in self.odd.iter().enumerate() {
            let n = (2 * k + 3) as f64;
            acc += p * (a * n * (n - 1.0));
            p *= z2;
        }
        acc
    }

    /// Width in `w` over which the nonlinear terms reach unit phase.
    fn scale(&self) -> f64 {
        self.odd
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, a)| a.abs().powf(-1.0 / (2 * k + 3) as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Odd phase series at `(u, w)` in the printed convention.
pub fn phase_series(u: f64, w: f64, potential: &Potential) -> f64 {
    phase_series_with(u, w, potential, SeriesConvention::Printed)
}

pub fn phase_series_with(u: f64, w: f64, potential: &Potential, series: SeriesConvention) -> f64 {
    Phase::at(u, potential, series).series(w)
}

/// Pointwise kernel density `K(y, u)`.
pub fn kernel_value(y: f64, u: f64, potential: &Potential, spec: &KernelSpec) -> Result<f64> {
    let strategy = spec.resolve(potential)?;
    let phase = Phase::at(u, potential, spec.series);
    match strategy {
        KernelStrategy::Delta => Err(invalid("the delta kernel has no pointwise value; build a kernel row instead")),
        _ if phase.is_trivial() => Err(invalid(format!(
            "the kernel at u = {u} is a delta (odd derivatives vanish); build a kernel row instead"
        ))),
        KernelStrategy::Airy => Ok(airy_kernel(y, phase.odd[0])),
        _ => quadrature_kernel(y, &phase, spec).map_err(|e| match e {
            Error::QuadratureNonConvergent { y, residual, .. } => Error::QuadratureNonConvergent { y, u, residual },
            other => other,
        }),
    }
}

/// Closed form for the phase `y w + a w^3`: `(3|a|)^(-1/3) Ai(sgn(a) y (3|a|)^(-1/3))`.
pub fn airy_kernel(y: f64, a: f64) -> f64 {
    let s = (3.0 * a.abs()).cbrt();
    airy_ai(a.signum() * y / s) / s
}

/// Evaluates `(1/pi) Re integral_0^inf exp(i phi(t + i h)) dt` for two
/// offsets `h`; the integrand is entire, so both must agree.
pub fn quadrature_kernel(y: f64, phase: &Phase, spec: &KernelSpec) -> Result<f64> {
    if phase.is_trivial() {
        return Err(invalid("quadrature requires a nonlinear phase"));
    }
    let sigma = phase.scale();
    let lead = *phase.odd.last().expect("nontrivial phase");
    let sign = lead.signum();
    let mut h = 0.5 * sigma;
    if sign * y < 0.0 {
        h = h.min(3.0 / y.abs());
    }
    let first = shifted_line(y, phase, sign * h, sigma, spec.max_nodes)?;
    let second = shifted_line(y, phase, sign * 0.7 * h, sigma, spec.max_nodes)?;
    let residual = (first - second).abs();
    if residual > spec.tolerance * (1.0 + 1.0 / sigma) {
        return Err(Error::QuadratureNonConvergent { y, u: f64::NAN, residual });
    }
    Ok(second)
}

fn shifted_line(y: f64, phase: &Phase, h: f64, sigma: f64, max_nodes: usize) -> Result<f64> {
    let (nodes, weights) = gauss_legendre();
    let shift = Complex64::new(0.0, h);
    let integrand = |t: f64| (Complex64::i() * phase.eval(y, Complex64::new(t, 0.0) + shift)).exp();

    // beyond t_dom the leading power dominates the phase derivative
    let t_dom = {
        let lead_k = phase.odd.len();
        let lead = phase.odd[lead_k - 1].abs() * (2 * lead_k + 1) as f64;
        let mut others = y.abs();
        for (k, a) in phase.odd[..lead_k - 1].iter().enumerate() {
            others += a.abs() * (2 * k + 3) as f64;
        }
        (4.0 * others / lead).powf(1.0 / (2 * lead_k) as f64).max(sigma) + h.abs()
    };

    let mut total = 0.0;
    let mut peak: f64 = 0.0;
    let mut t = 0.0;
    let mut used = 0;
    loop {
        let z = Complex64::new(t, 0.0) + shift;
        let rate = phase.deriv(y, z).norm();
        let curvature = phase.second_deriv(z).norm();
        // keep the phase change per panel near 3 radians, also across stationary points
        let width = (3.0 / (rate + 1.0 / sigma)).min((6.0 / curvature).sqrt()).min(0.5 * sigma);
        let mid = t + 0.5 * width;
        let mut panel = 0.0;
        let mut panel_max: f64 = 0.0;
        for (x, wgt) in nodes.iter().zip(weights.iter()) {
            let f = integrand(mid + 0.5 * width * x);
            panel += wgt * f.re;
            panel_max = panel_max.max(f.norm());
        }
        total += 0.5 * width * panel;
        peak = peak.max(panel_max);
        used += nodes.len();
        t += width;
        if t > t_dom && panel_max < 1e-18 * peak.max(1.0) {
            break;
        }
        if used > max_nodes {
            return Err(Error::QuadratureNonConvergent { y, u: f64::NAN, residual: panel_max });
        }
    }
    Ok(total / PI)
}

/// 20-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 20;
        let mut x = Vec::with_capacity(N);
        let mut w = Vec::with_capacity(N);
        for i in 0..N {
            let mut z = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for n in 2..=N {
                    let p2 = ((2 * n - 1) as f64 * z * p1 - (n - 1) as f64 * p0) / n as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x.push(z);
            w.push(2.0 / ((1.0 - z * z) * dp * dp));
        }
        (x, w)
    })
}

/// One row of discrete kernel weights over a uniform noise grid.
///
/// Only the entries in `start..start + weights.len()` can be nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteKernel {
    pub start: usize,
    pub weights: Vec<f64>,
    pub mass: f64,
    pub strategy: KernelStrategy,
}

impl DiscreteKernel {
    pub fn weight(&self, j: usize) -> f64 {
        j.checked_sub(self.start).and_then(|i| self.weights.get(i)).copied().unwrap_or(0.0)
    }

    /// `(index, weight)` for every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, w)| (self.start + i, *w))
    }

    pub fn abs_mass(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.mass
    }
}

/// Kernel weights `k_j` over `y_grid` for a particle at `u`.
///
/// Delta rows put unit weight on the zero-noise point, split linearly
/// between the two bracketing grid points when it is off-grid.
pub fn kernel_row(u: f64, potential: &Potential, y_grid: &UniformGrid, spec: &KernelSpec) -> Result<DiscreteKernel> {
    let strategy = spec.resolve(potential)?;
    let phase = Phase::at(u, potential, spec.series);
    let row = if strategy == KernelStrategy::Delta || phase.is_trivial() {
        delta_row(y_grid)
    } else {
        let mut weights = Vec::with_capacity(y_grid.len);
        for j in 0..y_grid.len {
            let y = y_grid.point(j);
            let k = match strategy {
                KernelStrategy::Airy => airy_kernel(y, phase.odd[0]),
                _ => quadrature_kernel(y, &phase, spec).map_err(|e| match e {
                    Error::QuadratureNonConvergent { y, residual, .. } => {
                        Error::QuadratureNonConvergent { y, u, residual }
                    }
                    other => other,
                })?,
            };
            weights.push(k * y_grid.spacing);
        }
        let mass = weights.iter().sum();
        DiscreteKernel { start: 0, weights, mass, strategy }
    };
    let max = row.max_abs();
    if max > 1.0 + 1e-12 {
        return Err(Error::KernelWeightTooLarge { u, weight: max });
    }
    Ok(row)
}

fn delta_row(y_grid: &UniformGrid) -> DiscreteKernel {
    let t = -y_grid.start / y_grid.spacing;
    let base = t.floor();
    let frac = t - base;
    let mut entries: Vec<(i64, f64)> = Vec::with_capacity(2);
    if frac < 1e-12 {
        entries.push((base as i64, 1.0));
    } else if frac > 1.0 - 1e-12 {
        entries.push((base as i64 + 1, 1.0));
    } else {
        entries.push((base as i64, 1.0 - frac));
        entries.push((base as i64 + 1, frac));
    }
    let entries: Vec<(usize, f64)> = entries
        .into_iter()
        .filter(|(j, _)| *j >= 0 && (*j as usize) < y_grid.len)
        .map(|(j, w)| (j as usize, w))
        .collect();
    let start = entries.first().map_or(0, |e| e.0);
    let mut weights = vec![0.0; entries.last().map_or(0, |e| e.0 + 1 - start)];
    for (j, w) in &entries {
        weights[j - start] = *w;
    }
    let mass = weights.iter().sum();
    DiscreteKernel { start, weights, mass, strategy: KernelStrategy::Delta }
}
