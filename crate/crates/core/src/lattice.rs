//! Spatiotemporal grid, the Langevin map between slices and the initial
//! quasiprobability table.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{kernel_row, DiscreteKernel, KernelSpec, KernelStrategy};
use crate::potential::{Potential, PotentialSchedule};

/// `len` points `start + j * spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub spacing: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn point(&self, j: usize) -> f64 {
        self.start + j as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.point(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub n_slices: usize,
    pub epsilon: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub n_points: usize,
}

fn one() -> f64 {
    1.0
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(invalid(format!("n_points = {} must be >= 3", self.n_points)));
        }
        if self.n_slices < 2 {
            return Err(invalid(format!("n_slices = {} must be >= 2", self.n_slices)));
        }
        if !(self.u_max > self.u_min) {
            return Err(invalid("u_max must exceed u_min"));
        }
        for (name, x) in [("epsilon", self.epsilon), ("mass", self.mass), ("hbar", self.hbar)] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(invalid(format!("{name} = {x} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.u_max - self.u_min) / (self.n_points - 1) as f64
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid { start: self.u_min, spacing: self.spacing(), len: self.n_points }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.u_min + i as f64 * self.spacing()
    }

    /// Physical length of one nondimensional unit, `sqrt(hbar eps / m)`.
    pub fn length_scale(&self) -> f64 {
        (self.hbar * self.epsilon / self.mass).sqrt()
    }
}

/// Physical position to nondimensional `u`.
pub fn nondimensionalize_position(x: f64, spec: &LatticeSpec) -> Result<f64> {
    spec_units(spec)?;
    Ok(x / spec.length_scale())
}

/// Physical energy to nondimensional units (`U * eps / hbar`).
pub fn nondimensionalize_energy(energy: f64, spec: &LatticeSpec) -> Result<f64> {
    spec_units(spec)?;
    Ok(energy * spec.epsilon / spec.hbar)
}

/// Physical polynomial potential `sum a_j x^j` in nondimensional form.
pub fn nondimensionalize_potential(physical: &Potential, spec: &LatticeSpec) -> Result<Potential> {
    spec_units(spec)?;
    Ok(physical.rescaled_argument(spec.length_scale()).scaled(spec.epsilon / spec.hbar))
}

fn spec_units(spec: &LatticeSpec) -> Result<()> {
    for (name, x) in [("epsilon", spec.epsilon), ("mass", spec.mass), ("hbar", spec.hbar)] {
        if !(x > 0.0) {
            return Err(invalid(format!("{name} = {x} must be > 0")));
        }
    }
    Ok(())
}

/// `u_next = 2 u_now - u_prev - U'(u_now) + y`.
pub fn langevin_step(u_now: f64, u_prev: f64, y: f64, potential: &Potential) -> f64 {
    2.0 * u_now - u_prev - potential.derivative(1, u_now) + y
}

/// Noise `y` that carries `(u_prev, u_now)` to `u_target`.
pub fn noise_for_target(u_target: f64, u_now: f64, u_prev: f64, potential: &Potential) -> f64 {
    u_target + u_prev - 2.0 * u_now + potential.derivative(1, u_now)
}

/// Named initial wave functions (nondimensional parameters) or samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `exp(-(u - center)^2 / (4 width^2) + i momentum u)`; `width` is the
    /// standard deviation of `|psi|^2`.
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        momentum: f64,
    },
    /// Harmonic-oscillator eigenstate `n` for `U = omega^2 u^2 / 2`.
    HoEigenstate {
        n: usize,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        omega: f64,
    },
    /// Two-column `(re, im)` CSV with one row per grid point.
    File { path: String },
}

impl InitialState {
    /// Samples on `grid`, normalized so that `sum |psi|^2 du = 1`.
    pub fn sample(&self, grid: &UniformGrid) -> Result<Vec<Complex64>> {
        let raw: Vec<Complex64> = match self {
            InitialState::Gaussian { center, width, momentum } => {
                if !(*width > 0.0) {
                    return Err(invalid("gaussian width must be > 0"));
                }
                grid.points()
                    .iter()
                    .map(|u| {
                        let d = u - center;
                        Complex64::from_polar((-d * d / (4.0 * width * width)).exp(), momentum * u)
                    })
                    .collect()
            }
            InitialState::HoEigenstate { n, center, omega } => {
                if !(*omega > 0.0) {
                    return Err(invalid("ho_eigenstate omega must be > 0"));
                }
                grid.points()
                    .iter()
                    .map(|u| Complex64::new(hermite_function(*n, omega.sqrt() * (u - center)), 0.0))
                    .collect()
            }
            InitialState::File { path } => {
                let samples = crate::io::read_psi_csv(std::path::Path::new(path))?;
                if samples.len() != grid.len {
                    return Err(Error::Dimension(format!(
                        "psi0 file has {} rows, grid has {} points",
                        samples.len(),
                        grid.len
                    )));
                }
                return Ok(samples);
            }
        };
        let norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing;
        if !(norm > 0.0) {
            return Err(invalid("initial state vanishes on the grid"));
        }
        let s = 1.0 / norm.sqrt();
        Ok(raw.into_iter().map(|z| z * s).collect())
    }
}

/// Normalized Hermite function `phi_n(x)`.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn check_normalized(psi: &[Complex64], spacing: f64) -> Result<()> {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * spacing;
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization { norm });
    }
    Ok(())
}

/// Initial quasiprobability over grid pairs `(u0, u1)`, stored as the
/// density `W(u0, u1 - u0)` together with the EPS encoding
/// `lambda = v + c * W * du^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerTable {
    pub n: usize,
    pub spacing: f64,
    /// Row-major over `(u0_index, u1_index)`.
    pub values: Vec<f64>,
    pub scale: f64,
    pub v: f64,
    /// `sum values * du^2`.
    pub mass: f64,
    /// Largest imaginary part of the complex transform.
    pub imag_residue: f64,
}

impl WignerTable {
    pub fn value(&self, i0: usize, i1: usize) -> f64 {
        self.values[i0 * self.n + i1]
    }

    /// Pair weight `W * du^2`.
    pub fn weight(&self, i0: usize, i1: usize) -> f64 {
        self.value(i0, i1) * self.spacing * self.spacing
    }

    pub fn lambda(&self, i0: usize, i1: usize) -> f64 {
        (self.v + self.scale * self.weight(i0, i1)).clamp(0.0, 1.0)
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs())) * self.spacing * self.spacing
    }

    /// Same table re-encoded for another reference level.
    pub fn with_reference(&self, v: f64) -> Result<Self> {
        check_reference(v)?;
        let mut out = self.clone();
        out.v = v;
        out.scale = v.min(1.0 - v) / self.max_abs_weight();
        Ok(out)
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for i0 in 0..self.n {
            for i1 in 0..self.n {
                let l = self.lambda(i0, i1);
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        (lo, hi)
    }
}

fn check_reference(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(invalid(format!("v = {v} must lie in (0, 1)")));
    }
    Ok(())
}

/// `psi` at `u_i + m du / 2`, linear between grid points.
fn half_point(psi: &[Complex64], i: usize, m: i64) -> Complex64 {
    let twice = 2 * i as i64 + m;
    if twice % 2 == 0 {
        psi[(twice / 2) as usize]
    } else {
        let lo = ((twice - 1) / 2) as usize;
        (psi[lo] + psi[lo + 1]) * 0.5
    }
}

/// Builds the initial table from `psi0` with the slice-0 potential phase
/// `exp(-i [U(u0 + w/2) - U(u0 - w/2)])`.
pub fn wigner_init(psi0: &[Complex64], potential: &Potential, spec: &LatticeSpec, v: f64) -> Result<WignerTable> {
    spec.validate()?;
    check_reference(v)?;
    let n = spec.n_points;
    if psi0.len() != n {
        return Err(Error::Dimension(format!("psi0 has {} samples, grid has {n}", psi0.len())));
    }
    let du = spec.spacing();
    check_normalized(psi0, du)?;

    let negligible = 1e-17 * psi0.iter().fold(0.0_f64, |m, z| m.max(z.norm_sqr()));
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i0| {
            let u0 = spec.point(i0);
            // |c_m| = |c_-m|; drop the symmetric tails that cannot contribute
            let mut reach = 2 * i0.min(n - 1 - i0) as i64;
            while reach > 0 && (half_point(psi0, i0, reach) * half_point(psi0, i0, -reach)).norm() < negligible {
                reach -= 1;
            }
            let corr: Vec<Complex64> = (-reach..=reach)
                .map(|m| {
                    let w = m as f64 * du;
                    let dv = potential.value(u0 + 0.5 * w) - potential.value(u0 - 0.5 * w);
                    half_point(psi0, i0, m) * half_point(psi0, i0, -m).conj() * Complex64::from_polar(1.0, -dv)
                })
                .collect();
            let mut row = Vec::with_capacity(n);
            let mut imag: f64 = 0.0;
            for i1 in 0..n {
                let p = (i1 as f64 - i0 as f64) * du;
                // sum_m c_m r^m with r = exp(-i p du), by Horner from the top
                let r = Complex64::from_polar(1.0, -p * du);
                let mut s = Complex64::new(0.0, 0.0);
                for c in corr.iter().rev() {
                    s = s * r + c;
                }
                let s = s * Complex64::from_polar(1.0, p * du * reach as f64);
                let wv = s * (du / (2.0 * PI));
                imag = imag.max(wv.im.abs());
                row.push(wv.re);
            }
            (row, imag)
        })
        .collect();

    let mut values = Vec::with_capacity(n * n);
    let mut imag_residue: f64 = 0.0;
    for (row, imag) in rows {
        values.extend(row);
        imag_residue = imag_residue.max(imag);
    }
    let peak = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if imag_residue > 1e-6 * peak {
        return Err(Error::ImaginaryResidue { residue: imag_residue, peak });
    }
    if peak == 0.0 {
        return Err(invalid("Wigner table vanishes on the grid"));
    }
    let mass = values.iter().sum::<f64>() * du * du;
    if (mass - 1.0).abs() > 1e-3 {
        log::warn!("Wigner table mass {mass:.6} deviates from 1; refine or widen the grid");
    }
    let scale = v.min(1.0 - v) / (peak * du * du);
    Ok(WignerTable { n, spacing: du, values, scale, v, mass, imag_residue })
}

/// Kernel rows for one slice, indexed by the pair `(a, b)` of grid indices
/// `(u_{l-1}, u_l)`; row entries are indexed by the successor `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTable {
    pub n: usize,
    pub rows: Vec<DiscreteKernel>,
    pub strategy: KernelStrategy,
}

impl TransitionTable {
    pub fn build(potential: &Potential, spec: &LatticeSpec, kernel: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        kernel.validate()?;
        let strategy = kernel.resolve(potential)?;
        let n = spec.n_points;
        let du = spec.spacing();
        let rows = (0..n * n)
            .into_par_iter()
            .map(|pair| {
                let (a, b) = (pair / n, pair % n);
                let ub = spec.point(b);
                let y0 = noise_for_target(spec.point(0), ub, spec.point(a), potential);
                let y_grid = UniformGrid { start: y0, spacing: du, len: n };
                kernel_row(ub, potential, &y_grid, kernel)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, rows, strategy })
    }

    pub fn row(&self, a: usize, b: usize) -> &DiscreteKernel {
        &self.rows[a * self.n + b]
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.max_abs()).fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.weights.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_mass(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_mass()).fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.rows.iter().map(|r| r.leakage().abs()).fold(0.0, f64::max)
    }
}

/// One table per chained slice `l = 1..n-1`; slices sharing a potential
/// share a table.
#[derive(Clone, Debug)]
pub struct KernelTables {
    per_slice: Vec<Arc<TransitionTable>>,
}

impl KernelTables {
    pub fn build(schedule: &PotentialSchedule, spec: &LatticeSpec, kernel: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let mut per_slice: Vec<Arc<TransitionTable>> = Vec::with_capacity(spec.n_slices - 1);
        for l in 1..spec.n_slices {
            let pot = schedule.at(l);
            let reuse = (1..l).find(|&m| schedule.at(m) == pot).map(|m| per_slice[m - 1].clone());
            per_slice.push(match reuse {
                Some(t) => t,
                None => Arc::new(TransitionTable::build(pot, spec, kernel)?),
            });
        }
        let tables = Self { per_slice };
        let leakage = tables.max_leakage();
        if leakage > kernel.tail_tolerance {
            log::warn!("kernel row mass leakage {leakage:.3e} exceeds {:.1e}; widen the grid", kernel.tail_tolerance);
        }
        Ok(tables)
    }

    /// Table for chained slice `l` (1-based).
    pub fn slice(&self, l: usize) -> &TransitionTable {
        &self.per_slice[l - 1]
    }

    pub fn steps(&self) -> usize {
        self.per_slice.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionTable> {
        self.per_slice.iter().map(|t| t.as_ref())
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.iter().map(|t| t.max_abs_weight()).fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.iter().map(|t| t.max_leakage()).fold(0.0, f64::max)
    }
}
