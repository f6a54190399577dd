//! Deterministic references: the exact discretized path sum, the time-slice
//! propagator and a Crank-Nicolson integrator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::lattice::{check_normalized, KernelTables, LatticeSpec, UniformGrid, WignerTable};
use crate::potential::PotentialSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSum {
    /// Signed path sum per final bin (probability mass of the bin).
    pub q: Vec<f64>,
    /// Weight that left the grid through leaking kernel rows.
    pub lost_mass: f64,
}

impl PathSum {
    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Exact discretized path sum: propagates pair weights `W(u0, u1 - u0) du^2`
/// through the chained kernels and marginalizes the penultimate slice.
pub fn transfer_path_sum(
    lattice: &LatticeSpec,
    schedule: &PotentialSchedule,
    wigner: &WignerTable,
    kernel: &KernelSpec,
) -> Result<PathSum> {
    let tables = KernelTables::build(schedule, lattice, kernel)?;
    transfer_with_tables(&tables, wigner)
}

pub fn transfer_with_tables(tables: &KernelTables, wigner: &WignerTable) -> Result<PathSum> {
    let n = wigner.n;
    if let Some(t) = tables.iter().find(|t| t.n != n) {
        return Err(Error::Dimension(format!("kernel table has {} points, Wigner table has {n}", t.n)));
    }
    let mut state: Vec<f64> = (0..n * n).map(|p| wigner.weight(p / n, p % n)).collect();
    let mut lost = 0.0;
    for table in tables.iter() {
        // next[b][c] = sum_a state[a][b] * k_{ab}(c)
        let rows: Vec<(Vec<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|b| {
                let mut out = vec![0.0; n];
                let mut leak = 0.0;
                for a in 0..n {
                    let s = state[a * n + b];
                    if s == 0.0 {
                        continue;
                    }
                    let row = table.row(a, b);
                    for (c, k) in row.entries() {
                        out[c] += s * k;
                    }
                    leak += s * (1.0 - row.mass);
                }
                (out, leak)
            })
            .collect();
        state.clear();
        for (row, leak) in rows {
            state.extend(row);
            lost += leak;
        }
    }
    let mut q = vec![0.0; n];
    for b in 0..n {
        for c in 0..n {
            q[c] += state[b * n + c];
        }
    }
    Ok(PathSum { q, lost_mass: lost })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Amplitude {
    pub psi: Vec<Complex64>,
    /// `sum |psi|^2 du` after the last step.
    pub norm: f64,
}

impl Amplitude {
    /// `|psi|^2 du` per bin.
    pub fn bin_probabilities(&self, spacing: f64) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr() * spacing).collect()
    }
}

/// Applies `n` discrete propagator steps
/// `psi_{l+1}(x) = sum_x' (2 pi i)^(-1/2) exp(i [(x - x')^2/2 - U_l(x')]) psi_l(x') du`.
pub fn feynman_amplitude(lattice: &LatticeSpec, schedule: &PotentialSchedule, psi0: &[Complex64]) -> Result<Amplitude> {
    lattice.validate()?;
    let n = lattice.n_points;
    if psi0.len() != n {
        return Err(Error::Dimension(format!("psi0 has {} samples, grid has {n}", psi0.len())));
    }
    let du = lattice.spacing();
    check_normalized(psi0, du)?;
    let prefactor = Complex64::from_polar((2.0 * PI).powf(-0.5), -PI / 4.0) * du;
    // kinetic factor by index difference |i - j|
    let kinetic: Vec<Complex64> = (0..n)
        .map(|d| {
            let x = d as f64 * du;
            Complex64::from_polar(1.0, 0.5 * x * x) * prefactor
        })
        .collect();
    let mut psi = psi0.to_vec();
    for l in 0..lattice.n_slices {
        let pot = schedule.at(l);
        let src: Vec<Complex64> =
            psi.iter().enumerate().map(|(j, z)| z * Complex64::from_polar(1.0, -pot.value(lattice.point(j)))).collect();
        psi = (0..n).into_par_iter().map(|i| (0..n).map(|j| kinetic[i.abs_diff(j)] * src[j]).sum()).collect();
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * du;
    if (norm - 1.0).abs() > 0.05 {
        log::warn!("propagator norm drifted to {norm:.4}; the grid is too coarse or too narrow");
    }
    Ok(Amplitude { psi, norm })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub psi: Vec<Complex64>,
    pub norm: f64,
}

impl Reference {
    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Crank-Nicolson integration of `i dpsi/dt = -psi''/2 + U psi` (hbar = m = 1)
/// with zero boundary values. The potential of slice `floor(t)` acts at time `t`.
pub fn schrodinger_reference(
    psi0: &[Complex64],
    schedule: &PotentialSchedule,
    total_time: f64,
    steps: usize,
    grid: &UniformGrid,
) -> Result<Reference> {
    let n = grid.len;
    if psi0.len() != n {
        return Err(Error::Dimension(format!("psi0 has {} samples, grid has {n}", psi0.len())));
    }
    if steps == 0 || !(total_time >= 0.0) {
        return Err(invalid("reference needs steps >= 1 and total_time >= 0"));
    }
    if n < 3 {
        return Err(invalid("reference grid needs at least 3 points"));
    }
    check_normalized(psi0, grid.spacing)?;
    let dt = total_time / steps as f64;
    let dx2 = grid.spacing * grid.spacing;
    let off = -0.5 / dx2;
    let half = Complex64::new(0.0, 0.5 * dt);

    let mut psi = psi0.to_vec();
    let mut diag = vec![0.0; n];
    let mut cached_slice = usize::MAX;
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for step in 0..steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let slice = t_mid.floor() as usize;
        if slice != cached_slice {
            let pot = schedule.at(slice);
            for (j, d) in diag.iter_mut().enumerate() {
                *d = 1.0 / dx2 + pot.value(grid.point(j));
            }
            cached_slice = slice;
        }
        // rhs = (1 - i dt/2 H) psi
        for j in 0..n {
            let mut h = psi[j] * diag[j];
            if j > 0 {
                h += psi[j - 1] * off;
            }
            if j + 1 < n {
                h += psi[j + 1] * off;
            }
            rhs[j] = psi[j] - half * h;
        }
        // (1 + i dt/2 H) psi' = rhs
        thomas(&diag, off, half, &mut rhs)?;
        psi.copy_from_slice(&rhs);
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing;
    Ok(Reference { psi, norm })
}

/// Solves the tridiagonal system with diagonal `1 + s d_j` and constant
/// off-diagonal `s off`, in place.
fn thomas(diag: &[f64], off: f64, s: Complex64, rhs: &mut [Complex64]) -> Result<()> {
    let n = diag.len();
    let lower = s * off;
    let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
    let mut denom = Complex64::new(1.0, 0.0) + s * diag[0];
    if denom.norm() < 1e-300 {
        return Err(Error::LinearSolve("zero pivot in row 0".into()));
    }
    c_prime[0] = lower / denom;
    rhs[0] /= denom;
    for j in 1..n {
        denom = Complex64::new(1.0, 0.0) + s * diag[j] - lower * c_prime[j - 1];
        if denom.norm() < 1e-300 || !denom.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot in row {j}")));
        }
        c_prime[j] = lower / denom;
        let prev = rhs[j - 1];
        rhs[j] = (rhs[j] - lower * prev) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = rhs[j + 1];
        rhs[j] -= c_prime[j] * next;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub bins: usize,
    pub l2: f64,
    pub max_abs: f64,
    pub z: Option<Vec<f64>>,
    /// Fraction of bins with `|z| <= 4`.
    pub within_4: Option<f64>,
}

/// Differences between two per-bin series; `stderr` is the combined
/// standard error per bin when one side is stochastic.
pub fn compare(a: &[f64], b: &[f64], stderr: Option<&[f64]>) -> Result<CompareReport> {
    if a.len() != b.len() {
        return Err(Error::BinningMismatch(format!("{} bins vs {} bins", a.len(), b.len())));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let l2 = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let max_abs = diff.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let (z, within_4) = match stderr {
        None => (None, None),
        Some(se) => {
            if se.len() != a.len() {
                return Err(Error::BinningMismatch(format!("{} standard errors for {} bins", se.len(), a.len())));
            }
            let z: Vec<f64> = diff
                .iter()
                .zip(se)
                .map(|(d, s)| {
                    if *s > 0.0 {
                        d / s
                    } else if *d == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let ok = z.iter().filter(|z| z.abs() <= 4.0).count();
            let frac = if z.is_empty() { 1.0 } else { ok as f64 / z.len() as f64 };
            (Some(z), Some(frac))
        }
    };
    Ok(CompareReport { bins: a.len(), l2, max_abs, z, within_4 })
}
