//! Airy function of the first kind for real arguments.
//!
//! Maclaurin series on `[-5, 3)`, Taylor stepping of `y'' = z y` from the
//! asymptotic values at `-5` (forward to `-9`) and at `9` (backward to `3`),
//! asymptotic expansions beyond.

use std::f64::consts::PI;

/// Ai(0) = 3^(-2/3) / Gamma(2/3)
const AI0: f64 = 0.355_028_053_887_817_2;
/// -Ai'(0) = 3^(-1/3) / Gamma(1/3)
const AIP0: f64 = 0.258_819_403_792_806_8;

const SERIES_HI: f64 = 3.0;
const SERIES_LO: f64 = -5.0;
const STEP_LO: f64 = -9.0;
const STEP_HI: f64 = 9.0;

pub fn airy_ai(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= STEP_HI {
        asymptotic_pos(z).0
    } else if z >= SERIES_HI {
        // backward integration keeps the decaying solution stable
        let (y, dy) = asymptotic_pos(STEP_HI);
        taylor_walk(STEP_HI, y, dy, z).0
    } else if z >= SERIES_LO {
        maclaurin(z).0
    } else if z >= STEP_LO {
        let (y, dy) = maclaurin(SERIES_LO);
        taylor_walk(SERIES_LO, y, dy, z).0
    } else {
        asymptotic_neg(-z)
    }
}

/// `(Ai(z), Ai'(z))` from the power series about 0.
pub(crate) fn maclaurin(z: f64) -> (f64, f64) {
    let z3 = z * z * z;
    // f = sum t_k, g = sum s_k, with derivatives p_k, q_k
    let (mut t, mut s) = (1.0, z);
    let (mut p, mut q) = (0.0, 1.0);
    let (mut f, mut g, mut fp, mut gp) = (1.0, z, 0.0, 1.0);
    for k in 0..200 {
        let kf = k as f64;
        t *= z3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        s *= z3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        p = if k == 0 { z * z / 2.0 } else { p * z3 / (3.0 * kf * (3.0 * kf + 2.0)) };
        q *= z3 / ((3.0 * kf + 1.0) * (3.0 * kf + 3.0));
        f += t;
        g += s;
        fp += p;
        gp += q;
        let scale = f.abs() + g.abs() + fp.abs() + gp.abs();
        if t.abs() + s.abs() + p.abs() + q.abs() <= 1e-18 * scale {
            break;
        }
    }
    (AI0 * f - AIP0 * g, AI0 * fp - AIP0 * gp)
}

/// Integrates `y'' = z y` from `z0` to `z1` with local Taylor expansions.
fn taylor_walk(z0: f64, mut y: f64, mut dy: f64, z1: f64) -> (f64, f64) {
    const H: f64 = 0.25;
    let steps = ((z1 - z0).abs() / H).ceil().max(1.0) as usize;
    let h = (z1 - z0) / steps as f64;
    let mut z = z0;
    let mut a = [0.0_f64; 48];
    for _ in 0..steps {
        a[0] = y;
        a[1] = dy;
        for n in 0..a.len() - 2 {
            let prev = if n == 0 { 0.0 } else { a[n - 1] };
            a[n + 2] = (z * a[n] + prev) / ((n + 2) as f64 * (n + 1) as f64);
        }
        let (mut ny, mut ndy) = (0.0, 0.0);
        for n in (0..a.len()).rev() {
            ny = ny * h + a[n];
        }
        for n in (1..a.len()).rev() {
            ndy = ndy * h + n as f64 * a[n];
        }
        y = ny;
        dy = ndy;
        z += h;
    }
    (y, dy)
}

/// `u_k` coefficients of the asymptotic expansions.
fn asymptotic_terms(zeta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(32);
    let mut u = 1.0;
    let mut term: f64 = 1.0;
    out.push(term);
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let next = u / zeta.powi(k);
        if next.abs() >= term.abs() || next.abs() < 1e-17 {
            break;
        }
        term = next;
        out.push(term);
    }
    out
}

/// `(Ai(z), Ai'(z))` for large positive `z`.
fn asymptotic_pos(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let (mut sum, mut dsum) = (0.0, 0.0);
    for (k, t) in asymptotic_terms(zeta).iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        sum += sign * t;
        dsum += sign * t * (6.0 * kf + 1.0) / (1.0 - 6.0 * kf);
    }
    let e = (-zeta).exp() / (2.0 * PI.sqrt());
    (e * sum / z.powf(0.25), -e * z.powf(0.25) * dsum)
}

/// Ai(-x) for large positive `x`.
fn asymptotic_neg(x: f64) -> f64 {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let terms = asymptotic_terms(zeta);
    let (mut even, mut odd) = (0.0, 0.0);
    for (k, t) in terms.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            even += sign * t;
        } else {
            odd += sign * t;
        }
    }
    let theta = zeta + PI / 4.0;
    (theta.sin() * even - theta.cos() * odd) / (PI.sqrt() * x.powf(0.25))
}
