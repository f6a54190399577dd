use std::f64::consts::PI;

use epsmc::lattice::*;
use epsmc::Potential;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(n: usize, lo: f64, hi: f64) -> LatticeSpec {
    LatticeSpec { n_slices: 3, epsilon: 1.0, mass: 1.0, hbar: 1.0, u_min: lo, u_max: hi, n_points: n }
}

fn gaussian(center: f64, width: f64, momentum: f64) -> InitialState {
    InitialState::Gaussian { center, width, momentum }
}

/// `psi(u_i + m du / 2)` by explicit linear interpolation, zero off the grid.
fn interp(psi: &[Complex64], du: f64, u_min: f64, x: f64) -> Complex64 {
    let t = (x - u_min) / du;
    let lo = t.floor();
    let frac = t - lo;
    let at = |j: f64| {
        if j < 0.0 || j as usize >= psi.len() {
            Complex64::new(0.0, 0.0)
        } else {
            psi[j as usize]
        }
    };
    if frac.abs() < 1e-9 {
        at(lo)
    } else if frac > 1.0 - 1e-9 {
        at(lo + 1.0)
    } else {
        at(lo) * (1.0 - frac) + at(lo + 1.0) * frac
    }
}

/// `(du / 2 pi) sum_w psi(u0 + w/2) conj(psi(u0 - w/2)) exp(-i p w)` over
/// every offset `w = m du` that keeps both arguments on the grid.
fn textbook_wigner(psi: &[Complex64], s: &LatticeSpec, i0: usize, i1: usize) -> f64 {
    let du = s.spacing();
    let u0 = s.point(i0);
    let p = s.point(i1) - u0;
    let reach = 2 * i0.min(s.n_points - 1 - i0) as i64;
    let mut total = Complex64::new(0.0, 0.0);
    for m in -reach..=reach {
        let w = m as f64 * du;
        let a = interp(psi, du, s.u_min, u0 + 0.5 * w);
        let b = interp(psi, du, s.u_min, u0 - 0.5 * w);
        total += a * b.conj() * Complex64::from_polar(1.0, -p * w);
    }
    total.re * du / (2.0 * PI)
}

#[test]
fn nondimensional_units() {
    let mut s = spec(5, -1.0, 1.0);
    s.epsilon = 0.1;
    assert!((nondimensionalize_position(1.0, &s).unwrap() - 3.16228).abs() < 1e-5);
    s.epsilon = 1.0;
    assert_eq!(nondimensionalize_position(2.0, &s).unwrap(), 2.0);
    s.epsilon = 0.2;
    assert!((nondimensionalize_energy(5.0, &s).unwrap() - 1.0).abs() < 1e-15);
    s.epsilon = 0.0;
    assert!(nondimensionalize_position(1.0, &s).is_err());
    s.epsilon = 1.0;
    s.mass = -1.0;
    assert!(nondimensionalize_energy(1.0, &s).is_err());
}

#[test]
fn nondimensional_potential_matches_pointwise_scaling() {
    let mut s = spec(5, -1.0, 1.0);
    s.epsilon = 0.3;
    s.mass = 2.0;
    s.hbar = 0.7;
    let phys = Potential::new(vec![0.2, -0.1, 0.5, 0.3, 0.05]).unwrap();
    let nd = nondimensionalize_potential(&phys, &s).unwrap();
    for &u in &[-2.0, 0.0, 0.4, 3.0] {
        let x = u * s.length_scale();
        let expect = phys.value(x) * s.epsilon / s.hbar;
        assert!((nd.value(u) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn langevin_examples() {
    let free = Potential::zero();
    let harmonic = Potential::new(vec![0.0, 0.0, 0.5]).unwrap();
    assert_eq!(langevin_step(1.0, 0.5, 0.0, &free), 1.5);
    assert_eq!(langevin_step(1.0, 1.0, 0.0, &harmonic), 0.0);
    assert_eq!(langevin_step(0.0, 0.0, 0.7, &free), 0.7);
    assert_eq!(noise_for_target(1.0, 0.5, 0.0, &free), 0.0);
    assert_eq!(noise_for_target(0.0, 1.0, 1.0, &harmonic), 0.0);
}

#[test]
fn noise_inverts_the_step() {
    let p = Potential::new(vec![0.3, -0.2, 0.4, 0.1, 0.05, -0.01]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100_000 {
        let (target, now, prev): (f64, f64, f64) =
            (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let y = noise_for_target(target, now, prev, &p);
        let back = langevin_step(now, prev, y, &p);
        assert!((back - target).abs() <= 1e-12 * (1.0 + y.abs()), "{target} -> {back}");
    }
}

#[test]
fn gaussian_table_is_nonnegative_and_normalized() {
    // linear interpolation at half-grid points loses O((p du)^2) of the mass,
    // so the grid must resolve both the packet width and its momentum
    for (n, momentum) in [(161, 0.0), (321, 0.8)] {
        let s = spec(n, -8.0, 8.0);
        let psi = gaussian(0.5, 1.0, momentum).sample(&s.grid()).unwrap();
        let w = wigner_init(&psi, &Potential::zero(), &s, 0.5).unwrap();
        let peak = w.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let min = w.values.iter().fold(0.0_f64, |m, x| m.min(*x));
        // rows at the grid edge see a truncated window, which rings at the level of |psi|^2 there
        assert!(min >= -1e-6 * peak, "min {min}, peak {peak}");
        assert!((w.mass - 1.0).abs() < 1e-3, "momentum {momentum}: mass {}", w.mass);
        assert!(w.imag_residue < 1e-10, "{}", w.imag_residue);
    }
}

#[test]
fn lambda_stays_in_unit_interval() {
    let s = spec(41, -6.0, 6.0);
    let quartic = Potential::new(vec![0.0, 0.0, 0.2, 0.0, 0.05]).unwrap();
    for initial in [gaussian(0.0, 0.8, 0.0), InitialState::HoEigenstate { n: 3, center: 0.5, omega: 1.0 }] {
        let psi = initial.sample(&s.grid()).unwrap();
        for v in [0.1, 0.5, 0.93] {
            let w = wigner_init(&psi, &quartic, &s, v).unwrap();
            let (lo, hi) = w.lambda_range();
            assert!(lo >= 0.0 && hi <= 1.0);
            // c is chosen so the extreme weight lands exactly on a boundary
            let reach = (lo - (v - v.min(1.0 - v))).abs().min((hi - (v + v.min(1.0 - v))).abs());
            assert!(reach < 1e-12, "v = {v}: lambda in [{lo}, {hi}]");
        }
    }
}

#[test]
fn free_table_matches_textbook_transform() {
    let s = spec(33, -5.0, 5.0);
    let psi = gaussian(-0.4, 0.9, 1.3).sample(&s.grid()).unwrap();
    let psi: Vec<Complex64> = psi.iter().enumerate().map(|(i, z)| z * (1.0 + 0.2 * (s.point(i) * 0.7).sin())).collect();
    let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * s.spacing()).sqrt();
    let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
    let w = wigner_init(&psi, &Potential::zero(), &s, 0.5).unwrap();
    for i0 in 0..s.n_points {
        for i1 in 0..s.n_points {
            let expect = textbook_wigner(&psi, &s, i0, i1);
            assert!((w.value(i0, i1) - expect).abs() < 1e-8, "({i0}, {i1}): {} vs {expect}", w.value(i0, i1));
        }
    }
}

#[test]
fn first_excited_state_goes_negative_at_the_origin() {
    let s = spec(61, -6.0, 6.0);
    let psi = InitialState::HoEigenstate { n: 1, center: 0.0, omega: 1.0 }.sample(&s.grid()).unwrap();
    let w = wigner_init(&psi, &Potential::zero(), &s, 0.5).unwrap();
    let mid = 30;
    // analytic value at the phase-space origin is -1/pi
    assert!(w.value(mid, mid) < 0.0);
    assert!((w.value(mid, mid) + 1.0 / PI).abs() < 0.02, "{}", w.value(mid, mid));
    assert!(w.lambda(mid, mid) < 0.5);
}

#[test]
fn table_rejects_bad_inputs() {
    let s = spec(21, -4.0, 4.0);
    let psi = gaussian(0.0, 1.0, 0.0).sample(&s.grid()).unwrap();
    assert!(wigner_init(&psi[..20], &Potential::zero(), &s, 0.5).is_err());
    let doubled: Vec<Complex64> = psi.iter().map(|z| z * 2.0).collect();
    assert!(wigner_init(&doubled, &Potential::zero(), &s, 0.5).is_err());
    assert!(wigner_init(&psi, &Potential::zero(), &s, 1.0).is_err());
    let mut bad = s.clone();
    bad.n_points = 2;
    assert!(bad.validate().is_err());
}
