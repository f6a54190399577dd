mod common;

use std::f64::consts::PI;

use common::brute_force;
use epsmc::lattice::*;
use epsmc::oracle::*;
use epsmc::{KernelSpec, Potential, PotentialSchedule};
use num_complex::Complex64;

fn poly(c: &[f64]) -> Potential {
    Potential::new(c.to_vec()).unwrap()
}

fn spec(n_slices: usize, n: usize, lo: f64, hi: f64) -> LatticeSpec {
    LatticeSpec { n_slices, epsilon: 1.0, mass: 1.0, hbar: 1.0, u_min: lo, u_max: hi, n_points: n }
}

fn gaussian_psi(s: &LatticeSpec, center: f64, width: f64) -> Vec<Complex64> {
    InitialState::Gaussian { center, width, momentum: 0.0 }.sample(&s.grid()).unwrap()
}

#[test]
fn transfer_equals_brute_force_enumeration() {
    let s = spec(3, 5, -2.0, 2.0);
    let schedules = [
        PotentialSchedule::constant(poly(&[0.0, 0.0, 0.3, 0.0, 0.05])),
        PotentialSchedule::per_slice(vec![
            poly(&[0.0, 0.1, 0.2]),
            poly(&[0.0, 0.0, 0.0, 0.0, 0.05]),
            poly(&[0.0, 0.0, 0.1, 0.02, 0.08]),
        ])
        .unwrap(),
    ];
    for schedule in &schedules {
        let psi = gaussian_psi(&s, 0.2, 0.8);
        let w = wigner_init(&psi, schedule.at(0), &s, 0.5).unwrap();
        let t = std::time::Instant::now();
        let fast = transfer_path_sum(&s, schedule, &w, &KernelSpec::default()).unwrap();
        let slow = brute_force(&s, schedule, &w);
        for (a, b) in fast.q.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(t.elapsed().as_secs_f64() < 1.0);
    }
}

#[test]
fn transfer_equals_brute_force_on_a_longer_chain() {
    let s = spec(4, 7, -3.0, 3.0);
    let schedule = PotentialSchedule::constant(poly(&[0.0, 0.0, 0.2, 0.0, 0.04]));
    let psi = gaussian_psi(&s, -0.3, 0.9);
    let w = wigner_init(&psi, schedule.at(0), &s, 0.5).unwrap();
    let fast = transfer_path_sum(&s, &schedule, &w, &KernelSpec::default()).unwrap();
    let slow = brute_force(&s, &schedule, &w);
    for (a, b) in fast.q.iter().zip(&slow) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn free_particle_is_a_probability() {
    let s = spec(4, 61, -9.0, 9.0);
    let psi = gaussian_psi(&s, 0.0, 1.0);
    let w = wigner_init(&psi, &Potential::zero(), &s, 0.5).unwrap();
    let sum = transfer_path_sum(&s, &Potential::zero().into(), &w, &KernelSpec::default()).unwrap();
    let peak = sum.q.iter().fold(0.0_f64, |m, x| m.max(*x));
    assert!(sum.q.iter().all(|x| *x >= -1e-6 * peak));
    assert!((sum.total() - 1.0).abs() < 1e-2, "{}", sum.total());
}

#[test]
fn quadratic_potential_is_pure_transport() {
    let s = spec(5, 41, -6.0, 6.0);
    let pot = poly(&[0.0, 0.1, 0.15]);
    let psi = gaussian_psi(&s, 1.0, 0.7);
    let w = wigner_init(&psi, &pot, &s, 0.5).unwrap();
    let sum = transfer_path_sum(&s, &pot.clone().into(), &w, &KernelSpec::default()).unwrap();

    // move every pair along its classical successor, splitting off-grid landings linearly
    let n = s.n_points;
    let du = s.spacing();
    let mut state: Vec<f64> = (0..n * n).map(|p| w.weight(p / n, p % n)).collect();
    for _ in 1..s.n_slices {
        let mut next = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mass = state[a * n + b];
                let (prev, now) = (s.point(a), s.point(b));
                let target = 2.0 * now - prev - pot.derivative(1, now);
                let t = (target - s.u_min) / du;
                let lo = t.floor();
                let frac = t - lo;
                for (c, share) in [(lo, 1.0 - frac), (lo + 1.0, frac)] {
                    if share > 0.0 && c >= 0.0 && (c as usize) < n {
                        next[b * n + c as usize] += mass * share;
                    }
                }
            }
        }
        state = next;
    }
    for c in 0..n {
        let direct: f64 = (0..n).map(|b| state[b * n + c]).sum();
        assert!((sum.q[c] - direct).abs() < 1e-12, "bin {c}: {} vs {direct}", sum.q[c]);
    }
}

#[test]
fn transfer_never_reads_the_reference_level() {
    let s = spec(3, 9, -2.0, 2.0);
    let schedule = PotentialSchedule::constant(poly(&[0.0, 0.0, 0.0, 0.0, 0.05]));
    let psi = gaussian_psi(&s, 0.0, 0.7);
    let a = wigner_init(&psi, schedule.at(0), &s, 0.5).unwrap();
    let b = a.with_reference(0.2).unwrap();
    let qa = transfer_path_sum(&s, &schedule, &a, &KernelSpec::default()).unwrap();
    let qb = transfer_path_sum(&s, &schedule, &b, &KernelSpec::default()).unwrap();
    assert_eq!(qa, qb);
}

fn moments(x: &[f64], density: &[f64], dx: f64) -> (f64, f64) {
    let m0: f64 = density.iter().sum::<f64>() * dx;
    let m1: f64 = x.iter().zip(density).map(|(x, d)| x * d).sum::<f64>() * dx / m0;
    let m2: f64 = x.iter().zip(density).map(|(x, d)| (x - m1) * (x - m1) * d).sum::<f64>() * dx / m0;
    (m1, m2)
}

#[test]
fn crank_nicolson_conserves_norm() {
    let grid = UniformGrid { start: -10.0, spacing: 0.05, len: 401 };
    let psi = InitialState::Gaussian { center: 1.0, width: 0.8, momentum: 0.5 }.sample(&grid).unwrap();
    let schedule = PotentialSchedule::constant(poly(&[0.0, 0.0, 0.5, 0.0, 0.01]));
    let r = schrodinger_reference(&psi, &schedule, 5.0, 1000, &grid).unwrap();
    assert!((r.norm - 1.0).abs() < 1e-10, "{}", r.norm);
}

#[test]
fn free_dispersion_law() {
    let grid = UniformGrid { start: -20.0, spacing: 0.01, len: 4001 };
    let x = grid.points();
    let sigma0: f64 = 1.0;
    let psi = InitialState::Gaussian { center: 0.0, width: sigma0, momentum: 0.0 }.sample(&grid).unwrap();
    for t in [1.0, 2.0, 3.0] {
        let r = schrodinger_reference(&psi, &Potential::zero().into(), t, (t * 1000.0) as usize, &grid).unwrap();
        let (_, var) = moments(&x, &r.density(), grid.spacing);
        let expect = sigma0 * sigma0 + (t / (2.0 * sigma0)).powi(2);
        assert!((var - expect).abs() < 1e-4, "t = {t}: {var} vs {expect}");
    }
}

#[test]
fn coherent_state_oscillates() {
    let grid = UniformGrid { start: -10.0, spacing: 0.01, len: 2001 };
    let x = grid.points();
    let psi = InitialState::Gaussian { center: 1.0, width: 0.5f64.sqrt(), momentum: 0.0 }.sample(&grid).unwrap();
    let schedule = PotentialSchedule::constant(Potential::harmonic(1.0));
    for t in [0.5, 1.5, 3.0] {
        let r = schrodinger_reference(&psi, &schedule, t, (t * 1000.0) as usize, &grid).unwrap();
        let (mean, _) = moments(&x, &r.density(), grid.spacing);
        assert!((mean - f64::cos(t)).abs() < 1e-4, "t = {t}: {mean} vs {}", f64::cos(t));
    }
}

#[test]
fn propagator_spreads_a_free_gaussian() {
    let s = spec(2, 601, -15.0, 15.0);
    let psi = gaussian_psi(&s, 0.0, 1.0);
    let amp = feynman_amplitude(&s, &Potential::zero().into(), &psi).unwrap();
    assert!((amp.norm - 1.0).abs() < 0.01, "{}", amp.norm);
    let du = s.spacing();
    let var = 1.0 + (2.0f64 / 2.0).powi(2);
    let exact: Vec<f64> =
        s.grid().points().iter().map(|x| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt() * du).collect();
    let bins = amp.bin_probabilities(du);
    let diff: f64 = bins.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!(diff / norm < 1e-3, "relative L2 {}", diff / norm);
}

#[test]
fn compare_reports() {
    let b = [0.1, 0.25, 0.4, 0.25];
    let r = compare(&b, &b, None).unwrap();
    assert_eq!((r.l2, r.max_abs), (0.0, 0.0));
    assert!(r.z.is_none());
    let se = [0.02, 0.01, 0.05, 0.03];
    let a: Vec<f64> = b.iter().zip(se).map(|(x, s)| x + s).collect();
    let r = compare(&a, &b, Some(&se)).unwrap();
    assert!(r.z.unwrap().iter().all(|z| (z - 1.0).abs() < 1e-12));
    assert_eq!(r.within_4, Some(1.0));
    assert!(compare(&a, &b[..3], None).is_err());
}
