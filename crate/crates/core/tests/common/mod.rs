use epsmc::lattice::{LatticeSpec, WignerTable};
use epsmc::{airy_ai, Potential, PotentialSchedule};

/// Kernel weight for a jump with noise `y` at `u`, for potentials of degree <= 4.
pub fn path_weight(y: f64, u: f64, p: &Potential, du: f64) -> f64 {
    let c = p.coefficients();
    let c3 = c.get(3).copied().unwrap_or(0.0);
    let c4 = c.get(4).copied().unwrap_or(0.0);
    let a = 2.0 * c3 + 8.0 * c4 * u;
    if a == 0.0 {
        (1.0 - (y / du).abs()).max(0.0)
    } else {
        let s = (3.0 * a.abs()).powf(-1.0 / 3.0);
        s * airy_ai(a.signum() * y * s) * du
    }
}

/// Sums every path `(u_0, ..., u_n)` explicitly.
pub fn brute_force(s: &LatticeSpec, schedule: &PotentialSchedule, w: &WignerTable) -> Vec<f64> {
    let n = s.n_points;
    let du = s.spacing();
    let mut q = vec![0.0; n];
    let mut path = vec![0usize; s.n_slices + 1];
    let total = n.pow(s.n_slices as u32 + 1);
    for code in 0..total {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let mut weight = w.weight(path[0], path[1]);
        for l in 1..s.n_slices {
            let (prev, now, next) = (s.point(path[l - 1]), s.point(path[l]), s.point(path[l + 1]));
            let pot = schedule.at(l);
            let y = next + prev - 2.0 * now + pot.derivative(1, now);
            weight *= path_weight(y, now, pot, du);
        }
        q[path[s.n_slices]] += weight;
    }
    q
}

/// `|a - b| / |b|` in the Euclidean norm.
#[allow(dead_code)]
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    (diff / norm).sqrt()
}
