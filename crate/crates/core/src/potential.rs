use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Polynomial potential `U(u) = sum_j c_j u^j` in nondimensional units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Potential {
    coefficients: Vec<f64>,
}

impl Potential {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("potential coefficients must be finite"));
        }
        let mut coefficients = coefficients;
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        Ok(Self { coefficients })
    }

    pub fn zero() -> Self {
        Self { coefficients: Vec::new() }
    }

    /// `U(u) = half_omega_sq * u^2`.
    pub fn harmonic(omega: f64) -> Self {
        Self { coefficients: vec![0.0, 0.0, 0.5 * omega * omega] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Degree of the polynomial; the zero potential has degree 0.
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn value(&self, u: f64) -> f64 {
        self.derivative(0, u)
    }

    /// Exact `d^order U / du^order` at `u`.
    pub fn derivative(&self, order: usize, u: f64) -> f64 {
        let c = &self.coefficients;
        if order >= c.len() {
            return 0.0;
        }
        // Horner on the differentiated coefficients j!/(j-order)! c_j
        let mut acc = 0.0;
        for j in (order..c.len()).rev() {
            acc = acc * u + falling(j, order) * c[j];
        }
        acc
    }

    /// True when `d^order U/du^order` is identically zero.
    pub fn vanishes(&self, order: usize) -> bool {
        self.coefficients.iter().skip(order).all(|&c| c == 0.0)
    }

    /// Multiplies every coefficient by `factor` (energy rescaling).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { coefficients: self.coefficients.iter().map(|c| c * factor).collect() }
    }

    /// `U(s u)`, i.e. the polynomial in a rescaled coordinate.
    pub fn rescaled_argument(&self, s: f64) -> Self {
        let mut p = 1.0;
        let coefficients = self
            .coefficients
            .iter()
            .map(|c| {
                let out = c * p;
                p *= s;
                out
            })
            .collect();
        Self { coefficients }
    }
}

/// `j! / (j - order)!`
fn falling(j: usize, order: usize) -> f64 {
    ((j - order + 1)..=j).fold(1.0, |acc, x| acc * x as f64)
}

/// Potential per time slice. A single entry applies to every slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSchedule {
    slices: Vec<Potential>,
}

impl PotentialSchedule {
    pub fn constant(p: Potential) -> Self {
        Self { slices: vec![p] }
    }

    pub fn per_slice(slices: Vec<Potential>) -> Result<Self> {
        if slices.is_empty() {
            return Err(invalid("per-slice potential list is empty"));
        }
        Ok(Self { slices })
    }

    /// Potential acting at slice `l` (clamped to the last entry).
    pub fn at(&self, l: usize) -> &Potential {
        &self.slices[l.min(self.slices.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.slices.windows(2).all(|w| w[0] == w[1])
    }

    pub fn slices(&self) -> &[Potential] {
        &self.slices
    }
}

impl From<Potential> for PotentialSchedule {
    fn from(p: Potential) -> Self {
        Self::constant(p)
    }
}
