//! Extended-probability-space (EPS) Monte Carlo for one-dimensional quantum
//! position densities.
//!
//! Signed path weights are carried by a two-state stochastic process: each
//! history walks a Langevin lattice in nondimensional units and flips its EPS
//! state with a swap matrix whose contraction factor is the local kernel
//! weight. Histograms of the final state then estimate the signed path sum.
//! Deterministic oracles (exact transfer sum, discrete propagator,
//! Crank-Nicolson) check the estimates.

pub mod airy;
pub mod cli;
pub mod eps;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod oracle;
pub mod potential;
pub mod rng;
pub mod sampler;

pub use airy::airy_ai;
pub use error::{Error, Result};
pub use kernels::{kernel_row, kernel_value, phase_series, KernelSpec, KernelStrategy, SeriesConvention};
pub use lattice::{langevin_step, wigner_init, InitialState, KernelTables, LatticeSpec, WignerTable};
pub use oracle::{compare, feynman_amplitude, schrodinger_reference, transfer_path_sum};
pub use potential::{Potential, PotentialSchedule};
pub use sampler::{estimate_cost, run, Prepared, RunConfig, RunResult, SamplingStrategy};
