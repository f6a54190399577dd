use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented bound. The message names the bound.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A swap matrix entry would be negative.
    #[error("swap matrix constraint violated: {0}")]
    SwapConstraint(String),

    #[error("kernel weight {weight:.6} exceeds 1 in magnitude at u = {u:.6}; use a finer spatial spacing")]
    KernelWeightTooLarge { u: f64, weight: f64 },

    #[error("oscillatory quadrature did not converge at y = {y:.6}, u = {u:.6} (residual {residual:.3e})")]
    QuadratureNonConvergent { y: f64, u: f64, residual: f64 },

    #[error("initial wave function is not normalized: sum |psi|^2 du = {norm:.9}")]
    Normalization { norm: f64 },

    #[error("Wigner table imaginary residue {residue:.3e} exceeds 1e-6 of peak {peak:.3e}")]
    ImaginaryResidue { residue: f64, peak: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("predicted relative standard error {predicted:.3} exceeds 1; rerun with more histories or --force")]
    Infeasible { predicted: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for validation failures, 2 for numerical diagnostics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::KernelWeightTooLarge { .. }
            | Error::QuadratureNonConvergent { .. }
            | Error::ImaginaryResidue { .. }
            | Error::LinearSolve(_)
            | Error::Infeasible { .. } => 2,
            _ => 1,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
