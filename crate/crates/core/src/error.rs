use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Variants split into two families: input problems (bad matrices, bad grids,
/// unreadable files) and numerical failures detected while computing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular to tolerance: pivot {pivot:.3e}, norm {norm:.3e}")]
    Singular { pivot: f64, norm: f64 },

    #[error("matrix is not Hermitian: residual {0:.3e}")]
    NotHermitian(f64),

    #[error("boundary pair violates B†A = A†B: residual {0:.3e}")]
    BoundaryHermiticity(f64),

    #[error("boundary pair violates A†A + B†B > 0: smallest eigenvalue {0:.3e}")]
    BoundaryPositivity(f64),

    #[error("boundary angle {0} outside (0, π]")]
    AngleOutOfRange(f64),

    #[error("potential is not Hermitian at x = {x}: residual {residual:.3e}")]
    PotentialNotHermitian { x: f64, residual: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("resolution guard violated: {0}")]
    Resolution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Jost solution diverged at k = {k}: norm {norm:.3e} exceeds bound {bound:.3e}")]
    JostDivergence { k: String, norm: f64, bound: f64 },

    #[error("Jost matrix is singular at k = {0}")]
    SingularJost(f64),

    #[error("S(0) eigenvalue {0:.6} is not within 0.2 of +1 or -1")]
    Classification(f64),

    #[error("bound states present at kappa = {0:?}; the transform only covers the continuous spectrum")]
    BoundStatesPresent(Vec<f64>),

    #[error("field violates the boundary condition: residual {0:.3e}")]
    BoundaryResidual(f64),

    #[error("blow-up guard: H1 norm grew from {initial:.3e} to {current:.3e} at t = {t}")]
    BlowUp { initial: f64, current: f64, t: f64 },

    #[error("point {value} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by a
    /// numerical failure during computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::BoundaryHermiticity(_)
                | Error::BoundaryPositivity(_)
                | Error::AngleOutOfRange(_)
                | Error::PotentialNotHermitian { .. }
                | Error::InvalidGrid(_)
                | Error::Resolution(_)
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        if self.is_input_error() {
            "config"
        } else {
            "numerical"
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
