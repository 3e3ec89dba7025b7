use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalue iteration did not converge (matrix order {order}, {deflated} eigenvalues found)")]
    EigenNoConvergence { order: usize, deflated: usize },

    #[error("zero discrete eigenvalue has no continuous-time image")]
    ZeroEigenvalue,

    #[error("Newton refinement did not converge: best iterate {re}{im:+}j, residual {residual:e}")]
    NewtonNoConvergence { re: f64, im: f64, residual: f64 },

    #[error("refined root {re}{im:+}j left the aliasing band |Im s| < {band}")]
    Aliased { re: f64, im: f64, band: f64 },

    #[error("refinement of seed {seed_re}{seed_im:+}j failed: {source}")]
    Seed {
        seed_re: f64,
        seed_im: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("pole {re}{im:+}j has residual {residual:e} above tolerance")]
    PoleResidual { re: f64, im: f64, residual: f64 },

    #[error("no stabilizing gains in bounds")]
    NoStabilizingGains,

    #[error("no {0} crossover in the search window")]
    MissingCrossover(&'static str),

    #[error("only {evaluated} of {total} grid cells evaluated")]
    GridMostlyFailed { evaluated: usize, total: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::ZeroEigenvalue
                | Error::NewtonNoConvergence { .. }
                | Error::Aliased { .. }
                | Error::Seed { .. }
                | Error::PoleResidual { .. }
                | Error::GridMostlyFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
