use thiserror::Error;

/// Errors raised by the prox machinery, the oracles and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported combination {combination}; supported: {supported}")]
    Capability {
        combination: String,
        supported: String,
    },

    /// The Bregman-prox subproblem solver hit its iteration cap.
    #[error("subproblem did not converge: duality gap {residual:e} after iteration cap")]
    Subproblem { best: Vec<f64>, residual: f64 },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error("backtracking diverged at step {step}: L_k = {lipschitz:e} exceeds 2^60 * L0")]
    Divergence { step: usize, lipschitz: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::AtStep { .. } | Error::Divergence { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
