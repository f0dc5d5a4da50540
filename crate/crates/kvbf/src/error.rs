use crate::solver::NewtonReport;
use crate::timeloop::Trajectory;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),

    #[error("quadrature: no rule of exactness degree {0} (supported: 1..=10)")]
    QuadratureDegree(usize),

    #[error("degenerate cell: signed area {0:e}")]
    DegenerateCell(f64),

    #[error("model parameters: {0}")]
    Params(String),

    #[error("dof index {index} out of range (system size {size})")]
    DofOutOfRange { index: usize, size: usize },

    #[error("linear solve: {0}")]
    LinearSolve(String),

    #[error(
        "newton did not converge after {} iterations (last relative update {:.3e})",
        report.iterations,
        report.final_update
    )]
    NewtonDiverged { report: NewtonReport },

    #[error("time step {step} (t = {time}): {source}")]
    StepFailed {
        step: usize,
        time: f64,
        partial: Box<Trajectory>,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
