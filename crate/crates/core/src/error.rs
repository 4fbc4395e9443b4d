use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{0}` (expected one of cvt_harmonic, cvt_pendulum, nonholonomic_particle, knife_edge, vertical_disk, mobile_robot)")]
    UnknownSystem(String),

    #[error("unknown method `{0}` (expected dla<alpha>, dla01, lf, dd or ref<substeps>)")]
    UnknownMethod(String),

    #[error("constraint matrix is rank deficient at z = {z}")]
    SingularConstraint { z: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("singular linear system in constrained step")]
    SingularStep,

    #[error("step {index} failed: {source}")]
    StepFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("driver is not periodic: {0}")]
    NonPeriodicDriver(String),

    #[error("driver energy {energy} is on the separatrix (max V = {max_potential})")]
    Separatrix { energy: f64, max_potential: f64 },

    #[error("rotation angle {angle} is outside the injectivity domain of exp")]
    Branch { angle: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::StepFailed { index, source: Box::new(self) }
    }
}
