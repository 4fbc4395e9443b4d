use std::fmt;

use nalgebra::DMatrix;

use super::driver::{classify_driver, driver_orbit, driver_samples, turning_point, DriverRegime};
use crate::dynamics::FullState;
use crate::error::{Error, Result};
use crate::integrators::{SolverSettings, StepperKind};
use crate::model::{reduced_matrix, RhoTag, SystemSpec};

/// Pass threshold for the field-reversibility residual.
pub const FIELD_REVERSIBILITY_TOL: f64 = 1e-8;

/// Linear involution on `(y, v)`, extended by the identity on the
/// homogeneous coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Involution {
    Rho(RhoTag),
    /// Arbitrary sign pattern on `(y, v)`.
    Diagonal(Vec<f64>),
}

impl Involution {
    pub fn matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        let mut d = DMatrix::identity(m + 2, m + 2);
        match self {
            Involution::Rho(RhoTag::FlipV) => d[(m, m)] = -1.0,
            Involution::Rho(RhoTag::IdentityV) => {}
            Involution::Diagonal(signs) => {
                if signs.len() != m + 1 || signs.iter().any(|s| s.abs() != 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "involution needs {} entries of ±1, got {signs:?}",
                        m + 1
                    )));
                }
                for (i, s) in signs.iter().enumerate() {
                    d[(i, i)] = *s;
                }
            }
        }
        Ok(d)
    }
}

impl fmt::Display for Involution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Involution::Rho(tag) => write!(f, "{tag}"),
            Involution::Diagonal(signs) => write!(f, "diag{signs:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldReversibilityReport {
    /// `max_θ ‖ρ L(θ) ρ + L(−θ)‖_F`.
    pub residual: f64,
    pub passed: bool,
    /// Driver state at phase zero.
    pub origin: (f64, f64),
    pub samples: usize,
}

/// Check `ρ L(θ) ρ = −L(−θ)` on `samples + 1` equally spaced phases of the
/// driver orbit through `(z₀, ż₀)`.
///
/// Phase zero is a turning point (`ż = 0`) for oscillating drivers and the
/// given state for rotating ones.
pub fn check_field_reversibility(
    spec: &SystemSpec,
    involution: &Involution,
    z0: f64,
    zdot0: f64,
    samples: usize,
) -> Result<FieldReversibilityReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let rho = involution.matrix(spec.m())?;
    let origin = match classify_driver(spec, z0, zdot0)? {
        DriverRegime::Oscillating => (turning_point(spec, z0, zdot0)?.1, 0.0),
        DriverRegime::Rotating => (z0, zdot0),
    };
    let period = driver_orbit(spec, origin.0, origin.1)?.period;
    let per_sample = ((period / samples as f64) / 1e-3).ceil().max(1.0) as usize;
    let total = samples * per_sample;
    let grid = driver_samples(spec, origin.0, origin.1, period / total as f64, total);
    let mut residual: f64 = 0.0;
    for i in 0..=samples {
        let forward = reduced_matrix(spec, grid[i * per_sample].0)?;
        let backward = reduced_matrix(spec, grid[total - i * per_sample].0)?;
        residual = residual.max((&rho * forward * &rho + backward).norm());
    }
    Ok(FieldReversibilityReport { residual, passed: residual <= FIELD_REVERSIBILITY_TOL, origin, samples })
}

/// `‖σ(Φ_h(σ(Φ_h(s)))) − s‖` for an arbitrary involution `σ`.
pub fn composition_residual<S>(
    spec: &SystemSpec,
    stepper: StepperKind,
    state: &FullState,
    h: f64,
    settings: &SolverSettings,
    sigma: S,
) -> Result<f64>
where
    S: Fn(&FullState) -> FullState,
{
    let forward = stepper.step(spec, state, h, settings)?.state;
    let back = stepper.step(spec, &sigma(&forward), h, settings)?.state;
    Ok(sigma(&back).distance(state))
}

/// Composition residual under the stepper's own time reversal; a method is
/// reversible when this is at most `100·newton_tol`.
pub fn check_integrator_reversibility(
    spec: &SystemSpec,
    stepper: StepperKind,
    state: &FullState,
    h: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    composition_residual(spec, stepper, state, h, settings, |s| stepper.time_reversal(s, h))
}
