//! Drift classification, driver sections, Floquet monodromy and averaging,
//! latitude, and reversibility checks.

mod drift;
mod driver;
mod floquet;
pub mod lie;
mod reversibility;
mod sections;

pub use drift::{
    drift_report, drift_report_from_errors, least_squares_slope, DriftClass, DriftReport, DriftThresholds,
};
pub use driver::{
    classify_driver, driver_orbit, driver_period, driver_samples, turning_point, DriverOrbit, DriverRegime,
    DriverSection, SectionTracker,
};
pub use floquet::{
    average_matrix, averaging_transform, flow_at, latitude, monodromy, propagate, rotation_axis, MonodromyResult,
};
pub use reversibility::{
    check_field_reversibility, check_integrator_reversibility, composition_residual, FieldReversibilityReport,
    Involution, FIELD_REVERSIBILITY_TOL,
};
pub use sections::{poincare_sections, SectionSample};

use crate::dynamics::{invariants, FullState, InvariantTriple};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

/// States of a run with their invariants; times strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<FullState>,
    invariants: Vec<InvariantTriple>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Trajectory { times: Vec::with_capacity(n), states: Vec::with_capacity(n), invariants: Vec::with_capacity(n) }
    }

    pub fn from_states(spec: &SystemSpec, states: Vec<FullState>) -> Result<Self> {
        let mut traj = Trajectory::with_capacity(states.len());
        for s in states {
            if traj.times.last().is_some_and(|&t| s.t <= t) {
                return Err(Error::InvalidArgument(format!("trajectory times must increase (t = {})", s.t)));
            }
            let inv = invariants(spec, &s);
            traj.push(s, inv);
        }
        Ok(traj)
    }

    pub(crate) fn push(&mut self, state: FullState, inv: InvariantTriple) {
        debug_assert!(self.times.last().is_none_or(|&t| state.t > t));
        self.times.push(state.t);
        self.states.push(state);
        self.invariants.push(inv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[FullState] {
        &self.states
    }

    pub fn invariants(&self) -> &[InvariantTriple] {
        &self.invariants
    }

    pub fn last(&self) -> Option<&FullState> {
        self.states.last()
    }
}
