//! Nonholonomically coupled mechanical systems: a catalog of test problems,
//! structure-preserving one-step integrators, and tools for analysing their
//! long-time behaviour (invariant drift, Floquet averaging, latitude
//! integral, reversibility).
//!
//! ```
//! use nhcouple::{catalog, integrate, FullState, SolverSettings, StepperKind};
//!
//! let spec = catalog("knife_edge", 0.0).unwrap();
//! let start = FullState::new(&[0.0, 0.0], std::f64::consts::FRAC_PI_2, &[0.0, 0.0], 1.0);
//! let traj = integrate(&spec, StepperKind::DiscreteGradient, &start, 0.1, 10.0, &SolverSettings::default(), |_, _| {})
//!     .unwrap();
//! let h0 = traj.invariants()[0].total;
//! assert!(traj.invariants().iter().all(|i| (i.total - h0).abs() < 1e-10));
//! ```

// `!(a <= tol)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod verify;

pub use analysis::{
    average_matrix, averaging_transform, check_field_reversibility, check_integrator_reversibility, drift_report,
    driver_period, latitude, monodromy, poincare_sections, rotation_axis, DriftClass, DriftReport, DriftThresholds,
    MonodromyResult, Trajectory,
};
pub use dynamics::{
    full_rhs, invariants, multiplier, project_reduced, reconstruct_velocity, reduced_rhs, FullState, InvariantTriple,
    ReducedState,
};
pub use error::{Error, Result};
pub use integrators::{integrate, SolverSettings, StepResult, StepperKind};
pub use model::{catalog, kernel_vector, reduced_matrix, GroupTag, RhoTag, SystemId, SystemSpec};
