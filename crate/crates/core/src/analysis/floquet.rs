//! Monodromy of the periodic linear passenger system `u̇ = L(z(t)) u`, its
//! logarithm, and the quantities derived from it.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::driver::{driver_orbit, DriverOrbit};
use super::lie::{expm, log_affine};
use crate::dynamics::ReducedState;
use crate::error::{Error, Result};
use crate::model::{reduced_matrix, GroupTag, SystemSpec};

/// Self-convergence target for the monodromy, Frobenius norm.
const MONODROMY_TOL: f64 = 1e-11;
const MIN_STEPS: usize = 256;
const MAX_STEPS: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub driver: DriverOrbit,
    /// `Φ(T)`.
    pub monodromy: DMatrix<f64>,
    /// `Ā` with `exp(Ā) = Φ(T)`.
    pub average: DMatrix<f64>,
    pub group_tag: GroupTag,
    pub axis: Option<DVector<f64>>,
    /// Rotation angle of `Φ(T)`; zero for groups without rotations.
    pub angle: f64,
    /// RK4 steps per period at which the monodromy converged.
    pub steps: usize,
}

impl MonodromyResult {
    pub fn period(&self) -> f64 {
        self.driver.period
    }

    /// `‖exp(Ā) − Φ(T)‖_F`.
    pub fn log_residual(&self) -> f64 {
        (expm(&self.average) - &self.monodromy).norm()
    }

    /// A fraction `p/q` with `q ≤ max_denominator` within `tol` of
    /// `angle/2π`, if any. A resonant rotation number violates the
    /// nondegeneracy hypothesis behind bounded latitude errors; this is a
    /// diagnostic only.
    pub fn resonance(&self, max_denominator: u32, tol: f64) -> Option<(i64, u32)> {
        let rho = self.angle / (2.0 * std::f64::consts::PI);
        (1..=max_denominator).find_map(|q| {
            let p = (rho * q as f64).round();
            ((rho - p / q as f64).abs() <= tol).then_some((p as i64, q))
        })
    }
}

/// RK4 on `(z, ż, U)` with `U̇ = L(z) U`, `U(0) = I`, using `steps` steps
/// of size `t_end/steps` (negative `t_end` integrates backwards).
pub fn propagate(spec: &SystemSpec, z0: f64, zdot0: f64, t_end: f64, steps: usize) -> Result<DMatrix<f64>> {
    let n = spec.m() + 2;
    let dt = t_end / steps.max(1) as f64;
    let rhs = |z: f64, w: f64, u: &DMatrix<f64>| -> Result<(f64, f64, DMatrix<f64>)> {
        Ok((w, -spec.driver_potential_dz(z), reduced_matrix(spec, z)? * u))
    };
    let (mut z, mut w, mut u) = (z0, zdot0, DMatrix::identity(n, n));
    for _ in 0..steps {
        let k1 = rhs(z, w, &u)?;
        let k2 = rhs(z + 0.5 * dt * k1.0, w + 0.5 * dt * k1.1, &(&u + &k1.2 * (0.5 * dt)))?;
        let k3 = rhs(z + 0.5 * dt * k2.0, w + 0.5 * dt * k2.1, &(&u + &k2.2 * (0.5 * dt)))?;
        let k4 = rhs(z + dt * k3.0, w + dt * k3.1, &(&u + &k3.2 * dt))?;
        z += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        w += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        u += (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (dt / 6.0);
    }
    Ok(u)
}

/// Monodromy over one driver period, refined by step doubling until two
/// successive approximations agree to 1e−11.
pub fn monodromy(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<MonodromyResult> {
    let driver = driver_orbit(spec, z0, zdot0)?;
    let mut steps = MIN_STEPS;
    let mut phi = propagate(spec, z0, zdot0, driver.period, steps)?;
    loop {
        let finer = propagate(spec, z0, zdot0, driver.period, 2 * steps)?;
        let diff = (&finer - &phi).norm();
        phi = finer;
        steps *= 2;
        if diff < MONODROMY_TOL {
            break;
        }
        if steps >= MAX_STEPS {
            warn!("monodromy not converged at {steps} steps (change {diff:e})");
            break;
        }
    }
    let group_tag = spec.group_tag();
    let (average, angle) = log_affine(&phi, group_tag)?;
    let axis = rotation_axis(&average);
    Ok(MonodromyResult { driver, monodromy: phi, average, group_tag, axis, angle, steps })
}

/// `Φ(θT)` for the driver orbit of `mono`.
pub fn flow_at(spec: &SystemSpec, mono: &MonodromyResult, theta: f64) -> Result<DMatrix<f64>> {
    let steps = ((theta.abs() * mono.steps as f64).ceil() as usize).max(1);
    propagate(spec, mono.driver.z0, mono.driver.zdot0, theta * mono.period(), steps)
}

/// Principal logarithm of a monodromy in the group `tag`.
pub fn average_matrix(phi: &DMatrix<f64>, tag: GroupTag) -> Result<DMatrix<f64>> {
    Ok(log_affine(phi, tag)?.0)
}

/// Unit null vector of the skew 3×3 block of a 4×4 generator, signed so that
/// its largest-magnitude component is positive. `None` for other shapes and
/// for generators with norm below 1e−10.
pub fn rotation_axis(average: &DMatrix<f64>) -> Option<DVector<f64>> {
    if average.nrows() != 4 || average.ncols() != 4 {
        return None;
    }
    let block = average.view((0, 0), (3, 3));
    if block.norm() < 1e-10 {
        return None;
    }
    let mut axis = DVector::from_column_slice(&[
        0.5 * (block[(2, 1)] - block[(1, 2)]),
        0.5 * (block[(0, 2)] - block[(2, 0)]),
        0.5 * (block[(1, 0)] - block[(0, 1)]),
    ]);
    axis.normalize_mut();
    if axis[axis.iamax()] < 0.0 {
        axis = -axis;
    }
    Some(axis)
}

/// `axis · (y, v)`.
pub fn latitude(rstate: &ReducedState, axis: &DVector<f64>) -> f64 {
    let m = rstate.y.len();
    assert_eq!(axis.len(), m + 1, "axis dimension {} does not match (y, v) of dimension {}", axis.len(), m + 1);
    axis.rows(0, m).dot(&rstate.y) + axis[m] * rstate.v
}

/// `exp(Ā θ) Φ(θT)⁻¹ u`.
pub fn averaging_transform(
    spec: &SystemSpec,
    mono: &MonodromyResult,
    theta: f64,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let phi = flow_at(spec, mono, theta)?;
    let w = phi.lu().solve(u).ok_or(Error::SingularStep)?;
    Ok(expm(&(&mono.average * theta)) * w)
}
