//! Constrained equations of motion, the reduction `(x, v, z, ż) ↦ (y, v, z, ż)`,
//! and the three first integrals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{kernel_vector, potentials, reduced_matrix, SystemSpec};

/// Configuration and velocity of the full constrained system.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub x: DVector<f64>,
    pub z: f64,
    pub xdot: DVector<f64>,
    pub zdot: f64,
    pub t: f64,
}

impl FullState {
    pub fn new(x: &[f64], z: f64, xdot: &[f64], zdot: f64) -> Self {
        FullState { x: DVector::from_column_slice(x), z, xdot: DVector::from_column_slice(xdot), zdot, t: 0.0 }
    }

    /// A state on the constraint surface with kernel velocity `v`.
    pub fn admissible(spec: &SystemSpec, x: &[f64], z: f64, v: f64, zdot: f64) -> Result<Self> {
        let xdot = reconstruct_velocity(spec, v, z)?;
        Ok(FullState { x: DVector::from_column_slice(x), z, xdot, zdot, t: 0.0 })
    }

    /// Generalised position `q = (x, z)`.
    pub fn q(&self) -> DVector<f64> {
        stack(&self.x, self.z)
    }

    /// Generalised velocity `q̇ = (ẋ, ż)`.
    pub fn qdot(&self) -> DVector<f64> {
        stack(&self.xdot, self.zdot)
    }

    pub fn from_q(q: &DVector<f64>, qdot: &DVector<f64>, t: f64) -> Self {
        let n = q.len() - 1;
        FullState { x: q.rows(0, n).into_owned(), z: q[n], xdot: qdot.rows(0, n).into_owned(), zdot: qdot[n], t }
    }

    /// Velocity flip `(q, q̇) ↦ (q, −q̇)`.
    pub fn flipped(&self) -> Self {
        FullState { xdot: -&self.xdot, zdot: -self.zdot, ..self.clone() }
    }

    /// `‖A(z)ẋ‖∞`.
    pub fn constraint_residual(&self, spec: &SystemSpec) -> f64 {
        (spec.constraint(self.z) * &self.xdot).amax()
    }

    /// Largest componentwise difference in `(x, z, ẋ, ż)`.
    pub fn distance(&self, other: &FullState) -> f64 {
        (&self.x - &other.x)
            .amax()
            .max((self.z - other.z).abs())
            .max((&self.xdot - &other.xdot).amax())
            .max((self.zdot - other.zdot).abs())
    }

    pub(crate) fn to_vector(&self) -> DVector<f64> {
        let n = self.x.len();
        let mut out = DVector::zeros(2 * n + 2);
        out.rows_mut(0, n).copy_from(&self.x);
        out[n] = self.z;
        out.rows_mut(n + 1, n).copy_from(&self.xdot);
        out[2 * n + 1] = self.zdot;
        out
    }

    pub(crate) fn from_vector(v: &DVector<f64>, t: f64) -> Self {
        let n = (v.len() - 2) / 2;
        FullState { x: v.rows(0, n).into_owned(), z: v[n], xdot: v.rows(n + 1, n).into_owned(), zdot: v[2 * n + 1], t }
    }
}

pub(crate) fn stack(x: &DVector<f64>, z: f64) -> DVector<f64> {
    let n = x.len();
    let mut q = DVector::zeros(n + 1);
    q.rows_mut(0, n).copy_from(x);
    q[n] = z;
    q
}

/// Time derivative of a [`FullState`].
#[derive(Debug, Clone, PartialEq)]
pub struct FullDerivative {
    pub dx: DVector<f64>,
    pub dz: f64,
    pub dxdot: DVector<f64>,
    pub dzdot: f64,
}

/// Point on the base of the fibration: `y = K̂x`, `v = ẋᵀk(z)` and the
/// homogeneous coordinate carrying the affine force term.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub y: DVector<f64>,
    pub v: f64,
    pub z: f64,
    pub zdot: f64,
    pub eps_coord: f64,
}

impl ReducedState {
    /// `(y, v, ε)` as one vector, the variable the reduced matrix acts on.
    pub fn passenger(&self) -> DVector<f64> {
        let m = self.y.len();
        let mut u = DVector::zeros(m + 2);
        u.rows_mut(0, m).copy_from(&self.y);
        u[m] = self.v;
        u[m + 1] = self.eps_coord;
        u
    }

    pub fn from_passenger(u: &DVector<f64>, z: f64, zdot: f64) -> Self {
        let m = u.len() - 2;
        ReducedState { y: u.rows(0, m).into_owned(), v: u[m], z, zdot, eps_coord: u[m + 1] }
    }

    /// Componentwise linear interpolation, `s ∈ [0, 1]`.
    pub fn lerp(&self, other: &ReducedState, s: f64) -> ReducedState {
        ReducedState {
            y: &self.y + (&other.y - &self.y) * s,
            v: self.v + (other.v - self.v) * s,
            z: self.z + (other.z - self.z) * s,
            zdot: self.zdot + (other.zdot - self.zdot) * s,
            eps_coord: self.eps_coord + (other.eps_coord - self.eps_coord) * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDerivative {
    pub dy: DVector<f64>,
    pub dv: f64,
    pub dz: f64,
    pub dzdot: f64,
    pub deps: f64,
}

/// Total, driver and passenger energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTriple {
    pub total: f64,
    pub driver: f64,
    pub passenger: f64,
}

/// Solve `A Aᵀ λ = A ∇U − A′ ż ẋ` for the multiplier that keeps `A(z)ẋ = 0`.
pub fn multiplier(spec: &SystemSpec, state: &FullState) -> Result<DVector<f64>> {
    let a = spec.constraint(state.z);
    let grad_u = potentials(spec, &state.x, state.z).grad_u;
    let rhs = &a * grad_u - spec.constraint_dz(state.z) * &state.xdot * state.zdot;
    let gram = &a * a.transpose();
    solve_small_spd(&gram, &rhs).ok_or(Error::SingularConstraint { z: state.z })
}

/// Closed-form solve for the 1×1 and 2×2 Gram systems of the catalog.
fn solve_small_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = gram.amax().max(f64::MIN_POSITIVE);
    match gram.nrows() {
        1 => {
            let g = gram[(0, 0)];
            (g.abs() > 1e-14 * scale).then(|| DVector::from_element(1, rhs[0] / g))
        }
        2 => {
            let (a, b, c, d) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 0)], gram[(1, 1)]);
            let det = a * d - b * c;
            (det.abs() > 1e-14 * scale * scale).then(|| {
                DVector::from_column_slice(&[(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det])
            })
        }
        _ => gram.clone().lu().solve(rhs),
    }
}

/// Right-hand side of the constrained equations of motion with the
/// multiplier eliminated.
pub fn full_rhs(spec: &SystemSpec, state: &FullState) -> Result<FullDerivative> {
    let lambda = multiplier(spec, state)?;
    let p = potentials(spec, &state.x, state.z);
    let dxdot = -p.grad_u + spec.constraint(state.z).transpose() * lambda;
    Ok(FullDerivative { dx: state.xdot.clone(), dz: state.zdot, dxdot, dzdot: -p.dv })
}

pub fn project_reduced(spec: &SystemSpec, state: &FullState) -> Result<ReducedState> {
    let k = kernel_vector(spec, state.z)?;
    Ok(ReducedState {
        y: spec.stiffness_factor() * &state.x,
        v: state.xdot.dot(&k),
        z: state.z,
        zdot: state.zdot,
        eps_coord: 1.0,
    })
}

pub fn reduced_rhs(spec: &SystemSpec, rstate: &ReducedState) -> Result<ReducedDerivative> {
    let l = reduced_matrix(spec, rstate.z)?;
    let du = l * rstate.passenger();
    let m = rstate.y.len();
    Ok(ReducedDerivative {
        dy: du.rows(0, m).into_owned(),
        dv: du[m],
        dz: rstate.zdot,
        dzdot: -spec.driver_potential_dz(rstate.z),
        deps: du[m + 1],
    })
}

/// `ẋ = v·k(z)`.
pub fn reconstruct_velocity(spec: &SystemSpec, v: f64, z: f64) -> Result<DVector<f64>> {
    Ok(kernel_vector(spec, z)? * v)
}

pub fn invariants(spec: &SystemSpec, state: &FullState) -> InvariantTriple {
    let p = potentials(spec, &state.x, state.z);
    let driver = 0.5 * state.zdot * state.zdot + p.v;
    let v = kernel_vector(spec, state.z).map(|k| state.xdot.dot(&k)).unwrap_or(f64::NAN);
    InvariantTriple { total: 0.5 * state.xdot.norm_squared() + p.u + driver, driver, passenger: 0.5 * v * v + p.u }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use proptest::prelude::*;

    use super::*;
    use crate::model::{catalog, SystemId};

    fn knife_edge_start() -> FullState {
        FullState::new(&[0.0, 0.0], PI / 2.0, &[0.0, 0.0], 1.0)
    }

    #[test]
    fn multiplier_examples() {
        // 1×1 hand solve: A = [−1, 0], ∇U = (−1, 0) ⇒ λ = 1.
        let s = catalog("knife_edge", 0.0).unwrap();
        let lam = multiplier(&s, &knife_edge_start()).unwrap();
        assert!((lam[0] - 1.0).abs() < 1e-15);

        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], 0.7);
        assert_eq!(multiplier(&s, &st).unwrap()[0], 1.0);

        for id in SystemId::ALL {
            let s = SystemSpec::new(id, 0.0).unwrap();
            if s.force_offset().iter().all(|&f| f == 0.0) {
                let n = s.n_x();
                let st = FullState::new(&vec![0.0; n], 0.3, &vec![0.0; n], 1.0);
                assert!(multiplier(&s, &st).unwrap().iter().all(|&l| l == 0.0));
            }
        }
    }

    #[test]
    fn full_rhs_examples() {
        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], 1.0);
        let d = full_rhs(&s, &st).unwrap();
        assert_eq!(d.dxdot.as_slice(), &[0.0, -1.0]);
        assert_eq!(d.dzdot, -0.0);

        // Knife edge at the horizontal start: the driver is free and v̇ = cos(π/2) = 0.
        let s = catalog("knife_edge", 0.0).unwrap();
        let st = knife_edge_start();
        let d = full_rhs(&s, &st).unwrap();
        assert_eq!(d.dzdot, 0.0);
        let k = kernel_vector(&s, st.z).unwrap();
        assert!(d.dxdot.dot(&k).abs() < 1e-15);

        // Rolling disk: accelerations only along Aᵀλ, so v̇ = 0.
        let s = catalog("vertical_disk", 0.0).unwrap();
        let st = FullState::admissible(&s, &[0.3, -1.0, 2.0], 0.8, 1.7, -0.4).unwrap();
        let d = full_rhs(&s, &st).unwrap();
        let k = kernel_vector(&s, st.z).unwrap();
        assert!(d.dxdot.dot(&k).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let s = catalog("knife_edge", 0.0).unwrap();
        assert_eq!(project_reduced(&s, &knife_edge_start()).unwrap().v, 0.0);

        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let c = 1.3;
        let st = FullState::new(&[1.0, 1.0], 1.0, &[-FRAC_1_SQRT_2 * c, FRAC_1_SQRT_2 * c], 0.0);
        let r = project_reduced(&s, &st).unwrap();
        assert_eq!(r.y.as_slice(), &[1.0, 1.0]);
        assert!((r.v - c).abs() < 1e-15);
        assert_eq!(r.eps_coord, 1.0);

        let s = catalog("nonholonomic_particle", 0.0).unwrap();
        let st = FullState::new(&[2.0, 3.0], 0.0, &[0.0, 0.0], 0.0);
        assert_eq!(project_reduced(&s, &st).unwrap().y.as_slice(), &[3.0]);
    }

    #[test]
    fn reduced_rhs_examples() {
        let s = catalog("knife_edge", 0.0).unwrap();
        let r = ReducedState { y: DVector::zeros(0), v: 0.4, z: 0.0, zdot: 1.0, eps_coord: 1.0 };
        let d = reduced_rhs(&s, &r).unwrap();
        assert_eq!(d.dv, 1.0);
        assert_eq!(d.deps, 0.0);

        let s = catalog("vertical_disk", 0.0).unwrap();
        let r = ReducedState { y: DVector::zeros(0), v: 2.0, z: 0.3, zdot: 1.0, eps_coord: 1.0 };
        assert_eq!(reduced_rhs(&s, &r).unwrap().dv, 0.0);

        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let r = ReducedState { y: DVector::zeros(2), v: 1.0, z: 0.0, zdot: 0.0, eps_coord: 1.0 };
        let d = reduced_rhs(&s, &r).unwrap();
        assert_eq!(d.dy.as_slice(), &[-0.0, 1.0]);
        assert_eq!(d.dv, 0.0);
    }

    #[test]
    fn reconstruct_velocity_examples() {
        let s = catalog("knife_edge", 0.0).unwrap();
        assert_eq!(reconstruct_velocity(&s, 2.0, 0.0).unwrap().as_slice(), &[2.0, 0.0]);
        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let v = reconstruct_velocity(&s, 2f64.sqrt(), 1.0).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        assert!(reconstruct_velocity(&s, 0.0, 0.4).unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn invariant_examples() {
        let s = catalog("knife_edge", 0.0).unwrap();
        let inv = invariants(&s, &knife_edge_start());
        assert_eq!((inv.driver, inv.passenger, inv.total), (0.5, 0.0, 0.5));

        // The pendulum data sets are labelled by ½ż² + U(x₀) + V(0).
        let s = catalog("cvt_pendulum", 0.0).unwrap();
        for (zdot, label) in [(1.8973666, 2.8), (2.82842712, 5.0)] {
            let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], zdot);
            let inv = invariants(&s, &st);
            assert_eq!(inv.driver, 0.5 * zdot * zdot + s.driver_potential(0.0));
            assert!((inv.total - label).abs() < 1e-7);
        }

        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let inv = invariants(&s, &FullState::new(&[0.0, 0.0], 0.0, &[0.0, 0.0], 0.0));
        assert_eq!((inv.total, inv.driver, inv.passenger), (0.0, 0.0, 0.0));
    }

    fn admissible(id: SystemId, eps: f64, vals: [f64; 6]) -> (SystemSpec, FullState) {
        let s = SystemSpec::new(id, eps).unwrap();
        let x: Vec<f64> = vals[..s.n_x()].to_vec();
        let st = FullState::admissible(&s, &x, vals[3], vals[4], vals[5]).unwrap();
        (s, st)
    }

    proptest! {
        #[test]
        fn energy_splits_on_constraint(idx in 0usize..6, vals in prop::array::uniform6(-2.0f64..2.0)) {
            let (s, st) = admissible(SystemId::ALL[idx], 0.1, vals);
            let inv = invariants(&s, &st);
            prop_assert!((inv.total - inv.passenger - inv.driver).abs() <= 1e-13 * inv.total.abs().max(1.0));
        }

        #[test]
        fn acceleration_keeps_constraint(idx in 0usize..6, vals in prop::array::uniform6(-2.0f64..2.0)) {
            let (s, st) = admissible(SystemId::ALL[idx], 0.1, vals);
            let d = full_rhs(&s, &st).unwrap();
            let res = s.constraint(st.z) * &d.dxdot + s.constraint_dz(st.z) * &st.xdot * st.zdot;
            prop_assert!(res.amax() <= 1e-10);
        }

        #[test]
        fn reduced_rhs_is_projection_of_full_rhs(idx in 0usize..6, vals in prop::array::uniform6(-2.0f64..2.0), at_rest in any::<bool>()) {
            // Includes v = 0, where the energy argument for v̇ breaks down.
            let mut vals = vals;
            if at_rest { vals[4] = 0.0; }
            let (s, st) = admissible(SystemId::ALL[idx], 0.1, vals);
            let full = full_rhs(&s, &st).unwrap();
            let red = reduced_rhs(&s, &project_reduced(&s, &st).unwrap()).unwrap();
            // d/dt (ẋᵀk) = ẍᵀk + ẋᵀk′ż and ẋ ∥ k with ‖k‖ = 1, so ẋᵀk′ = 0.
            let k = kernel_vector(&s, st.z).unwrap();
            prop_assert!((full.dxdot.dot(&k) - red.dv).abs() <= 1e-12);
            let dy = s.stiffness_factor() * &full.dx;
            prop_assert!((dy - red.dy).amax() <= 1e-12);
            prop_assert_eq!(full.dzdot, red.dzdot);
        }

        #[test]
        fn projection_is_idempotent(idx in 0usize..6, vals in prop::array::uniform6(-2.0f64..2.0)) {
            let (s, st) = admissible(SystemId::ALL[idx], 0.1, vals);
            let r = project_reduced(&s, &st).unwrap();
            let rebuilt = FullState { xdot: reconstruct_velocity(&s, r.v, r.z).unwrap(), ..st.clone() };
            let again = project_reduced(&s, &rebuilt).unwrap();
            prop_assert!((again.v - r.v).abs() <= 1e-14);
            prop_assert_eq!(again.y, r.y);
            prop_assert!(rebuilt.constraint_residual(&s) <= 1e-12);
        }
    }
}
