//! Independent one-step solver: every method is written as one dense
//! residual in `(q₁, q̇₁, λ)` and solved by Newton with a central-difference
//! Jacobian. Only the model data (A, V, K̂, f) is shared with the library.

use nalgebra::{DMatrix, DVector};
use nhcouple::{FullState, StepperKind, SystemSpec};

pub const TOL: f64 = 1e-14;

pub struct OracleStep {
    pub state: FullState,
    pub lambda: DVector<f64>,
    pub residual: f64,
}

fn grad_v(spec: &SystemSpec, q: &DVector<f64>) -> DVector<f64> {
    let n = spec.n_x();
    let x = q.rows(0, n).into_owned();
    let k = spec.stiffness_factor();
    let gx = k.transpose() * (k * &x) - spec.force_offset();
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&gx);
    g[n] = spec.driver_potential_dz(q[n]);
    g
}

fn potential(spec: &SystemSpec, q: &DVector<f64>) -> f64 {
    let n = spec.n_x();
    let x = q.rows(0, n).into_owned();
    let y = spec.stiffness_factor() * &x;
    0.5 * y.norm_squared() - spec.force_offset().dot(&x) + spec.driver_potential(q[n])
}

/// `[A(z), 0]ᵀ λ`.
fn reaction(spec: &SystemSpec, z: f64, lambda: &DVector<f64>) -> DVector<f64> {
    let n = spec.n_x();
    let mut out = DVector::zeros(n + 1);
    out.rows_mut(0, n).copy_from(&(spec.constraint(z).transpose() * lambda));
    out
}

fn constraint(spec: &SystemSpec, z: f64, qdot: &DVector<f64>) -> DVector<f64> {
    spec.constraint(z) * qdot.rows(0, spec.n_x())
}

fn residual(
    spec: &SystemSpec,
    method: StepperKind,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    h: f64,
    w: &DVector<f64>,
) -> DVector<f64> {
    let d = q0.len();
    let q1 = w.rows(0, d).into_owned();
    let v1 = w.rows(d, d).into_owned();
    let lambda = w.rows(2 * d, w.len() - 2 * d).into_owned();
    let z = |q: &DVector<f64>| q[d - 1];
    let (r1, r2, r3) = match method {
        StepperKind::Dla { alpha } => {
            let qm = q0 + v0 * ((1.0 - alpha) * h);
            (
                &v1 - v0 + grad_v(spec, q0) * (alpha * h) + grad_v(spec, &q1) * ((1.0 - alpha) * h)
                    - reaction(spec, z(&qm), &lambda) * h,
                &q1 - &qm - &v1 * (alpha * h),
                constraint(spec, z(&q1), &v1),
            )
        }
        StepperKind::Dla01 => {
            let qm = q0 + v0 * (0.5 * h);
            (
                &v1 - v0 + grad_v(spec, &qm) * h - reaction(spec, z(&qm), &lambda) * h,
                &q1 - &qm - &v1 * (0.5 * h),
                constraint(spec, z(&q1), &v1),
            )
        }
        StepperKind::LeapFrog => (
            &v1 - v0 + grad_v(spec, q0) * h - reaction(spec, z(q0), &lambda) * h,
            &q1 - q0 - &v1 * h,
            constraint(spec, z(q0), &(v0 + &v1)),
        ),
        StepperKind::DiscreteGradient => {
            let mid = (q0 + &q1) * 0.5;
            let dq = &q1 - q0;
            let mut g = grad_v(spec, &mid);
            let nn = dq.norm_squared();
            if nn > 0.0 {
                g += &dq * ((potential(spec, &q1) - potential(spec, q0) - g.dot(&dq)) / nn);
            }
            (
                &v1 - v0 + g * h - reaction(spec, z(&mid), &lambda) * h,
                &q1 - q0 - (v0 + &v1) * (0.5 * h),
                constraint(spec, z(&mid), &((v0 + &v1) * 0.5)),
            )
        }
        StepperKind::Reference { .. } => panic!("the oracle covers the discrete methods only"),
    };
    let mut out = DVector::zeros(w.len());
    out.rows_mut(0, d).copy_from(&r1);
    out.rows_mut(d, d).copy_from(&r2);
    out.rows_mut(2 * d, r3.len()).copy_from(&r3);
    out
}

pub fn oracle_step(spec: &SystemSpec, method: StepperKind, state: &FullState, h: f64) -> OracleStep {
    let q0 = state.q();
    let v0 = state.qdot();
    let d = q0.len();
    let r = spec.r();
    let mut w = DVector::zeros(2 * d + r);
    w.rows_mut(0, d).copy_from(&(&q0 + &v0 * h));
    w.rows_mut(d, d).copy_from(&v0);
    let f = |w: &DVector<f64>| residual(spec, method, &q0, &v0, h, w);
    let mut res = f(&w);
    for _ in 0..100 {
        if res.amax() <= TOL {
            break;
        }
        let mut jac = DMatrix::zeros(w.len(), w.len());
        for j in 0..w.len() {
            let e = 1e-6 * (1.0 + w[j].abs());
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += e;
            wm[j] -= e;
            jac.set_column(j, &((f(&wp) - f(&wm)) / (2.0 * e)));
        }
        let delta = jac.lu().solve(&res).expect("oracle Jacobian is singular");
        let next = &w - delta;
        let next_res = f(&next);
        if next_res.amax() >= res.amax() && res.amax() < 1e-12 {
            break;
        }
        w = next;
        res = next_res;
    }
    let q1 = w.rows(0, d).into_owned();
    let v1 = w.rows(d, d).into_owned();
    OracleStep {
        state: FullState::from_q(&q1, &v1, state.t + h),
        lambda: w.rows(2 * d, r).into_owned(),
        residual: res.amax(),
    }
}
