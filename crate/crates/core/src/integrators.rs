//! One-step methods for the coupled systems.
//!
//! Positions are `q = (x, z)` and the constraint acts as `[A(z), 0]`, so the
//! multiplier never enters the driver row. Every method therefore advances
//! the driver on its own and then solves for `(ẋ₁, λ)`; for the quadratic
//! passenger potentials of the catalog that second solve is linear. The
//! discrete-gradient method is the exception: its gradient mixes `x` and `z`
//! and it is solved by Newton on the full `(q̇₁, λ)` system.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::analysis::Trajectory;
use crate::dynamics::{full_rhs, invariants, FullState};
use crate::error::{Error, Result};
use crate::model::{kernel_vector, potentials, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepperKind {
    /// Discrete Lagrange–d'Alembert with weight `alpha`.
    Dla { alpha: f64 },
    /// Half a step of DLA⁰ followed by half a step of DLA¹.
    Dla01,
    /// Nonholonomic leap-frog.
    LeapFrog,
    /// Midpoint discrete gradient; conserves the total energy exactly.
    DiscreteGradient,
    /// RK4 on the index-reduced equations with velocity projection.
    Reference { substeps: usize },
}

impl StepperKind {
    /// The five methods of the benchmark, in table order.
    pub const BENCHMARK: [StepperKind; 5] = [
        StepperKind::Dla { alpha: 0.5 },
        StepperKind::Dla { alpha: 0.4 },
        StepperKind::Dla01,
        StepperKind::LeapFrog,
        StepperKind::DiscreteGradient,
    ];

    pub fn name(&self) -> String {
        match self {
            StepperKind::Dla { alpha } => format!("dla{alpha}"),
            StepperKind::Dla01 => "dla01".into(),
            StepperKind::LeapFrog => "lf".into(),
            StepperKind::DiscreteGradient => "dd".into(),
            StepperKind::Reference { substeps } => format!("ref{substeps}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepperKind::Dla { alpha } if !(0.0..=1.0).contains(&alpha) => {
                Err(Error::InvalidArgument(format!("DLA weight must lie in [0, 1], got {alpha}")))
            }
            StepperKind::Reference { substeps: 0 } => {
                Err(Error::InvalidArgument("reference integrator needs at least one substep".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn step(&self, spec: &SystemSpec, state: &FullState, h: f64, settings: &SolverSettings) -> Result<StepResult> {
        match *self {
            StepperKind::Dla { alpha } => step_dla(spec, state, h, alpha, settings),
            StepperKind::Dla01 => step_dla01(spec, state, h, settings),
            StepperKind::LeapFrog => step_leapfrog(spec, state, h, settings),
            StepperKind::DiscreteGradient => step_discrete_gradient(spec, state, h, settings),
            StepperKind::Reference { substeps } => {
                let next = step_reference(spec, state, h, substeps)?;
                let lambda = crate::dynamics::multiplier(spec, &next)?;
                Ok(StepResult { state: next, lambda, newton_iters: 0, residual: 0.0 })
            }
        }
    }

    /// The involution σ with `Φ_h⁻¹ = σ ∘ Φ_h ∘ σ` for a reversible method.
    ///
    /// For all methods but leap-frog this is the velocity flip. Leap-frog
    /// carries the half-step velocity `q̇ₖ = (qₖ − qₖ₋₁)/h`, whose time reverse
    /// at step `k` is `(qₖ₋₁, −q̇ₖ)`.
    pub fn time_reversal(&self, state: &FullState, h: f64) -> FullState {
        match self {
            StepperKind::LeapFrog => FullState {
                x: &state.x - &state.xdot * h,
                z: state.z - h * state.zdot,
                xdot: -&state.xdot,
                zdot: -state.zdot,
                t: state.t,
            },
            _ => state.flipped(),
        }
    }

    /// Constraint residual the method enforces at the end of a step.
    pub fn discrete_constraint_residual(&self, spec: &SystemSpec, before: &FullState, after: &FullState) -> f64 {
        match self {
            StepperKind::LeapFrog => (spec.constraint(before.z) * (&before.xdot + &after.xdot)).amax(),
            StepperKind::DiscreteGradient => {
                let zbar = 0.5 * (before.z + after.z);
                (spec.constraint(zbar) * (&before.xdot + &after.xdot) * 0.5).amax()
            }
            _ => after.constraint_residual(spec),
        }
    }
}

impl fmt::Display for StepperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.name())
    }
}

impl FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "dla01" => StepperKind::Dla01,
            "lf" => StepperKind::LeapFrog,
            "dd" => StepperKind::DiscreteGradient,
            _ => {
                if let Some(alpha) = s.strip_prefix("dla") {
                    let alpha = alpha.parse::<f64>().map_err(|_| Error::UnknownMethod(s.into()))?;
                    StepperKind::Dla { alpha }
                } else if let Some(n) = s.strip_prefix("ref") {
                    let substeps = n.parse::<usize>().map_err(|_| Error::UnknownMethod(s.into()))?;
                    StepperKind::Reference { substeps }
                } else {
                    return Err(Error::UnknownMethod(s.into()));
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Accepted residual, relative to `1 + ‖q̇‖∞`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Admissibility tolerance for initial states.
    pub constraint_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { newton_tol: 1e-12, newton_max_iter: 50, constraint_tol: 1e-10 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if !(self.constraint_tol > 0.0 && self.constraint_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "constraint_tol must be positive, got {}",
                self.constraint_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("newton_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: FullState,
    pub lambda: DVector<f64>,
    pub newton_iters: usize,
    pub residual: f64,
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {h}")))
    }
}

fn velocity_scale(a: &FullState, b: &FullState) -> f64 {
    1.0 + a.xdot.amax().max(a.zdot.abs()).max(b.xdot.amax()).max(b.zdot.abs())
}

/// Solve `[[M, −h Bᵀ], [C, 0]] (ẋ, λ) = (rhs, 0)`.
fn saddle_solve(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    h: f64,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = m.nrows();
    let r = b.nrows();
    let mut kkt = DMatrix::zeros(n + r, n + r);
    kkt.view_mut((0, 0), (n, n)).copy_from(m);
    kkt.view_mut((0, n), (n, r)).copy_from(&(-b.transpose() * h));
    kkt.view_mut((n, 0), (r, n)).copy_from(c);
    let mut full_rhs = DVector::zeros(n + r);
    full_rhs.rows_mut(0, n).copy_from(rhs);
    let sol = kkt.lu().solve(&full_rhs).ok_or(Error::SingularStep)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularStep);
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, r).into_owned()))
}

/// DLA with weight `alpha`:
///
/// ```text
/// q_{1−α} = q₀ + (1−α) h q̇₀
/// q̇₁ = q̇₀ − α h ∇V(q₀) − (1−α) h ∇V(q₁) + h A(q_{1−α})ᵀ λ
/// q₁ = q_{1−α} + α h q̇₁
/// 0 = A(q₁) q̇₁
/// ```
pub fn step_dla(
    spec: &SystemSpec,
    state: &FullState,
    h: f64,
    alpha: f64,
    settings: &SolverSettings,
) -> Result<StepResult> {
    check_step(h)?;
    StepperKind::Dla { alpha }.validate()?;
    let (a, b) = (alpha, 1.0 - alpha);

    // Driver: scalar Newton for ż₁.
    let z_mid = state.z + b * h * state.zdot;
    let dv0 = spec.driver_potential_dz(state.z);
    let mut w = state.zdot - h * dv0;
    let mut iters = 0;
    let driver_residual = |w: f64| w - state.zdot + a * h * dv0 + b * h * spec.driver_potential_dz(z_mid + a * h * w);
    let tol = settings.newton_tol * (1.0 + state.zdot.abs());
    let mut g = driver_residual(w);
    while g.abs() > tol {
        if iters >= settings.newton_max_iter {
            return Err(Error::NewtonFailed { iterations: iters, residual: g.abs() });
        }
        let dg = 1.0 + a * b * h * h * spec.driver_potential_dzz(z_mid + a * h * w);
        w -= g / dg;
        g = driver_residual(w);
        iters += 1;
    }
    let zdot1 = w;
    let z1 = z_mid + a * h * zdot1;

    // Passenger: linear in (ẋ₁, λ).
    let n = spec.n_x();
    let k = spec.stiffness();
    let f = spec.force_offset();
    let x_mid = &state.x + &state.xdot * (b * h);
    let grad0 = potentials(spec, &state.x, state.z).grad_u;
    let m = DMatrix::identity(n, n) + &k * (a * b * h * h);
    let rhs = &state.xdot - &grad0 * (a * h) - (&k * &x_mid - f) * (b * h);
    let a_mid = spec.constraint(z_mid);
    let a1 = spec.constraint(z1);
    let (xdot1, lambda) = saddle_solve(&m, &a_mid, &a1, h, &rhs)?;
    let x1 = &x_mid + &xdot1 * (a * h);

    let next = FullState { x: x1, z: z1, xdot: xdot1, zdot: zdot1, t: state.t + h };
    let grad1 = potentials(spec, &next.x, next.z).grad_u;
    let vel_res = &next.xdot - &state.xdot + &grad0 * (a * h) + &grad1 * (b * h) - a_mid.transpose() * &lambda * h;
    let residual = vel_res.amax().max(g.abs()).max((&a1 * &next.xdot).amax()) / velocity_scale(state, &next);
    Ok(StepResult { state: next, lambda, newton_iters: iters, residual })
}

/// DLA⁰¹:
///
/// ```text
/// q_{1/2} = q₀ + h/2 q̇₀
/// q̇₁ = q̇₀ − h ∇V(q_{1/2}) + h A(q_{1/2})ᵀ λ
/// q₁ = q_{1/2} + h/2 q̇₁
/// 0 = A(q₁) q̇₁
/// ```
pub fn step_dla01(spec: &SystemSpec, state: &FullState, h: f64, _settings: &SolverSettings) -> Result<StepResult> {
    check_step(h)?;
    let z_half = state.z + 0.5 * h * state.zdot;
    let zdot1 = state.zdot - h * spec.driver_potential_dz(z_half);
    let z1 = z_half + 0.5 * h * zdot1;

    let n = spec.n_x();
    let x_half = &state.x + &state.xdot * (0.5 * h);
    let grad_half = potentials(spec, &x_half, z_half).grad_u;
    let rhs = &state.xdot - &grad_half * h;
    let a_half = spec.constraint(z_half);
    let a1 = spec.constraint(z1);
    let (xdot1, lambda) = saddle_solve(&DMatrix::identity(n, n), &a_half, &a1, h, &rhs)?;
    let x1 = &x_half + &xdot1 * (0.5 * h);

    let next = FullState { x: x1, z: z1, xdot: xdot1, zdot: zdot1, t: state.t + h };
    let vel_res = &next.xdot - &rhs - a_half.transpose() * &lambda * h;
    let residual = vel_res.amax().max((&a1 * &next.xdot).amax()) / velocity_scale(state, &next);
    Ok(StepResult { state: next, lambda, newton_iters: 0, residual })
}

/// Nonholonomic leap-frog:
///
/// ```text
/// q̇₁ = q̇₀ + h (−∇V(q₀) + A(q₀)ᵀ λ)
/// q₁ = q₀ + h q̇₁
/// 0 = A(q₀)(q̇₀ + q̇₁)
/// ```
///
/// The velocity is the half-step velocity `(qₖ − qₖ₋₁)/h`; use
/// [`leapfrog_start`] to turn a point velocity into one.
pub fn step_leapfrog(spec: &SystemSpec, state: &FullState, h: f64, _settings: &SolverSettings) -> Result<StepResult> {
    leapfrog_step_signed(spec, state, h, 1.0)
}

/// Leap-frog with the passenger position update written as
/// `x₁ = x₀ + s·h ẋ₁`; `s = 1` is the method, `s = −1` a deliberately broken
/// variant used by the verification suite.
pub(crate) fn leapfrog_step_signed(spec: &SystemSpec, state: &FullState, h: f64, s: f64) -> Result<StepResult> {
    check_step(h)?;
    let zdot1 = state.zdot - h * spec.driver_potential_dz(state.z);
    let z1 = state.z + h * zdot1;

    let a0 = spec.constraint(state.z);
    let grad0 = potentials(spec, &state.x, state.z).grad_u;
    // A₀(2q̇₀ − h∇U₀ + h A₀ᵀλ) = 0
    let gram = &a0 * a0.transpose() * h;
    let rhs = -(&a0 * (&state.xdot * 2.0 - &grad0 * h));
    let lambda = gram.lu().solve(&rhs).ok_or(Error::SingularStep)?;
    if lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::SingularStep);
    }
    let xdot1 = &state.xdot + (-&grad0 + a0.transpose() * &lambda) * h;
    let x1 = &state.x + &xdot1 * (s * h);

    let next = FullState { x: x1, z: z1, xdot: xdot1, zdot: zdot1, t: state.t + h };
    let residual = (&a0 * (&next.xdot + &state.xdot)).amax() / velocity_scale(state, &next);
    Ok(StepResult { state: next, lambda, newton_iters: 0, residual })
}

/// Shift a point velocity back by half a step so that leap-frog, started from
/// the result, is second-order accurate in the positions.
pub fn leapfrog_start(spec: &SystemSpec, state: &FullState, h: f64) -> Result<FullState> {
    let d = full_rhs(spec, state)?;
    Ok(FullState { xdot: &state.xdot - &d.dxdot * (0.5 * h), zdot: state.zdot - 0.5 * h * d.dzdot, ..state.clone() })
}

/// Midpoint discrete gradient of `V(q) = U(x) + V(z)`:
/// `∇̄V = ∇V(q̄) + [(V(q₁) − V(q₀) − ∇V(q̄)·Δq)/‖Δq‖²] Δq`.
///
/// For quadratic `U` the passenger part of the bracket vanishes identically,
/// so only the driver part is evaluated; this keeps the bracket free of
/// cancellation when `U` is large.
pub fn discrete_gradient(spec: &SystemSpec, q0: &DVector<f64>, q1: &DVector<f64>) -> DVector<f64> {
    let (grad, _) = discrete_gradient_parts(spec, q0, q1);
    grad
}

/// Returns the discrete gradient and the bracket coefficient `c`.
fn discrete_gradient_parts(spec: &SystemSpec, q0: &DVector<f64>, q1: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = q0.len() - 1;
    let qbar = (q0 + q1) * 0.5;
    let p = potentials(spec, &qbar.rows(0, n).into_owned(), qbar[n]);
    let mut grad = DVector::zeros(n + 1);
    grad.rows_mut(0, n).copy_from(&p.grad_u);
    grad[n] = p.dv;
    let d = q1 - q0;
    let dd = d.norm_squared();
    if dd.sqrt() < 1e-14 {
        return (grad, 0.0);
    }
    let bracket = spec.driver_potential(q1[n]) - spec.driver_potential(q0[n]) - p.dv * d[n];
    let c = bracket / dd;
    grad += &d * c;
    (grad, c)
}

/// Discrete-gradient step:
///
/// ```text
/// q₁ = q₀ + h (q̇₀ + q̇₁)/2
/// q̇₁ = q̇₀ − h ∇̄V(q₀, q₁) + h A(q̄)ᵀ λ
/// 0 = A(q̄)(q̇₀ + q̇₁)/2
/// ```
pub fn step_discrete_gradient(
    spec: &SystemSpec,
    state: &FullState,
    h: f64,
    settings: &SolverSettings,
) -> Result<StepResult> {
    check_step(h)?;
    let n_x = spec.n_x();
    let n = n_x + 1;
    let r = spec.r();
    let q0 = state.q();
    let qd0 = state.qdot();
    let k = spec.stiffness();

    // Explicit Euler predictor.
    let p0 = potentials(spec, &state.x, state.z);
    let mut grad0 = DVector::zeros(n);
    grad0.rows_mut(0, n_x).copy_from(&p0.grad_u);
    grad0[n_x] = p0.dv;
    let mut qd1 = &qd0 - grad0 * h;
    let mut lambda = DVector::zeros(r);

    let scale = 1.0 + qd0.amax();
    let mut iters = 0;
    loop {
        let q1 = &q0 + (&qd0 + &qd1) * (0.5 * h);
        let zbar = 0.5 * (q0[n_x] + q1[n_x]);
        let abar = spec.constraint(zbar);
        let abar_dz = spec.constraint_dz(zbar);
        let (dgrad, c) = discrete_gradient_parts(spec, &q0, &q1);

        let mut res = DVector::zeros(n + r);
        let mut r1 = &qd1 - &qd0 + &dgrad * h;
        {
            let mut rx = r1.rows_mut(0, n_x);
            rx -= abar.transpose() * &lambda * h;
        }
        let vsum_x = (&qd0 + &qd1).rows(0, n_x).into_owned();
        let r2 = &abar * &vsum_x * 0.5;
        res.rows_mut(0, n).copy_from(&r1);
        res.rows_mut(n, r).copy_from(&r2);
        let norm = res.amax();
        if norm <= settings.newton_tol * scale.max(1.0 + qd1.amax()) {
            let next = FullState::from_q(&q1, &qd1, state.t + h);
            let residual = norm / velocity_scale(state, &next);
            return Ok(StepResult { state: next, lambda, newton_iters: iters, residual });
        }
        if iters >= settings.newton_max_iter {
            return Err(Error::NewtonFailed { iterations: iters, residual: norm });
        }

        // Jacobian with respect to (q̇₁, λ); ∂q₁/∂q̇₁ = h/2, ∂q̄/∂q̇₁ = h/4.
        let d = &q1 - &q0;
        let dd = d.norm_squared();
        let mut dgrad_dq1 = DMatrix::zeros(n, n);
        dgrad_dq1.view_mut((0, 0), (n_x, n_x)).copy_from(&(&k * 0.5));
        dgrad_dq1[(n_x, n_x)] = 0.5 * spec.driver_potential_dzz(zbar);
        if dd.sqrt() >= 1e-14 {
            let bracket = c * dd;
            let mut grad_c = &d * (-2.0 * bracket / (dd * dd));
            grad_c[n_x] += (spec.driver_potential_dz(q1[n_x])
                - spec.driver_potential_dz(zbar)
                - 0.5 * spec.driver_potential_dzz(zbar) * d[n_x])
                / dd;
            dgrad_dq1 += DMatrix::identity(n, n) * c + &d * grad_c.transpose();
        }
        let mut jac = DMatrix::zeros(n + r, n + r);
        let mut j11 = DMatrix::identity(n, n) + dgrad_dq1 * (0.5 * h * h);
        let at_lambda_dz = abar_dz.transpose() * &lambda;
        for i in 0..n_x {
            j11[(i, n_x)] -= 0.25 * h * h * at_lambda_dz[i];
        }
        jac.view_mut((0, 0), (n, n)).copy_from(&j11);
        jac.view_mut((0, n), (n_x, r)).copy_from(&(-abar.transpose() * h));
        jac.view_mut((n, 0), (r, n_x)).copy_from(&(&abar * 0.5));
        let col = &abar_dz * &vsum_x * (0.125 * h);
        jac.view_mut((n, n_x), (r, 1)).copy_from(&col);

        let delta = jac.lu().solve(&(-res)).ok_or(Error::SingularStep)?;
        qd1 += delta.rows(0, n);
        lambda += delta.rows(n, r);
        iters += 1;
    }
}

/// Classical RK4 for `ẏ = f(t, y)`.
pub(crate) fn rk4_step<F>(f: &mut F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// RK4 with `substeps` internal steps on the index-reduced equations, then
/// orthogonal projection of `ẋ` onto `ker A(z₁)`.
pub fn step_reference(spec: &SystemSpec, state: &FullState, h: f64, substeps: usize) -> Result<FullState> {
    check_step(h)?;
    StepperKind::Reference { substeps }.validate()?;
    let dt = h / substeps as f64;
    let mut rhs = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let s = FullState::from_vector(y, 0.0);
        let d = full_rhs(spec, &s)?;
        let n = s.x.len();
        let mut out = DVector::zeros(y.len());
        out.rows_mut(0, n).copy_from(&d.dx);
        out[n] = d.dz;
        out.rows_mut(n + 1, n).copy_from(&d.dxdot);
        out[2 * n + 1] = d.dzdot;
        Ok(out)
    };
    let mut y = state.to_vector();
    for i in 0..substeps {
        y = rk4_step(&mut rhs, state.t + i as f64 * dt, &y, dt)?;
    }
    let mut next = FullState::from_vector(&y, state.t + h);
    let k = kernel_vector(spec, next.z)?;
    next.xdot = &k * next.xdot.dot(&k);
    Ok(next)
}

/// Integrate `N = ⌈t_end/h⌉` steps, returning whatever was computed
/// before a failure together with the error.
pub fn integrate_partial<O>(
    spec: &SystemSpec,
    stepper: StepperKind,
    state0: &FullState,
    h: f64,
    t_end: f64,
    settings: &SolverSettings,
    mut observer: O,
) -> (Trajectory, Option<Error>)
where
    O: FnMut(usize, &FullState),
{
    let mut traj = Trajectory::with_capacity(0);
    if let Err(e) = check_step(h).and(stepper.validate()).and(settings.validate()) {
        return (traj, Some(e));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return (traj, Some(Error::InvalidArgument(format!("t_end must be nonnegative, got {t_end}"))));
    }
    let residual = state0.constraint_residual(spec);
    if !(residual <= settings.constraint_tol) {
        return (
            traj,
            Some(Error::InvalidArgument(format!(
                "initial state violates the constraint (residual {residual:e} > {:e})",
                settings.constraint_tol
            ))),
        );
    }
    let ratio = t_end / h;
    let steps = (ratio - 1e-9 * ratio.max(1.0)).ceil().max(0.0);
    if (steps * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        warn!("t_end = {t_end} is not a multiple of h = {h}; integrating {steps} steps to t = {}", steps * h);
    }
    let steps = steps as usize;
    traj = Trajectory::with_capacity(steps + 1);

    let t0 = state0.t;
    let mut state = state0.clone();
    observer(0, &state);
    traj.push(state.clone(), invariants(spec, &state));
    for k in 0..steps {
        match stepper.step(spec, &state, h, settings) {
            Ok(res) => {
                state = res.state;
                state.t = t0 + (k + 1) as f64 * h;
            }
            Err(e) => return (traj, Some(e.at_step(k + 1))),
        }
        observer(k + 1, &state);
        traj.push(state.clone(), invariants(spec, &state));
    }
    (traj, None)
}

pub fn integrate<O>(
    spec: &SystemSpec,
    stepper: StepperKind,
    state0: &FullState,
    h: f64,
    t_end: f64,
    settings: &SolverSettings,
    observer: O,
) -> Result<Trajectory>
where
    O: FnMut(usize, &FullState),
{
    match integrate_partial(spec, stepper, state0, h, t_end, settings, observer) {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dynamics::project_reduced;
    use crate::model::{catalog, SystemId};

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    fn knife_edge_start() -> FullState {
        FullState::new(&[0.0, 0.0], PI / 2.0, &[0.0, 0.0], 1.0)
    }

    #[test]
    fn names_parse_back() {
        for m in StepperKind::BENCHMARK {
            assert_eq!(m.name().parse::<StepperKind>().unwrap(), m);
        }
        assert_eq!(
            StepperKind::BENCHMARK.map(|m| m.name()),
            ["dla0.5", "dla0.4", "dla01", "lf", "dd"].map(String::from)
        );
        assert!("rk45".parse::<StepperKind>().is_err());
        assert!("dla1.5".parse::<StepperKind>().is_err());
        assert!("ref0".parse::<StepperKind>().is_err());
    }

    #[test]
    fn fixed_point_at_rest() {
        // Critical point of V with zero velocity.
        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let st = FullState::new(&[0.0, 0.0], 0.0, &[0.0, 0.0], 0.0);
        for m in StepperKind::BENCHMARK {
            let res = m.step(&s, &st, 0.1, &settings()).unwrap();
            assert_eq!(res.state.q(), st.q(), "{m}");
            assert_eq!(res.state.qdot().amax(), 0.0, "{m}");
            assert!(res.lambda.iter().all(|l| *l == 0.0), "{m}");
        }
    }

    #[test]
    fn rejects_bad_step() {
        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let st = FullState::new(&[0.0, 0.0], 0.0, &[0.0, 0.0], 0.0);
        assert!(step_dla(&s, &st, 0.0, 0.5, &settings()).is_err());
        assert!(step_dla(&s, &st, 0.1, 1.2, &settings()).is_err());
        assert!(step_leapfrog(&s, &st, -0.1, &settings()).is_err());
    }

    #[test]
    fn newton_failure_is_reported() {
        let s = catalog("cvt_pendulum", 0.1).unwrap();
        let st = FullState::admissible(&s, &[1.0, 1.0], 0.3, 0.5, 2.0).unwrap();
        let tight = SolverSettings { newton_max_iter: 1, newton_tol: 1e-300, ..settings() };
        assert!(matches!(step_dla(&s, &st, 0.1, 0.5, &tight), Err(Error::NewtonFailed { .. })));
        assert!(matches!(step_discrete_gradient(&s, &st, 0.1, &tight), Err(Error::NewtonFailed { .. })));
    }

    #[test]
    fn free_passenger_keeps_kernel_velocity() {
        let s = catalog("vertical_disk", 0.0).unwrap();
        let st = FullState::admissible(&s, &[0.1, 0.2, 0.3], 0.4, 1.5, 0.9).unwrap();
        for m in [StepperKind::Dla01, StepperKind::Dla { alpha: 0.5 }] {
            let next = m.step(&s, &st, 0.1, &settings()).unwrap().state;
            let v = project_reduced(&s, &next).unwrap().v;
            assert!((v - 1.5).abs() < 1e-14, "{m}: {v}");
        }
        // Leap-frog keeps the component of ẋ along the kernel at the left end.
        let next = step_leapfrog(&s, &st, 0.1, &settings()).unwrap().state;
        let k0 = kernel_vector(&s, st.z).unwrap();
        assert!((next.xdot.dot(&k0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn knife_edge_driver_is_exact() {
        let s = catalog("knife_edge", 0.1).unwrap();
        let h = PI / 10.0;
        let st = knife_edge_start();
        for m in StepperKind::BENCHMARK {
            let next = m.step(&s, &st, h, &settings()).unwrap().state;
            assert!((next.zdot - st.zdot).abs() <= 1e-12, "{m}");
            assert!((next.z - (st.z + h * st.zdot)).abs() <= 1e-12, "{m}");
        }
    }

    #[test]
    fn reference_matches_closed_form_on_knife_edge() {
        // v̇ = cos(π/2 + t), v(0) = 0 ⇒ v(π) = cos(π) − 1... written as sin-form: v(t) = −sin t·… evaluated below.
        let s = catalog("knife_edge", 0.0).unwrap();
        let mut st = knife_edge_start();
        let n = 1000;
        let h = PI / n as f64;
        for _ in 0..n {
            st = step_reference(&s, &st, h, 1).unwrap();
        }
        let v = project_reduced(&s, &st).unwrap().v;
        // v(t) = ∫₀ᵗ cos(π/2 + τ) dτ = sin(π/2 + t) − 1, so v(π) = −2.
        assert!((v + 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn reference_keeps_disk_velocity() {
        let s = catalog("vertical_disk", 0.0).unwrap();
        let mut st = FullState::admissible(&s, &[0.0, 0.0, 0.0], 0.0, 0.8, 1.0).unwrap();
        for _ in 0..1000 {
            st = step_reference(&s, &st, 0.1, 10).unwrap();
        }
        let v = project_reduced(&s, &st).unwrap().v;
        assert!((v - 0.8).abs() < 1e-10, "{v}");
    }

    #[test]
    fn integrate_counts_steps() {
        let s = catalog("knife_edge", 0.0).unwrap();
        let traj =
            integrate(&s, StepperKind::Dla01, &knife_edge_start(), PI / 10.0, 0.0, &settings(), |_, _| {}).unwrap();
        assert_eq!(traj.len(), 1);

        let mut seen = 0;
        let traj =
            integrate(&s, StepperKind::Dla01, &knife_edge_start(), PI / 10.0, 100.0, &settings(), |_, _| seen += 1)
                .unwrap();
        assert_eq!(traj.len(), 320);
        assert_eq!(seen, 320);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn integrate_is_deterministic() {
        let s = catalog("cvt_pendulum", 0.1).unwrap();
        let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], 2.82842712);
        for m in StepperKind::BENCHMARK {
            let a = integrate(&s, m, &st, 0.1, 5.0, &settings(), |_, _| {}).unwrap();
            let b = integrate(&s, m, &st, 0.1, 5.0, &settings(), |_, _| {}).unwrap();
            assert_eq!(a.states(), b.states());
        }
    }

    #[test]
    fn integrate_rejects_inadmissible_start() {
        let s = catalog("cvt_harmonic", 0.0).unwrap();
        let st = FullState::new(&[0.0, 0.0], 0.0, &[1.0, 0.0], 0.0);
        assert!(integrate(&s, StepperKind::LeapFrog, &st, 0.1, 1.0, &settings(), |_, _| {}).is_err());
    }

    #[test]
    fn step_failures_carry_the_index() {
        let s = catalog("cvt_pendulum", 0.0).unwrap();
        let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], 1.0);
        let tight = SolverSettings { newton_max_iter: 1, newton_tol: 1e-300, ..settings() };
        let (traj, err) = integrate_partial(&s, StepperKind::DiscreteGradient, &st, 0.1, 1.0, &tight, |_, _| {});
        assert_eq!(traj.len(), 1);
        assert!(matches!(err, Some(Error::StepFailed { index: 1, .. })));
    }

    #[test]
    fn discrete_constraints_hold() {
        for id in SystemId::ALL {
            let s = SystemSpec::new(id, 0.1).unwrap();
            let x = vec![0.3; s.n_x()];
            let st = FullState::admissible(&s, &x, 0.4, -0.7, 1.1).unwrap();
            for m in StepperKind::BENCHMARK {
                let res = m.step(&s, &st, 0.1, &settings()).unwrap();
                assert!(res.residual <= settings().newton_tol, "{id} {m}: {}", res.residual);
                let c = m.discrete_constraint_residual(&s, &st, &res.state);
                assert!(c <= settings().newton_tol, "{id} {m}: {c}");
            }
        }
    }
}
