//! Self-checks of the library's structural invariants, run by `nhcouple check`.

use std::f64::consts::PI;
use std::fmt;

use log::debug;

use crate::analysis::{
    check_field_reversibility, check_integrator_reversibility, monodromy, Involution, FIELD_REVERSIBILITY_TOL,
};
use crate::dynamics::{invariants, FullState};
use crate::error::Result;
use crate::harness::{CVT_OSCILLATING_ZDOT, CVT_ROTATING_ZDOT};
use crate::integrators::{leapfrog_step_signed, SolverSettings, StepperKind};
use crate::model::{kernel_vector, reduced_matrix, RhoTag, SystemId, SystemSpec};

/// A periodic driver state for each catalog system.
pub fn reference_driver(id: SystemId) -> (f64, f64) {
    match id {
        SystemId::CvtHarmonic | SystemId::NonholonomicParticle => (0.0, 1.0),
        SystemId::CvtPendulum => (0.0, CVT_OSCILLATING_ZDOT),
        SystemId::KnifeEdge => (PI / 2.0, 1.0),
        SystemId::VerticalDisk => (0.0, 1.0),
        SystemId::MobileRobot => (-PI / 2.0, 1.0),
    }
}

/// An admissible state with nonzero passenger velocity for each system.
pub fn sample_state(spec: &SystemSpec) -> Result<FullState> {
    let (z, zdot) = reference_driver(spec.id());
    let x: Vec<f64> = (0..spec.n_x()).map(|i| 0.5 + 0.25 * i as f64).collect();
    FullState::admissible(spec, &x, z, 0.7, zdot)
}

/// Faults that can be injected to confirm the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Reverse the passenger position update of leap-frog.
    LeapfrogSign,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub settings: SolverSettings,
    pub fault: Fault,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:<22} {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn systems() -> Vec<SystemSpec> {
    let mut out = Vec::new();
    for id in SystemId::ALL {
        for eps in if id.uses_epsilon() { vec![0.0, 0.1] } else { vec![0.0] } {
            out.push(SystemSpec::new(id, eps).expect("catalog system"));
        }
    }
    out
}

fn check_kernel() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for spec in systems() {
        for i in 0..16 {
            let z = -3.0 + 0.4 * i as f64;
            let k = kernel_vector(&spec, z)?;
            worst = worst.max((spec.constraint(z) * &k).amax()).max((k.norm() - 1.0).abs());
            let l = reduced_matrix(&spec, z)?;
            let m = spec.m();
            let skew = l.view((0, 0), (m + 1, m + 1));
            worst = worst.max((skew + skew.transpose()).amax()).max(l.row(m + 1).amax());
        }
    }
    Ok((worst <= 1e-12, format!("max |A k|, |‖k‖−1|, skew defect = {worst:.1e}")))
}

fn check_dd_energy(settings: &SolverSettings) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for spec in systems() {
        let mut st = sample_state(&spec)?;
        let mut h0 = invariants(&spec, &st).total;
        for _ in 0..200 {
            st = StepperKind::DiscreteGradient.step(&spec, &st, 0.1, settings)?.state;
            let h1 = invariants(&spec, &st).total;
            worst = worst.max((h1 - h0).abs() / (1.0 + h0.abs()));
            h0 = h1;
        }
    }
    let tol = 10.0 * settings.newton_tol;
    Ok((worst <= tol, format!("max per-step |ΔH|/(1+|H|) = {worst:.1e} (tol {tol:.0e})")))
}

fn check_reversibility(options: &CheckOptions) -> Result<(bool, String)> {
    let spec = SystemSpec::new(SystemId::CvtHarmonic, 0.0)?;
    let st = sample_state(&spec)?;
    let h = 0.1;
    let settings = &options.settings;
    let tol = 100.0 * settings.newton_tol;
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [StepperKind::Dla { alpha: 0.5 }, StepperKind::Dla01] {
        let r = check_integrator_reversibility(&spec, m, &st, h, settings)?;
        ok &= r <= tol;
        parts.push(format!("{m} {r:.1e}"));
    }
    let lf = if options.fault == Fault::LeapfrogSign {
        let sigma = |s: &FullState| StepperKind::LeapFrog.time_reversal(s, h);
        let fwd = leapfrog_step_signed(&spec, &st, h, -1.0)?.state;
        let back = leapfrog_step_signed(&spec, &sigma(&fwd), h, -1.0)?.state;
        sigma(&back).distance(&st)
    } else {
        check_integrator_reversibility(&spec, StepperKind::LeapFrog, &st, h, settings)?
    };
    ok &= lf <= tol;
    parts.push(format!("lf {lf:.1e}"));
    let r = check_integrator_reversibility(&spec, StepperKind::Dla { alpha: 0.4 }, &st, h, settings)?;
    ok &= r >= 1e-4;
    parts.push(format!("dla0.4 {r:.1e} (must be ≥ 1e-4)"));
    Ok((ok, format!("{} (tol {tol:.0e})", parts.join(", "))))
}

fn check_knife_driver(settings: &SolverSettings) -> Result<(bool, String)> {
    let spec = SystemSpec::new(SystemId::KnifeEdge, 0.1)?;
    let mut worst: f64 = 0.0;
    for m in StepperKind::BENCHMARK {
        let mut st = FullState::new(&[0.0, 0.0], PI / 2.0, &[0.0, 0.0], 1.0);
        for _ in 0..100 {
            let h0 = invariants(&spec, &st).driver;
            st = m.step(&spec, &st, PI / 10.0, settings)?.state;
            worst = worst.max((invariants(&spec, &st).driver - h0).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max per-step |Δh| = {worst:.1e}")))
}

fn check_monodromy() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for spec in systems() {
        let (z0, zd0) = reference_driver(spec.id());
        let r = monodromy(&spec, z0, zd0)?;
        worst = worst.max(r.log_residual());
        debug!("{} ε={}: angle {:.6}, ‖Ā‖ = {:.3e}", spec.name(), spec.epsilon(), r.angle, r.average.norm());
    }
    Ok((worst <= 1e-8, format!("max ‖exp(Ā) − Φ(T)‖ = {worst:.1e}")))
}

fn check_field() -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst_pass: f64 = 0.0;
    for id in SystemId::ALL {
        let spec = SystemSpec::new(id, 0.0)?;
        let (z0, zd0) = reference_driver(id);
        let r = check_field_reversibility(&spec, &Involution::Rho(spec.rho_tag()), z0, zd0, 64)?;
        ok &= r.passed;
        worst_pass = worst_pass.max(r.residual);
    }
    let perturbed = SystemSpec::new(SystemId::CvtPendulum, 0.1)?;
    let r = check_field_reversibility(&perturbed, &Involution::Rho(RhoTag::FlipV), 0.0, CVT_ROTATING_ZDOT, 64)?;
    ok &= !r.passed && r.residual > 1e-3;
    Ok((
        ok,
        format!(
            "ε=0 worst {worst_pass:.1e} (tol {FIELD_REVERSIBILITY_TOL:.0e}); perturbed rotating CVT {:.1e} (must fail)",
            r.residual
        ),
    ))
}

/// Run every check; order is fixed.
pub fn run_checks(options: &CheckOptions) -> Vec<CheckResult> {
    vec![
        outcome("kernel", check_kernel()),
        outcome("dd-energy", check_dd_energy(&options.settings)),
        outcome("reversibility", check_reversibility(options)),
        outcome("knife-driver-exact", check_knife_driver(&options.settings)),
        outcome("monodromy-log", check_monodromy()),
        outcome("field-reversibility", check_field()),
    ]
}
