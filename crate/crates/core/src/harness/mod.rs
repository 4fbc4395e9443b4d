//! The benchmark experiments: scenario definitions, batch runs, output files
//! and the bounded/drift summary table.

mod output;
mod table;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

pub use output::{emit_csv, emit_svg_plot, render_svg, Series};
pub use table::{summary_table, Cell, SummaryTable, REFERENCE_TABLE};

use crate::analysis::{
    drift_report, drift_report_from_errors, latitude, monodromy, poincare_sections, DriftClass, DriftReport,
    DriftThresholds, DriverRegime, Trajectory,
};
use crate::dynamics::{project_reduced, FullState};
use crate::error::{Error, Result};
use crate::integrators::{integrate_partial, SolverSettings, StepperKind};
use crate::model::{SystemId, SystemSpec};

/// Oscillating and rotating driver velocities of the CVT experiments.
pub const CVT_OSCILLATING_ZDOT: f64 = 1.8973666;
pub const CVT_ROTATING_ZDOT: f64 = 2.82842712;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemId,
    pub epsilon: f64,
    pub method: StepperKind,
    pub h: f64,
    pub t_end: f64,
    pub initial: FullState,
    /// Driver regime of the initial data, used to group the CVT runs.
    pub regime: Option<DriverRegime>,
    /// Invariant errors are written every `log_every` steps.
    pub log_every: usize,
    /// Whether the latitude integral is tracked.
    pub track_latitude: bool,
}

impl Scenario {
    pub fn spec(&self) -> Result<SystemSpec> {
        SystemSpec::new(self.system, self.epsilon)
    }

    pub fn validate(&self, settings: &SolverSettings) -> Result<()> {
        let spec = self.spec()?;
        self.method.validate()?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1".into()));
        }
        if self.initial.x.len() != spec.n_x() || self.initial.xdot.len() != spec.n_x() {
            return Err(Error::InvalidArgument(format!("{} has a {}-dimensional passenger", self.system, spec.n_x())));
        }
        let res = self.initial.constraint_residual(&spec);
        if !(res <= settings.constraint_tol) {
            return Err(Error::InvalidArgument(format!("initial state violates the constraint (residual {res:e})")));
        }
        Ok(())
    }

    /// `<system>_<eps>_<method>`.
    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}", self.system, self.epsilon, self.method)
    }

    /// Directory below the output root: one per driver regime.
    pub fn subdir(&self) -> PathBuf {
        match self.regime {
            Some(DriverRegime::Oscillating) => PathBuf::from("oscillating"),
            Some(DriverRegime::Rotating) => PathBuf::from("rotating"),
            None => PathBuf::new(),
        }
    }

    pub fn label(&self) -> String {
        match self.regime {
            Some(r) => format!("{} ε={} {} {}", self.system, self.epsilon, regime_name(r), self.method),
            None => format!("{} ε={} {}", self.system, self.epsilon, self.method),
        }
    }
}

pub fn regime_name(r: DriverRegime) -> &'static str {
    match r {
        DriverRegime::Oscillating => "oscillating",
        DriverRegime::Rotating => "rotating",
    }
}

/// Knife-edge scenario of the benchmark for one method.
pub fn knife_edge_scenario(epsilon: f64, method: StepperKind) -> Scenario {
    Scenario {
        system: SystemId::KnifeEdge,
        epsilon,
        method,
        h: PI / 10.0,
        t_end: 100.0,
        initial: FullState::new(&[0.0, 0.0], PI / 2.0, &[0.0, 0.0], 1.0),
        regime: None,
        log_every: 1,
        track_latitude: false,
    }
}

/// Pendulum-driven CVT scenario of the benchmark for one method.
pub fn cvt_scenario(epsilon: f64, regime: DriverRegime, method: StepperKind) -> Scenario {
    let zdot = match regime {
        DriverRegime::Oscillating => CVT_OSCILLATING_ZDOT,
        DriverRegime::Rotating => CVT_ROTATING_ZDOT,
    };
    Scenario {
        system: SystemId::CvtPendulum,
        epsilon,
        method,
        h: 0.1,
        t_end: 3000.0,
        initial: FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], zdot),
        regime: Some(regime),
        log_every: 10,
        track_latitude: true,
    }
}

/// The 30 runs of the benchmark: 2 knife-edge and 4 CVT set-ups, each with
/// the five methods.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut out = Vec::with_capacity(30);
    for eps in [0.0, 0.1] {
        for m in StepperKind::BENCHMARK {
            out.push(knife_edge_scenario(eps, m));
        }
    }
    for eps in [0.0, 0.1] {
        for regime in [DriverRegime::Oscillating, DriverRegime::Rotating] {
            for m in StepperKind::BENCHMARK {
                out.push(cvt_scenario(eps, regime, m));
            }
        }
    }
    out
}

/// Tolerances and thresholds shared by every run of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub settings: SolverSettings,
    pub thresholds: DriftThresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatitudeSeries {
    pub axis: nalgebra::DVector<f64>,
    pub initial: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LatitudeSeries {
    pub fn errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.initial).abs()).collect()
    }
}

/// Why the latitude column of a run has no classification.
#[derive(Debug, Clone, PartialEq)]
pub enum LatitudeStatus {
    NotTracked,
    /// `Ā` has no rotation axis.
    NoAxis,
    /// Too few section crossings or a failed monodromy.
    Unavailable(String),
    Tracked(LatitudeSeries),
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    /// Reports for `H`, `h` and `E`, in that order; empty if the run failed
    /// before ten steps.
    pub invariant_reports: Vec<DriftReport>,
    pub latitude: LatitudeStatus,
    pub latitude_report: Option<DriftReport>,
    pub failure: Option<Error>,
}

impl ScenarioOutcome {
    pub fn report(&self, name: &str) -> Option<&DriftReport> {
        self.invariant_reports.iter().chain(self.latitude_report.as_ref()).find(|r| r.name == name)
    }

    pub fn classification(&self, name: &str) -> Option<DriftClass> {
        self.report(name).map(|r| r.classification)
    }
}

/// Integrate one scenario and classify its invariants.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<ScenarioOutcome> {
    scenario.validate(&options.settings)?;
    options.thresholds.validate()?;
    let spec = scenario.spec()?;
    let (trajectory, failure) = integrate_partial(
        &spec,
        scenario.method,
        &scenario.initial,
        scenario.h,
        scenario.t_end,
        &options.settings,
        |_, _| {},
    );
    if let Some(e) = &failure {
        warn!("{}: {e}", scenario.label());
    }

    let times = trajectory.times();
    let mut invariant_reports = Vec::new();
    if trajectory.len() >= 10 {
        let inv = trajectory.invariants();
        let series: [(&str, Vec<f64>); 3] = [
            ("H", inv.iter().map(|i| i.total).collect()),
            ("h", inv.iter().map(|i| i.driver).collect()),
            ("E", inv.iter().map(|i| i.passenger).collect()),
        ];
        for (name, values) in series {
            invariant_reports.push(drift_report(name, times, &values, options.thresholds)?);
        }
    }

    let latitude =
        if scenario.track_latitude { track_latitude(&spec, scenario, &trajectory) } else { LatitudeStatus::NotTracked };
    let latitude_report = match &latitude {
        LatitudeStatus::Tracked(series) if series.times.len() >= 10 => Some(drift_report_from_errors(
            "latitude",
            &series.times,
            &series.errors(),
            series.initial,
            options.thresholds,
        )?),
        _ => None,
    };
    info!(
        "{}: {}",
        scenario.label(),
        invariant_reports
            .iter()
            .chain(latitude_report.as_ref())
            .map(|r| format!("{}={}", r.name, r.classification))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(ScenarioOutcome {
        scenario: scenario.clone(),
        trajectory,
        invariant_reports,
        latitude,
        latitude_report,
        failure,
    })
}

fn track_latitude(spec: &SystemSpec, scenario: &Scenario, traj: &Trajectory) -> LatitudeStatus {
    let init = &scenario.initial;
    let mono = match monodromy(spec, init.z, init.zdot) {
        Ok(m) => m,
        Err(e) => return LatitudeStatus::Unavailable(e.to_string()),
    };
    let Some(axis) = mono.axis else {
        return LatitudeStatus::NoAxis;
    };
    let initial = match project_reduced(spec, init) {
        Ok(r) => latitude(&r, &axis),
        Err(e) => return LatitudeStatus::Unavailable(e.to_string()),
    };
    let samples = match poincare_sections(traj, spec) {
        Ok(s) => s,
        Err(e) => return LatitudeStatus::Unavailable(e.to_string()),
    };
    let times = samples.iter().map(|s| s.t).collect();
    let values = samples.iter().map(|s| latitude(&s.state, &axis)).collect();
    LatitudeStatus::Tracked(LatitudeSeries { axis, initial, times, values })
}

/// Run scenarios on a pool of `jobs` threads (0 = one per processor); the
/// result order matches the input order.
pub fn run_all(scenarios: &[Scenario], options: &RunOptions, jobs: usize) -> Result<Vec<Result<ScenarioOutcome>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| scenarios.par_iter().map(|s| run_scenario(s, options)).collect()))
}

/// Write the CSV and SVG files of one outcome below `root`; returns the
/// paths written.
pub fn write_outputs(outcome: &ScenarioOutcome, root: &Path) -> Result<Vec<PathBuf>> {
    let sc = &outcome.scenario;
    let dir = root.join(sc.subdir());
    let stem = sc.file_stem();
    let mut written = Vec::new();

    let traj = &outcome.trajectory;
    let inv = traj.invariants();
    let mut rows = Vec::new();
    if let Some(first) = inv.first() {
        let last = inv.len() - 1;
        for (k, (t, i)) in traj.times().iter().zip(inv).enumerate() {
            if k % sc.log_every == 0 || k == last {
                rows.push(vec![
                    *t,
                    (i.total - first.total).abs(),
                    (i.driver - first.driver).abs(),
                    (i.passenger - first.passenger).abs(),
                ]);
            }
        }
    }
    let csv_path = dir.join(format!("{stem}.invariants.csv"));
    emit_csv(&csv_path, &["t", "H_err", "h_err", "E_err"], &rows)?;
    written.push(csv_path);

    let names = ["H", "h", "E"];
    let series: Vec<Series> = names
        .iter()
        .enumerate()
        .map(|(c, name)| Series {
            label: format!("|{name}(t) − {name}(0)|"),
            points: rows.iter().map(|r| (r[0], r[c + 1])).collect(),
        })
        .collect();
    let svg_path = dir.join(format!("{stem}.invariants.svg"));
    emit_svg_plot(&svg_path, &sc.label(), "invariant error", &series, true)?;
    written.push(svg_path);

    if let LatitudeStatus::Tracked(lat) = &outcome.latitude {
        let errors = lat.errors();
        let rows: Vec<Vec<f64>> = lat.times.iter().zip(&errors).map(|(t, e)| vec![*t, *e]).collect();
        let csv_path = dir.join(format!("{stem}.latitude.csv"));
        emit_csv(&csv_path, &["t", "latitude"], &rows)?;
        written.push(csv_path);
        let svg_path = dir.join(format!("{stem}.latitude.svg"));
        let points = rows.iter().map(|r| (r[0], r[1])).collect();
        emit_svg_plot(
            &svg_path,
            &sc.label(),
            "latitude error",
            &[Series { label: "latitude error".into(), points }],
            true,
        )?;
        written.push(svg_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_builtin_runs() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 30);
        assert_eq!(all.iter().filter(|s| s.system == SystemId::KnifeEdge).count(), 10);
        assert!(all.iter().all(|s| s.validate(&SolverSettings::default()).is_ok()));
        let k = &all[0];
        assert_eq!(k.h, PI / 10.0);
        let rot = all.iter().find(|s| s.regime == Some(DriverRegime::Rotating)).unwrap();
        assert_eq!(rot.initial.zdot, 2.82842712);
    }

    #[test]
    fn stems_and_dirs() {
        let s = cvt_scenario(0.1, DriverRegime::Rotating, StepperKind::Dla { alpha: 0.4 });
        assert_eq!(s.file_stem(), "cvt_pendulum_0.1_dla0.4");
        assert_eq!(s.subdir(), PathBuf::from("rotating"));
        assert_eq!(knife_edge_scenario(0.0, StepperKind::LeapFrog).file_stem(), "knife_edge_0_lf");
    }

    #[test]
    fn knife_edge_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let sc = knife_edge_scenario(0.0, StepperKind::DiscreteGradient);
        let out = run_scenario(&sc, &RunOptions::default()).unwrap();
        assert!(out.failure.is_none());
        assert!(out.report("H").unwrap().max_error() <= 1e-9);
        let files = write_outputs(&out, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 321);
        assert!(text.starts_with("t,H_err,h_err,E_err\n"));
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut sc = knife_edge_scenario(0.0, StepperKind::LeapFrog);
        sc.initial.xdot[0] = 1.0;
        assert!(run_scenario(&sc, &RunOptions::default()).is_err());
        let mut sc = knife_edge_scenario(0.0, StepperKind::LeapFrog);
        sc.h = 0.0;
        assert!(run_scenario(&sc, &RunOptions::default()).is_err());
    }
}
