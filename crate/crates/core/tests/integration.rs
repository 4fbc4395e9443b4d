mod common;

use std::fs;

use common::{catalog_specs, random_states};
use nhcouple::analysis::DriverRegime;
use nhcouple::harness::{cvt_scenario, knife_edge_scenario, run_scenario, write_outputs, LatitudeStatus, RunOptions};
use nhcouple::{
    integrate, invariants, latitude, monodromy, poincare_sections, project_reduced, DriftClass, FullState,
    SolverSettings, StepperKind, SystemId, SystemSpec,
};
use proptest::prelude::*;

#[test]
fn outputs_are_byte_identical_across_runs() {
    let mut sc = cvt_scenario(0.1, DriverRegime::Rotating, StepperKind::LeapFrog);
    sc.t_end = 100.0;
    let options = RunOptions::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = write_outputs(&run_scenario(&sc, &options).unwrap(), a.path()).unwrap();
    let pb = write_outputs(&run_scenario(&sc, &options).unwrap(), b.path()).unwrap();
    assert_eq!(pa.len(), 4);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.strip_prefix(a.path()).unwrap(), y.strip_prefix(b.path()).unwrap());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    assert!(pa[0].starts_with(a.path().join("rotating")));
}

#[test]
fn latitude_csv_matches_section_count() {
    let mut sc = cvt_scenario(0.0, DriverRegime::Oscillating, StepperKind::Dla01);
    sc.t_end = 200.0;
    let out = run_scenario(&sc, &RunOptions::default()).unwrap();
    let LatitudeStatus::Tracked(series) = &out.latitude else { panic!("latitude not tracked: {:?}", out.latitude) };
    let period = monodromy(&sc.spec().unwrap(), 0.0, sc.initial.zdot).unwrap().period();
    assert_eq!(series.times.len(), (200.0 / period) as usize);
    let dir = tempfile::tempdir().unwrap();
    let paths = write_outputs(&out, dir.path()).unwrap();
    let csv = paths.iter().find(|p| p.to_string_lossy().ends_with("latitude.csv")).unwrap();
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), series.times.len() + 1);
}

#[test]
fn leapfrog_keeps_latitude_bounded_on_perturbed_rotating_cvt() {
    let mut sc = cvt_scenario(0.1, DriverRegime::Rotating, StepperKind::LeapFrog);
    sc.t_end = 1000.0;
    let out = run_scenario(&sc, &RunOptions::default()).unwrap();
    assert_eq!(out.classification("latitude"), Some(DriftClass::Bounded));
    assert!(out.report("latitude").unwrap().max_error() < 0.1);
}

#[test]
fn knife_edge_drift_is_linear_for_non_dd_methods() {
    let out = run_scenario(&knife_edge_scenario(0.1, StepperKind::Dla01), &RunOptions::default()).unwrap();
    let r = out.report("E").unwrap();
    assert_eq!(r.classification, DriftClass::Drift);
    // Positive growth dominates the early level.
    assert!(r.slope * r.t_end > 2.0 * r.early_max);
}

#[test]
fn reference_flow_keeps_latitude_on_aligned_grid() {
    let spec = SystemSpec::new(SystemId::CvtHarmonic, 0.0).unwrap();
    let mono = monodromy(&spec, 0.0, 1.0).unwrap();
    let axis = mono.axis.clone().unwrap();
    let st = FullState::admissible(&spec, &[0.3, -0.7], 0.0, 0.4, 1.0).unwrap();
    let h = mono.period() / 50.0;
    let traj = integrate(
        &spec,
        StepperKind::Reference { substeps: 8 },
        &st,
        h,
        505.0 * h,
        &SolverSettings::default(),
        |_, _| {},
    )
    .unwrap();
    let l0 = latitude(&project_reduced(&spec, &st).unwrap(), &axis);
    let sections = poincare_sections(&traj, &spec).unwrap();
    assert_eq!(sections.len(), 10);
    for s in sections {
        assert!((latitude(&s.state, &axis) - l0).abs() < 1e-9);
    }
}

#[test]
fn section_interpolation_is_fourth_order() {
    let spec = SystemSpec::new(SystemId::CvtPendulum, 0.0).unwrap();
    let zd = 1.8973666;
    let mono = monodromy(&spec, 0.0, zd).unwrap();
    let axis = mono.axis.clone().unwrap();
    let st = FullState::new(&[1.0, 1.0], 0.0, &[0.0, 0.0], zd);
    let l0 = latitude(&project_reduced(&spec, &st).unwrap(), &axis);
    let deviation = |h: f64| {
        let traj = integrate(
            &spec,
            StepperKind::Reference { substeps: 20 },
            &st,
            h,
            100.0,
            &SolverSettings::default(),
            |_, _| {},
        )
        .unwrap();
        poincare_sections(&traj, &spec)
            .unwrap()
            .iter()
            .map(|s| (latitude(&s.state, &axis) - l0).abs())
            .fold(0.0, f64::max)
    };
    let ratio = deviation(0.1) / deviation(0.05);
    assert!(ratio > 10.0, "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dd_conserves_energy_from_any_state(seed in 0u64..10_000, which in 0usize..8, h in 0.01f64..0.3) {
        let spec = &catalog_specs()[which];
        let st = &random_states(spec, 1, seed)[0];
        let settings = SolverSettings::default();
        let h0 = invariants(spec, st).total;
        let next = StepperKind::DiscreteGradient.step(spec, st, h, &settings).unwrap().state;
        prop_assert!((invariants(spec, &next).total - h0).abs() <= 1e-11 * (1.0 + h0.abs()));
    }

    #[test]
    fn every_method_satisfies_its_discrete_constraint(seed in 0u64..10_000, which in 0usize..8, m in 0usize..5) {
        let spec = &catalog_specs()[which];
        let st = &random_states(spec, 1, seed)[0];
        let method = StepperKind::BENCHMARK[m];
        let next = method.step(spec, st, 0.1, &SolverSettings::default()).unwrap().state;
        prop_assert!(method.discrete_constraint_residual(spec, st, &next) <= 1e-12);
    }
}
