use std::f64::consts::PI;

use vlc_core::analysis::{cell_seed, phase_sweep, scan, ScanConfig, ScanMode};
use vlc_core::curves::{DipoleCurve, PotentialCurve};
use vlc_core::optimize::{
    optimize_single_pulse, BoConfig, CmaesConfig, DspParams, DspSetup, ObjectiveSpec, ObjectiveVariant,
    SinglePulseSetup,
};
use vlc_core::propagator::{propagate, CapSpec, PropagationConfig};
use vlc_core::spectrum::{detect_missing_rung, solve_bound_states, transition_dipoles, BoundSpectrum};
use vlc_core::units::{to_atomic, Unit};
use vlc_core::{Error, MolecularModel, PulseTrain, SpatialGrid};

fn toy() -> (MolecularModel, BoundSpectrum) {
    let grid = SpatialGrid::new(128, 1.0, 15.0).unwrap();
    let model = MolecularModel::new(
        "toy",
        1606.0,
        PotentialCurve::morse(0.095, 0.6, 3.0).unwrap(),
        DipoleCurve::Linear { slope: 1.0, intercept: 0.0 },
        grid,
    )
    .unwrap();
    let s = solve_bound_states(&model, 30).unwrap();
    (model, s)
}

fn prop() -> PropagationConfig {
    PropagationConfig { dt: 10.0, cap: Some(CapSpec { xi: 1.0, x_onset: 12.0 }), ..Default::default() }
}

fn small_bo() -> BoConfig {
    BoConfig { iterations: 3, n_initial: 3, ..Default::default() }
}

fn config(e0: Vec<f64>, alpha: Vec<f64>, mode: ScanMode) -> ScanConfig {
    ScanConfig {
        e0_values_mv_cm: e0,
        alpha_values_fs2: alpha,
        mode,
        objective: ObjectiveVariant::ExcitedPlusDissociated,
        propagation: prop(),
        bo: small_bo(),
        cmaes: CmaesConfig { generations: 2, lambda: 4, ..Default::default() },
        seed: 11,
    }
}

#[test]
fn single_cell_scan_matches_direct_run() {
    let (model, s) = toy();
    let cfg = config(vec![40.0], vec![1e-4], ScanMode::Single);
    let result = scan(&model, &s, &cfg, None, None).unwrap();
    let cell = result.cell(0, 0);
    assert!(cell.error.is_none(), "{:?}", cell.error);

    let setup = SinglePulseSetup::new(
        &s,
        to_atomic(40.0, Unit::MegavoltPerCentimeter),
        to_atomic(1e-4, Unit::PerFemtosecondSquared),
    )
    .unwrap();
    let objective = ObjectiveSpec::new(ObjectiveVariant::ExcitedPlusDissociated, &s);
    let direct = optimize_single_pulse(&model, &s, &setup, objective, &prop(), &small_bo(), cell_seed(11, 0)).unwrap();
    assert_eq!(cell.params, vec![direct.gamma1, direct.gamma2]);
    assert_eq!(cell.score, direct.score);
    let train = PulseTrain::single(setup.pulse(direct.gamma1, direct.gamma2).unwrap());
    let r = propagate(&model, &s, &train, &prop()).unwrap();
    assert_eq!(cell.dissociation, r.dissociation_probability);
}

#[test]
fn scan_is_deterministic_across_parallelism() {
    let (model, s) = toy();
    let cfg = config(vec![20.0, 40.0], vec![1e-4, 2e-4], ScanMode::Single);
    let a = scan(&model, &s, &cfg, None, Some(1)).unwrap();
    let b = scan(&model, &s, &cfg, None, Some(2)).unwrap();
    assert_eq!(a.dissociation_csv(), b.dissociation_csv());
    assert_eq!(a.argmax_csv(), b.argmax_csv());
    assert_eq!(a.efficiency_csv(), b.efficiency_csv());
    assert_eq!(a.failures().count(), 0);
}

#[test]
fn scan_resumes_from_partial_checkpoint() {
    let (model, s) = toy();
    let cfg = config(vec![20.0, 40.0], vec![1e-4, 2e-4], ScanMode::Single);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.jsonl");
    let full = scan(&model, &s, &cfg, Some(&path), None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);

    let first = text.lines().next().unwrap();
    std::fs::write(&path, format!("{first}\n")).unwrap();
    let resumed = scan(&model, &s, &cfg, Some(&path), None).unwrap();
    assert_eq!(full.dissociation_csv(), resumed.dissociation_csv());
    assert_eq!(full.efficiency_csv(), resumed.efficiency_csv());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);

    let other = config(vec![30.0, 40.0], vec![1e-4, 2e-4], ScanMode::Single);
    std::fs::write(&path, format!("{first}\n")).unwrap();
    assert!(matches!(scan(&model, &s, &other, Some(&path), None), Err(Error::Checkpoint(_))));
}

#[test]
fn dsp_scan_needs_a_rung() {
    let (model, s) = toy();
    let tdm = transition_dipoles(&s, &model).unwrap();
    assert!(!detect_missing_rung(&tdm, &s, 0.05).unwrap().is_missing);
    let mode = ScanMode::Dsp { e0_mv_cm: 10.0, alpha_fs2: 2e-4, rung_override: None };
    let cfg = config(vec![40.0], vec![1e-4], mode);
    assert!(matches!(scan(&model, &s, &cfg, None, None), Err(Error::NoMissingRung)));

    let mode = ScanMode::Dsp { e0_mv_cm: 10.0, alpha_fs2: 2e-4, rung_override: Some(3) };
    let cfg = config(vec![40.0], vec![1e-4], mode);
    let r = scan(&model, &s, &cfg, None, None).unwrap();
    let cell = r.cell(0, 0);
    assert!(cell.error.is_none(), "{:?}", cell.error);
    assert_eq!(cell.params.len(), 5);
}

fn dsp_setup(s: &BoundSpectrum, model: &MolecularModel) -> DspSetup {
    let main = SinglePulseSetup::new(
        s,
        to_atomic(40.0, Unit::MegavoltPerCentimeter),
        to_atomic(1e-4, Unit::PerFemtosecondSquared),
    )
    .unwrap();
    let tdm = transition_dipoles(s, model).unwrap();
    let report = detect_missing_rung(&tdm, s, 0.05).unwrap();
    DspSetup::new(
        s,
        main,
        to_atomic(20.0, Unit::MegavoltPerCentimeter),
        to_atomic(2e-4, Unit::PerFemtosecondSquared),
        &report,
        Some(3),
    )
    .unwrap()
}

#[test]
fn phase_sweep_single_point_matches_propagation() {
    let (model, s) = toy();
    let setup = dsp_setup(&s, &model);
    let params = DspParams { gamma1_main: 0.3, gamma2_main: 0.4, gamma1_dsp: 0.1, gamma2_dsp: 0.1, delta_t0: 200.0 };
    let sweep = phase_sweep(&model, &s, &setup, &params, &[0.0], &prop()).unwrap();
    assert!(sweep.fit.is_none());
    let r = propagate(&model, &s, &setup.train(&params).unwrap(), &prop()).unwrap();
    assert_eq!(sweep.dissociation, vec![r.dissociation_probability]);
}

#[test]
fn phase_sweep_is_periodic() {
    let (model, s) = toy();
    let setup = dsp_setup(&s, &model);
    let params = DspParams { gamma1_main: 0.3, gamma2_main: 0.4, gamma1_dsp: 0.1, gamma2_dsp: 0.1, delta_t0: 200.0 };
    let sweep = phase_sweep(&model, &s, &setup, &params, &[0.0, PI, 2.0 * PI], &prop()).unwrap();
    let d = &sweep.dissociation;
    assert!((d[0] - d[2]).abs() <= 1e-9 * d[0].abs().max(1e-12), "{d:?}");
    assert!(sweep.fit.is_some());
    assert!(sweep.to_csv().starts_with("phase[rad],dissociation\n"));
}
