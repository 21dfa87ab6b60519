//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the libtest harness so that
//! the lines appear in order and uncaptured.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use vlc_core::analysis::{
    energy_efficiency, fit_cosine, phase_grid, phase_sweep, pulse_energy, rounded_energy_coefficient,
    EfficiencyInputs,
};
use vlc_core::curves::{DipoleCurve, PotentialCurve};
use vlc_core::model::{preset, preset_morse};
use vlc_core::optimize::{
    bo_optimize, cmaes_optimize, optimize_dsp, optimize_single_pulse, BoConfig, CmaesConfig, DspParams,
    DspSetup, GridSearchSpace2D, ObjectiveSpec, ObjectiveVariant, SinglePulseSetup,
};
use vlc_core::propagator::{
    propagate, propagate_from, CapSpec, PropagationConfig, PropagationResult, Propagator, Wavefunction,
};
use vlc_core::pulse::sigma_from_alpha;
use vlc_core::regime::{regime_params, RegimeInputs};
use vlc_core::spectrum::{
    detect_missing_rung, fit_anharmonicity, solve_bound_states, transition_dipoles, BoundSpectrum,
    MissingRungReport, DEFAULT_RUNG_THRESHOLD,
};
use vlc_core::units::{to_atomic, Unit};
use vlc_core::{ChirpedPulse, MolecularModel, PulseTrain, Result, SpatialGrid};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn report(id: usize, title: &str, start: Instant, outcome: Result<Verdict>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok(v) => (v.pass, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id:>2}: {title} [{secs:.1} s] {detail}");
    pass
}

fn harmonic(omega: f64, mass: f64, dipole: DipoleCurve) -> Result<MolecularModel> {
    let grid = SpatialGrid::new(256, 0.0, 6.0)?;
    let k = mass * omega * omega;
    MolecularModel::new("harmonic", mass, PotentialCurve::harmonic(k, 3.0)?, dipole, grid)
}

/// Morse well with six bound levels, used for two-level and convergence checks.
fn small_morse() -> Result<MolecularModel> {
    let grid = SpatialGrid::new(128, 1.0, 12.0)?;
    MolecularModel::new(
        "small-morse",
        1000.0,
        PotentialCurve::morse(0.02, 1.0, 3.0)?,
        DipoleCurve::Linear { slope: 1.0, intercept: 0.0 },
        grid,
    )
}

fn l2_distance(a: &Wavefunction, b: &Wavefunction) -> f64 {
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s * a.grid.dx()).sqrt()
}

fn eigensolver_oracle() -> Result<Verdict> {
    let start = Instant::now();
    let model = preset("LiH")?;
    let fit = preset_morse("LiH")?;
    let s = solve_bound_states(&model, 40)?;
    let morse_err = (0..=20)
        .map(|n| (s.energies[n] - fit.level_energy(n)).abs())
        .fold(0.0, f64::max);

    let (omega, mass) = (0.01, 1000.0);
    let h = harmonic(omega, mass, DipoleCurve::Linear { slope: 1.0, intercept: 0.0 })?;
    let hs = solve_bound_states(&h, 21)?;
    let harm_err = (0..=20)
        .map(|n| (hs.energies[n] - omega * (n as f64 + 0.5)).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        morse_err < 1e-6 && harm_err < 1e-7 && secs < 10.0,
        format!("max Morse error {morse_err:.2e} au, max harmonic error {harm_err:.2e} au, {secs:.1} s"),
    ))
}

fn parity_law() -> Result<Verdict> {
    let (omega, mass, c) = (0.01, 1000.0, 0.7);
    let lin = harmonic(omega, mass, DipoleCurve::Linear { slope: c, intercept: 0.2 })?;
    let s = solve_bound_states(&lin, 21)?;
    let tdm = transition_dipoles(&s, &lin)?;
    let mut worst_double: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for n in 0..18 {
        worst_double = worst_double.max(tdm.get(n, n + 2).abs());
        let exact = c * ((n as f64 + 1.0) / (2.0 * mass * omega)).sqrt();
        worst_rel = worst_rel.max((tdm.get(n, n + 1).abs() - exact).abs() / exact);
    }
    let even = harmonic(omega, mass, DipoleCurve::Polynomial { center: 3.0, coeffs: vec![0.5, 0.0, 1.0] })?;
    let se = solve_bound_states(&even, 21)?;
    let tdm_e = transition_dipoles(&se, &even)?;
    let worst_even = (0..18).map(|n| tdm_e.get(n, n + 1).abs()).fold(0.0, f64::max);
    Ok(verdict(
        worst_double < 1e-8 && worst_rel < 1e-6 && worst_even < 1e-8,
        format!(
            "linear: max |mu(n,n+2)| {worst_double:.2e}, adjacent rel. error {worst_rel:.2e}; even: max |mu(n,n+1)| {worst_even:.2e}"
        ),
    ))
}

fn missing_rung() -> Result<Verdict> {
    let start = Instant::now();
    let model = preset("LiH")?;
    let s = solve_bound_states(&model, 60)?;
    let tdm = transition_dipoles(&s, &model)?;
    let r = detect_missing_rung(&tdm, &s, DEFAULT_RUNG_THRESHOLD)?;
    let j = r.rung_index;
    let double = |k: usize| tdm.get(k, k + 2).abs();
    // The Δν = 2 element bridging the rung is μ_{j−1,j+1}.
    let local_max = j >= 2 && j + 2 < s.n_bound && double(j - 1) >= double(j - 2) && double(j - 1) >= double(j);
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        r.is_missing && local_max && secs < 30.0,
        format!(
            "rung {j}, min/median {:.4} (need < {DEFAULT_RUNG_THRESHOLD}), |mu(j-1,j+1)| locally maximal: {local_max}",
            r.min_tdm / r.median_adjacent_tdm
        ),
    ))
}

fn rabi_setup() -> Result<(MolecularModel, BoundSpectrum, PulseTrain, f64, PropagationConfig)> {
    let model = small_morse()?;
    let s = solve_bound_states(&model, 6)?;
    let tdm = transition_dipoles(&s, &model)?;
    let e0 = 1.5e-4;
    let omega_r = tdm.get(0, 1).abs() * e0;
    let t_peak = PI / omega_r;
    // Nearly constant envelope and no chirp: a resonant continuous wave.
    let cw = ChirpedPulse::new(e0, 1e-16, 0.5 * t_peak, s.transition_energy(0, 1), 0.0, 0.0)?;
    let cfg = PropagationConfig {
        dt: 1.0,
        cap: None,
        flux_point: Some(10.0),
        window: Some((0.0, t_peak)),
        record_stride: Some(50),
        record_contributions: true,
    };
    Ok((model, s, PulseTrain::single(cw), omega_r, cfg))
}

fn propagator_checks() -> Result<Verdict> {
    let start = Instant::now();
    let model = small_morse()?;
    let s = solve_bound_states(&model, 6)?;
    let w01 = s.transition_energy(0, 1);
    let mut notes = Vec::new();

    // Norm over 10⁴ unabsorbed steps with a strong field.
    let drive = PulseTrain::single(ChirpedPulse::new(5e-3, 1e-7, 5000.0, w01, 0.3, 0.3)?);
    let cfg = PropagationConfig { dt: 1.0, cap: None, flux_point: Some(10.0), window: Some((0.0, 1e4)), ..Default::default() };
    let r = propagate(&model, &s, &drive, &cfg)?;
    let norm_err = r.snapshots.iter().map(|p| (p.norm - 1.0).abs()).fold(0.0, f64::max);
    let norm_ok = r.steps == 10_000 && norm_err < 1e-10;
    notes.push(format!("norm drift {norm_err:.2e}"));

    // Halving dt: |ψ_h − ψ_{h/2}| / |ψ_{h/2} − ψ_{h/4}| → 4.
    let run = |dt: f64| -> Result<Wavefunction> {
        let c = PropagationConfig { dt, cap: None, flux_point: Some(10.0), window: Some((0.0, 2000.0)), ..Default::default() };
        Ok(propagate(&model, &s, &drive, &c)?.final_state)
    };
    let (a, b, c) = (run(8.0)?, run(4.0)?, run(2.0)?);
    let ratio = l2_distance(&a, &b) / l2_distance(&b, &c);
    let ratio_ok = (ratio - 4.0).abs() <= 0.5;
    notes.push(format!("dt-halving ratio {ratio:.3}"));

    // Free Gaussian: σ(t) = σ0 √(1 + (t / 2mσ0²)²).
    let (mass, sigma0, t_final) = (1000.0, 0.5, 1e4);
    let grid = SpatialGrid::new(2048, -100.0, 100.0)?;
    let mut free = Propagator::from_arrays(&grid, mass, vec![0.0; 2048], vec![0.0; 2048], None)?;
    let g: Vec<f64> = (0..2048)
        .map(|j| (-grid.x(j).powi(2) / (4.0 * sigma0 * sigma0)).exp() / (2.0 * PI * sigma0 * sigma0).powf(0.25))
        .collect();
    let mut psi = Wavefunction::from_real(&grid, &g, 0.0);
    let empty = PulseTrain::new();
    for _ in 0..100 {
        free.step(&mut psi, &empty, t_final / 100.0)?;
    }
    let dens: Vec<f64> = psi.values.iter().map(|v| v.norm_sqr() * grid.dx()).collect();
    let total: f64 = dens.iter().sum();
    let mean: f64 = dens.iter().enumerate().map(|(j, p)| p * grid.x(j)).sum::<f64>() / total;
    let var: f64 = dens.iter().enumerate().map(|(j, p)| p * (grid.x(j) - mean).powi(2)).sum::<f64>() / total;
    let exact = sigma0 * (1.0 + (t_final / (2.0 * mass * sigma0 * sigma0)).powi(2)).sqrt();
    let width_err = (var.sqrt() - exact).abs() / exact;
    let width_ok = width_err < 1e-6;
    notes.push(format!("free width rel. error {width_err:.2e}"));

    // Resonant two-level Rabi flop: P1(π/Ω) = 1.
    let (model_r, s_r, cw, _, cfg_r) = rabi_setup()?;
    let rr = propagate(&model_r, &s_r, &cw, &cfg_r)?;
    let p1 = rr.final_populations()[1];
    let rabi_ok = (p1 - 1.0).abs() <= 0.02;
    notes.push(format!("Rabi P1 at first peak {p1:.4}"));

    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(norm_ok && ratio_ok && width_ok && rabi_ok && secs < 120.0, notes.join(", ")))
}

fn flux_closure() -> Result<Verdict> {
    let grid = SpatialGrid::new(256, 1.0, 15.0)?;
    let model = MolecularModel::new(
        "toy",
        1606.0,
        PotentialCurve::morse(0.095, 0.6, 3.0)?,
        DipoleCurve::Linear { slope: 1.0, intercept: 0.0 },
        grid.clone(),
    )?;
    let s = solve_bound_states(&model, 30)?;
    // Ground state given an outward kick well above the dissociation threshold.
    let k = (2.0 * model.reduced_mass * 0.15f64).sqrt();
    let mut psi = Wavefunction::from_real(&grid, &s.wavefunctions[0], 0.0);
    for (j, v) in psi.values.iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, k * grid.x(j));
    }
    let cfg = PropagationConfig {
        dt: 1.0,
        cap: Some(CapSpec { xi: 1.0, x_onset: 12.0 }),
        flux_point: Some(11.0),
        window: Some((0.0, 4000.0)),
        ..Default::default()
    };
    let r = propagate_from(&model, &s, &PulseTrain::new(), &cfg, psi)?;
    let gap = (r.flux_dissociation - r.absorbed_dissociation).abs();
    let closure = r.max_closure_error();
    Ok(verdict(
        r.flux_dissociation > 0.1 && gap <= 0.02 && closure <= 1e-3,
        format!(
            "flux {:.4}, absorbed {:.4}, gap {gap:.2e}, max closure {closure:.2e}",
            r.flux_dissociation, r.absorbed_dissociation
        ),
    ))
}

fn anharmonic_fit() -> Result<Verdict> {
    let model = preset("LiH")?;
    let s = solve_bound_states(&model, 40)?;
    let f = fit_anharmonicity(&s, 0..11)?;
    let dw = (f.omega0 - 0.0068).abs() / 0.0068;
    let db = (f.beta - 0.0176).abs() / 0.0176;
    Ok(verdict(
        dw <= 0.15 && db <= 0.15,
        format!("omega0 {:.5} au ({:.1}%), beta {:.5} ({:.1}%)", f.omega0, 100.0 * dw, f.beta, 100.0 * db),
    ))
}

fn regime_corners() -> Result<Verdict> {
    let start = Instant::now();
    let model = preset("LiH")?;
    let inputs = RegimeInputs {
        reduced_mass: model.reduced_mass,
        omega0: 0.0068,
        beta: 0.0176,
        dipole_slope: 0.354,
        omega01: None,
    };
    let mut inside = 0;
    let mut notes = Vec::new();
    for e0 in [2.0, 20.0] {
        for alpha in [1e-8, 1e-7] {
            let sigma = sigma_from_alpha(to_atomic(alpha, Unit::PerFemtosecondSquared));
            let p = regime_params(&inputs, to_atomic(e0, Unit::MegavoltPerCentimeter), sigma)?;
            inside += usize::from(p.in_region());
            notes.push(format!("({e0} MV/cm, {alpha:e} fs^-2): P1 {:.2}, P2 {:.2}", p.p1, p.p2));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(inside == 4 && secs < 1.0, format!("{inside}/4 corners inside; {}", notes.join("; "))))
}

fn optimizers() -> Result<Verdict> {
    let start = Instant::now();
    let space = GridSearchSpace2D::default();
    let cfg = BoConfig::default();
    let step = space.step();
    let mut hits = 0;
    let mut deterministic = true;
    for seed in 0..20u64 {
        // Planted optimum on a grid point away from the candidate-set corners.
        let target = [0.1 + 0.01 * ((seed * 37) % 80) as f64, 0.1 + 0.01 * ((seed * 53 + 11) % 80) as f64];
        let f = |x: &[f64]| -> Result<f64> {
            let d2 = (x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2);
            Ok((-d2 / (2.0 * 0.2 * 0.2)).exp())
        };
        let run = bo_optimize(f, &space, &cfg, seed);
        let best = &run.best_params;
        if (best[0] - target[0]).abs() <= step + 1e-12 && (best[1] - target[1]).abs() <= step + 1e-12 {
            hits += 1;
        }
        if seed < 3 {
            let again = bo_optimize(f, &space, &cfg, seed);
            deterministic &= same_history(&run.history, &again.history);
        }
    }

    let sphere = |x: &[f64]| -> Result<f64> { Ok(-x.iter().map(|v| v * v).sum::<f64>()) };
    let x0 = [0.8, -0.5, 0.3, 0.6, -0.9];
    let ccfg = CmaesConfig { generations: 150, ..Default::default() };
    let a = cmaes_optimize(sphere, &x0, &ccfg, 7, None)?;
    let b = cmaes_optimize(sphere, &x0, &ccfg, 7, None)?;
    deterministic &= same_history(&a.history, &b.history);
    let residual = -a.best_score;

    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        hits >= 19 && residual <= 1e-6 && deterministic && secs < 60.0,
        format!("BO hits {hits}/20, CMA-ES sphere residual {residual:.2e}, deterministic: {deterministic}"),
    ))
}

fn same_history(a: &[vlc_core::optimize::Evaluation], b: &[vlc_core::optimize::Evaluation]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.score.to_bits() == y.score.to_bits()
                && x.params.iter().zip(&y.params).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// LiH on the dynamics grid with the optimized single pulse and DSP.
struct DspFixture {
    model: MolecularModel,
    spectrum: BoundSpectrum,
    report: MissingRungReport,
    prop: PropagationConfig,
    baseline: PropagationResult,
    setup: DspSetup,
    params: DspParams,
    dsp: PropagationResult,
    /// The same DSP at dt = 2.5 with contributions recorded.
    dsp_resolved: PropagationResult,
    seconds: f64,
}

fn build_fixture() -> Result<DspFixture> {
    let start = Instant::now();
    let model = preset("LiH")?.with_grid(SpatialGrid::new(512, 1.0, 15.0)?)?;
    let spectrum = solve_bound_states(&model, 60)?;
    let tdm = transition_dipoles(&spectrum, &model)?;
    let report = detect_missing_rung(&tdm, &spectrum, DEFAULT_RUNG_THRESHOLD)?;
    let prop = PropagationConfig {
        dt: 10.0,
        cap: Some(CapSpec { xi: 1.0, x_onset: 12.0 }),
        ..Default::default()
    };
    let objective = ObjectiveSpec::new(ObjectiveVariant::ExcitedPlusDissociated, &spectrum);

    let main = SinglePulseSetup::new(
        &spectrum,
        to_atomic(9.0, Unit::MegavoltPerCentimeter),
        to_atomic(1e-8, Unit::PerFemtosecondSquared),
    )?;
    let single = optimize_single_pulse(&model, &spectrum, &main, objective, &prop, &BoConfig::default(), 1)?;
    let baseline = propagate(&model, &spectrum, &PulseTrain::single(main.pulse(single.gamma1, single.gamma2)?), &prop)?;
    eprintln!(
        "fixture: single pulse gamma = ({}, {}), d = {:.4e} after {:.0} s",
        single.gamma1,
        single.gamma2,
        baseline.dissociation_probability,
        start.elapsed().as_secs_f64()
    );

    // The rung is passed explicitly: the detector may not flag it as missing.
    let setup = DspSetup::new(
        &spectrum,
        main,
        to_atomic(3.0, Unit::MegavoltPerCentimeter),
        to_atomic(8e-8, Unit::PerFemtosecondSquared),
        &report,
        Some(report.rung_index),
    )?;
    let cma = CmaesConfig { generations: 30, ..Default::default() };
    let dsp_run = optimize_dsp(
        &model,
        &spectrum,
        &setup,
        (single.gamma1, single.gamma2),
        objective,
        &prop,
        &cma,
        1,
        None,
    )?;
    let params = dsp_run.params;
    let seconds = start.elapsed().as_secs_f64();
    let dsp = propagate(&model, &spectrum, &setup.train(&params)?, &prop)?;
    eprintln!("fixture: DSP params {params:?}, d = {:.4e} after {seconds:.0} s", dsp.dissociation_probability);
    // The amplitude identity holds for the continuous dynamics; dt = 10 carries a
    // splitting error of a few percent in the effective field coupling.
    let resolved = PropagationConfig { dt: 2.5, record_contributions: true, ..prop.clone() };
    let dsp_resolved = propagate(&model, &spectrum, &setup.train(&params)?, &resolved)?;
    Ok(DspFixture { model, spectrum, report, prop, baseline, setup, params, dsp, dsp_resolved, seconds })
}

fn dsp_enhancement(fx: &DspFixture) -> Result<Verdict> {
    let r = fx.report.rung_index;
    let last = fx.baseline.final_snapshot();
    let below: f64 = last.populations[..=r].iter().sum();
    let share = below / last.bound;
    let argmax = last.argmax_excited().unwrap_or(0);
    let d0 = fx.baseline.dissociation_probability;
    let d1 = fx.dsp.dissociation_probability;
    let pass = d0 < 0.05 && argmax <= r && share >= 0.8 && d1 >= 2.0 * d0 && fx.seconds <= 4500.0;
    Ok(verdict(
        pass,
        format!(
            "trap level {r}, baseline d {d0:.3e} (argmax level {argmax}, {:.1}% of bound population at or below trap), DSP d {d1:.3e} ({:.1}x), optimization {:.0} s",
            100.0 * share,
            d1 / d0.max(f64::MIN_POSITIVE),
            fx.seconds
        ),
    ))
}

fn contribution_reconstruction(fx: Option<&DspFixture>) -> Result<Verdict> {
    let (model, s, cw, _, cfg) = rabi_setup()?;
    let rabi = propagate(&model, &s, &cw, &cfg)?;
    let e_rabi = rabi.reconstruction_error(1)?;
    let e_dsp = match fx {
        Some(fx) => fx.dsp_resolved.reconstruction_error(fx.report.rung_index)?,
        None => f64::NAN,
    };
    Ok(verdict(
        e_rabi <= 1e-3 && e_dsp <= 5e-3,
        format!("Rabi level 1 error {e_rabi:.2e}, DSP trap level error {e_dsp:.2e}"),
    ))
}

fn efficiency_algebra() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for (e0, alpha, s, rho, d) in [
        (9.0, 1e-8, 1.0, 1.0, 0.2),
        (3.0, 8e-8, 2.5, 0.3, 0.9),
        (20.0, 1e-7, 0.01, 7.0, 1e-3),
    ] {
        let inputs = EfficiencyInputs { e0_mv_cm: e0, alpha_fs2: alpha, cross_section_cm2: s, areal_density: rho, dissociation: d };
        let extra = [(3.0, 8e-8)];
        let p = energy_efficiency(&inputs, &extra)?;
        let total = pulse_energy(e0, alpha, s)? + pulse_energy(3.0, 8e-8, s)?;
        worst = worst.max((p * total - rho * s * d).abs() / (rho * s * d));
    }
    let ratio = 1.0 / rounded_energy_coefficient();
    let target = 1.0 / 0.0020938;
    let dev = (ratio - target).abs() / target;
    Ok(verdict(
        worst < 1e-12 && dev <= 0.005,
        format!("max rel. identity error {worst:.1e}, 1/coefficient {ratio:.2} vs {target:.2} ({:.2}%)", 100.0 * dev),
    ))
}

fn phase_dependence(fx: &DspFixture) -> Result<Verdict> {
    let start = Instant::now();
    let phases = phase_grid(9);
    let sweep = phase_sweep(&fx.model, &fx.spectrum, &fx.setup, &fx.params, &phases, &fx.prop)?;
    let fit = match sweep.fit {
        Some(f) => f,
        None => fit_cosine(&phases, &sweep.dissociation)?,
    };
    // Extremum of a + b cos(φ − φ0): maximum at φ0 when b > 0, otherwise at φ0 + π.
    let phi_max = if fit.b >= 0.0 { fit.phi0 } else { fit.phi0 + PI };
    let wrapped = (phi_max + PI).rem_euclid(2.0 * PI) - PI;
    let near = wrapped.abs() <= PI / 4.0 || (PI - wrapped.abs()) <= PI / 4.0;
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        fit.r_squared >= 0.8 && near && secs <= 2250.0,
        format!(
            "R^2 {:.3}, maximum at {:.2} rad, minimum at {:.2} rad, d = [{}]",
            fit.r_squared,
            wrapped,
            wrapped + PI,
            sweep.dissociation.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn main() {
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += usize::from(ok);
    };

    let t = Instant::now();
    tally(report(1, "eigensolver oracle", t, eigensolver_oracle()));
    let t = Instant::now();
    tally(report(2, "parity law", t, parity_law()));
    let t = Instant::now();
    tally(report(3, "missing rung on LiH", t, missing_rung()));
    let t = Instant::now();
    tally(report(4, "propagator", t, propagator_checks()));
    let t = Instant::now();
    tally(report(5, "flux/absorber closure", t, flux_closure()));
    let t = Instant::now();
    tally(report(6, "anharmonicity fit", t, anharmonic_fit()));
    let t = Instant::now();
    tally(report(7, "regime map corners", t, regime_corners()));
    let t = Instant::now();
    tally(report(8, "optimizers", t, optimizers()));

    // Setting VLC_ACCEPTANCE_SKIP_DSP reports the optimization-backed criteria as failed without running them.
    let t = Instant::now();
    let fixture = match std::env::var_os("VLC_ACCEPTANCE_SKIP_DSP") {
        Some(_) => Err(vlc_core::Error::InvalidParameter("skipped by VLC_ACCEPTANCE_SKIP_DSP".into())),
        None => build_fixture(),
    };
    let fx = match fixture {
        Ok(fx) => {
            tally(report(9, "DSP enhancement", t, dsp_enhancement(&fx)));
            Some(fx)
        }
        Err(e) => {
            tally(report(9, "DSP enhancement", t, Err(e)));
            None
        }
    };
    let t = Instant::now();
    tally(report(10, "contribution reconstruction", t, contribution_reconstruction(fx.as_ref())));
    let t = Instant::now();
    tally(report(11, "energy-efficiency algebra", t, efficiency_algebra()));
    let t = Instant::now();
    let c12 = match &fx {
        Some(fx) => phase_dependence(fx),
        None => Ok(verdict(false, "no DSP fixture")),
    };
    tally(report(12, "phase sweep", t, c12));

    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
