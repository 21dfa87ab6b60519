//! Subcommand implementations. Each writes CSV/JSON files into the output
//! directory and returns a short terminal summary.

use serde_json::json;
use vlc_core::analysis::{
    energy_efficiency, phase_grid, phase_sweep, pulse_energy, scan, EfficiencyInputs, ScanConfig, ScanMode,
};
use vlc_core::optimize::{
    optimize_dsp, optimize_single_pulse, DspParams, DspSetup, ObjectiveSpec, SinglePulseSetup,
};
use vlc_core::propagator::{propagate, PropagationConfig};
use vlc_core::pulse::PulseTrain;
use vlc_core::regime::{regime_map, RegimeInputs};
use vlc_core::spectrum::{
    detect_missing_rung, solve_bound_states, transition_dipoles, BoundSpectrum, MissingRungReport,
};

use crate::config::{DspAu, PulseAu, ScanKind};
use crate::{CliError, Command, Context, Report};

pub fn dispatch(command: &Command, ctx: &Context) -> Result<Report, CliError> {
    match command {
        Command::Eigen => eigen(ctx),
        Command::Propagate => propagate_cmd(ctx),
        Command::OptimizeSingle => optimize_single(ctx),
        Command::OptimizeDsp => optimize_dsp_cmd(ctx),
        Command::Scan => scan_cmd(ctx),
        Command::RegimeMap => regime_cmd(ctx),
        Command::PhaseSweep => phase_cmd(ctx),
        Command::Efficiency { dissociation } => efficiency_cmd(ctx, *dissociation),
        Command::Contributions { level } => contributions_cmd(ctx, *level),
    }
}

fn json_string(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize") + "\n"
}

fn spectrum(ctx: &Context) -> Result<BoundSpectrum, CliError> {
    Ok(solve_bound_states(&ctx.config.model, ctx.config.n_states)?)
}

fn rung_report(ctx: &Context, spectrum: &BoundSpectrum) -> Result<MissingRungReport, CliError> {
    let tdm = transition_dipoles(spectrum, &ctx.config.model)?;
    Ok(detect_missing_rung(&tdm, spectrum, ctx.config.rung_threshold)?)
}

fn require_pulse(ctx: &Context) -> Result<PulseAu, CliError> {
    ctx.config.pulse.ok_or_else(|| CliError::Config("a [pulse] section is required".into()))
}

fn require_dsp(ctx: &Context) -> Result<DspAu, CliError> {
    ctx.config.dsp.ok_or_else(|| CliError::Config("a [dsp] section is required".into()))
}

fn main_setup(ctx: &Context, spectrum: &BoundSpectrum) -> Result<SinglePulseSetup, CliError> {
    let p = require_pulse(ctx)?;
    let mut setup = SinglePulseSetup::new(spectrum, p.e0, p.alpha)?.with_carrier(ctx.config.carrier);
    if let Some(t0) = p.t0 {
        setup.t0 = t0;
    }
    if let Some(w) = p.omega0 {
        setup.omega0 = w;
    }
    Ok(setup)
}

fn dsp_setup(ctx: &Context, spectrum: &BoundSpectrum) -> Result<DspSetup, CliError> {
    let d = require_dsp(ctx)?;
    let main = main_setup(ctx, spectrum)?;
    let report = rung_report(ctx, spectrum)?;
    Ok(DspSetup::new(spectrum, main, d.e0, d.alpha, &report, d.rung)?.with_phase(d.phase))
}

fn dsp_params(ctx: &Context) -> Result<DspParams, CliError> {
    let p = require_pulse(ctx)?;
    let d = require_dsp(ctx)?;
    Ok(DspParams {
        gamma1_main: p.gamma1,
        gamma2_main: p.gamma2,
        gamma1_dsp: d.gamma1,
        gamma2_dsp: d.gamma2,
        delta_t0: d.delta_t0,
    })
}

/// The configured main pulse, plus the DSP when a [dsp] section exists.
fn configured_train(ctx: &Context, spectrum: &BoundSpectrum) -> Result<PulseTrain, CliError> {
    let p = require_pulse(ctx)?;
    if ctx.config.dsp.is_some() {
        Ok(dsp_setup(ctx, spectrum)?.train(&dsp_params(ctx)?)?)
    } else {
        Ok(PulseTrain::single(main_setup(ctx, spectrum)?.pulse(p.gamma1, p.gamma2)?.with_phase(p.phase)))
    }
}

fn objective(ctx: &Context, spectrum: &BoundSpectrum) -> ObjectiveSpec {
    ObjectiveSpec::new(ctx.config.objective, spectrum)
}

fn eigen(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    let tdm = transition_dipoles(&spec, &ctx.config.model)?;
    r.write(&ctx.out_dir, "spectrum.csv", &spec.to_csv(&tdm))?;
    r.line(format!("{} bound levels (of {} computed)", spec.n_bound, spec.energies.len()));
    for w in &spec.warnings {
        r.line(format!("warning: {w}"));
    }
    match detect_missing_rung(&tdm, &spec, ctx.config.rung_threshold) {
        Ok(report) => {
            r.write(&ctx.out_dir, "missing_rung.txt", &(report.summary() + "\n"))?;
            r.write(
                &ctx.out_dir,
                "missing_rung.json",
                &(serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n"),
            )?;
            r.line(report.summary());
        }
        Err(vlc_core::Error::TooFewLevels { needed, found }) => {
            r.line(format!("missing rung: not assessed ({found} bound levels, need {needed})"));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn propagate_cmd(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    let train = configured_train(ctx, &spec)?;
    let result = propagate(&ctx.config.model, &spec, &train, &ctx.config.propagation)?;
    r.write(&ctx.out_dir, "populations.csv", &result.snapshot_csv())?;
    r.write(&ctx.out_dir, "field.csv", &train.trace_csv(2000)?)?;

    let last = result.final_snapshot();
    let trap = match ctx.config.dsp.and_then(|d| d.rung) {
        Some(l) => Some(l),
        None => rung_report(ctx, &spec).ok().map(|rep| rep.trap_level),
    };
    let trap_population = trap.and_then(|l| last.populations.get(l).copied());
    let summary = json!({
        "dissociation_probability": result.dissociation_probability,
        "flux_dissociation": result.flux_dissociation,
        "absorbed_dissociation": result.absorbed_dissociation,
        "absorbed_norm": result.absorbed_norm,
        "norm_beyond": result.norm_beyond,
        "bound_population": last.bound,
        "max_closure_error": result.max_closure_error(),
        "argmax_excited_level": last.argmax_excited(),
        "trap_level": trap,
        "trap_population": trap_population,
        "steps": result.steps,
        "t_start_au": result.t_start,
        "t_end_au": result.t_end,
    });
    r.write(&ctx.out_dir, "summary.json", &json_string(&summary))?;
    r.line(format!("dissociation: {:.6e}", result.dissociation_probability));
    r.line(format!("absorbed norm: {:.6e}", result.absorbed_norm));
    if let (Some(l), Some(p)) = (trap, trap_population) {
        r.line(format!("trap level {l} occupation: {p:.6e}"));
    }
    Ok(r)
}

fn optimize_single(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    let setup = main_setup(ctx, &spec)?;
    let out = optimize_single_pulse(
        &ctx.config.model,
        &spec,
        &setup,
        objective(ctx, &spec),
        &ctx.config.propagation,
        &ctx.config.bo,
        ctx.seed,
    )?;
    r.write(&ctx.out_dir, "history.csv", &out.run.history_csv())?;
    let result = json!({
        "gamma1": out.gamma1,
        "gamma2": out.gamma2,
        "score": out.score,
        "objective": ctx.config.objective,
        "seed": ctx.seed,
        "metadata": out.run.metadata,
    });
    r.write(&ctx.out_dir, "result.json", &json_string(&result))?;
    r.line(format!("best gamma1 = {}, gamma2 = {}, score = {:.6e}", out.gamma1, out.gamma2, out.score));
    if let Some(t) = out.run.meta("tie") {
        r.line(format!("note: {t}"));
    }
    Ok(r)
}

fn optimize_dsp_cmd(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    let setup = dsp_setup(ctx, &spec)?;
    let p = require_pulse(ctx)?;
    let checkpoint = ctx.out_dir.join("cmaes_checkpoint.txt");
    if !ctx.resume {
        for f in [checkpoint.clone(), ctx.out_dir.join("cmaes_checkpoint.txt.history")] {
            if f.exists() {
                std::fs::remove_file(&f)?;
            }
        }
    }
    let out = optimize_dsp(
        &ctx.config.model,
        &spec,
        &setup,
        (p.gamma1, p.gamma2),
        objective(ctx, &spec),
        &ctx.config.propagation,
        &ctx.config.cmaes,
        ctx.seed,
        Some(&checkpoint),
    )?;
    r.write(&ctx.out_dir, "history.csv", &out.run.history_csv())?;
    let result = json!({
        "params": out.params,
        "score": out.score,
        "rung": setup.rung,
        "dsp_omega_au": setup.dsp_omega,
        "seed": ctx.seed,
        "metadata": out.run.metadata,
    });
    r.write(&ctx.out_dir, "result.json", &json_string(&result))?;
    r.line(format!("rung {}: best score {:.6e} with {:?}", setup.rung, out.score, out.params));
    Ok(r)
}

fn scan_cmd(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let s = ctx
        .config
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("a [scan] section is required".into()))?;
    let spec = spectrum(ctx)?;
    let mode = match s.mode {
        ScanKind::Single => ScanMode::Single,
        ScanKind::Dsp => match ctx.config.dsp {
            Some(d) => ScanMode::Dsp { e0_mv_cm: d.e0_mv_cm, alpha_fs2: d.alpha_fs2, rung_override: d.rung },
            None => ScanMode::default_dsp(),
        },
    };
    let config = ScanConfig {
        e0_values_mv_cm: s.e0_values_mv_cm.clone(),
        alpha_values_fs2: s.alpha_values_fs2.clone(),
        mode,
        objective: ctx.config.objective,
        propagation: ctx.config.propagation.clone(),
        bo: ctx.config.bo.clone(),
        cmaes: ctx.config.cmaes.clone(),
        seed: ctx.seed,
    };
    let checkpoint = ctx.out_dir.join("scan_cells.jsonl");
    if !ctx.resume && checkpoint.exists() {
        std::fs::remove_file(&checkpoint)?;
    }
    let result = scan(&ctx.config.model, &spec, &config, Some(&checkpoint), ctx.parallelism)?;
    r.write(&ctx.out_dir, "dissociation_map.csv", &result.dissociation_csv())?;
    r.write(&ctx.out_dir, "argmax_map.csv", &result.argmax_csv())?;
    r.write(&ctx.out_dir, "efficiency_map.csv", &result.efficiency_csv())?;
    r.write(
        &ctx.out_dir,
        "scan.json",
        &(serde_json::to_string_pretty(&result).map_err(|e| CliError::Io(e.to_string()))? + "\n"),
    )?;
    r.line(format!("{} cells", result.cells.len()));
    for c in result.failures() {
        r.line(format!("failed: {}", c.error.as_deref().unwrap_or("")));
    }
    Ok(r)
}

/// Equilibrium distance as the grid point of lowest potential.
fn grid_minimum(ctx: &Context) -> Result<f64, CliError> {
    let m = &ctx.config.model;
    let v = m.potential_on_grid()?;
    let i = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
    Ok(m.grid.x(i))
}

fn regime_cmd(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let g = ctx
        .config
        .regime
        .as_ref()
        .ok_or_else(|| CliError::Config("a [regime] section is required".into()))?;
    let model = &ctx.config.model;
    let slope = match g.dipole_slope {
        Some(s) => s,
        None => model.dipole.derivative(grid_minimum(ctx)?)?.abs(),
    };
    let inputs = match (g.omega0, g.beta) {
        (Some(omega0), Some(beta)) => RegimeInputs {
            reduced_mass: model.reduced_mass,
            omega0,
            beta,
            dipole_slope: slope,
            omega01: g.omega01,
        },
        (None, None) => {
            let spec = spectrum(ctx)?;
            let mut inputs =
                RegimeInputs::from_spectrum(&spec, model.reduced_mass, slope, g.fit_levels[0]..g.fit_levels[1])?;
            if g.omega01.is_some() {
                inputs.omega01 = g.omega01;
            }
            inputs
        }
        _ => return Err(CliError::Config("regime: give both omega0 and beta, or neither".into())),
    };
    let map = regime_map(&inputs, &g.e0_values, &g.alpha_values)?;
    r.write(&ctx.out_dir, "regime_map.csv", &map.to_csv())?;
    let inside = map.cells.iter().filter(|c| c.in_region()).count();
    r.line(format!(
        "omega0 = {:.6e} au, beta = {:.6e}, slope = {:.4} au: {inside} of {} cells satisfy P2 > P1 + 1 and P1 > 0.79",
        inputs.omega0,
        inputs.beta,
        inputs.dipole_slope,
        map.cells.len()
    ));
    Ok(r)
}

fn in_pool<T: Send>(ctx: &Context, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match ctx.parallelism {
        Some(n) => Ok(rayon_pool(n)?.install(f)),
        None => Ok(f()),
    }
}

fn rayon_pool(n: usize) -> Result<vlc_core::analysis::ThreadPool, CliError> {
    vlc_core::analysis::thread_pool(n).map_err(CliError::from)
}

fn phase_cmd(ctx: &Context) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    let setup = dsp_setup(ctx, &spec)?;
    let params = dsp_params(ctx)?;
    let phases = phase_grid(ctx.config.phase_points);
    let sweep = in_pool(ctx, || {
        phase_sweep(&ctx.config.model, &spec, &setup, &params, &phases, &ctx.config.propagation)
    })??;
    r.write(&ctx.out_dir, "phase_sweep.csv", &sweep.to_csv())?;
    r.write(&ctx.out_dir, "phase_fit.json", &json_string(&json!({ "fit": sweep.fit })))?;
    if let Some(f) = sweep.fit {
        r.line(format!(
            "d(phi) ~ {:.4e} + {:.4e} cos(phi - {:.3}), R^2 = {:.4}",
            f.a, f.b, f.phi0, f.r_squared
        ));
    }
    Ok(r)
}

fn efficiency_cmd(ctx: &Context, dissociation: Option<f64>) -> Result<Report, CliError> {
    let mut r = Report::default();
    let p = require_pulse(ctx)?;
    let e = &ctx.config.efficiency;
    let d = dissociation.or(e.dissociation).ok_or_else(|| {
        CliError::Config("efficiency needs a dissociation probability (--dissociation or [efficiency])".into())
    })?;
    let inputs = EfficiencyInputs {
        e0_mv_cm: p.e0_mv_cm,
        alpha_fs2: p.alpha_fs2,
        cross_section_cm2: e.cross_section_cm2,
        areal_density: e.areal_density_mol_cm2,
        dissociation: d,
    };
    let extra: Vec<(f64, f64)> = ctx.config.dsp.iter().map(|d| (d.e0_mv_cm, d.alpha_fs2)).collect();
    let eff = energy_efficiency(&inputs, &extra)?;
    let main_energy = pulse_energy(p.e0_mv_cm, p.alpha_fs2, e.cross_section_cm2)?;
    let extra_energy: Vec<f64> = extra
        .iter()
        .map(|&(e0, a)| pulse_energy(e0, a, e.cross_section_cm2))
        .collect::<Result<_, _>>()?;
    let out = json!({
        "efficiency_mol_per_j": eff,
        "main_pulse_energy_j": main_energy,
        "extra_pulse_energies_j": extra_energy,
        "dissociation": d,
        "cross_section_cm2": e.cross_section_cm2,
        "areal_density_mol_cm2": e.areal_density_mol_cm2,
    });
    r.write(&ctx.out_dir, "efficiency.json", &json_string(&out))?;
    r.line(format!("efficiency: {eff:.6e} mol/J"));
    Ok(r)
}

fn contributions_cmd(ctx: &Context, level: usize) -> Result<Report, CliError> {
    let mut r = Report::default();
    let spec = spectrum(ctx)?;
    if level >= spec.n_bound {
        return Err(CliError::Config(format!(
            "level {level} is not bound ({} bound levels)",
            spec.n_bound
        )));
    }
    let train = configured_train(ctx, &spec)?;
    let config = PropagationConfig { record_contributions: true, ..ctx.config.propagation.clone() };
    let result = propagate(&ctx.config.model, &spec, &train, &config)?;
    r.write(&ctx.out_dir, &format!("contributions_j{level}.csv"), &result.contribution_csv(level)?)?;
    r.line(format!(
        "level {level}: max |sum_k dC - (|c_j(t)| - |c_j(0)|)| = {:.3e}",
        result.reconstruction_error(level)?
    ));
    Ok(r)
}
