//! Pulse-design objectives and the single-pulse / DSP optimization drivers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bayes::{bo_optimize, BoConfig, GridSearchSpace2D};
use super::cmaes::{cmaes_optimize, CmaesConfig};
use super::OptimizationRun;
use crate::error::{Error, Result};
use crate::model::MolecularModel;
use crate::propagator::{propagate, PropagationConfig, PropagationResult};
use crate::pulse::{sigma_from_alpha, CarrierMode, ChirpedPulse, PulseTrain};
use crate::spectrum::{BoundSpectrum, MissingRungReport};

/// Σ_i (i / n_dissoc)|c_i|² over the bound levels at the end of the run.
pub fn excited_score(populations: &[f64], n_dissoc: usize) -> f64 {
    if n_dissoc == 0 {
        return 0.0;
    }
    populations
        .iter()
        .take(n_dissoc + 1)
        .enumerate()
        .map(|(i, p)| i as f64 / n_dissoc as f64 * p)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    #[default]
    ExcitedPlusDissociated,
    DissociatedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub variant: ObjectiveVariant,
    pub n_dissoc: usize,
}

impl ObjectiveSpec {
    pub fn new(variant: ObjectiveVariant, spectrum: &BoundSpectrum) -> Self {
        ObjectiveSpec { variant, n_dissoc: spectrum.n_dissoc() }
    }

    pub fn evaluate(&self, result: &PropagationResult) -> f64 {
        let diss = result.dissociation_probability;
        match self.variant {
            ObjectiveVariant::ExcitedPlusDissociated => {
                excited_score(result.final_populations(), self.n_dissoc) + diss
            }
            ObjectiveVariant::DissociatedOnly => diss,
        }
    }

    /// Lowest value the objective can take.
    pub fn worst(&self) -> f64 {
        0.0
    }
}

/// Main chirped pulse with the carrier on the 0→1 transition, centred at 4σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePulseSetup {
    pub e0: f64,
    pub alpha: f64,
    pub omega0: f64,
    pub t0: f64,
    #[serde(default)]
    pub carrier: CarrierMode,
}

impl SinglePulseSetup {
    pub fn new(spectrum: &BoundSpectrum, e0: f64, alpha: f64) -> Result<Self> {
        if spectrum.n_bound < 2 {
            return Err(Error::TooFewLevels { needed: 2, found: spectrum.n_bound });
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(SinglePulseSetup {
            e0,
            alpha,
            omega0: spectrum.transition_energy(0, 1),
            t0: 4.0 * sigma_from_alpha(alpha),
            carrier: CarrierMode::Literal,
        })
    }

    pub fn with_carrier(mut self, carrier: CarrierMode) -> Self {
        self.carrier = carrier;
        self
    }

    pub fn pulse(&self, gamma1: f64, gamma2: f64) -> Result<ChirpedPulse> {
        Ok(ChirpedPulse::new(self.e0, self.alpha, self.t0, self.omega0, gamma1, gamma2)?.with_carrier(self.carrier))
    }
}

#[derive(Debug, Clone)]
pub struct SinglePulseOutcome {
    pub gamma1: f64,
    pub gamma2: f64,
    pub score: f64,
    pub run: OptimizationRun,
}

/// Bayesian optimization of (γ1, γ2) on the 0.01 grid of [0, 1)².
pub fn optimize_single_pulse(
    model: &MolecularModel,
    spectrum: &BoundSpectrum,
    setup: &SinglePulseSetup,
    objective: ObjectiveSpec,
    prop: &PropagationConfig,
    bo: &BoConfig,
    seed: u64,
) -> Result<SinglePulseOutcome> {
    let cfg = BoConfig { worst_value: Some(bo.worst_value.unwrap_or(objective.worst())), ..bo.clone() };
    let f = |p: &[f64]| -> Result<f64> {
        let train = PulseTrain::single(setup.pulse(p[0], p[1])?);
        Ok(objective.evaluate(&propagate(model, spectrum, &train, prop)?))
    };
    let mut run = bo_optimize(f, &GridSearchSpace2D::default(), &cfg, seed);
    run.parameter_names = vec!["gamma1".into(), "gamma2".into()];
    if run.history.iter().all(|e| e.failure.is_some()) {
        let why = run.history.first().and_then(|e| e.failure.clone()).unwrap_or_default();
        return Err(Error::InvalidParameter(format!("every evaluation failed: {why}")));
    }
    Ok(SinglePulseOutcome {
        gamma1: run.best_params[0],
        gamma2: run.best_params[1],
        score: run.best_score,
        run,
    })
}

/// Main pulse plus a dipole-skipping pulse resonant with r−1 → r+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DspSetup {
    pub main: SinglePulseSetup,
    pub dsp_e0: f64,
    pub dsp_alpha: f64,
    pub dsp_omega: f64,
    pub rung: usize,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DspParams {
    pub gamma1_main: f64,
    pub gamma2_main: f64,
    pub gamma1_dsp: f64,
    pub gamma2_dsp: f64,
    /// DSP centre minus main-pulse centre.
    pub delta_t0: f64,
}

impl DspParams {
    pub const NAMES: [&'static str; 5] = ["gamma1_main", "gamma2_main", "gamma1_dsp", "gamma2_dsp", "delta_t0"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.gamma1_main, self.gamma2_main, self.gamma1_dsp, self.gamma2_dsp, self.delta_t0]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        DspParams {
            gamma1_main: x[0],
            gamma2_main: x[1],
            gamma1_dsp: x[2],
            gamma2_dsp: x[3],
            delta_t0: x[4],
        }
    }
}

impl DspSetup {
    /// Uses the detected rung unless `rung_override` is given; a report without
    /// a missing rung is an error in that case.
    pub fn new(
        spectrum: &BoundSpectrum,
        main: SinglePulseSetup,
        dsp_e0: f64,
        dsp_alpha: f64,
        report: &MissingRungReport,
        rung_override: Option<usize>,
    ) -> Result<Self> {
        let rung = match rung_override {
            Some(r) => r,
            None if report.is_missing => report.rung_index,
            None => return Err(Error::NoMissingRung),
        };
        if rung == 0 || rung + 1 >= spectrum.n_bound {
            return Err(Error::LevelOutOfRange { level: rung, available: spectrum.n_bound });
        }
        if !(dsp_alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("DSP alpha must be positive, got {dsp_alpha}")));
        }
        Ok(DspSetup {
            main,
            dsp_e0,
            dsp_alpha,
            dsp_omega: spectrum.transition_energy(rung - 1, rung + 1),
            rung,
            phase: 0.0,
        })
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn train(&self, p: &DspParams) -> Result<PulseTrain> {
        let main = self.main.pulse(p.gamma1_main, p.gamma2_main)?;
        let dsp = ChirpedPulse::new(
            self.dsp_e0,
            self.dsp_alpha,
            self.main.t0 + p.delta_t0,
            self.dsp_omega,
            p.gamma1_dsp,
            p.gamma2_dsp,
        )?
        .with_phase(self.phase)
        .with_carrier(self.main.carrier);
        Ok(PulseTrain::new().with("main", main).with("dsp", dsp))
    }

    pub fn main_sigma(&self) -> f64 {
        sigma_from_alpha(self.main.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct DspOutcome {
    pub params: DspParams,
    pub score: f64,
    pub run: OptimizationRun,
}

/// CMA-ES over (γ1, γ2) of both pulses and the delay. The main chirp starts
/// from `main_gammas`, the DSP chirp from zero and the delay from zero. The
/// delay coordinate is scaled so that the initial step is half a main-pulse σ.
#[allow(clippy::too_many_arguments)]
pub fn optimize_dsp(
    model: &MolecularModel,
    spectrum: &BoundSpectrum,
    setup: &DspSetup,
    main_gammas: (f64, f64),
    objective: ObjectiveSpec,
    prop: &PropagationConfig,
    cma: &CmaesConfig,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<DspOutcome> {
    let x0 = DspParams {
        gamma1_main: main_gammas.0,
        gamma2_main: main_gammas.1,
        gamma1_dsp: 0.0,
        gamma2_dsp: 0.0,
        delta_t0: 0.0,
    };
    let dt_scale = 0.5 * setup.main_sigma() / cma.sigma0;
    let cfg = CmaesConfig {
        scales: Some(cma.scales.clone().unwrap_or_else(|| vec![1.0, 1.0, 1.0, 1.0, dt_scale])),
        worst_value: if cma.worst_value.is_finite() { cma.worst_value } else { objective.worst() },
        parameter_names: Some(DspParams::NAMES.iter().map(|s| s.to_string()).collect()),
        ..cma.clone()
    };
    let f = |x: &[f64]| -> Result<f64> {
        let train = setup.train(&DspParams::from_slice(x))?;
        Ok(objective.evaluate(&propagate(model, spectrum, &train, prop)?))
    };
    let mut run = cmaes_optimize(f, &x0.to_vec(), &cfg, seed, checkpoint)?;
    run.note("rung", setup.rung.to_string());
    run.note("dsp_omega_au", setup.dsp_omega.to_string());
    Ok(DspOutcome {
        params: DspParams::from_slice(&run.best_params),
        score: run.best_score,
        run,
    })
}
