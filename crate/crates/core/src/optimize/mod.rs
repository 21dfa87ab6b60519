//! Black-box optimizers and the pulse-design objectives built on them.

pub mod bayes;
pub mod cmaes;
pub mod gp;
pub mod objective;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bayes::{bo_optimize, BoConfig, GridSearchSpace2D};
pub use cmaes::{cmaes_optimize, CmaEs, CmaesConfig};
pub use gp::GaussianProcess;
pub use objective::{
    excited_score, optimize_dsp, optimize_single_pulse, DspOutcome, DspParams, DspSetup,
    ObjectiveSpec, ObjectiveVariant, SinglePulseOutcome, SinglePulseSetup,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    /// CMA-ES generation, or 0 for the initial design / 1.. for BO iterations.
    pub generation: usize,
    pub params: Vec<f64>,
    pub score: f64,
    /// Set when the objective failed and `score` is the substituted worst value.
    pub failure: Option<String>,
}

/// Evaluation history and outcome of one optimizer run (maximization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub method: String,
    pub seed: u64,
    pub parameter_names: Vec<String>,
    pub history: Vec<Evaluation>,
    pub best_params: Vec<f64>,
    pub best_score: f64,
    pub metadata: Vec<(String, String)>,
}

impl OptimizationRun {
    pub(crate) fn new(method: &str, seed: u64, parameter_names: Vec<String>) -> Self {
        OptimizationRun {
            method: method.to_string(),
            seed,
            parameter_names,
            history: Vec::new(),
            best_params: Vec::new(),
            best_score: f64::NEG_INFINITY,
            metadata: Vec::new(),
        }
    }

    /// Append an evaluation; strictly better scores replace the incumbent,
    /// so the earliest of equal scores is kept.
    pub(crate) fn record(&mut self, generation: usize, params: Vec<f64>, score: f64, failure: Option<String>) {
        if score > self.best_score || self.best_params.is_empty() {
            self.best_score = score;
            self.best_params = params.clone();
        }
        let index = self.history.len();
        self.history.push(Evaluation { index, generation, params, score, failure });
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Best score seen up to and including each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.history
            .iter()
            .map(|e| {
                best = best.max(e.score);
                best
            })
            .collect()
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("evaluation,generation");
        for n in &self.parameter_names {
            let _ = write!(out, ",{n}");
        }
        out.push_str(",score\n");
        for e in &self.history {
            let _ = write!(out, "{},{}", e.index, e.generation);
            for p in &e.params {
                let _ = write!(out, ",{p:.12e}");
            }
            let _ = writeln!(out, ",{:.12e}", e.score);
        }
        out
    }
}
