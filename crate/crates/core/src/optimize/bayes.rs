//! Grid-restricted Bayesian optimization with a GP surrogate and UCB acquisition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gp::GaussianProcess;
use super::OptimizationRun;
use crate::error::Result;

/// The candidates (i/r, j/r) for i, j in 0..r on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpace2D {
    pub resolution: usize,
}

impl Default for GridSearchSpace2D {
    fn default() -> Self {
        GridSearchSpace2D { resolution: 100 }
    }
}

impl GridSearchSpace2D {
    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn step(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Candidate number `idx`, row-major in (first, second) coordinate.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let r = self.resolution;
        [(idx / r) as f64 / r as f64, (idx % r) as f64 / r as f64]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// UCB acquisitions after the initial design.
    pub iterations: usize,
    pub n_initial: usize,
    pub kappa: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
    /// Score substituted for failed evaluations; the lowest score observed
    /// so far (or 0) when unset.
    pub worst_value: Option<f64>,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            iterations: 50,
            n_initial: 5,
            kappa: 2.0,
            lengthscales: vec![0.03, 0.1, 0.3, 1.0],
            noise_variance: 1e-6,
            worst_value: None,
        }
    }
}

/// Additive-recurrence (R2) low-discrepancy points with a seeded random shift.
fn initial_design(space: &GridSearchSpace2D, n: usize, seed: u64) -> Vec<usize> {
    const A1: f64 = 0.754_877_666_246_692_8;
    const A2: f64 = 0.569_840_290_998_053_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s1, s2): (f64, f64) = (rng.gen(), rng.gen());
    let r = space.resolution;
    let mut out: Vec<usize> = Vec::with_capacity(n);
    let mut i = 0usize;
    while out.len() < n.min(space.len()) {
        let u = (s1 + i as f64 * A1).fract();
        let v = (s2 + i as f64 * A2).fract();
        let idx = ((u * r as f64) as usize).min(r - 1) * r + ((v * r as f64) as usize).min(r - 1);
        if !out.contains(&idx) {
            out.push(idx);
        }
        i += 1;
    }
    out
}

/// Maximize `objective` over the grid. Objective errors and non-finite values
/// are recorded with the worst score and the run continues.
pub fn bo_optimize<F>(objective: F, space: &GridSearchSpace2D, config: &BoConfig, seed: u64) -> OptimizationRun
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut run = OptimizationRun::new("bayesian-ucb", seed, vec!["x1".into(), "x2".into()]);
    let mut evaluated = vec![false; space.len()];
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();

    let evaluate = |idx: usize, generation: usize, run: &mut OptimizationRun, values: &mut Vec<f64>, points: &mut Vec<Vec<f64>>| {
        let p = space.point(idx).to_vec();
        let (score, failure) = match objective(&p) {
            Ok(v) if v.is_finite() => (v, None),
            other => {
                let why = match other {
                    Ok(v) => format!("non-finite objective {v}"),
                    Err(e) => e.to_string(),
                };
                let worst = config
                    .worst_value
                    .unwrap_or_else(|| values.iter().copied().fold(f64::INFINITY, f64::min))
                    .min(f64::MAX);
                (if worst.is_finite() { worst } else { 0.0 }, Some(why))
            }
        };
        points.push(p.clone());
        values.push(score);
        run.record(generation, p, score, failure);
    };

    for idx in initial_design(space, config.n_initial, seed) {
        evaluated[idx] = true;
        evaluate(idx, 0, &mut run, &mut values, &mut points);
    }

    let mut chosen_lengthscales = Vec::new();
    for it in 1..=config.iterations {
        if points.len() >= space.len() {
            break;
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y: Vec<f64> = values.iter().map(|v| (v - mean) / scale).collect();

        let mut best_gp: Option<GaussianProcess> = None;
        for &l in &config.lengthscales {
            let mut gp = GaussianProcess::new(l, 1.0, config.noise_variance);
            if gp.fit(&points, &y).is_err() {
                continue;
            }
            let better = best_gp
                .as_ref()
                .map_or(true, |b| gp.log_marginal_likelihood() > b.log_marginal_likelihood());
            if better {
                best_gp = Some(gp);
            }
        }
        let gp = best_gp.unwrap_or_else(|| GaussianProcess::new(1.0, 1.0, config.noise_variance));
        chosen_lengthscales.push(gp.lengthscale);

        let mut best_idx = None;
        let mut best_ucb = f64::NEG_INFINITY;
        for idx in 0..space.len() {
            if evaluated[idx] {
                continue;
            }
            let (mu, v) = gp.predict(&space.point(idx));
            let ucb = mu + config.kappa * v.sqrt();
            if ucb > best_ucb {
                best_ucb = ucb;
                best_idx = Some(idx);
            }
        }
        let Some(idx) = best_idx else { break };
        evaluated[idx] = true;
        evaluate(idx, it, &mut run, &mut values, &mut points);
    }

    let ties = run.history.iter().filter(|e| e.score == run.best_score).count();
    run.note("kappa", config.kappa.to_string());
    run.note("initial_design", config.n_initial.to_string());
    run.note(
        "lengthscales",
        chosen_lengthscales.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "),
    );
    if ties > 1 {
        run.note(
            "tie",
            format!("{ties} evaluations share the best score; the earliest is reported"),
        );
    }
    run
}
