//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates, using the standard default learning rates.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OptimizationRun;
use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    pub generations: usize,
    pub lambda: usize,
    pub sigma0: f64,
    /// Per-coordinate scale: the search runs on x/scale.
    pub scales: Option<Vec<f64>>,
    /// Score given to failed or non-finite evaluations.
    pub worst_value: f64,
    pub parameter_names: Option<Vec<String>>,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        CmaesConfig {
            generations: 150,
            lambda: 16,
            sigma0: 0.15,
            scales: None,
            worst_value: f64::NEG_INFINITY,
            parameter_names: None,
        }
    }
}

/// Strategy state. Internally it minimizes −objective.
#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
    pub generation: usize,
    pub sigma: f64,
    pub mean: DVector<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub cov: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl CmaEs {
    pub fn new(x0: &[f64], sigma0: f64, lambda: usize, seed: u64) -> Result<Self> {
        let n = x0.len();
        if n == 0 || lambda < 2 || !(sigma0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "CMA-ES needs dim >= 1, lambda >= 2 and sigma0 > 0 (dim {n}, lambda {lambda}, sigma0 {sigma0})"
            )));
        }
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(CmaEs {
            dim: n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            generation: 0,
            sigma: sigma0,
            mean: DVector::from_column_slice(x0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            cov: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            d: DVector::from_element(n, 1.0),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draw λ candidates (z-vectors and points) sequentially from the RNG.
    fn sample(&mut self) -> Vec<(DVector<f64>, DVector<f64>)> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut self.rng));
                let y = &self.b * z.component_mul(&self.d);
                let x = &self.mean + &y * self.sigma;
                (y, x)
            })
            .collect()
    }

    /// Update from samples and their costs (lower is better).
    fn update(&mut self, samples: &[(DVector<f64>, DVector<f64>)], costs: &[f64]) {
        let n = self.dim as f64;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

        let mut y_w = DVector::zeros(self.dim);
        for (w, &i) in self.weights.iter().zip(order.iter().take(self.mu)) {
            y_w += &samples[i].0 * *w;
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} Bᵀ y_w
        let inv_sqrt = &self.b * DMatrix::from_diagonal(&self.d.map(|v| 1.0 / v)) * self.b.transpose();
        self.p_sigma = &self.p_sigma * (1.0 - self.c_sigma)
            + (&inv_sqrt * &y_w) * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();
        let gen = (self.generation + 1) as f64;
        let ps_norm = self.p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - self.c_sigma).powf(2.0 * gen)).sqrt() / self.chi_n
            < 1.4 + 2.0 / (n + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - self.c_c)
            + &y_w * (hs * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, &i) in self.weights.iter().zip(order.iter().take(self.mu)) {
            let y = &samples[i].0;
            rank_mu += y * y.transpose() * *w;
        }
        let delta = (1.0 - hs) * self.c_c * (2.0 - self.c_c);
        self.cov = &self.cov * (1.0 - self.c1 - self.c_mu)
            + (&self.p_c * self.p_c.transpose() + &self.cov * delta) * self.c1
            + rank_mu * self.c_mu;
        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
    }

    fn decompose(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
        self.b = eig.eigenvectors;
        self.d = vals.map(f64::sqrt);
        self.cov = &self.b * DMatrix::from_diagonal(&vals) * self.b.transpose();
    }

    /// Documented text checkpoint; RNG position is stored as (seed, word_pos).
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::from("# cmaes checkpoint v1\n");
        let vec_line = |name: &str, v: &DVector<f64>| {
            let mut l = name.to_string();
            for x in v.iter() {
                let _ = write!(l, " {:e}", x);
            }
            l.push('\n');
            l
        };
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "lambda {}", self.lambda);
        let _ = writeln!(s, "generation {}", self.generation);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "word_pos {}", self.rng.get_word_pos());
        let _ = writeln!(s, "sigma {:e}", self.sigma);
        s.push_str(&vec_line("mean", &self.mean));
        s.push_str(&vec_line("p_sigma", &self.p_sigma));
        s.push_str(&vec_line("p_c", &self.p_c));
        for i in 0..self.dim {
            s.push_str(&vec_line("cov", &self.cov.row(i).transpose()));
        }
        s.push_str(&vec_line("d", &self.d));
        for i in 0..self.dim {
            s.push_str(&vec_line("b", &self.b.row(i).transpose()));
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut fields: Vec<(String, Vec<String>)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace().map(str::to_string);
            let key = parts.next().unwrap();
            fields.push((key, parts.collect()));
        }
        let get = |k: &str| -> Result<&Vec<String>> {
            fields.iter().find(|(key, _)| key == k).map(|(_, v)| v).ok_or_else(|| bad(&format!("missing '{k}'")))
        };
        let scalar = |k: &str| -> Result<String> {
            get(k)?.first().cloned().ok_or_else(|| bad(&format!("empty '{k}'")))
        };
        let floats = |v: &[String]| -> Result<Vec<f64>> {
            v.iter().map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")))).collect()
        };
        let parse_usize = |k: &str| -> Result<usize> {
            scalar(k)?.parse().map_err(|_| bad(&format!("bad '{k}'")))
        };
        let dim = parse_usize("dim")?;
        let lambda = parse_usize("lambda")?;
        let generation = parse_usize("generation")?;
        let seed: u64 = scalar("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let word_pos: u128 = scalar("word_pos")?.parse().map_err(|_| bad("bad word_pos"))?;
        let sigma: f64 = scalar("sigma")?.parse().map_err(|_| bad("bad sigma"))?;
        let vector = |k: &str| -> Result<DVector<f64>> {
            let v = floats(get(k)?)?;
            if v.len() != dim {
                return Err(bad(&format!("'{k}' has {} entries, expected {dim}", v.len())));
            }
            Ok(DVector::from_vec(v))
        };
        let mean = vector("mean")?;
        let matrix = |k: &str| -> Result<DMatrix<f64>> {
            let rows: Vec<Vec<f64>> = fields
                .iter()
                .filter(|(key, _)| key == k)
                .map(|(_, v)| floats(v))
                .collect::<Result<_>>()?;
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(&format!("'{k}' must be dim x dim")));
            }
            Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
        };
        let mut es = CmaEs::new(mean.as_slice(), sigma, lambda, seed)?;
        es.generation = generation;
        es.p_sigma = vector("p_sigma")?;
        es.p_c = vector("p_c")?;
        es.cov = matrix("cov")?;
        es.b = matrix("b")?;
        es.d = vector("d")?;
        es.rng.set_word_pos(word_pos);
        Ok(es)
    }
}

/// Maximize `objective` on ℝⁿ from `x0`. Evaluations inside a generation run in
/// parallel; sampling and updates are sequential, so results depend only on
/// the seed. With `checkpoint`, the state is saved after each generation and an
/// existing file is resumed from (its history in `<path>.history` is reloaded).
pub fn cmaes_optimize<F>(
    objective: F,
    x0: &[f64],
    config: &CmaesConfig,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<OptimizationRun>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let dim = x0.len();
    let scales = config.scales.clone().unwrap_or_else(|| vec![1.0; dim]);
    if scales.len() != dim || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("CMA-ES scales must be positive, one per coordinate".into()));
    }
    let names = config
        .parameter_names
        .clone()
        .unwrap_or_else(|| (0..dim).map(|i| format!("x{}", i + 1)).collect());
    let mut run = OptimizationRun::new("cma-es", seed, names);
    let u0: Vec<f64> = x0.iter().zip(&scales).map(|(x, s)| x / s).collect();

    let history_path = checkpoint.map(|p| {
        let mut s = p.as_os_str().to_owned();
        s.push(".history");
        std::path::PathBuf::from(s)
    });
    let mut es = match checkpoint {
        Some(p) if p.exists() => {
            let es = CmaEs::from_checkpoint(&std::fs::read_to_string(p)?)?;
            if es.dim() != dim {
                return Err(Error::Checkpoint(format!("checkpoint has dim {}, expected {dim}", es.dim())));
            }
            let hist: Vec<super::Evaluation> =
                serde_json::from_str(&std::fs::read_to_string(history_path.as_ref().unwrap())?)?;
            for e in hist {
                run.record(e.generation, e.params, e.score, e.failure);
            }
            run.note("resumed_at_generation", es.generation.to_string());
            es
        }
        _ => CmaEs::new(&u0, config.sigma0, config.lambda, seed)?,
    };

    while es.generation < config.generations {
        let samples = es.sample();
        let outcomes: Vec<(f64, Option<String>)> = samples
            .par_iter()
            .map(|(_, u)| {
                let x: Vec<f64> = u.iter().zip(&scales).map(|(v, s)| v * s).collect();
                match objective(&x) {
                    Ok(v) if v.is_finite() => (v, None),
                    Ok(v) => (config.worst_value, Some(format!("non-finite objective {v}"))),
                    Err(e) => (config.worst_value, Some(e.to_string())),
                }
            })
            .collect();
        let costs: Vec<f64> = outcomes.iter().map(|(v, _)| -v).collect();
        let gen = es.generation + 1;
        for ((_, u), (score, failure)) in samples.iter().zip(outcomes) {
            let x: Vec<f64> = u.iter().zip(&scales).map(|(v, s)| v * s).collect();
            run.record(gen, x, score, failure);
        }
        es.update(&samples, &costs);
        if let (Some(p), Some(h)) = (checkpoint, history_path.as_ref()) {
            std::fs::write(p, es.to_checkpoint())?;
            std::fs::write(h, serde_json::to_string(&run.history)?)?;
        }
    }
    run.note("final_sigma", es.sigma.to_string());
    run.note("generations", es.generation.to_string());
    run.note("lambda", config.lambda.to_string());
    run.note(
        "final_mean",
        es.mean
            .iter()
            .zip(&scales)
            .map(|(v, s)| (v * s).to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    Ok(run)
}
