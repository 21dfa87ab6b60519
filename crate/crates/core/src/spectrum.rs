//! Vibrational eigenstates, transition dipoles and missing-rung detection.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::model::MolecularModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSpectrum {
    /// Ascending eigenvalues of every computed state (bound or not).
    pub energies: Vec<f64>,
    /// Real eigenfunctions normalized so that Σ φ² dx = 1.
    pub wavefunctions: Vec<Vec<f64>>,
    pub n_bound: usize,
    /// V(x_max), the threshold separating bound from unbound states.
    pub asymptote: f64,
    pub grid: SpatialGrid,
    pub warnings: Vec<String>,
}

impl BoundSpectrum {
    /// Index of the highest bound level.
    pub fn n_dissoc(&self) -> usize {
        self.n_bound.saturating_sub(1)
    }

    pub fn bound_energies(&self) -> &[f64] {
        &self.energies[..self.n_bound]
    }

    pub fn bound_states(&self) -> &[Vec<f64>] {
        &self.wavefunctions[..self.n_bound]
    }

    /// ε_k − ε_j.
    pub fn transition_energy(&self, j: usize, k: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }

    /// Grid inner product Σ φ_i φ_j dx.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        dot(&self.wavefunctions[i], &self.wavefunctions[j]) * self.grid.dx()
    }

    /// Adjacent-TDM and Δν=2 table as CSV.
    pub fn to_csv(&self, tdm: &TdmMatrix) -> String {
        let mut out = String::from("level,energy_au,tdm_adjacent_au,tdm_double_au\n");
        for j in 0..self.n_bound {
            let adj = tdm.adjacent(j).map(|v| format!("{v:.10e}")).unwrap_or_default();
            let dbl = tdm.double(j).map(|v| format!("{v:.10e}")).unwrap_or_default();
            let _ = writeln!(out, "{j},{:.12e},{adj},{dbl}", self.energies[j]);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First row of the circulant Fourier-grid kinetic matrix.
fn kinetic_row(grid: &SpatialGrid, mass: f64) -> Vec<f64> {
    let n = grid.len();
    let mut buf: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::new(k * k / (2.0 * mass), 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Lowest `n_max` eigenpairs of the Fourier-grid Hamiltonian.
pub fn solve_bound_states(model: &MolecularModel, n_max: usize) -> Result<BoundSpectrum> {
    let grid = &model.grid;
    let n = grid.len();
    if n_max == 0 || n_max > n {
        return Err(Error::TooManyStates {
            requested: n_max,
            available: n,
        });
    }
    let v = model.potential_on_grid()?;
    let t = kinetic_row(grid, model.reduced_mass);
    let h = DMatrix::from_fn(n, n, |i, j| {
        let d = if i >= j { i - j } else { n + i - j };
        t[d] + if i == j { v[i] } else { 0.0 }
    });
    let eig = h
        .try_symmetric_eigen(1e-14, 0)
        .ok_or(Error::EigenNotConverged(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let norm = 1.0 / grid.dx().sqrt();
    let mut energies = Vec::with_capacity(n_max);
    let mut wavefunctions = Vec::with_capacity(n_max);
    for &idx in order.iter().take(n_max) {
        energies.push(eig.eigenvalues[idx]);
        let mut phi: Vec<f64> = eig.eigenvectors.column(idx).iter().map(|c| c * norm).collect();
        fix_sign(&mut phi);
        wavefunctions.push(phi);
    }
    let asymptote = model.asymptote()?;
    let n_bound = energies.iter().take_while(|&&e| e < asymptote).count();

    let mut warnings = Vec::new();
    if n_bound > 0 {
        let top = energies[n_bound - 1];
        let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let k_local = (2.0 * model.reduced_mass * (top - v_min)).sqrt();
        let wavelength = 2.0 * std::f64::consts::PI / k_local;
        if grid.dx() >= wavelength / 4.0 {
            warnings.push(format!(
                "grid spacing {:.4e} bohr is not below a quarter of the shortest local wavelength {:.4e} bohr of level {}",
                grid.dx(),
                wavelength,
                n_bound - 1
            ));
        }
    }
    if n_bound == n_max && n_max < n {
        warnings.push(format!(
            "all {n_max} requested states are bound; more bound levels may exist"
        ));
    }
    Ok(BoundSpectrum {
        energies,
        wavefunctions,
        n_bound,
        asymptote,
        grid: grid.clone(),
        warnings,
    })
}

/// Make the amplitude positive at the leftmost antinode: the first local
/// maximum of |φ| reached from the first point where |φ| exceeds 5% of its peak.
fn fix_sign(phi: &mut [f64]) {
    let peak = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return;
    }
    let mut i = phi.iter().position(|v| v.abs() >= 0.05 * peak).unwrap_or(0);
    while i + 1 < phi.len() && phi[i + 1].abs() > phi[i].abs() {
        i += 1;
    }
    if phi[i] < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
}

/// ⟨φ_j|μ|φ_k⟩ over bound states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmMatrix {
    n: usize,
    values: Vec<f64>,
}

impl TdmMatrix {
    /// From a row-major n×n matrix; symmetrized as (M + Mᵀ)/2.
    pub fn from_matrix(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form a {n}x{n} matrix",
                values.len()
            )));
        }
        let mut sym = values.clone();
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = 0.5 * (values[i * n + j] + values[j * n + i]);
            }
        }
        Ok(TdmMatrix { n, values: sym })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n + k]
    }

    /// μ_{j,j+1} if both levels are inside the matrix.
    pub fn adjacent(&self, j: usize) -> Option<f64> {
        (j + 1 < self.n).then(|| self.get(j, j + 1))
    }

    /// μ_{j,j+2} if both levels are inside the matrix.
    pub fn double(&self, j: usize) -> Option<f64> {
        (j + 2 < self.n).then(|| self.get(j, j + 2))
    }
}

pub fn transition_dipoles(spectrum: &BoundSpectrum, model: &MolecularModel) -> Result<TdmMatrix> {
    spectrum.grid.check_same(&model.grid)?;
    let mu = model.dipole_on_grid()?;
    transition_dipoles_with(spectrum, &mu)
}

/// TDMs for a dipole already sampled on the spectrum's grid.
pub fn transition_dipoles_with(spectrum: &BoundSpectrum, mu: &[f64]) -> Result<TdmMatrix> {
    if mu.len() != spectrum.grid.len() {
        return Err(Error::GridMismatch(format!(
            "dipole has {} samples, grid has {}",
            mu.len(),
            spectrum.grid.len()
        )));
    }
    let n = spectrum.n_bound;
    let dx = spectrum.grid.dx();
    let mut values = vec![0.0; n * n];
    for j in 0..n {
        let w: Vec<f64> = spectrum.wavefunctions[j]
            .iter()
            .zip(mu)
            .map(|(p, m)| p * m * dx)
            .collect();
        for k in j..n {
            let v = dot(&w, &spectrum.wavefunctions[k]);
            values[j * n + k] = v;
            values[k * n + j] = v;
        }
    }
    Ok(TdmMatrix { n, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingRungReport {
    pub rung_index: usize,
    pub min_tdm: f64,
    pub median_adjacent_tdm: f64,
    pub threshold: f64,
    pub is_missing: bool,
    pub trap_level: usize,
    /// |μ_{j,j+1}| for j = 0..n_dissoc.
    pub adjacent: Vec<f64>,
}

impl MissingRungReport {
    pub fn summary(&self) -> String {
        format!(
            "missing rung: {} at level {} (|mu_{{{},{}}}| = {:.4e} a.u., median {:.4e} a.u., ratio {:.4}, threshold {})",
            if self.is_missing { "yes" } else { "no" },
            self.rung_index,
            self.rung_index,
            self.rung_index + 1,
            self.min_tdm,
            self.median_adjacent_tdm,
            self.min_tdm / self.median_adjacent_tdm,
            self.threshold
        )
    }
}

pub const DEFAULT_RUNG_THRESHOLD: f64 = 0.05;

/// Interior level j (0 < j < n_dissoc) with the smallest |μ_{j,j+1}|.
/// Ties go to the smallest index.
pub fn detect_missing_rung(
    tdm: &TdmMatrix,
    spectrum: &BoundSpectrum,
    threshold: f64,
) -> Result<MissingRungReport> {
    let n_bound = spectrum.n_bound.min(tdm.size());
    if n_bound < 4 {
        return Err(Error::TooFewLevels {
            needed: 4,
            found: n_bound,
        });
    }
    let n_dissoc = n_bound - 1;
    let adjacent: Vec<f64> = (0..n_dissoc).map(|j| tdm.get(j, j + 1).abs()).collect();
    let mut rung = 1;
    for j in 2..n_dissoc {
        if adjacent[j] < adjacent[rung] {
            rung = j;
        }
    }
    let mut sorted = adjacent.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let min_tdm = adjacent[rung];
    Ok(MissingRungReport {
        rung_index: rung,
        min_tdm,
        median_adjacent_tdm: median,
        threshold,
        is_missing: min_tdm < threshold * median,
        trap_level: rung,
        adjacent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicFit {
    pub omega0: f64,
    pub beta: f64,
    pub residual_norm: f64,
    pub transitions: Range<usize>,
}

/// Least-squares fit of ε_{n+1} − ε_n = ω₀[1 − 2β(n+1)] over transitions
/// n ∈ `transitions`.
pub fn fit_anharmonicity(spectrum: &BoundSpectrum, transitions: Range<usize>) -> Result<AnharmonicFit> {
    if transitions.is_empty() || transitions.end >= spectrum.n_bound {
        return Err(Error::InvalidParameter(format!(
            "transition range {:?} must be non-empty and within {} bound levels",
            transitions, spectrum.n_bound
        )));
    }
    let pts: Vec<(f64, f64)> = transitions
        .clone()
        .map(|n| ((n + 1) as f64, spectrum.energies[n + 1] - spectrum.energies[n]))
        .collect();
    let first = pts[0].1;
    if pts.len() < 2 || pts.iter().all(|p| p.1 == first) {
        return Ok(AnharmonicFit {
            omega0: first,
            beta: 0.0,
            residual_norm: 0.0,
            transitions,
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let omega0 = my - slope * mx;
    let beta = -slope / (2.0 * omega0);
    let residual_norm = pts
        .iter()
        .map(|p| (p.1 - omega0 - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(AnharmonicFit {
        omega0,
        beta,
        residual_norm,
        transitions,
    })
}
