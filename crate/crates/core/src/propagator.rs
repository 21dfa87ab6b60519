//! Split-operator wavepacket propagation with a complex absorbing potential.
//!
//! One step of size h is
//! exp(−iTh/2) · exp(−i[V − μE(t + h/2)]h − W h) · exp(−iTh/2),
//! with the kinetic factors applied in momentum space. Consecutive
//! half-kinetic factors are applied back to back without returning to
//! position space, so a step costs one forward and one inverse FFT.
//! Flux, norm and level projections are read off in momentum space at every
//! step; position-space observables are computed only at snapshot times.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::model::MolecularModel;
use crate::pulse::PulseTrain;
use crate::spectrum::{transition_dipoles_with, BoundSpectrum, TdmMatrix};

/// Below this amplitude the phase of c_j is frozen at its last value.
pub const PHASE_FLOOR: f64 = 1e-8;
/// Snapshot budget used when no stride is configured.
pub const MAX_SNAPSHOTS: usize = 4000;

/// Quartic absorber −i·ξ·((x − x_onset)/(x_max − x_onset))⁴ beyond `x_onset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapSpec {
    pub xi: f64,
    pub x_onset: f64,
}

impl Default for CapSpec {
    fn default() -> Self {
        CapSpec { xi: 1.0, x_onset: 12.0 }
    }
}

impl CapSpec {
    /// The (positive) absorption rate W(x); the potential is −iW.
    pub fn strength(&self, grid: &SpatialGrid) -> Vec<f64> {
        let width = grid.x_max() - self.x_onset;
        (0..grid.len())
            .map(|j| {
                let x = grid.x(j);
                if x > self.x_onset {
                    self.xi * ((x - self.x_onset) / width).powi(4)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub dt: f64,
    /// Defaults to the CAP onset (or 90% of the grid without a CAP).
    pub flux_point: Option<f64>,
    pub cap: Option<CapSpec>,
    /// Steps between snapshots; chosen to give at most 4000 snapshots if unset.
    pub record_stride: Option<usize>,
    pub record_contributions: bool,
    /// Overrides the pulse train's ±4σ window.
    pub window: Option<(f64, f64)>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            dt: 1.0,
            flux_point: None,
            cap: Some(CapSpec::default()),
            record_stride: None,
            record_contributions: false,
            window: None,
        }
    }
}

impl PropagationConfig {
    pub fn resolved_flux_point(&self, grid: &SpatialGrid) -> f64 {
        match (self.flux_point, self.cap) {
            (Some(x), _) => x,
            (None, Some(cap)) => cap.x_onset,
            (None, None) => grid.x_min() + 0.9 * grid.length(),
        }
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        let xp = self.resolved_flux_point(grid);
        if !(xp > grid.x_min() && xp < grid.x_max()) {
            return Err(Error::InvalidParameter(format!(
                "flux point {xp} lies outside the grid ({}, {})",
                grid.x_min(),
                grid.x_max()
            )));
        }
        if let Some(cap) = self.cap {
            if !(cap.xi >= 0.0) || !(cap.x_onset < grid.x_max()) || !(cap.x_onset >= grid.x_min()) {
                return Err(Error::InvalidParameter(format!(
                    "CAP needs xi >= 0 and an onset inside the grid, got xi = {}, onset = {}",
                    cap.xi, cap.x_onset
                )));
            }
            if xp > cap.x_onset {
                return Err(Error::InvalidParameter(format!(
                    "flux point {xp} must not lie beyond the CAP onset {}",
                    cap.x_onset
                )));
            }
        }
        if self.record_stride == Some(0) {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        if let Some((a, b)) = self.window {
            if !(b > a) {
                return Err(Error::InvalidParameter(format!("empty time window ({a}, {b})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl Wavefunction {
    pub fn from_real(grid: &SpatialGrid, values: &[f64], time: f64) -> Self {
        Wavefunction {
            grid: grid.clone(),
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            time,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// Σ φ ψ dx for a real basis function.
    pub fn project(&self, phi: &[f64]) -> Complex64 {
        self.values
            .iter()
            .zip(phi)
            .map(|(c, p)| c * p)
            .sum::<Complex64>()
            * self.grid.dx()
    }

    pub fn conj(&self) -> Self {
        Wavefunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|c| c.conj()).collect(),
            time: self.time,
        }
    }

    /// Binary checkpoint: b"VLCPSI01", u64 n, f64 x_min, f64 x_max, f64 time,
    /// then n interleaved (re, im) f64 pairs; all little-endian.
    pub fn write_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(40 + 16 * self.values.len());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in [self.grid.x_min(), self.grid.x_max(), self.time] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for c in &self.values {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 40 || &buf[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("missing VLCPSI01 header".into()));
        }
        let f = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        if buf.len() != 40 + 16 * n {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes for {n} points, found {}",
                40 + 16 * n,
                buf.len()
            )));
        }
        let grid = SpatialGrid::new(n, f(16), f(24))?;
        let time = f(32);
        let values = (0..n)
            .map(|j| Complex64::new(f(40 + 16 * j), f(48 + 16 * j)))
            .collect();
        Ok(Wavefunction { grid, values, time })
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"VLCPSI01";

pub fn initialize_ground_state(spectrum: &BoundSpectrum, time: f64) -> Wavefunction {
    Wavefunction::from_real(&spectrum.grid, &spectrum.wavefunctions[0], time)
}

/// Precomputed operators for one grid, mass, potential, dipole and CAP.
pub struct Propagator {
    grid: SpatialGrid,
    mass: f64,
    potential: Vec<f64>,
    dipole: Vec<f64>,
    absorber: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(model: &MolecularModel, cap: Option<CapSpec>) -> Result<Self> {
        Self::from_arrays(
            &model.grid,
            model.reduced_mass,
            model.potential_on_grid()?,
            model.dipole_on_grid()?,
            cap,
        )
    }

    pub fn from_arrays(
        grid: &SpatialGrid,
        mass: f64,
        potential: Vec<f64>,
        dipole: Vec<f64>,
        cap: Option<CapSpec>,
    ) -> Result<Self> {
        let n = grid.len();
        if potential.len() != n || dipole.len() != n {
            return Err(Error::GridMismatch(format!(
                "potential/dipole have {}/{} samples, grid has {n}",
                potential.len(),
                dipole.len()
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Propagator {
            grid: grid.clone(),
            mass,
            potential,
            dipole,
            absorber: cap.map(|c| c.strength(grid)).unwrap_or_else(|| vec![0.0; n]),
            wavenumbers: grid.wavenumbers(),
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn fft(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Inverse transform including the 1/N normalization.
    fn ifft(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    fn half_kinetic(&self, buf: &mut [Complex64], h: f64) {
        let f = -0.5 * h / (2.0 * self.mass);
        for (c, k) in buf.iter_mut().zip(&self.wavenumbers) {
            *c *= Complex64::from_polar(1.0, f * k * k);
        }
    }

    fn potential_phase(&self, buf: &mut [Complex64], field: f64, h: f64) {
        for (j, c) in buf.iter_mut().enumerate() {
            let v = self.potential[j] - self.dipole[j] * field;
            let damp = (-self.absorber[j] * h).exp();
            *c *= Complex64::from_polar(damp, -v * h);
        }
    }

    /// One unfused second-order step of size `h` starting at `psi.time`.
    pub fn step(&mut self, psi: &mut Wavefunction, train: &PulseTrain, h: f64) -> Result<()> {
        self.grid.check_same(&psi.grid)?;
        let field = train.field(psi.time + 0.5 * h);
        let mut buf = std::mem::take(&mut psi.values);
        self.fft(&mut buf);
        self.half_kinetic(&mut buf, h);
        self.ifft(&mut buf);
        self.potential_phase(&mut buf, field, h);
        self.fft(&mut buf);
        self.half_kinetic(&mut buf, h);
        self.ifft(&mut buf);
        psi.values = buf;
        psi.time += h;
        Ok(())
    }

    /// Probability current at the grid point nearest `x_point`, with the
    /// derivative taken spectrally. Real and imaginary parts are
    /// differentiated separately so that J(ψ*) = −J(ψ) holds exactly.
    pub fn flux(&mut self, psi: &Wavefunction, x_point: f64) -> f64 {
        let probe = FluxProbe::new(&self.grid, x_point, self.mass);
        let mut re: Vec<Complex64> = psi.values.iter().map(|c| Complex64::new(c.re, 0.0)).collect();
        let mut im: Vec<Complex64> = psi.values.iter().map(|c| Complex64::new(c.im, 0.0)).collect();
        self.fft(&mut re);
        self.fft(&mut im);
        let d_re = probe.derivative(&re, &self.wavenumbers).re;
        let d_im = probe.derivative(&im, &self.wavenumbers).re;
        let p = psi.values[probe.index];
        (p.re * d_im - p.im * d_re) / self.mass
    }
}

/// Evaluates ψ and ∂ψ at one point directly from momentum-space amplitudes.
struct FluxProbe {
    index: usize,
    phases: Vec<Complex64>,
    mass: f64,
}

impl FluxProbe {
    fn new(grid: &SpatialGrid, x_point: f64, mass: f64) -> Self {
        let index = grid.nearest_index(x_point);
        let n = grid.len() as f64;
        let offset = index as f64 * grid.dx();
        let phases = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0 / n, k * offset))
            .collect();
        FluxProbe { index, phases, mass }
    }

    fn derivative(&self, psi_k: &[Complex64], wavenumbers: &[f64]) -> Complex64 {
        psi_k
            .iter()
            .zip(&self.phases)
            .zip(wavenumbers)
            .map(|((c, e), k)| c * e * Complex64::new(0.0, *k))
            .sum()
    }

    fn eval(&self, psi_k: &[Complex64], wavenumbers: &[f64]) -> f64 {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi = Complex64::new(0.0, 0.0);
        for ((c, e), k) in psi_k.iter().zip(&self.phases).zip(wavenumbers) {
            let t = c * e;
            psi += t;
            dpsi += t * Complex64::new(0.0, *k);
        }
        (psi.conj() * dpsi).im / self.mass
    }
}

/// Observables at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// |c_j|² for every bound level.
    pub populations: Vec<f64>,
    pub bound: f64,
    /// norm² − Σ|c_j|².
    pub continuum: f64,
    /// Norm left of the flux point minus the bound population.
    pub continuum_inside: f64,
    pub norm: f64,
    /// Norm at and beyond the flux point.
    pub norm_beyond: f64,
    /// 1 − norm², the probability removed by the CAP.
    pub absorbed: f64,
    pub flux: f64,
    pub cumulative_flux: f64,
}

impl Snapshot {
    /// bound + continuum_inside + cumulative_flux − 1: zero when the flux
    /// through the monitoring point accounts for all probability that left.
    pub fn closure_error(&self) -> f64 {
        self.bound + self.continuum_inside + self.cumulative_flux - 1.0
    }

    pub fn argmax_excited(&self) -> Option<usize> {
        argmax_from(&self.populations, 1)
    }
}

fn argmax_from(p: &[f64], start: usize) -> Option<usize> {
    (start..p.len()).fold(None, |best: Option<usize>, j| match best {
        Some(b) if p[b] >= p[j] => Some(b),
        _ => Some(j),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRecord {
    pub j: usize,
    pub k: usize,
    pub field_label: String,
    pub times: Vec<f64>,
    pub series: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub field_labels: Vec<String>,
    pub n_levels: usize,
    pub snapshots: Vec<Snapshot>,
    /// c_j at each snapshot, when contributions were recorded.
    pub amplitudes: Option<Vec<Vec<Complex64>>>,
    /// ΔC_j^(k) per snapshot, flattened as [(j·n + k)·n_fields + f].
    pub contribution_series: Option<Vec<Vec<f64>>>,
    pub flux_point: f64,
    pub flux_dissociation: f64,
    pub absorbed_norm: f64,
    pub norm_beyond: f64,
    /// absorbed_norm + norm_beyond.
    pub absorbed_dissociation: f64,
    /// The flux integral clamped to [0, 1].
    pub dissociation_probability: f64,
    pub final_state: Wavefunction,
    pub steps: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl PropagationResult {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("at least one snapshot")
    }

    pub fn final_populations(&self) -> &[f64] {
        &self.final_snapshot().populations
    }

    pub fn max_closure_error(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.closure_error().abs())
            .fold(0.0, f64::max)
    }

    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("t_au");
        for j in 0..self.n_levels {
            let _ = write!(out, ",p{j}");
        }
        out.push_str(",continuum,absorbed,flux,cumulative_dissociation\n");
        for s in &self.snapshots {
            let _ = write!(out, "{:.10e}", s.time);
            for p in &s.populations {
                let _ = write!(out, ",{p:.10e}");
            }
            let _ = writeln!(
                out,
                ",{:.10e},{:.10e},{:.10e},{:.10e}",
                s.continuum, s.absorbed, s.flux, s.cumulative_flux
            );
        }
        out
    }

    /// Per-source, per-field ΔC_j^(k)(t) series for target level `j`.
    pub fn contributions(&self, j: usize) -> Result<Vec<ContributionRecord>> {
        contributions(self, j)
    }

    pub fn contribution_csv(&self, j: usize) -> Result<String> {
        let records = self.contributions(j)?;
        let mut out = String::from("t_au,j,k,field_label,delta_c\n");
        for r in &records {
            for (t, v) in r.times.iter().zip(&r.series) {
                let _ = writeln!(out, "{t:.10e},{},{},{},{v:.10e}", r.j, r.k, r.field_label);
            }
        }
        Ok(out)
    }

    /// max_t |Σ_k,f ΔC_j^(k)(t) − (|c_j|(t) − |c_j|(t_start))|.
    pub fn reconstruction_error(&self, j: usize) -> Result<f64> {
        let series = self
            .contribution_series
            .as_ref()
            .ok_or(Error::ContributionsNotRecorded)?;
        if j >= self.n_levels {
            return Err(Error::LevelOutOfRange { level: j, available: self.n_levels });
        }
        let n = self.n_levels;
        let nf = self.field_labels.len();
        let c0 = self.snapshots[0].populations[j].sqrt();
        let mut worst: f64 = 0.0;
        for (snap, row) in self.snapshots.iter().zip(series) {
            let total: f64 = row[j * n * nf..(j + 1) * n * nf].iter().sum();
            worst = worst.max((total - (snap.populations[j].sqrt() - c0)).abs());
        }
        Ok(worst)
    }
}

pub fn contributions(result: &PropagationResult, j: usize) -> Result<Vec<ContributionRecord>> {
    let series = result
        .contribution_series
        .as_ref()
        .ok_or(Error::ContributionsNotRecorded)?;
    let n = result.n_levels;
    if j >= n {
        return Err(Error::LevelOutOfRange { level: j, available: n });
    }
    let nf = result.field_labels.len();
    let times: Vec<f64> = result.snapshots.iter().map(|s| s.time).collect();
    let mut out = Vec::new();
    for k in (0..n).filter(|&k| k != j) {
        for (f, label) in result.field_labels.iter().enumerate() {
            let idx = (j * n + k) * nf + f;
            out.push(ContributionRecord {
                j,
                k,
                field_label: label.clone(),
                times: times.clone(),
                series: series.iter().map(|row| row[idx]).collect(),
            });
        }
    }
    Ok(out)
}

/// Running integrals of Re(i μ_jk E_f c_k e^{−iθ_j}) for all (j, k, f).
struct ContributionAccumulator {
    n: usize,
    nf: usize,
    tdm: TdmMatrix,
    theta: Vec<f64>,
    last_integrand: Vec<f64>,
    totals: Vec<f64>,
}

impl ContributionAccumulator {
    fn new(tdm: TdmMatrix, nf: usize, c: &[Complex64], fields: &[f64]) -> Self {
        let n = tdm.size();
        let mut acc = ContributionAccumulator {
            n,
            nf,
            tdm,
            theta: vec![0.0; n],
            last_integrand: vec![0.0; n * n * nf],
            totals: vec![0.0; n * n * nf],
        };
        acc.update_phases(c);
        acc.last_integrand = acc.integrand(c, fields);
        acc
    }

    fn update_phases(&mut self, c: &[Complex64]) {
        for (th, cj) in self.theta.iter_mut().zip(c) {
            if cj.norm() >= PHASE_FLOOR {
                *th = cj.arg();
            }
        }
    }

    fn integrand(&self, c: &[Complex64], fields: &[f64]) -> Vec<f64> {
        let (n, nf) = (self.n, self.nf);
        let mut out = vec![0.0; n * n * nf];
        for j in 0..n {
            let rot = Complex64::from_polar(1.0, -self.theta[j]) * Complex64::i();
            for k in (0..n).filter(|&k| k != j) {
                let base = (rot * c[k]).re * self.tdm.get(j, k);
                for (f, e) in fields.iter().enumerate() {
                    out[(j * n + k) * nf + f] = base * e;
                }
            }
        }
        out
    }

    fn advance(&mut self, c: &[Complex64], fields: &[f64], h: f64) {
        self.update_phases(c);
        let next = self.integrand(c, fields);
        for ((t, a), b) in self.totals.iter_mut().zip(&self.last_integrand).zip(&next) {
            *t += 0.5 * h * (a + b);
        }
        self.last_integrand = next;
    }
}

/// Full time loop from the ground state over the pulse window.
pub fn propagate(
    model: &MolecularModel,
    spectrum: &BoundSpectrum,
    train: &PulseTrain,
    config: &PropagationConfig,
) -> Result<PropagationResult> {
    let (t_start, _) = match config.window {
        Some(w) => w,
        None => train.simulation_window()?,
    };
    let psi0 = initialize_ground_state(spectrum, t_start);
    propagate_from(model, spectrum, train, config, psi0)
}

/// Like [`propagate`], starting from an arbitrary state at the window start.
pub fn propagate_from(
    model: &MolecularModel,
    spectrum: &BoundSpectrum,
    train: &PulseTrain,
    config: &PropagationConfig,
    initial: Wavefunction,
) -> Result<PropagationResult> {
    spectrum.grid.check_same(&model.grid)?;
    spectrum.grid.check_same(&initial.grid)?;
    config.validate(&model.grid)?;
    let (t_start, t_end) = match config.window {
        Some(w) => w,
        None => train.simulation_window()?,
    };
    let grid = model.grid.clone();
    let n_grid = grid.len();
    let dx = grid.dx();
    let dt = config.dt;

    let span = t_end - t_start;
    let full = (span / dt).floor() as usize;
    let rem = span - full as f64 * dt;
    let partial = rem > 1e-9 * dt;
    let n_steps = full + usize::from(partial);
    let step_size = |i: usize| if i < full { dt } else { rem };
    let stride = config
        .record_stride
        .unwrap_or_else(|| n_steps.div_ceil(MAX_SNAPSHOTS).max(1));

    let mut prop = Propagator::new(model, config.cap)?;
    let flux_point = config.resolved_flux_point(&grid);
    let probe = FluxProbe::new(&grid, flux_point, model.reduced_mass);
    let beyond_from = probe.index;

    let n_levels = spectrum.n_bound;
    let nf = train.len().max(1);
    let labels = if train.is_empty() { vec!["field".to_string()] } else { train.labels() };

    // Momentum-space images of the bound states for Parseval projections.
    let basis_k: Vec<Vec<Complex64>> = spectrum.wavefunctions[..n_levels]
        .iter()
        .map(|phi| {
            let mut b: Vec<Complex64> = phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            prop.fft(&mut b);
            b.iter_mut().for_each(|c| *c = c.conj() * (dx / n_grid as f64));
            b
        })
        .collect();
    let project = |psi_k: &[Complex64]| -> Vec<Complex64> {
        basis_k
            .iter()
            .map(|b| b.iter().zip(psi_k).map(|(a, c)| a * c).sum())
            .collect()
    };

    let mut fields = vec![0.0; nf];
    let eval_fields = |t: f64, out: &mut [f64]| {
        if train.is_empty() {
            out[0] = 0.0;
        } else {
            train.component_fields(t, out);
        }
    };

    let mut psi = initial.values.clone();
    prop.fft(&mut psi);
    let mut flux = probe.eval(&psi, &prop.wavenumbers);
    let mut cumulative = 0.0;
    let mut snapshots = Vec::new();
    let mut amplitudes = config.record_contributions.then(Vec::new);
    let mut contrib_series = config.record_contributions.then(Vec::new);

    let mut accumulator = if config.record_contributions {
        let mu = model.dipole_on_grid()?;
        let tdm = transition_dipoles_with(spectrum, &mu)?;
        eval_fields(t_start, &mut fields);
        Some(ContributionAccumulator::new(tdm, nf, &project(&psi), &fields))
    } else {
        None
    };

    let mut position = vec![Complex64::new(0.0, 0.0); n_grid];
    let mut record = |prop: &mut Propagator,
                      psi_k: &[Complex64],
                      time: f64,
                      flux: f64,
                      cumulative: f64,
                      acc: &Option<ContributionAccumulator>,
                      snapshots: &mut Vec<Snapshot>,
                      amplitudes: &mut Option<Vec<Vec<Complex64>>>,
                      contrib: &mut Option<Vec<Vec<f64>>>| {
        position.copy_from_slice(psi_k);
        prop.ifft(&mut position);
        let c = project(psi_k);
        let populations: Vec<f64> = c.iter().map(|v| v.norm_sqr()).collect();
        let bound: f64 = populations.iter().sum();
        let norm: f64 = position.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
        // The cell at the monitoring point is split evenly between the two sides.
        let norm_beyond: f64 = (position[beyond_from + 1..].iter().map(|v| v.norm_sqr()).sum::<f64>()
            + 0.5 * position[beyond_from].norm_sqr())
            * dx;
        snapshots.push(Snapshot {
            time,
            populations,
            bound,
            continuum: norm - bound,
            continuum_inside: norm - norm_beyond - bound,
            norm,
            norm_beyond,
            absorbed: 1.0 - norm,
            flux,
            cumulative_flux: cumulative,
        });
        if let Some(a) = amplitudes.as_mut() {
            a.push(c);
        }
        if let (Some(s), Some(acc)) = (contrib.as_mut(), acc.as_ref()) {
            s.push(acc.totals.clone());
        }
    };

    record(
        &mut prop, &psi, t_start, flux, cumulative, &accumulator,
        &mut snapshots, &mut amplitudes, &mut contrib_series,
    );
    if n_steps > 0 {
        prop.half_kinetic(&mut psi, step_size(0));
    }
    prop.ifft(&mut psi);

    let mut time = t_start;
    for i in 0..n_steps {
        let h = step_size(i);
        let field = train.field(time + 0.5 * h);
        prop.potential_phase(&mut psi, field, h);
        prop.fft(&mut psi);
        prop.half_kinetic(&mut psi, h);
        time = if i + 1 == n_steps { t_end } else { t_start + (i + 1) as f64 * dt };

        let norm_k: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx / n_grid as f64;
        if !norm_k.is_finite() {
            let max_abs = psi
                .iter()
                .map(|c| c.norm())
                .fold(0.0, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) });
            return Err(Error::NonFinite { step: i + 1, time, max_abs });
        }
        let new_flux = probe.eval(&psi, &prop.wavenumbers);
        cumulative += 0.5 * h * (flux + new_flux);
        flux = new_flux;

        if let Some(acc) = accumulator.as_mut() {
            eval_fields(time, &mut fields);
            acc.advance(&project(&psi), &fields, h);
        }
        if (i + 1) % stride == 0 || i + 1 == n_steps {
            record(
                &mut prop, &psi, time, flux, cumulative, &accumulator,
                &mut snapshots, &mut amplitudes, &mut contrib_series,
            );
        }
        if i + 1 < n_steps {
            prop.half_kinetic(&mut psi, step_size(i + 1));
        }
        prop.ifft(&mut psi);
    }

    let last = snapshots.last().expect("initial snapshot").clone();
    Ok(PropagationResult {
        field_labels: labels,
        n_levels,
        snapshots,
        amplitudes,
        contribution_series: contrib_series,
        flux_point,
        flux_dissociation: cumulative,
        absorbed_norm: last.absorbed,
        norm_beyond: last.norm_beyond,
        absorbed_dissociation: last.absorbed + last.norm_beyond,
        dissociation_probability: cumulative.clamp(0.0, 1.0),
        final_state: Wavefunction { grid, values: psi, time: t_end },
        steps: n_steps,
        t_start,
        t_end,
    })
}
