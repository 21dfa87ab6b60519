//! Run configuration: a TOML file whose physical quantities carry unit tags
//! ("6.0 MV/cm", "3e-8 fs^-2"). Values are converted to atomic units once,
//! in [`RunConfig::normalize`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlc_core::curves::{DipoleCurve, PotentialCurve};
use vlc_core::model::{preset, MolecularModel};
use vlc_core::optimize::{BoConfig, CmaesConfig, ObjectiveVariant};
use vlc_core::propagator::{CapSpec, PropagationConfig};
use vlc_core::pulse::CarrierMode;
use vlc_core::units::{Dimension, Quantity, Unit, AU_DIPOLE_CM, BOHR_M, DEBYE_CM};
use vlc_core::SpatialGrid;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub molecule: MoleculeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsp: Option<DspSection>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSection>,
    #[serde(default)]
    pub phase_sweep: PhaseSweepSection,
    #[serde(default)]
    pub efficiency: EfficiencySection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_mass: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole: Option<DipoleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// ½mω²(r − r_e)².
    Harmonic { omega: String, r_e: String },
    /// D_e[(1 − e^{−a(r−r_e)})² − 1] with a = ω√(m/2D_e).
    Morse { d_e: String, omega: String, r_e: String },
    /// Two-column file in bohr and hartree.
    Tabulated { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DipoleSpec {
    Linear {
        slope: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intercept: Option<String>,
    },
    Mecke { mu_e: String, slope: String, r_e: String },
    /// Σ c_k (r − center)^k with coefficients in atomic units.
    Polynomial { center: String, coeffs_au: Vec<f64> },
    /// Two-column file in bohr and atomic dipole units.
    Tabulated { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub x_min: String,
    pub x_max: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default = "default_threshold")]
    pub rung_threshold: f64,
}

fn default_n_states() -> usize {
    60
}

fn default_threshold() -> f64 {
    vlc_core::spectrum::DEFAULT_RUNG_THRESHOLD
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { n_states: default_n_states(), rung_threshold: default_threshold() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<String>,
    /// Set to false to run without an absorber.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_strength: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_onset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_point: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<CarrierMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub e0: String,
    pub alpha: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<String>,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspSection {
    pub e0: String,
    pub alpha: String,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rung: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bo_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bo_initial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmaes_generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmaes_lambda: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmaes_sigma0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Single,
    Dsp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub e0_min: String,
    pub e0_max: String,
    pub e0_points: usize,
    pub alpha_min: String,
    pub alpha_max: String,
    pub alpha_points: usize,
    pub mode: ScanKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega01: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_slope: Option<String>,
    /// Transitions [first, last) used when ω0 and β are fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_levels: Option<[usize; 2]>,
    pub e0_min: String,
    pub e0_max: String,
    pub e0_points: usize,
    pub alpha_min: String,
    pub alpha_max: String,
    pub alpha_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSweepSection {
    #[serde(default = "default_phase_points")]
    pub points: usize,
}

fn default_phase_points() -> usize {
    9
}

impl Default for PhaseSweepSection {
    fn default() -> Self {
        PhaseSweepSection { points: default_phase_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_section: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub areal_density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissociation: Option<f64>,
}

/// Pulse parameters in atomic units; t0 and ω0 fall back to 4σ and ε1 − ε0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseAu {
    pub e0: f64,
    pub alpha: f64,
    pub e0_mv_cm: f64,
    pub alpha_fs2: f64,
    pub t0: Option<f64>,
    pub omega0: Option<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DspAu {
    pub e0: f64,
    pub alpha: f64,
    pub e0_mv_cm: f64,
    pub alpha_fs2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta_t0: f64,
    pub phase: f64,
    pub rung: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanAu {
    pub e0_values_mv_cm: Vec<f64>,
    pub alpha_values_fs2: Vec<f64>,
    pub mode: ScanKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeAu {
    pub omega0: Option<f64>,
    pub beta: Option<f64>,
    pub omega01: Option<f64>,
    pub dipole_slope: Option<f64>,
    pub fit_levels: [usize; 2],
    pub e0_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyAu {
    pub cross_section_cm2: f64,
    pub areal_density_mol_cm2: f64,
    pub dissociation: Option<f64>,
}

/// Fully resolved configuration with every quantity in atomic units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub model: MolecularModel,
    pub n_states: usize,
    pub rung_threshold: f64,
    pub propagation: PropagationConfig,
    pub carrier: CarrierMode,
    pub pulse: Option<PulseAu>,
    pub dsp: Option<DspAu>,
    pub objective: ObjectiveVariant,
    pub bo: BoConfig,
    pub cmaes: CmaesConfig,
    pub scan: Option<ScanAu>,
    pub regime: Option<RegimeAu>,
    pub phase_points: usize,
    pub efficiency: EfficiencyAu,
}

fn quantity(field: &str, text: &str, dim: Dimension) -> Result<f64, CliError> {
    Quantity::parse_with(text, dim)
        .map(|q| q.atomic())
        .map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn quantity_in(field: &str, text: &str, dim: Dimension, unit: Unit) -> Result<f64, CliError> {
    let q = Quantity::parse_with(text, dim).map_err(|e| CliError::Config(format!("{field}: {e}")))?;
    q.in_unit(unit).map_err(|e| CliError::Config(format!("{field}: {e}")))
}

/// "<value> <unit>" for quantities whose units are products of base units.
fn compound(field: &str, text: &str, table: &[(&str, f64)]) -> Result<f64, CliError> {
    let text = text.trim();
    let split = text.find(char::is_whitespace).ok_or_else(|| {
        CliError::Config(format!("{field}: '{text}' needs a unit (one of {})", names(table)))
    })?;
    let (v, u) = text.split_at(split);
    let value: f64 = v
        .parse()
        .map_err(|_| CliError::Config(format!("{field}: '{v}' is not a number")))?;
    let u = u.trim();
    table
        .iter()
        .find(|(name, _)| *name == u)
        .map(|(_, f)| value * f)
        .ok_or_else(|| CliError::Config(format!("{field}: unknown unit '{u}' (one of {})", names(table))))
}

fn config_err(ctx: &'static str) -> impl Fn(vlc_core::Error) -> CliError {
    move |e| CliError::Config(format!("{ctx}: {e}"))
}

fn names(table: &[(&str, f64)]) -> String {
    table.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

fn dipole_slope(field: &str, text: &str) -> Result<f64, CliError> {
    let debye_au = DEBYE_CM / AU_DIPOLE_CM;
    let angstrom_au = 1e-10 / BOHR_M;
    compound(
        field,
        text,
        &[("au", 1.0), ("D/Å", debye_au / angstrom_au), ("D/A", debye_au / angstrom_au), ("D/bohr", debye_au)],
    )
}

fn log_range(field: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(CliError::Config(format!("{field}: need 0 < min <= max and at least one point")));
    }
    Ok(vlc_core::regime::log_grid(lo, hi, n))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Resolve units and build the model. Relative curve paths are taken
    /// relative to `base_dir`.
    pub fn normalize(&self, base_dir: &Path) -> Result<NormalizedConfig, CliError> {
        let model = self.build_model(base_dir)?;
        let p = &self.propagation;
        let mut propagation = PropagationConfig {
            dt: p.dt.as_deref().map(|t| quantity("propagation.dt", t, Dimension::Time)).transpose()?.unwrap_or(10.0),
            flux_point: p
                .flux_point
                .as_deref()
                .map(|t| quantity("propagation.flux_point", t, Dimension::Length))
                .transpose()?,
            cap: None,
            record_stride: p.record_stride,
            record_contributions: false,
            window: None,
        };
        if p.cap.unwrap_or(true) {
            let mut cap = CapSpec::default();
            if let Some(s) = &p.cap_strength {
                cap.xi = quantity("propagation.cap_strength", s, Dimension::Energy)?;
            }
            cap.x_onset = match &p.cap_onset {
                Some(s) => quantity("propagation.cap_onset", s, Dimension::Length)?,
                None => model.grid.x_min() + 0.8 * model.grid.length(),
            };
            propagation.cap = Some(cap);
        }
        match (&p.window_start, &p.window_end) {
            (Some(a), Some(b)) => {
                propagation.window = Some((
                    quantity("propagation.window_start", a, Dimension::Time)?,
                    quantity("propagation.window_end", b, Dimension::Time)?,
                ))
            }
            (None, None) => {}
            _ => return Err(CliError::Config("propagation: give both window_start and window_end".into())),
        }
        propagation.validate(&model.grid).map_err(|e| CliError::Config(format!("propagation: {e}")))?;

        let pulse = self
            .pulse
            .as_ref()
            .map(|s| -> Result<PulseAu, CliError> {
                Ok(PulseAu {
                    e0: quantity("pulse.e0", &s.e0, Dimension::Field)?,
                    alpha: quantity("pulse.alpha", &s.alpha, Dimension::InverseTimeSquared)?,
                    e0_mv_cm: quantity_in("pulse.e0", &s.e0, Dimension::Field, Unit::MegavoltPerCentimeter)?,
                    alpha_fs2: quantity_in("pulse.alpha", &s.alpha, Dimension::InverseTimeSquared, Unit::PerFemtosecondSquared)?,
                    t0: s.t0.as_deref().map(|t| quantity("pulse.t0", t, Dimension::Time)).transpose()?,
                    omega0: s.omega0.as_deref().map(|t| quantity("pulse.omega0", t, Dimension::Energy)).transpose()?,
                    gamma1: s.gamma1,
                    gamma2: s.gamma2,
                    phase: s.phase.as_deref().map(|t| quantity("pulse.phase", t, Dimension::Angle)).transpose()?.unwrap_or(0.0),
                })
            })
            .transpose()?;
        let dsp = self
            .dsp
            .as_ref()
            .map(|s| -> Result<DspAu, CliError> {
                Ok(DspAu {
                    e0: quantity("dsp.e0", &s.e0, Dimension::Field)?,
                    alpha: quantity("dsp.alpha", &s.alpha, Dimension::InverseTimeSquared)?,
                    e0_mv_cm: quantity_in("dsp.e0", &s.e0, Dimension::Field, Unit::MegavoltPerCentimeter)?,
                    alpha_fs2: quantity_in("dsp.alpha", &s.alpha, Dimension::InverseTimeSquared, Unit::PerFemtosecondSquared)?,
                    gamma1: s.gamma1,
                    gamma2: s.gamma2,
                    delta_t0: s.delta_t0.as_deref().map(|t| quantity("dsp.delta_t0", t, Dimension::Time)).transpose()?.unwrap_or(0.0),
                    phase: s.phase.as_deref().map(|t| quantity("dsp.phase", t, Dimension::Angle)).transpose()?.unwrap_or(0.0),
                    rung: s.rung,
                })
            })
            .transpose()?;

        let o = &self.optimizer;
        let bo_default = BoConfig::default();
        let bo = BoConfig {
            iterations: o.bo_iterations.unwrap_or(bo_default.iterations),
            n_initial: o.bo_initial.unwrap_or(bo_default.n_initial),
            kappa: o.kappa.unwrap_or(bo_default.kappa),
            ..bo_default
        };
        let cma_default = CmaesConfig::default();
        let cmaes = CmaesConfig {
            generations: o.cmaes_generations.unwrap_or(cma_default.generations),
            lambda: o.cmaes_lambda.unwrap_or(cma_default.lambda),
            sigma0: o.cmaes_sigma0.unwrap_or(cma_default.sigma0),
            ..cma_default
        };

        let scan = self
            .scan
            .as_ref()
            .map(|s| -> Result<ScanAu, CliError> {
                let mv = |f: &str, t: &str| quantity_in(f, t, Dimension::Field, Unit::MegavoltPerCentimeter);
                let fs = |f: &str, t: &str| quantity_in(f, t, Dimension::InverseTimeSquared, Unit::PerFemtosecondSquared);
                Ok(ScanAu {
                    e0_values_mv_cm: log_range("scan.e0", mv("scan.e0_min", &s.e0_min)?, mv("scan.e0_max", &s.e0_max)?, s.e0_points)?,
                    alpha_values_fs2: log_range(
                        "scan.alpha",
                        fs("scan.alpha_min", &s.alpha_min)?,
                        fs("scan.alpha_max", &s.alpha_max)?,
                        s.alpha_points,
                    )?,
                    mode: s.mode,
                })
            })
            .transpose()?;
        let regime = self
            .regime
            .as_ref()
            .map(|s| -> Result<RegimeAu, CliError> {
                let f = |n: &str, t: &str| quantity(n, t, Dimension::Field);
                let a = |n: &str, t: &str| quantity(n, t, Dimension::InverseTimeSquared);
                Ok(RegimeAu {
                    omega0: s.omega0.as_deref().map(|t| quantity("regime.omega0", t, Dimension::Energy)).transpose()?,
                    beta: s.beta,
                    omega01: s.omega01.as_deref().map(|t| quantity("regime.omega01", t, Dimension::Energy)).transpose()?,
                    dipole_slope: s.dipole_slope.as_deref().map(|t| dipole_slope("regime.dipole_slope", t)).transpose()?,
                    fit_levels: s.fit_levels.unwrap_or([0, 10]),
                    e0_values: log_range("regime.e0", f("regime.e0_min", &s.e0_min)?, f("regime.e0_max", &s.e0_max)?, s.e0_points)?,
                    alpha_values: log_range(
                        "regime.alpha",
                        a("regime.alpha_min", &s.alpha_min)?,
                        a("regime.alpha_max", &s.alpha_max)?,
                        s.alpha_points,
                    )?,
                })
            })
            .transpose()?;
        let e = &self.efficiency;
        let efficiency = EfficiencyAu {
            cross_section_cm2: e
                .cross_section
                .as_deref()
                .map(|t| compound("efficiency.cross_section", t, &[("cm^2", 1.0), ("m^2", 1e4), ("nm^2", 1e-14)]))
                .transpose()?
                .unwrap_or(1.0),
            areal_density_mol_cm2: e
                .areal_density
                .as_deref()
                .map(|t| compound("efficiency.areal_density", t, &[("mol/cm^2", 1.0), ("mol/m^2", 1e-4)]))
                .transpose()?
                .unwrap_or(1.0),
            dissociation: e.dissociation,
        };
        Ok(NormalizedConfig {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            model,
            n_states: self.eigen.n_states,
            rung_threshold: self.eigen.rung_threshold,
            propagation,
            carrier: p.carrier.unwrap_or_default(),
            pulse,
            dsp,
            objective: o.objective.unwrap_or_default(),
            bo,
            cmaes,
            scan,
            regime,
            phase_points: self.phase_sweep.points,
            efficiency,
        })
    }

    fn build_model(&self, base_dir: &Path) -> Result<MolecularModel, CliError> {
        let m = &self.molecule;
        let grid = self
            .grid
            .as_ref()
            .map(|g| -> Result<SpatialGrid, CliError> {
                SpatialGrid::new(
                    g.points,
                    quantity("grid.x_min", &g.x_min, Dimension::Length)?,
                    quantity("grid.x_max", &g.x_max, Dimension::Length)?,
                )
                .map_err(|e| CliError::Config(format!("grid: {e}")))
            })
            .transpose()?;
        if let Some(name) = &m.preset {
            if m.reduced_mass.is_some() || m.potential.is_some() || m.dipole.is_some() {
                return Err(CliError::Config(
                    "molecule: a preset cannot be combined with reduced_mass, potential or dipole".into(),
                ));
            }
            let model = preset(name).map_err(config_err("molecule.preset"))?;
            return match grid {
                Some(g) => model.with_grid(g).map_err(config_err("grid")),
                None => Ok(model),
            };
        }
        let (Some(mass), Some(pot), Some(dip)) = (&m.reduced_mass, &m.potential, &m.dipole) else {
            return Err(CliError::Config(
                "molecule: give either a preset or reduced_mass, potential and dipole".into(),
            ));
        };
        let grid = grid.ok_or_else(|| CliError::Config("grid: required for a custom molecule".into()))?;
        let mass = quantity("molecule.reduced_mass", mass, Dimension::Mass)?;
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p.to_path_buf()
            }
        };
        let potential = match pot {
            PotentialSpec::Harmonic { omega, r_e } => {
                let w = quantity("molecule.potential.omega", omega, Dimension::Energy)?;
                PotentialCurve::harmonic(mass * w * w, quantity("molecule.potential.r_e", r_e, Dimension::Length)?)
            }
            PotentialSpec::Morse { d_e, omega, r_e } => {
                let d = quantity("molecule.potential.d_e", d_e, Dimension::Energy)?;
                let w = quantity("molecule.potential.omega", omega, Dimension::Energy)?;
                PotentialCurve::morse(d, w * (mass / (2.0 * d)).sqrt(), quantity("molecule.potential.r_e", r_e, Dimension::Length)?)
            }
            PotentialSpec::Tabulated { path } => PotentialCurve::load_tabulated(resolve(path)),
        }
        .map_err(|e| match e {
            vlc_core::Error::Io(io) => CliError::Io(format!("molecule.potential: {io}")),
            other => CliError::Config(format!("molecule.potential: {other}")),
        })?;
        let dipole = match dip {
            DipoleSpec::Linear { slope, intercept } => Ok(DipoleCurve::Linear {
                slope: dipole_slope("molecule.dipole.slope", slope)?,
                intercept: intercept
                    .as_deref()
                    .map(|t| quantity("molecule.dipole.intercept", t, Dimension::Dipole))
                    .transpose()?
                    .unwrap_or(0.0),
            }),
            DipoleSpec::Mecke { mu_e, slope, r_e } => DipoleCurve::mecke_matching(
                quantity("molecule.dipole.mu_e", mu_e, Dimension::Dipole)?,
                dipole_slope("molecule.dipole.slope", slope)?,
                quantity("molecule.dipole.r_e", r_e, Dimension::Length)?,
            ),
            DipoleSpec::Polynomial { center, coeffs_au } => Ok(DipoleCurve::Polynomial {
                center: quantity("molecule.dipole.center", center, Dimension::Length)?,
                coeffs: coeffs_au.clone(),
            }),
            DipoleSpec::Tabulated { path } => DipoleCurve::load_tabulated(resolve(path)),
        }
        .map_err(|e| match e {
            vlc_core::Error::Io(io) => CliError::Io(format!("molecule.dipole: {io}")),
            other => CliError::Config(format!("molecule.dipole: {other}")),
        })?;
        MolecularModel::new(m.name.clone().unwrap_or_else(|| "custom".into()), mass, potential, dipole, grid)
            .map_err(config_err("molecule"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
[molecule]
preset = "LiH"
[grid]
points = 512
x_min = "1.0 bohr"
x_max = "15 bohr"
[propagation]
dt = "10 au"
cap_onset = "12 bohr"
[pulse]
e0 = "9 MV/cm"
alpha = "1e-8 fs^-2"
gamma1 = 0.2
gamma2 = 0.1
[regime]
omega0 = "0.0068 au"
beta = 0.0176
dipole_slope = "0.354 au"
e0_min = "2 MV/cm"
e0_max = "20 MV/cm"
e0_points = 3
alpha_min = "1e-8 fs^-2"
alpha_max = "1e-7 fs^-2"
alpha_points = 3
"#;

    #[test]
    fn round_trip() {
        let a = RunConfig::parse(SAMPLE).unwrap();
        let b = RunConfig::parse(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
        let dir = Path::new(".");
        assert_eq!(a.normalize(dir).unwrap(), b.normalize(dir).unwrap());
    }

    #[test]
    fn units_are_converted() {
        let n = RunConfig::parse(SAMPLE).unwrap().normalize(Path::new(".")).unwrap();
        let p = n.pulse.unwrap();
        assert!((p.e0_mv_cm - 9.0).abs() < 1e-12);
        assert!((p.alpha_fs2 - 1e-8).abs() < 1e-20);
        assert_eq!(n.propagation.dt, 10.0);
        assert_eq!(n.model.grid.len(), 512);
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = SAMPLE.replace("gamma2 = 0.1", "gamma2 = 0.1\ngama3 = 1.0");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("gama3"), "{msg}");
    }

    #[test]
    fn missing_unit_is_rejected() {
        let bad = SAMPLE.replace("\"9 MV/cm\"", "\"9\"");
        let err = RunConfig::parse(&bad).unwrap().normalize(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("pulse.e0"), "{err}");
        let wrong = SAMPLE.replace("\"9 MV/cm\"", "\"9 fs\"");
        assert!(RunConfig::parse(&wrong).unwrap().normalize(Path::new(".")).is_err());
    }

    #[test]
    fn slope_units() {
        let au = dipole_slope("s", "1 au").unwrap();
        let d_per_a = dipole_slope("s", "1 D/Å").unwrap();
        assert_eq!(au, 1.0);
        assert!((d_per_a - 0.208_194_34).abs() < 1e-6, "{d_per_a}");
        assert!(dipole_slope("s", "1").is_err());
    }
}
