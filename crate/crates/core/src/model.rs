//! Molecular models: reduced mass, potential and dipole curves on a grid.

use serde::{Deserialize, Serialize};

use crate::curves::{DipoleCurve, PotentialCurve};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::units::{self, Unit};

/// Isotopic masses in unified atomic mass units.
pub mod masses {
    pub const H1: f64 = 1.007_825_032_23;
    pub const LI7: f64 = 7.016_003_437;
    pub const F19: f64 = 18.998_403_162_7;
}

/// Reduced mass in electron masses for two atomic masses given in u.
pub fn reduced_mass(m1_u: f64, m2_u: f64) -> f64 {
    m1_u * m2_u / (m1_u + m2_u) * units::DALTON_ME
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularModel {
    pub name: String,
    pub reduced_mass: f64,
    pub potential: PotentialCurve,
    pub dipole: DipoleCurve,
    pub grid: SpatialGrid,
    /// Free-form provenance notes (fit formulas, chosen constants).
    #[serde(default)]
    pub notes: Vec<String>,
}

impl MolecularModel {
    /// Build a model and check that both curves evaluate on every grid point.
    pub fn new(
        name: impl Into<String>,
        reduced_mass: f64,
        potential: PotentialCurve,
        dipole: DipoleCurve,
        grid: SpatialGrid,
    ) -> Result<Self> {
        if !(reduced_mass > 0.0 && reduced_mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reduced mass must be positive, got {reduced_mass}"
            )));
        }
        let model = MolecularModel {
            name: name.into(),
            reduced_mass,
            potential,
            dipole,
            grid,
            notes: Vec::new(),
        };
        model.potential_on_grid()?;
        model.dipole_on_grid()?;
        Ok(model)
    }

    pub fn with_grid(&self, grid: SpatialGrid) -> Result<Self> {
        let mut m = MolecularModel::new(
            self.name.clone(),
            self.reduced_mass,
            self.potential.clone(),
            self.dipole.clone(),
            grid,
        )?;
        m.notes = self.notes.clone();
        Ok(m)
    }

    pub fn eval_potential(&self, x: f64) -> Result<f64> {
        self.potential.eval(x)
    }

    pub fn eval_dipole(&self, x: f64) -> Result<f64> {
        self.dipole.eval(x)
    }

    pub fn potential_on_grid(&self) -> Result<Vec<f64>> {
        self.potential.eval_grid(&self.grid)
    }

    pub fn dipole_on_grid(&self) -> Result<Vec<f64>> {
        self.dipole.eval_grid(&self.grid)
    }

    /// Potential at the right grid edge, used as the dissociation asymptote.
    pub fn asymptote(&self) -> Result<f64> {
        self.potential.eval(self.grid.x_max())
    }
}

/// Morse parameters reconstructed from spectroscopic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseFit {
    pub curve: PotentialCurve,
    /// Well depth in hartree.
    pub d_e: f64,
    /// Range parameter in 1/bohr.
    pub a: f64,
    /// Equilibrium distance in bohr.
    pub r_e: f64,
    /// Harmonic frequency in hartree.
    pub omega_e: f64,
    pub reduced_mass: f64,
    pub formulas: Vec<String>,
}

impl MorseFit {
    /// Closed-form Morse level energy relative to the well bottom, minus D_e.
    pub fn level_energy(&self, n: usize) -> f64 {
        let v = n as f64 + 0.5;
        self.omega_e * v - (self.omega_e * v).powi(2) / (4.0 * self.d_e) - self.d_e
    }

    /// floor(sqrt(2 m D_e)/a - 1/2) + 1.
    pub fn analytic_level_count(&self) -> usize {
        let lambda = (2.0 * self.reduced_mass * self.d_e).sqrt() / self.a;
        (lambda - 0.5).floor() as usize + 1
    }
}

/// Morse curve from a table row: D0 in eV, ω_e in cm^-1, r_e in angstrom,
/// reduced mass in atomic units.
pub fn morse_from_spectroscopy(
    d0_ev: f64,
    omega_e_cm: f64,
    r_e_angstrom: f64,
    reduced_mass: f64,
) -> Result<MorseFit> {
    for (name, v) in [
        ("D0", d0_ev),
        ("omega_e", omega_e_cm),
        ("r_e", r_e_angstrom),
        ("reduced mass", reduced_mass),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let omega_e = units::to_atomic(omega_e_cm, Unit::Wavenumber);
    let d_e = units::to_atomic(d0_ev, Unit::ElectronVolt) + 0.5 * omega_e;
    let a = omega_e * (reduced_mass / (2.0 * d_e)).sqrt();
    let r_e = units::to_atomic(r_e_angstrom, Unit::Angstrom);
    let curve = PotentialCurve::morse(d_e, a, r_e)?;
    Ok(MorseFit {
        curve,
        d_e,
        a,
        r_e,
        omega_e,
        reduced_mass,
        formulas: vec![
            "D_e = D0 + omega_e/2 (harmonic zero-point correction)".into(),
            "a = omega_e * sqrt(m / (2 D_e))".into(),
            "V(r) = D_e [(1 - exp(-a (r - r_e)))^2 - 1]".into(),
        ],
    })
}

pub const PRESETS: [&str; 2] = ["LiH", "HF"];

struct PresetRow {
    name: &'static str,
    d0_ev: f64,
    omega_e_cm: f64,
    r_e_angstrom: f64,
    mu_debye: f64,
    slope: f64,
    masses: (f64, f64),
    grid: (usize, f64, f64),
}

const LIH: PresetRow = PresetRow {
    name: "LiH",
    d0_ev: 2.496,
    omega_e_cm: 1422.22,
    r_e_angstrom: 1.5710,
    mu_debye: 5.792,
    slope: 0.354,
    masses: (masses::LI7, masses::H1),
    grid: (1024, 1.5, 15.0),
};

// The HF dipole derivative is not tabulated alongside the other constants;
// 0.31 a.u. is the experimental dμ/dr of HF near equilibrium.
const HF: PresetRow = PresetRow {
    name: "HF",
    d0_ev: 5.848,
    omega_e_cm: 4103.48,
    r_e_angstrom: 0.9168,
    mu_debye: 1.791,
    slope: 0.31,
    masses: (masses::H1, masses::F19),
    grid: (1024, 0.8, 10.0),
};

/// Morse/Mecke model of LiH or HF built from calculated spectroscopic constants.
pub fn preset(name: &str) -> Result<MolecularModel> {
    let row = match name {
        "LiH" | "lih" => &LIH,
        "HF" | "hf" => &HF,
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESETS.join(", "),
            })
        }
    };
    let m = reduced_mass(row.masses.0, row.masses.1);
    let fit = morse_from_spectroscopy(row.d0_ev, row.omega_e_cm, row.r_e_angstrom, m)?;
    let mu_e = units::to_atomic(row.mu_debye, Unit::Debye);
    let dipole = DipoleCurve::mecke_matching(mu_e, row.slope, fit.r_e)?;
    let grid = SpatialGrid::new(row.grid.0, row.grid.1, row.grid.2)?;
    let mut model = MolecularModel::new(row.name, m, fit.curve.clone(), dipole, grid)?;
    model.notes = fit.formulas.clone();
    model.notes.push(format!(
        "Mecke dipole q r exp(-r/r*) with mu(r_e) = {} D and dmu/dr(r_e) = {} a.u.",
        row.mu_debye, row.slope
    ));
    Ok(model)
}

/// The Morse fit underlying a preset, for closed-form comparisons.
pub fn preset_morse(name: &str) -> Result<MorseFit> {
    let model = preset(name)?;
    let row = if model.name == "LiH" { &LIH } else { &HF };
    morse_from_spectroscopy(row.d0_ev, row.omega_e_cm, row.r_e_angstrom, model.reduced_mass)
}
