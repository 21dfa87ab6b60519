//! Quantum ladder climbing versus classical autoresonance screening.
//!
//! Three time scales characterize a chirped drive of an anharmonic ladder:
//! T_R = √(2mω₀)/ε (Rabi), T_S = 1/√Γ (sweep) and T_NL = 2ω₀β/Γ (nonlinear).
//! Phase-locked quantum ladder climbing is expected when P2 > P1 + 1 and
//! P1 > 0.79, with P1 = T_S/T_R and P2 = T_NL/T_S. The map is a screening
//! tool, not a validated phase boundary for a particular molecule.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::sigma_from_alpha;
use crate::spectrum::{fit_anharmonicity, BoundSpectrum};
use crate::units::{self, Unit};

pub const P1_THRESHOLD: f64 = 0.79;

/// Molecular constants entering the time scales, in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeInputs {
    pub reduced_mass: f64,
    pub omega0: f64,
    pub beta: f64,
    pub dipole_slope: f64,
    /// 0→1 transition frequency. When absent, ω₀(1 − 2β) from the linear
    /// ladder model at n = 0 is used.
    pub omega01: Option<f64>,
}

impl RegimeInputs {
    pub fn omega01(&self) -> f64 {
        self.omega01.unwrap_or(self.omega0 * (1.0 - 2.0 * self.beta))
    }

    /// ω₀ and β fitted on `fit_levels` transitions, ω₀₁ taken from the spectrum.
    pub fn from_spectrum(
        spectrum: &BoundSpectrum,
        reduced_mass: f64,
        dipole_slope: f64,
        fit_levels: std::ops::Range<usize>,
    ) -> Result<Self> {
        let fit = fit_anharmonicity(spectrum, fit_levels)?;
        Ok(RegimeInputs {
            reduced_mass,
            omega0: fit.omega0,
            beta: fit.beta,
            dipole_slope,
            omega01: Some(spectrum.energies[1] - spectrum.energies[0]),
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = self.reduced_mass > 0.0
            && self.omega0 > 0.0
            && self.beta >= 0.0
            && self.dipole_slope > 0.0
            && self.omega01() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "regime inputs must be positive (beta may be zero): {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub e0: f64,
    pub sigma: f64,
    pub epsilon_eff: f64,
    pub gamma: f64,
    pub t_r: f64,
    pub t_s: f64,
    pub t_nl: f64,
    pub p1: f64,
    pub p2: f64,
    pub inputs: RegimeInputs,
}

impl RegimeParams {
    /// P2 − (P1 + 1).
    pub fn margin(&self) -> f64 {
        self.p2 - (self.p1 + 1.0)
    }

    pub fn in_region(&self) -> bool {
        self.p2 > self.p1 + 1.0 && self.p1 > P1_THRESHOLD
    }
}

/// Time scales for field amplitude `e0` and pulse width `sigma` (both a.u.),
/// with Γ = ω₀₁/(4σ), the chirp rate at γ₁ = γ₂ = 0.5.
pub fn regime_params(inputs: &RegimeInputs, e0: f64, sigma: f64) -> Result<RegimeParams> {
    inputs.validate()?;
    if !(e0 > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "E0 and sigma must be positive, got {e0}, {sigma}"
        )));
    }
    let epsilon_eff = inputs.dipole_slope * e0;
    let gamma = inputs.omega01() / (4.0 * sigma);
    let t_r = (2.0 * inputs.reduced_mass * inputs.omega0).sqrt() / epsilon_eff;
    let t_s = 1.0 / gamma.sqrt();
    let t_nl = 2.0 * inputs.omega0 * inputs.beta / gamma;
    Ok(RegimeParams {
        e0,
        sigma,
        epsilon_eff,
        gamma,
        t_r,
        t_s,
        t_nl,
        p1: t_s / t_r,
        p2: t_nl / t_s,
        inputs: *inputs,
    })
}

/// `n` logarithmically spaced values from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMap {
    /// Field amplitudes (a.u.), one per row.
    pub e0_values: Vec<f64>,
    /// Gaussian spreading parameters (a.u.⁻²), one per column.
    pub alpha_values: Vec<f64>,
    /// Row-major cells.
    pub cells: Vec<RegimeParams>,
}

impl RegimeMap {
    pub fn cell(&self, i_e0: usize, i_alpha: usize) -> &RegimeParams {
        &self.cells[i_e0 * self.alpha_values.len() + i_alpha]
    }

    /// (E0[MV/cm], alpha[fs^-2], P1, P2, margin, in_region) per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("E0[MV/cm],alpha[fs^-2],P1,P2,P2-(P1+1),in_region\n");
        for (i, &e0) in self.e0_values.iter().enumerate() {
            for (j, &alpha) in self.alpha_values.iter().enumerate() {
                let c = self.cell(i, j);
                let _ = writeln!(
                    out,
                    "{:.6e},{:.6e},{:.10e},{:.10e},{:.10e},{}",
                    units::from_atomic(e0, Unit::MegavoltPerCentimeter),
                    units::from_atomic(alpha, Unit::PerFemtosecondSquared),
                    c.p1,
                    c.p2,
                    c.margin(),
                    u8::from(c.in_region())
                );
            }
        }
        out
    }
}

pub fn regime_map(inputs: &RegimeInputs, e0_values: &[f64], alpha_values: &[f64]) -> Result<RegimeMap> {
    if e0_values.is_empty() || alpha_values.is_empty() {
        return Err(Error::InvalidParameter("regime map ranges must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(e0_values.len() * alpha_values.len());
    for &e0 in e0_values {
        for &alpha in alpha_values {
            if !(alpha > 0.0) {
                return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
            }
            cells.push(regime_params(inputs, e0, sigma_from_alpha(alpha))?);
        }
    }
    Ok(RegimeMap {
        e0_values: e0_values.to_vec(),
        alpha_values: alpha_values.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lih() -> RegimeInputs {
        RegimeInputs {
            reduced_mass: 1606.4,
            omega0: 0.0068,
            beta: 0.0176,
            dipole_slope: 0.354,
            omega01: None,
        }
    }

    fn mv(x: f64) -> f64 {
        units::to_atomic(x, Unit::MegavoltPerCentimeter)
    }

    fn fs2(x: f64) -> f64 {
        units::to_atomic(x, Unit::PerFemtosecondSquared)
    }

    #[test]
    fn definitions_hold() {
        let p = regime_params(&lih(), mv(6.0), sigma_from_alpha(fs2(3e-8))).unwrap();
        assert!((p.p1 - p.t_s / p.t_r).abs() <= 1e-12 * p.p1);
        assert!((p.p2 - p.t_nl / p.t_s).abs() <= 1e-12 * p.p2);
        assert!((p.epsilon_eff - 0.354 * mv(6.0)).abs() < 1e-18);
    }

    #[test]
    fn doubling_field() {
        let s = sigma_from_alpha(fs2(1e-8));
        let a = regime_params(&lih(), mv(5.0), s).unwrap();
        let b = regime_params(&lih(), mv(10.0), s).unwrap();
        assert!((b.t_r - a.t_r / 2.0).abs() < 1e-9 * a.t_r);
        assert!((b.p1 - 2.0 * a.p1).abs() < 1e-12 * b.p1);
        assert_eq!(a.p2, b.p2);
    }

    #[test]
    fn harmonic_has_no_nonlinear_scale() {
        let inputs = RegimeInputs { beta: 0.0, ..lih() };
        let p = regime_params(&inputs, mv(5.0), 1e4).unwrap();
        assert_eq!(p.t_nl, 0.0);
        assert_eq!(p.p2, 0.0);
        assert!(!p.in_region());
    }

    #[test]
    fn rejects_non_positive() {
        assert!(regime_params(&lih(), 0.0, 1e4).is_err());
        assert!(regime_params(&RegimeInputs { reduced_mass: -1.0, ..lih() }, 1e-3, 1e4).is_err());
        assert!(regime_map(&lih(), &[], &[1.0]).is_err());
    }

    #[test]
    fn single_cell_map() {
        let m = regime_map(&lih(), &[mv(4.0)], &[fs2(2e-8)]).unwrap();
        let p = regime_params(&lih(), mv(4.0), sigma_from_alpha(fs2(2e-8))).unwrap();
        assert_eq!(m.cells, vec![p]);
        assert_eq!(m.to_csv().lines().count(), 2);
    }

    #[test]
    fn sign_monotone_along_alpha() {
        let e0s: Vec<f64> = log_grid(0.1, 100.0, 25).into_iter().map(mv).collect();
        let alphas: Vec<f64> = log_grid(1e-9, 1e-6, 40).into_iter().map(fs2).collect();
        let m = regime_map(&lih(), &e0s, &alphas).unwrap();
        for i in 0..e0s.len() {
            let signs: Vec<bool> = (0..alphas.len()).map(|j| m.cell(i, j).margin() > 0.0).collect();
            let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(flips <= 1);
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-8, 1e-7, 3);
        assert!((g[0] - 1e-8).abs() < 1e-22 && (g[2] - 1e-7).abs() < 1e-21);
        assert!((g[1] - 10f64.powf(-7.5)).abs() < 1e-20);
    }

    proptest! {
        #[test]
        fn time_scales_scale(
            s_m in 0.1f64..10.0, s_w in 0.1f64..10.0, s_e in 0.1f64..10.0, s_sig in 0.1f64..10.0,
        ) {
            let base = lih();
            let (e0, sigma) = (mv(5.0), 5e5);
            let p = regime_params(&base, e0, sigma).unwrap();
            let scaled_inputs = RegimeInputs {
                reduced_mass: base.reduced_mass * s_m,
                omega0: base.omega0 * s_w,
                ..base
            };
            let q = regime_params(&scaled_inputs, e0 * s_e, sigma * s_sig).unwrap();
            // T_R ∝ √(mω₀)/E0, T_S ∝ √(σ/ω₀), T_NL ∝ σ with ω₀₁ ∝ ω₀.
            prop_assert!((q.t_r / p.t_r - (s_m * s_w).sqrt() / s_e).abs() < 1e-10);
            prop_assert!((q.t_s / p.t_s - (s_sig / s_w).sqrt()).abs() < 1e-10);
            prop_assert!((q.t_nl / p.t_nl - s_sig).abs() < 1e-10);
        }

        #[test]
        fn classification_is_unit_invariant(e_mv in 0.1f64..100.0, a_fs in 1e-9f64..1e-6) {
            let direct = regime_params(&lih(), mv(e_mv), sigma_from_alpha(fs2(a_fs))).unwrap();
            let via_si = regime_params(
                &lih(),
                units::convert(e_mv * 1e8, Unit::VoltPerMeter, Unit::AuField).unwrap(),
                sigma_from_alpha(units::convert(a_fs * 1e30, Unit::PerSecondSquared, Unit::AuInverseTimeSquared).unwrap()),
            ).unwrap();
            prop_assert_eq!(direct.in_region(), via_si.in_region());
        }
    }
}
