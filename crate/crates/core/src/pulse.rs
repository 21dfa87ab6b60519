//! Linearly chirped Gaussian pulses and pulse trains.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the carrier phase is built from the chirp law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierMode {
    /// cos(ω(t)·(t − t0) + phase), with ω(t) the linear chirp law.
    #[default]
    Literal,
    /// cos(∫_{t0}^{t} ω(t') dt' + phase), so that ω(t) is the instantaneous frequency.
    Integrated,
}

/// E(t) = E0 exp(−α(t−t0)²) cos(carrier), all quantities in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpedPulse {
    pub e0: f64,
    pub alpha: f64,
    pub t0: f64,
    pub omega0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub carrier: CarrierMode,
}

impl ChirpedPulse {
    pub fn new(e0: f64, alpha: f64, t0: f64, omega0: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let p = ChirpedPulse {
            e0,
            alpha,
            t0,
            omega0,
            gamma1,
            gamma2,
            phase: 0.0,
            carrier: CarrierMode::Literal,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_carrier(mut self, carrier: CarrierMode) -> Self {
        self.carrier = carrier;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.e0, self.alpha, self.t0, self.omega0, self.gamma1, self.gamma2, self.phase]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("pulse parameters must be finite".into()));
        }
        if self.e0 < 0.0 {
            return Err(Error::InvalidParameter(format!("E0 must be >= 0, got {}", self.e0)));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        Ok(())
    }

    /// σ = 1/√(2α).
    pub fn sigma(&self) -> f64 {
        sigma_from_alpha(self.alpha)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        self.e0 * (-self.alpha * tau * tau).exp()
    }

    pub fn chirp_frequency(&self, t: f64) -> f64 {
        let (g1, g2) = (self.gamma1, self.gamma2);
        self.omega0 * (-(g1 + g2) * (t - self.t0) / (4.0 * self.sigma()) + 1.0 + (g1 - g2) / 2.0)
    }

    fn carrier_phase(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        match self.carrier {
            CarrierMode::Literal => self.chirp_frequency(t) * tau,
            CarrierMode::Integrated => {
                let (g1, g2) = (self.gamma1, self.gamma2);
                self.omega0
                    * ((1.0 + (g1 - g2) / 2.0) * tau - (g1 + g2) * tau * tau / (8.0 * self.sigma()))
            }
        }
    }

    pub fn field(&self, t: f64) -> f64 {
        self.envelope(t) * (self.carrier_phase(t) + self.phase).cos()
    }

    /// [t0 − 4σ, t0 + 4σ].
    pub fn window(&self) -> (f64, f64) {
        let s = self.sigma();
        (self.t0 - 4.0 * s, self.t0 + 4.0 * s)
    }
}

pub fn sigma_from_alpha(alpha: f64) -> f64 {
    1.0 / (2.0 * alpha).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMember {
    pub label: String,
    pub pulse: ChirpedPulse,
}

/// Pulses acting together; the total field is their pointwise sum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseTrain {
    pub members: Vec<TrainMember>,
}

impl PulseTrain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(pulse: ChirpedPulse) -> Self {
        Self::new().with("main", pulse)
    }

    pub fn with(mut self, label: impl Into<String>, pulse: ChirpedPulse) -> Self {
        self.push(label, pulse);
        self
    }

    pub fn push(&mut self, label: impl Into<String>, pulse: ChirpedPulse) {
        self.members.push(TrainMember { label: label.into(), pulse });
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.members.iter().map(|m| m.label.clone()).collect()
    }

    pub fn pulses(&self) -> impl Iterator<Item = &ChirpedPulse> {
        self.members.iter().map(|m| &m.pulse)
    }

    pub fn field(&self, t: f64) -> f64 {
        self.pulses().map(|p| p.field(t)).sum()
    }

    /// Per-member fields at `t`, in member order.
    pub fn component_fields(&self, t: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(self.pulses()) {
            *o = p.field(t);
        }
    }

    /// Union of the members' ±4σ windows.
    pub fn simulation_window(&self) -> Result<(f64, f64)> {
        if self.is_empty() {
            return Err(Error::EmptyTrain);
        }
        Ok(self.pulses().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let (a, b) = p.window();
            (lo.min(a), hi.max(b))
        }))
    }

    /// (t, E_total, E_member...) samples over the window.
    pub fn trace_csv(&self, samples: usize) -> Result<String> {
        let (a, b) = self.simulation_window()?;
        let mut out = String::from("t_au");
        out.push_str(",field_au");
        for m in &self.members {
            let _ = write!(out, ",{}_au", m.label);
        }
        out.push('\n');
        let n = samples.max(2);
        for i in 0..n {
            let t = a + (b - a) * i as f64 / (n - 1) as f64;
            let _ = write!(out, "{t:.10e},{:.10e}", self.field(t));
            for p in self.pulses() {
                let _ = write!(out, ",{:.10e}", p.field(t));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn base() -> ChirpedPulse {
        ChirpedPulse::new(1e-3, 1.0 / (2.0 * 1000.0f64.powi(2)), 4000.0, 0.0068, 0.0, 0.0).unwrap()
    }

    #[test]
    fn chirp_law_examples() {
        let p = base();
        assert_eq!(p.chirp_frequency(123.0), 0.0068);
        let p = ChirpedPulse { gamma1: 0.3, ..base() };
        let s = p.sigma();
        assert!((p.chirp_frequency(p.t0 - 2.0 * s) - 1.3 * 0.0068).abs() < 1e-15);
        let p = ChirpedPulse { gamma1: 0.2, gamma2: 0.4, ..base() };
        assert!((p.chirp_frequency(p.t0) - 0.9 * 0.0068).abs() < 1e-15);
    }

    #[test]
    fn field_examples() {
        let p = base();
        assert_eq!(p.field(p.t0), p.e0);
        let s = p.sigma();
        assert!(p.field(p.t0 + 6.0 * s).abs() < p.e0 * (-18.0f64).exp());
        assert!(p.field(p.t0 + PI / (2.0 * p.omega0)).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ChirpedPulse::new(-1.0, 1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(ChirpedPulse::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(ChirpedPulse::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ChirpedPulse::new(0.0, 1.0, 0.0, 1.0, -2.0, 3.0).is_ok());
    }

    #[test]
    fn train_superposition() {
        let p = ChirpedPulse { gamma1: 0.2, gamma2: 0.6, ..base() };
        let one = PulseTrain::single(p);
        let two = PulseTrain::single(p).with("anti", p.with_phase(PI));
        for i in 0..200 {
            let t = 20.0 * i as f64 + 1.0;
            assert_eq!(one.field(t), p.field(t));
            assert!(two.field(t).abs() < 1e-14);
        }
    }

    #[test]
    fn train_peaks() {
        let main = base();
        let dt0 = 1500.0;
        let dsp = ChirpedPulse { t0: main.t0 + dt0, e0: 5e-4, ..main };
        let train = PulseTrain::single(main).with("dsp", dsp);
        let peak = |p: &ChirpedPulse| {
            (0..=16000)
                .map(|i| i as f64 * 0.5)
                .max_by(|a, b| p.envelope(*a).total_cmp(&p.envelope(*b)))
                .unwrap()
        };
        assert_eq!(peak(&train.members[0].pulse), main.t0);
        assert_eq!(peak(&train.members[1].pulse), main.t0 + dt0);
    }

    #[test]
    fn windows() {
        let p = base();
        assert_eq!(PulseTrain::single(p).simulation_window().unwrap(), (0.0, 8000.0));
        assert_eq!(
            PulseTrain::single(p).with("b", p).simulation_window().unwrap(),
            (0.0, 8000.0)
        );
        let late = ChirpedPulse { t0: p.t0 + 2000.0, ..p };
        assert_eq!(
            PulseTrain::single(p).with("dsp", late).simulation_window().unwrap(),
            (0.0, 10000.0)
        );
        assert!(matches!(PulseTrain::new().simulation_window(), Err(Error::EmptyTrain)));
    }

    #[test]
    fn integrated_carrier_frequency() {
        let p = ChirpedPulse { gamma1: 0.3, gamma2: 0.5, ..base() }.with_carrier(CarrierMode::Integrated);
        let h = 1e-3;
        for t in [3000.0, 4000.0, 5200.0] {
            let inst = (p.carrier_phase(t + h) - p.carrier_phase(t - h)) / (2.0 * h);
            assert!((inst - p.chirp_frequency(t)).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn chirp_endpoints(g1 in 0.0f64..1.0, g2 in 0.0f64..1.0, alpha in 1e-9f64..1e-5) {
            let p = ChirpedPulse::new(1.0, alpha, 100.0, 0.0068, g1, g2).unwrap();
            let s = p.sigma();
            prop_assert!((p.chirp_frequency(p.t0 - 2.0 * s) - p.omega0 * (1.0 + g1)).abs() < 1e-12);
            prop_assert!((p.chirp_frequency(p.t0 + 2.0 * s) - p.omega0 * (1.0 - g2)).abs() < 1e-12);
        }

        #[test]
        fn chirp_is_affine(g1 in -1.0f64..1.0, g2 in -1.0f64..1.0, t in 0.0f64..8000.0, h in 1.0f64..500.0) {
            let p = ChirpedPulse { gamma1: g1, gamma2: g2, ..base() };
            let d2 = p.chirp_frequency(t + h) - 2.0 * p.chirp_frequency(t) + p.chirp_frequency(t - h);
            prop_assert!(d2.abs() < 1e-12);
        }

        #[test]
        fn bounded_by_envelope(g1 in -1.0f64..1.0, g2 in -1.0f64..1.0, ph in 0.0f64..6.3, t in -2000.0f64..10000.0) {
            let p = ChirpedPulse { gamma1: g1, gamma2: g2, ..base() }.with_phase(ph);
            prop_assert!(p.field(t).abs() <= p.envelope(t) + 1e-15);
        }
    }
}
