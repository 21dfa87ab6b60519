//! Physical constants and unit conversions.
//!
//! All values are CODATA 2018 recommended values. Every [`Unit`] knows its
//! [`Dimension`] and the factor that takes a value in that unit to Hartree
//! atomic units, so `convert` is a single multiplication and division.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hartree energy in joules.
pub const HARTREE_J: f64 = 4.359_744_722_207_1e-18;
/// Hartree energy in electronvolts.
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// Hartree energy expressed as a wavenumber in cm^-1.
pub const HARTREE_WAVENUMBER: f64 = 219_474.631_363_2;
/// Bohr radius in metres.
pub const BOHR_M: f64 = 5.291_772_109_03e-11;
/// Bohr radius in angstrom.
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;
/// Atomic unit of time in seconds.
pub const AU_TIME_S: f64 = 2.418_884_326_585_7e-17;
/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 2.418_884_326_585_7e-2;
/// Atomic unit of electric field in V/m.
pub const AU_FIELD_V_PER_M: f64 = 5.142_206_747_63e11;
/// Atomic unit of electric dipole moment (e a0) in C m.
pub const AU_DIPOLE_CM: f64 = 8.478_353_625_5e-30;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// One debye in C m (10^-21 / c, exact).
pub const DEBYE_CM: f64 = 1e-21 / SPEED_OF_LIGHT;
/// Unified atomic mass unit in electron masses.
pub const DALTON_ME: f64 = 1_822.888_486_209;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Energy,
    Length,
    Time,
    InverseTimeSquared,
    Field,
    Dipole,
    Mass,
    Angle,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Energy => "energy",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::InverseTimeSquared => "inverse time squared",
            Dimension::Field => "electric field",
            Dimension::Dipole => "dipole moment",
            Dimension::Mass => "mass",
            Dimension::Angle => "angle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Hartree,
    ElectronVolt,
    Joule,
    Wavenumber,
    Bohr,
    Angstrom,
    Meter,
    AuTime,
    Second,
    Femtosecond,
    Picosecond,
    AuInverseTimeSquared,
    PerFemtosecondSquared,
    PerSecondSquared,
    AuField,
    VoltPerMeter,
    VoltPerCentimeter,
    MegavoltPerCentimeter,
    AuDipole,
    Debye,
    CoulombMeter,
    ElectronMass,
    Dalton,
    Radian,
    Degree,
}

const ALL_UNITS: [Unit; 25] = [
    Unit::Hartree,
    Unit::ElectronVolt,
    Unit::Joule,
    Unit::Wavenumber,
    Unit::Bohr,
    Unit::Angstrom,
    Unit::Meter,
    Unit::AuTime,
    Unit::Second,
    Unit::Femtosecond,
    Unit::Picosecond,
    Unit::AuInverseTimeSquared,
    Unit::PerFemtosecondSquared,
    Unit::PerSecondSquared,
    Unit::AuField,
    Unit::VoltPerMeter,
    Unit::VoltPerCentimeter,
    Unit::MegavoltPerCentimeter,
    Unit::AuDipole,
    Unit::Debye,
    Unit::CoulombMeter,
    Unit::ElectronMass,
    Unit::Dalton,
    Unit::Radian,
    Unit::Degree,
];

impl Unit {
    pub fn all() -> &'static [Unit] {
        &ALL_UNITS
    }

    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Hartree | ElectronVolt | Joule | Wavenumber => Dimension::Energy,
            Bohr | Angstrom | Meter => Dimension::Length,
            AuTime | Second | Femtosecond | Picosecond => Dimension::Time,
            AuInverseTimeSquared | PerFemtosecondSquared | PerSecondSquared => {
                Dimension::InverseTimeSquared
            }
            AuField | VoltPerMeter | VoltPerCentimeter | MegavoltPerCentimeter => Dimension::Field,
            AuDipole | Debye | CoulombMeter => Dimension::Dipole,
            ElectronMass | Dalton => Dimension::Mass,
            Radian | Degree => Dimension::Angle,
        }
    }

    /// Multiplier taking a value in this unit to atomic units.
    pub fn to_atomic(self) -> f64 {
        use Unit::*;
        match self {
            Hartree => 1.0,
            ElectronVolt => 1.0 / HARTREE_EV,
            Joule => 1.0 / HARTREE_J,
            Wavenumber => 1.0 / HARTREE_WAVENUMBER,
            Bohr => 1.0,
            Angstrom => 1.0 / BOHR_ANGSTROM,
            Meter => 1.0 / BOHR_M,
            AuTime => 1.0,
            Second => 1.0 / AU_TIME_S,
            Femtosecond => 1.0 / AU_TIME_FS,
            Picosecond => 1e3 / AU_TIME_FS,
            AuInverseTimeSquared => 1.0,
            PerFemtosecondSquared => AU_TIME_FS * AU_TIME_FS,
            PerSecondSquared => AU_TIME_S * AU_TIME_S,
            AuField => 1.0,
            VoltPerMeter => 1.0 / AU_FIELD_V_PER_M,
            VoltPerCentimeter => 1e2 / AU_FIELD_V_PER_M,
            MegavoltPerCentimeter => 1e8 / AU_FIELD_V_PER_M,
            AuDipole => 1.0,
            Debye => DEBYE_CM / AU_DIPOLE_CM,
            CoulombMeter => 1.0 / AU_DIPOLE_CM,
            ElectronMass => 1.0,
            Dalton => DALTON_ME,
            Radian => 1.0,
            Degree => std::f64::consts::PI / 180.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            Hartree => "hartree",
            ElectronVolt => "eV",
            Joule => "J",
            Wavenumber => "cm^-1",
            Bohr => "bohr",
            Angstrom => "angstrom",
            Meter => "m",
            AuTime => "au_time",
            Second => "s",
            Femtosecond => "fs",
            Picosecond => "ps",
            AuInverseTimeSquared => "au^-2",
            PerFemtosecondSquared => "fs^-2",
            PerSecondSquared => "s^-2",
            AuField => "au_field",
            VoltPerMeter => "V/m",
            VoltPerCentimeter => "V/cm",
            MegavoltPerCentimeter => "MV/cm",
            AuDipole => "au_dipole",
            Debye => "D",
            CoulombMeter => "C*m",
            ElectronMass => "me",
            Dalton => "u",
            Radian => "rad",
            Degree => "deg",
        }
    }

    /// The atomic unit of a dimension.
    pub fn atomic(dim: Dimension) -> Unit {
        match dim {
            Dimension::Energy => Unit::Hartree,
            Dimension::Length => Unit::Bohr,
            Dimension::Time => Unit::AuTime,
            Dimension::InverseTimeSquared => Unit::AuInverseTimeSquared,
            Dimension::Field => Unit::AuField,
            Dimension::Dipole => Unit::AuDipole,
            Dimension::Mass => Unit::ElectronMass,
            Dimension::Angle => Unit::Radian,
        }
    }

    /// Parse a unit symbol. `au` / `a.u.` are ambiguous on their own and
    /// resolve against `expected` when one is given.
    pub fn parse(symbol: &str, expected: Option<Dimension>) -> Result<Unit> {
        let s = symbol.trim();
        if matches!(s, "au" | "a.u." | "a.u") {
            return expected
                .map(Unit::atomic)
                .ok_or_else(|| Error::UnknownUnit(format!("{s} (ambiguous without a dimension)")));
        }
        let aliases: &[(&str, Unit)] = &[
            ("Eh", Unit::Hartree),
            ("Ha", Unit::Hartree),
            ("ev", Unit::ElectronVolt),
            ("cm-1", Unit::Wavenumber),
            ("1/cm", Unit::Wavenumber),
            ("a0", Unit::Bohr),
            ("A", Unit::Angstrom),
            ("Å", Unit::Angstrom),
            ("fs-2", Unit::PerFemtosecondSquared),
            ("1/fs^2", Unit::PerFemtosecondSquared),
            ("Debye", Unit::Debye),
            ("amu", Unit::Dalton),
            ("Da", Unit::Dalton),
            ("m_e", Unit::ElectronMass),
        ];
        if let Some(u) = Unit::all().iter().find(|u| u.symbol() == s) {
            return Ok(*u);
        }
        if let Some((_, u)) = aliases.iter().find(|(a, _)| *a == s) {
            return Ok(*u);
        }
        Err(Error::UnknownUnit(s.to_string()))
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Unit::parse(s, None)
    }
}

/// Convert `value` between two units of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::IncompatibleUnits {
            from: format!("{} ({})", from, from.dimension()),
            to: format!("{} ({})", to, to.dimension()),
        });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * from.to_atomic() / to.to_atomic())
}

pub fn to_atomic(value: f64, from: Unit) -> f64 {
    value * from.to_atomic()
}

pub fn from_atomic(value: f64, to: Unit) -> f64 {
    value / to.to_atomic()
}

/// A number with a unit, as written in configuration files (`"6.0 MV/cm"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Quantity { value, unit }
    }

    pub fn atomic(&self) -> f64 {
        to_atomic(self.value, self.unit)
    }

    pub fn in_unit(&self, unit: Unit) -> Result<f64> {
        convert(self.value, self.unit, unit)
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.dimension()
    }

    /// Parse `"<number> <unit>"`, requiring the unit to have dimension `dim`.
    pub fn parse_with(text: &str, dim: Dimension) -> Result<Quantity> {
        let q = Self::parse_inner(text, Some(dim))?;
        if q.unit.dimension() != dim {
            return Err(Error::IncompatibleUnits {
                from: format!("{} ({})", q.unit, q.unit.dimension()),
                to: dim.to_string(),
            });
        }
        Ok(q)
    }

    fn parse_inner(text: &str, dim: Option<Dimension>) -> Result<Quantity> {
        let t = text.trim();
        let split = t
            .find(|c: char| c.is_whitespace())
            .ok_or_else(|| Error::UnknownUnit(format!("'{t}' has no unit")))?;
        let (num, unit) = t.split_at(split);
        let value: f64 = num
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("'{num}' is not a number")))?;
        Ok(Quantity {
            value,
            unit: Unit::parse(unit, dim)?,
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self.value, self.unit.symbol())
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Quantity::parse_inner(s, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_megavolt_per_cm() {
        let v = convert(2.0, Unit::MegavoltPerCentimeter, Unit::AuField).unwrap();
        let expected = 2.0e6 / 5.142_206_747_63e9;
        assert!(((v - expected) / expected).abs() < 1e-12);
        assert!(((v - 3.889e-4) / 3.889e-4).abs() < 1e-3);
    }

    #[test]
    fn zero_maps_to_zero() {
        for u in Unit::all() {
            let to = Unit::atomic(u.dimension());
            assert_eq!(convert(0.0, *u, to).unwrap(), 0.0);
        }
    }

    #[test]
    fn inverse_time_squared() {
        let v = convert(1e-8, Unit::PerFemtosecondSquared, Unit::AuInverseTimeSquared).unwrap();
        let expected = 1e-8 / (41.341_373_335_f64 * 41.341_373_335);
        assert!(((v - expected) / expected).abs() < 1e-9);
        assert!(((v - 5.851e-12) / 5.851e-12).abs() < 1e-3);
    }

    #[test]
    fn incompatible_dimensions_name_both_units() {
        let err = convert(1.0, Unit::Debye, Unit::Femtosecond).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("D") && msg.contains("fs"), "{msg}");
    }

    #[test]
    fn debye_value() {
        let d = to_atomic(1.0, Unit::Debye);
        assert!((d - 0.393_430_3).abs() < 1e-7);
    }

    #[test]
    fn quantity_parsing() {
        let q = Quantity::parse_with("6.0 MV/cm", Dimension::Field).unwrap();
        assert_eq!(q.unit, Unit::MegavoltPerCentimeter);
        let q = Quantity::parse_with("1.0 au", Dimension::Time).unwrap();
        assert_eq!(q.unit, Unit::AuTime);
        assert!(Quantity::parse_with("6.0", Dimension::Field).is_err());
        assert!(Quantity::parse_with("6.0 fs", Dimension::Field).is_err());
        assert!("1 au".parse::<Quantity>().is_err());
    }

    fn same_dim_pair() -> impl Strategy<Value = (Unit, Unit, Unit)> {
        (0..ALL_UNITS.len()).prop_flat_map(|i| {
            let dim = ALL_UNITS[i].dimension();
            let members: Vec<Unit> = ALL_UNITS.iter().copied().filter(|u| u.dimension() == dim).collect();
            (
                proptest::sample::select(members.clone()),
                proptest::sample::select(members.clone()),
                proptest::sample::select(members),
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip_through_si((a, _b, _c) in same_dim_pair(), x in -1e6f64..1e6) {
            let si = match a.dimension() {
                Dimension::Energy => Unit::Joule,
                Dimension::Length => Unit::Meter,
                Dimension::Time => Unit::Second,
                Dimension::InverseTimeSquared => Unit::PerSecondSquared,
                Dimension::Field => Unit::VoltPerMeter,
                Dimension::Dipole => Unit::CoulombMeter,
                Dimension::Mass => Unit::Dalton,
                Dimension::Angle => Unit::Degree,
            };
            let back = convert(convert(x, a, si).unwrap(), si, a).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-300));
        }

        #[test]
        fn conversions_compose((a, b, c) in same_dim_pair(), x in -1e6f64..1e6) {
            let two_step = convert(convert(x, a, b).unwrap(), b, c).unwrap();
            let direct = convert(x, a, c).unwrap();
            prop_assert!((two_step - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        }
    }
}
