//! Laboratory units accepted in config files, and their SI conversions.

use std::f64::consts::PI;

use levcsl::constants::{AMU, TORR_TO_PASCAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Pressure,
    Temperature,
    /// Angular frequency; cyclic units are converted with 2π.
    Frequency,
    Power,
    Mass,
    Density,
    Rate,
}

impl Dimension {
    pub fn si_unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Pressure => "Pa",
            Dimension::Temperature => "K",
            Dimension::Frequency => "rad/s",
            Dimension::Power => "W",
            Dimension::Mass => "kg",
            Dimension::Density => "kg/m3",
            Dimension::Rate => "s^-1",
        }
    }

    fn table(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[
                ("m", 1.0),
                ("cm", 1e-2),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("nm", 1e-9),
            ],
            Dimension::Pressure => &[("Pa", 1.0), ("Torr", TORR_TO_PASCAL), ("mbar", 100.0)],
            Dimension::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6)],
            Dimension::Frequency => &[
                ("rad/s", 1.0),
                ("Hz", 2.0 * PI),
                ("kHz", 2.0 * PI * 1e3),
                ("MHz", 2.0 * PI * 1e6),
            ],
            Dimension::Power => &[("W", 1.0), ("mW", 1e-3), ("uW", 1e-6), ("nW", 1e-9)],
            Dimension::Mass => &[("kg", 1.0), ("amu", AMU)],
            Dimension::Density => &[("kg/m3", 1.0), ("g/cm3", 1e3)],
            Dimension::Rate => &[("s^-1", 1.0), ("1/s", 1.0)],
        }
    }

    pub fn accepted(self) -> Vec<&'static str> {
        self.table().iter().map(|(u, _)| *u).collect()
    }

    /// Factor converting `unit` to SI, if the unit belongs to this dimension.
    pub fn factor(self, unit: &str) -> Option<f64> {
        self.table().iter().find(|(u, _)| *u == unit).map(|(_, f)| *f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(Dimension::Length.factor("nm"), Some(1e-9));
        assert_eq!(Dimension::Pressure.factor("Torr"), Some(133.322));
        assert_eq!(Dimension::Frequency.factor("kHz"), Some(2.0 * PI * 1e3));
        assert_eq!(Dimension::Density.factor("g/cm3"), Some(1e3));
        assert_eq!(Dimension::Temperature.factor("Torr"), None);
    }
}
