//! Human-unit quantities such as `1mm`, `1.11GHz` or `2.7µs`, converted to
//! SI at the edge. A bare number is taken as SI already.

use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Time,
    Voltage,
    ElectricField,
    MagneticField,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Time => &[("ns", 1e-9), ("us", 1e-6), ("µs", 1e-6), ("ms", 1e-3), ("s", 1.0)],
            Dimension::Voltage => &[("mV", 1e-3), ("V", 1.0), ("kV", 1e3)],
            Dimension::ElectricField => &[("V/m", 1.0), ("V/cm", 1e2), ("kV/cm", 1e5)],
            Dimension::MagneticField => &[("G", 1e-4), ("mT", 1e-3), ("T", 1.0)],
        }
    }
}

pub fn parse(text: &str, dim: Dimension) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| c.is_alphabetic() && !(matches!(c, 'e' | 'E') && exponent_follows(t, i)))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value = f64::from_str(num.trim()).map_err(|_| format!("`{text}` does not start with a number"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| value * f)
        .ok_or_else(|| {
            let known: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
            format!("unknown unit `{unit}` in `{text}` (expected one of {})", known.join(", "))
        })
}

/// `e` at `i` is an exponent marker when a digit or sign follows it.
fn exponent_follows(t: &str, i: usize) -> bool {
    t[i + 1..].chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+')
}

macro_rules! quantity {
    ($name:ident, $dim:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                parse(s, $dim).map($name)
            }
        }
    };
}

quantity!(Length, Dimension::Length);
quantity!(Frequency, Dimension::Frequency);
quantity!(Time, Dimension::Time);
quantity!(Voltage, Dimension::Voltage);
