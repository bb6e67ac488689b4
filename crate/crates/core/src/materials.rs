//! Storage-medium presets and the conversions between control field,
//! transition frequency shift and optical wavevector.
//!
//! Everything is held in SI units. The serialized registry uses the units
//! the literature quotes (nm, kHz/(V/cm), MHz/G, µs) and converts on load.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// 1 kHz/(V/cm) expressed in Hz/(V/m).
pub const KHZ_PER_V_CM: f64 = 1.0e3 / 1.0e2;
/// 1 MHz/G expressed in Hz/T.
pub const MHZ_PER_GAUSS: f64 = 1.0e6 / 1.0e-4;
/// Absorption coefficient carried by the built-in presets. Not a measured
/// property of either crystal; override it per run.
pub const DEFAULT_ALPHA_PER_M: f64 = 1000.0;

/// A static control field at one point, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlField {
    /// Electric field component along the ion dipole, V/m.
    Electric(f64),
    /// Change of magnetic field magnitude, T.
    Magnetic(f64),
}

impl ControlField {
    fn kind(&self) -> &'static str {
        match self {
            ControlField::Electric(_) => "electric",
            ControlField::Magnetic(_) => "magnetic",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ControlField::Electric(v) | ControlField::Magnetic(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PresetRecord", into = "PresetRecord")]
pub struct MaterialPreset {
    pub name: String,
    /// Vacuum wavelength, m.
    pub lambda_vac: f64,
    pub refractive_index: f64,
    /// Linear Stark coefficient, Hz/(V/m).
    pub stark_coefficient: f64,
    /// Linear Zeeman coefficient, Hz/T.
    pub zeeman_coefficient: f64,
    /// Optical phase relaxation time, s.
    pub t2: f64,
    /// Resonant absorption coefficient, 1/m.
    pub alpha: f64,
}

impl MaterialPreset {
    pub fn new(
        name: impl Into<String>,
        lambda_vac: f64,
        refractive_index: f64,
        stark_coefficient: f64,
        zeeman_coefficient: f64,
        t2: f64,
        alpha: f64,
    ) -> Result<Self> {
        let preset = MaterialPreset {
            name: name.into(),
            lambda_vac,
            refractive_index,
            stark_coefficient,
            zeeman_coefficient,
            t2,
            alpha,
        };
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda_vac,
            self.refractive_index,
            self.stark_coefficient,
            self.zeeman_coefficient,
            self.t2,
            self.alpha,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid(format!("preset `{}` has non-finite constants", self.name)));
        }
        if self.lambda_vac <= 0.0 {
            return Err(invalid("lambda_vac must be positive"));
        }
        if self.refractive_index < 1.0 {
            return Err(invalid("refractive_index must be at least 1"));
        }
        if self.t2 <= 0.0 {
            return Err(invalid("t2 must be positive"));
        }
        if self.alpha < 0.0 {
            return Err(invalid("alpha must be non-negative"));
        }
        if (self.stark_coefficient != 0.0) == (self.zeeman_coefficient != 0.0) {
            return Err(invalid(format!(
                "preset `{}` must have exactly one nonzero field coefficient",
                self.name
            )));
        }
        Ok(())
    }

    /// Y2SiO5:Pr3+, site 1, 605.977 nm, zero-field T2.
    pub fn pr_yso() -> Self {
        MaterialPreset {
            name: "pr-yso".into(),
            lambda_vac: 605.977e-9,
            refractive_index: 1.8,
            stark_coefficient: 111.0 * KHZ_PER_V_CM,
            zeeman_coefficient: 0.0,
            t2: 111e-6,
            alpha: DEFAULT_ALPHA_PER_M,
        }
    }

    /// Y2SiO5:Pr3+ with the T2 measured at 77 G.
    pub fn pr_yso_77g() -> Self {
        MaterialPreset {
            name: "pr-yso-77g".into(),
            t2: 152e-6,
            ..Self::pr_yso()
        }
    }

    /// Y2SiO5:Er3+ at 1536 nm, magnetically controlled.
    pub fn er_yso() -> Self {
        MaterialPreset {
            name: "er-yso".into(),
            lambda_vac: 1536e-9,
            refractive_index: 1.8,
            stark_coefficient: 0.0,
            zeeman_coefficient: 1.5 * MHZ_PER_GAUSS,
            t2: 6.4e-3,
            alpha: DEFAULT_ALPHA_PER_M,
        }
    }

    /// Unit-normalized medium: λ = 1 m, n = 1, 1 Hz per V/m.
    pub fn ideal() -> Self {
        MaterialPreset {
            name: "ideal".into(),
            lambda_vac: 1.0,
            refractive_index: 1.0,
            stark_coefficient: 1.0,
            zeeman_coefficient: 0.0,
            t2: 1.0e6,
            alpha: DEFAULT_ALPHA_PER_M,
        }
    }

    pub fn builtin() -> Vec<MaterialPreset> {
        vec![Self::pr_yso(), Self::pr_yso_77g(), Self::er_yso(), Self::ideal()]
    }

    /// Looks up a built-in preset by name.
    pub fn by_name(name: &str) -> Option<MaterialPreset> {
        Self::builtin().into_iter().find(|p| p.name == name)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn is_electric(&self) -> bool {
        self.stark_coefficient != 0.0
    }

    /// Transition frequency in the absence of a control field, ν = c/λ.
    pub fn frequency(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.lambda_vac
    }

    /// Sample length expressed in wavelengths inside the medium, L·n/λ.
    pub fn wavelengths_in(&self, length: f64) -> f64 {
        length * self.refractive_index / self.lambda_vac
    }
}

/// Frequency shift (Hz) produced by `field`.
pub fn shift_from_field(preset: &MaterialPreset, field: ControlField) -> Result<f64> {
    if !field.value().is_finite() {
        return Err(invalid("field strength must be finite"));
    }
    let expected = if preset.is_electric() { "electric" } else { "magnetic" };
    match field {
        ControlField::Electric(e) if preset.is_electric() => Ok(preset.stark_coefficient * e),
        ControlField::Magnetic(b) if !preset.is_electric() => Ok(preset.zeeman_coefficient * b),
        other => Err(Error::FieldTypeMismatch {
            preset: preset.name.clone(),
            expected,
            got: other.kind(),
        }),
    }
}

/// Wavevector of the stored polarization grating, 2πn/λ.
pub fn optical_wavevector(preset: &MaterialPreset) -> f64 {
    TAU * preset.refractive_index / preset.lambda_vac
}

/// On-disk form of a preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetRecord {
    pub name: String,
    pub lambda_vac_nm: f64,
    pub refractive_index: f64,
    #[serde(default)]
    pub stark_coefficient_khz_per_v_cm: f64,
    #[serde(default)]
    pub zeeman_coefficient_mhz_per_gauss: f64,
    pub t2_us: f64,
    #[serde(default = "default_alpha")]
    pub alpha_per_m: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA_PER_M
}

impl TryFrom<PresetRecord> for MaterialPreset {
    type Error = Error;

    fn try_from(r: PresetRecord) -> Result<Self> {
        MaterialPreset::new(
            r.name,
            r.lambda_vac_nm * 1e-9,
            r.refractive_index,
            r.stark_coefficient_khz_per_v_cm * KHZ_PER_V_CM,
            r.zeeman_coefficient_mhz_per_gauss * MHZ_PER_GAUSS,
            r.t2_us * 1e-6,
            r.alpha_per_m,
        )
    }
}

impl From<MaterialPreset> for PresetRecord {
    fn from(p: MaterialPreset) -> Self {
        PresetRecord {
            name: p.name,
            lambda_vac_nm: p.lambda_vac * 1e9,
            refractive_index: p.refractive_index,
            stark_coefficient_khz_per_v_cm: p.stark_coefficient / KHZ_PER_V_CM,
            zeeman_coefficient_mhz_per_gauss: p.zeeman_coefficient / MHZ_PER_GAUSS,
            t2_us: p.t2 * 1e6,
            alpha_per_m: p.alpha,
        }
    }
}

/// Parses a JSON preset registry (an array of preset records).
pub fn registry_from_json(text: &str) -> Result<Vec<MaterialPreset>> {
    Ok(serde_json::from_str(text)?)
}

pub fn registry_to_json(presets: &[MaterialPreset]) -> Result<String> {
    Ok(serde_json::to_string_pretty(presets)?)
}

pub fn load_registry(path: &Path) -> Result<Vec<MaterialPreset>> {
    registry_from_json(&std::fs::read_to_string(path)?)
}
