//! Line-current arrays: the magnetic counterpart of the electrode arrays,
//! with each electrode potential replaced by a current.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::layout::ElectrodeLayout;
use crate::error::{invalid, Result};

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * PI;

/// Straight wire along z through (x, y); positive current flows along +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wire {
    pub x: f64,
    pub y: f64,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireLayout {
    pub wires: Vec<Wire>,
    /// Uniform background field B0 (T).
    pub bias_field: [f64; 2],
}

impl WireLayout {
    pub fn validate(&self) -> Result<()> {
        for (a, wa) in self.wires.iter().enumerate() {
            if !(wa.x.is_finite() && wa.y.is_finite() && wa.current.is_finite()) {
                return Err(invalid(format!("wire {a} has non-finite data")));
            }
            for wb in &self.wires[a + 1..] {
                if wa.x == wb.x && wa.y == wb.y {
                    return Err(invalid(format!("wire {a} shares its position with another wire")));
                }
            }
        }
        Ok(())
    }

    /// One wire at each electrode center carrying `amperes_per_volt` times
    /// its potential, replicated over `2 * images + 1` periods.
    pub fn from_electrodes(layout: &ElectrodeLayout, amperes_per_volt: f64, images: usize, bias_field: [f64; 2]) -> Self {
        let mut wires = Vec::new();
        let n = images as i64;
        for p in -n..=n {
            for e in &layout.electrodes {
                if e.potential != 0.0 {
                    wires.push(Wire {
                        x: e.center_x + p as f64 * layout.period,
                        y: e.center_y,
                        current: amperes_per_volt * e.potential,
                    });
                }
            }
        }
        WireLayout { wires, bias_field }
    }

    /// Field of the wires alone at (x, y), T.
    pub fn perturbation(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        let mut b = [0.0, 0.0];
        for w in &self.wires {
            let (dx, dy) = (x - w.x, y - w.y);
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                return Err(invalid(format!("field evaluated on the wire at ({}, {})", w.x, w.y)));
            }
            let k = MU0 * w.current / (2.0 * PI * r2);
            b[0] -= k * dy;
            b[1] += k * dx;
        }
        Ok(b)
    }
}

/// Total field B0 + b at (x, y), T.
pub fn wire_field(layout: &WireLayout, x: f64, y: f64) -> Result<[f64; 2]> {
    let b = layout.perturbation(x, y)?;
    Ok([layout.bias_field[0] + b[0], layout.bias_field[1] + b[1]])
}

/// Change of |B| produced by the wires at (x, y): the quantity a linear
/// Zeeman shift follows.
pub fn magnitude_change(layout: &WireLayout, x: f64, y: f64) -> Result<f64> {
    let total = wire_field(layout, x, y)?;
    Ok(total[0].hypot(total[1]) - layout.bias_field[0].hypot(layout.bias_field[1]))
}
