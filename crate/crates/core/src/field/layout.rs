//! Periodic electrode geometry and its on-disk form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular electrode cross-section, infinitely long along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    /// Volts.
    pub potential: f64,
}

/// One period of an electrode array on the two faces of a slab.
///
/// The domain is `[-period/2, period/2] x [-ly/2, ly/2]`, periodic along x.
/// `region_a` lists the x-intervals that keep ions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutFile", into = "LayoutFile")]
pub struct ElectrodeLayout {
    pub period: f64,
    pub ly: f64,
    pub electrodes: Vec<Electrode>,
    pub region_a: Vec<(f64, f64)>,
}

fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

impl ElectrodeLayout {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if !(self.period > 0.0 && self.ly > 0.0) {
            return bad("period and ly must be positive".into());
        }
        let (hx, hy) = (self.period / 2.0, self.ly / 2.0);
        let eps = 1e-9 * self.period.max(self.ly);
        for (k, e) in self.electrodes.iter().enumerate() {
            if !(e.width > 0.0 && e.height > 0.0) {
                return bad(format!("electrode {k} has non-positive size"));
            }
            if !e.potential.is_finite() {
                return bad(format!("electrode {k} has a non-finite potential"));
            }
            if e.center_x < -hx - eps || e.center_x > hx + eps {
                return bad(format!("electrode {k} lies outside the period"));
            }
            if e.center_y - e.height / 2.0 < -hy - eps || e.center_y + e.height / 2.0 > hy + eps {
                return bad(format!("electrode {k} extends beyond |y| = ly/2"));
            }
            if e.width >= self.period {
                return bad(format!("electrode {k} is wider than the period"));
            }
        }
        for (a, ea) in self.electrodes.iter().enumerate() {
            for (b, eb) in self.electrodes.iter().enumerate().skip(a + 1) {
                let dx = periodic_distance(ea.center_x, eb.center_x, self.period);
                let dy = (ea.center_y - eb.center_y).abs();
                if dx < (ea.width + eb.width) / 2.0 - eps && dy < (ea.height + eb.height) / 2.0 - eps {
                    return bad(format!("electrodes {a} and {b} overlap"));
                }
            }
        }
        let mut regions = self.region_a.clone();
        regions.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (k, r) in regions.iter().enumerate() {
            if !(r.0 < r.1) || r.0 < -hx - eps || r.1 > hx + eps {
                return bad(format!("region A interval {:?} is empty or outside the period", r));
            }
            if k > 0 && regions[k - 1].1 > r.0 + eps {
                return bad("region A intervals overlap".into());
            }
        }
        Ok(())
    }

    /// The same geometry with every potential multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.electrodes {
            e.potential *= c;
        }
        out
    }

    /// Electrode-by-electrode sum of potentials of two layouts with the
    /// same geometry.
    pub fn superposed(&self, other: &Self) -> Result<Self> {
        if self.electrodes.len() != other.electrodes.len() {
            return Err(Error::InvalidLayout("layouts differ in electrode count".into()));
        }
        let mut out = self.clone();
        for (e, o) in out.electrodes.iter_mut().zip(&other.electrodes) {
            e.potential += o.potential;
        }
        Ok(out)
    }

    /// Storage-region length of the first region A interval.
    pub fn region_a_length(&self) -> Option<f64> {
        self.region_a.first().map(|r| r.1 - r.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Antisymmetric electrode array with evenly spaced electrodes on both faces.
///
/// Each face carries `per_surface` electrodes per period `2 * lx`, spacing
/// `2 * lx / per_surface`, mirror-symmetric about the region-A center at
/// x = 0. Electrode `k` counted outward from the center carries
/// `-potentials[k-1] / 2` on the top face and the opposite sign on the
/// bottom face; the electrodes at the region-A and region-B centers are
/// grounded. Region A is `[-lx/2, lx/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayFamily {
    pub lx: f64,
    pub ly: f64,
    /// Square electrode cross-section side.
    pub d: f64,
    pub per_surface: usize,
    /// Potentials U_1.. outward from the center (full top-to-bottom difference).
    pub potentials: Vec<f64>,
}

impl ArrayFamily {
    /// Four electrodes per face per period: the quadrupole arrangement.
    pub fn quadrupole(lx: f64, ly: f64, d: f64, u: f64) -> Self {
        ArrayFamily { lx, ly, d, per_surface: 4, potentials: vec![u] }
    }

    /// Eight electrodes per face per period; potentials are U_1, U_2 (at
    /// the region-A boundary) and U_3.
    pub fn eight(lx: f64, ly: f64, d: f64, u: [f64; 3]) -> Self {
        ArrayFamily { lx, ly, d, per_surface: 8, potentials: u.to_vec() }
    }

    /// Geometry used for the eight-electrode design: d = 0.05 lx, ly = 0.75 lx.
    pub fn eight_reference(lx: f64, u: [f64; 3]) -> Self {
        Self::eight(lx, 0.75 * lx, 0.05 * lx, u)
    }

    /// Twelve electrodes per face per period, five free potentials with the
    /// third one at the region-A boundary.
    pub fn twelve_reference(lx: f64, u: [f64; 5]) -> Self {
        ArrayFamily { lx, ly: 0.75 * lx, d: 0.05 * lx, per_surface: 12, potentials: u.to_vec() }
    }

    pub fn period(&self) -> f64 {
        2.0 * self.lx
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.per_surface as f64
    }

    /// Index (into `potentials`) of the electrode sitting on the region-A
    /// boundary, when one does.
    pub fn boundary_index(&self) -> Option<usize> {
        if self.per_surface % 4 == 0 {
            Some(self.per_surface / 4 - 1)
        } else {
            None
        }
    }

    fn check(&self) -> Result<()> {
        if self.per_surface < 4 || self.per_surface % 2 != 0 {
            return Err(Error::InvalidLayout("per_surface must be even and at least 4".into()));
        }
        if self.potentials.len() != self.per_surface / 2 - 1 {
            return Err(Error::InvalidLayout(format!(
                "{} electrodes per face need {} potentials, got {}",
                self.per_surface,
                self.per_surface / 2 - 1,
                self.potentials.len()
            )));
        }
        Ok(())
    }

    /// Signed electrode offsets `(k, sign)` for electrode index `k` outward
    /// from the center. Index 0 is the grounded center electrode and
    /// `per_surface/2` the grounded region-B center.
    fn ordinals(&self) -> Vec<i64> {
        let half = (self.per_surface / 2) as i64;
        (-(half - 1)..=half).collect()
    }

    pub fn build(&self) -> Result<ElectrodeLayout> {
        self.check()?;
        let s = self.spacing();
        let half = (self.per_surface / 2) as i64;
        let mut electrodes = Vec::with_capacity(2 * self.per_surface);
        for face in [1.0, -1.0] {
            for k in self.ordinals() {
                let magnitude = if k == 0 || k == half {
                    0.0
                } else {
                    self.potentials[(k.unsigned_abs() - 1) as usize]
                };
                // top face: positive potential on the negative-x side
                let sign = -(k.signum() as f64) * face;
                electrodes.push(Electrode {
                    center_x: k as f64 * s,
                    center_y: face * (self.ly - self.d) / 2.0,
                    width: self.d,
                    height: self.d,
                    potential: sign * magnitude / 2.0,
                });
            }
        }
        let layout = ElectrodeLayout {
            period: self.period(),
            ly: self.ly,
            electrodes,
            region_a: vec![(-self.lx / 2.0, self.lx / 2.0)],
        };
        layout.validate()?;
        Ok(layout)
    }

    /// For each entry of `potentials`, the electrodes it drives and the
    /// factor (±1/2) applied to it.
    pub fn potential_targets(&self) -> Result<Vec<Vec<(usize, f64)>>> {
        self.check()?;
        let mut targets = vec![Vec::new(); self.potentials.len()];
        let half = (self.per_surface / 2) as i64;
        let mut idx = 0;
        for face in [1.0, -1.0] {
            for k in self.ordinals() {
                if k != 0 && k != half {
                    let sign = -(k.signum() as f64) * face;
                    targets[(k.unsigned_abs() - 1) as usize].push((idx, sign / 2.0));
                }
                idx += 1;
            }
        }
        Ok(targets)
    }
}

const UM: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectrodeRecord {
    pub x_um: f64,
    pub y_um: f64,
    pub w_um: f64,
    pub h_um: f64,
    pub potential_v: f64,
}

/// On-disk layout with explicit unit suffixes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutFile {
    pub period_lx_um: f64,
    pub ly_um: f64,
    pub electrodes: Vec<ElectrodeRecord>,
    #[serde(default)]
    pub region_a: Vec<[f64; 2]>,
}

impl TryFrom<LayoutFile> for ElectrodeLayout {
    type Error = Error;

    fn try_from(f: LayoutFile) -> Result<Self> {
        let layout = ElectrodeLayout {
            period: f.period_lx_um * UM,
            ly: f.ly_um * UM,
            electrodes: f
                .electrodes
                .iter()
                .map(|e| Electrode {
                    center_x: e.x_um * UM,
                    center_y: e.y_um * UM,
                    width: e.w_um * UM,
                    height: e.h_um * UM,
                    potential: e.potential_v,
                })
                .collect(),
            region_a: f.region_a.iter().map(|r| (r[0] * UM, r[1] * UM)).collect(),
        };
        layout.validate()?;
        Ok(layout)
    }
}

impl From<ElectrodeLayout> for LayoutFile {
    fn from(l: ElectrodeLayout) -> Self {
        LayoutFile {
            period_lx_um: l.period / UM,
            ly_um: l.ly / UM,
            electrodes: l
                .electrodes
                .iter()
                .map(|e| ElectrodeRecord {
                    x_um: e.center_x / UM,
                    y_um: e.center_y / UM,
                    w_um: e.width / UM,
                    h_um: e.height / UM,
                    potential_v: e.potential,
                })
                .collect(),
            region_a: l.region_a.iter().map(|r| [r.0 / UM, r.1 / UM]).collect(),
        }
    }
}
