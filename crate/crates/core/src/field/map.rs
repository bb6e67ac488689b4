use std::io::Write;

use serde::{Deserialize, Serialize};

use super::laplace::{LaplaceProblem, XBoundary, YBoundary, DEFAULT_TOLERANCE};
use super::layout::ElectrodeLayout;
use super::wires::WireLayout;
use crate::error::{invalid, Error, Result};
use crate::materials::{shift_from_field, ControlField, MaterialPreset};

/// Grid resolution, expressed as node count per period along x. The
/// y spacing is chosen as close to the x spacing as an odd node count
/// (so that y = 0 is a grid row) allows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells_per_period: usize,
    pub tolerance: f64,
}

impl GridSpec {
    pub fn new(cells_per_period: usize) -> Self {
        GridSpec { cells_per_period, tolerance: DEFAULT_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    Electric,
    /// `bias` is the uniform background field (T).
    Magnetic { bias: [f64; 2] },
}

/// Sampled static field on a rectangular node grid, row-major `j * nx + i`.
///
/// Electric maps carry the potential and `E = -∇φ`; magnetic maps carry the
/// perturbation `b` of the wire array on top of `bias` and no potential.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub periodic_x: bool,
    pub kind: FieldKind,
    pub phi: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Iterations used by the potential solve (0 for direct evaluation).
    pub iterations: usize,
}

impl FieldMap {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    pub fn y_extent(&self) -> (f64, f64) {
        (self.y0, self.y(self.ny - 1))
    }

    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        self.fx[k].hypot(self.fy[k])
    }

    /// The field value that moves the transition frequency: E_y for
    /// electric maps, `|B0 + b| - |B0|` for magnetic maps.
    pub fn control_value(&self, i: usize, j: usize) -> ControlField {
        let k = self.idx(i, j);
        match self.kind {
            FieldKind::Electric => ControlField::Electric(self.fy[k]),
            FieldKind::Magnetic { bias } => {
                let b0 = bias[0].hypot(bias[1]);
                let total = (bias[0] + self.fx[k]).hypot(bias[1] + self.fy[k]);
                ControlField::Magnetic(total - b0)
            }
        }
    }

    /// `Σ c_k · map_k` over maps sharing one grid.
    pub fn linear_combination(terms: &[(&FieldMap, f64)]) -> Result<FieldMap> {
        let (first, _) = terms.first().ok_or_else(|| invalid("empty combination"))?;
        let mut out = FieldMap {
            phi: vec![0.0; first.phi.len()],
            fx: vec![0.0; first.fx.len()],
            fy: vec![0.0; first.fy.len()],
            iterations: 0,
            ..(*first).clone()
        };
        for (m, c) in terms {
            if m.nx != out.nx || m.ny != out.ny || m.kind != out.kind {
                return Err(invalid("maps in a combination must share grid and kind"));
            }
            for (o, v) in out.phi.iter_mut().zip(&m.phi) {
                *o += c * v;
            }
            for (o, v) in out.fx.iter_mut().zip(&m.fx) {
                *o += c * v;
            }
            for (o, v) in out.fy.iter_mut().zip(&m.fy) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// CSV with columns x, y, phi, ex, ey (SI units).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,phi,ex,ey")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.idx(i, j);
                writeln!(w, "{},{},{},{},{}", self.x(i), self.y(j), self.phi[k], self.fx[k], self.fy[k])?;
            }
        }
        Ok(())
    }
}

/// Finite-difference solution of the electrode boundary-value problem:
/// Dirichlet on electrode nodes, periodic in x, insulating walls at
/// y = ±ly/2 between electrodes.
pub fn solve_potential(layout: &ElectrodeLayout, grid: GridSpec) -> Result<FieldMap> {
    layout.validate()?;
    let nx = grid.cells_per_period;
    if nx < 8 {
        return Err(invalid("grid needs at least 8 cells per period"));
    }
    let hx = layout.period / nx as f64;
    let half_rows = (layout.ly / (2.0 * hx)).round().max(1.0) as usize;
    let ny = 2 * half_rows + 1;
    let hy = layout.ly / (ny - 1) as f64;
    let x0 = -layout.period / 2.0;
    let y0 = -layout.ly / 2.0;

    let mut prob = LaplaceProblem::new(nx, ny, hx, hy);
    prob.tolerance = grid.tolerance;
    prob.x_boundary = XBoundary::Periodic;
    prob.y_boundary = YBoundary::Neumann;

    for (k, e) in layout.electrodes.iter().enumerate() {
        if e.width < 2.0 * hx * (1.0 - 1e-9) || e.height < 2.0 * hy * (1.0 - 1e-9) {
            return Err(Error::InvalidLayout(format!(
                "electrode {k} spans fewer than 2 cells per side at {nx} cells per period"
            )));
        }
        let mut hit = false;
        for j in 0..ny {
            let y = y0 + j as f64 * hy;
            if (y - e.center_y).abs() > e.height / 2.0 + 1e-9 * hy {
                continue;
            }
            for i in 0..nx {
                let x = x0 + i as f64 * hx;
                let d = (x - e.center_x).rem_euclid(layout.period);
                let d = d.min(layout.period - d);
                if d <= e.width / 2.0 + 1e-9 * hx {
                    let idx = prob.index(i, j);
                    prob.fixed[idx] = Some(e.potential);
                    hit = true;
                }
            }
        }
        if !hit {
            return Err(Error::InvalidLayout(format!("electrode {k} covers no grid node")));
        }
    }

    let sol = prob.solve()?;
    let phi = sol.phi;
    let (fx, fy) = gradient(&phi, nx, ny, hx, hy, true);
    Ok(FieldMap {
        nx,
        ny,
        x0,
        y0,
        hx,
        hy,
        periodic_x: true,
        kind: FieldKind::Electric,
        phi,
        fx,
        fy,
        iterations: sol.iterations,
    })
}

/// Samples a wire array on a grid covering `[x_min, x_max] x [y_min, y_max]`.
pub fn sample_wires(
    wires: &WireLayout,
    (x_min, x_max): (f64, f64),
    (y_min, y_max): (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<FieldMap> {
    if nx < 2 || ny < 2 || !(x_max > x_min) || !(y_max > y_min) {
        return Err(invalid("wire sampling grid is degenerate"));
    }
    let hx = (x_max - x_min) / (nx - 1) as f64;
    let hy = (y_max - y_min) / (ny - 1) as f64;
    let mut fx = Vec::with_capacity(nx * ny);
    let mut fy = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let b = wires.perturbation(x_min + i as f64 * hx, y_min + j as f64 * hy)?;
            fx.push(b[0]);
            fy.push(b[1]);
        }
    }
    Ok(FieldMap {
        nx,
        ny,
        x0: x_min,
        y0: y_min,
        hx,
        hy,
        periodic_x: false,
        kind: FieldKind::Magnetic { bias: wires.bias_field },
        phi: vec![0.0; nx * ny],
        fx,
        fy,
        iterations: 0,
    })
}

/// Frequency shift sampled along the storage axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftProfile {
    pub x: Vec<f64>,
    pub shift: Vec<f64>,
}

impl ShiftProfile {
    pub fn new(x: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if x.len() != shift.len() || x.len() < 2 {
            return Err(invalid("profile needs at least two (x, shift) samples"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("profile x values must be strictly increasing"));
        }
        Ok(ShiftProfile { x, shift })
    }

    /// Two-point profile going linearly from `+delta_nu` at `-lx/2` to
    /// `-delta_nu` at `+lx/2`.
    pub fn ideal_linear(delta_nu: f64, lx: f64) -> Self {
        ShiftProfile { x: vec![-lx / 2.0, lx / 2.0], shift: vec![delta_nu, -delta_nu] }
    }

    pub fn span(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Linear interpolation between samples.
    pub fn at(&self, x: f64) -> Result<f64> {
        let (a, b) = self.span();
        let tol = 1e-12 * (b - a);
        if !(x >= a - tol && x <= b + tol) {
            return Err(Error::OutsideProfile(x));
        }
        let k = match self.x.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= self.x.len() => self.x.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let t = (x - x0) / (x1 - x0);
        Ok(self.shift[k] + t * (self.shift[k + 1] - self.shift[k]))
    }

    /// Samples restricted to `[a, b]`.
    pub fn restricted(&self, (a, b): (f64, f64)) -> Result<Self> {
        let tol = 1e-9 * (b - a).abs();
        let (x, shift): (Vec<_>, Vec<_>) = self
            .x
            .iter()
            .zip(&self.shift)
            .filter(|(x, _)| **x >= a - tol && **x <= b + tol)
            .map(|(x, s)| (*x, *s))
            .unzip();
        ShiftProfile::new(x, shift)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ShiftProfile { x: self.x.clone(), shift: self.shift.iter().map(|s| c * s).collect() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,shift_hz")?;
        for (x, s) in self.x.iter().zip(&self.shift) {
            writeln!(w, "{x},{s}")?;
        }
        Ok(())
    }
}

/// Which part of the cross-section feeds the axial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoreBand {
    /// Sample the row y = 0 (interpolated if it is not a grid row).
    Axis,
    /// Average over all rows with |y| <= half_width.
    Average { half_width: f64 },
}

pub fn shift_profile(map: &FieldMap, preset: &MaterialPreset, core: CoreBand) -> Result<ShiftProfile> {
    preset.validate()?;
    let rows: Vec<(usize, f64)> = match core {
        CoreBand::Axis => {
            let t = -map.y0 / map.hy;
            if t < 0.0 || t > (map.ny - 1) as f64 {
                return Err(invalid("y = 0 is not inside the field map"));
            }
            let j = t.floor() as usize;
            let frac = t - j as f64;
            if frac < 1e-9 || j + 1 >= map.ny {
                vec![(j, 1.0)]
            } else if frac > 1.0 - 1e-9 {
                vec![(j + 1, 1.0)]
            } else {
                vec![(j, 1.0 - frac), (j + 1, frac)]
            }
        }
        CoreBand::Average { half_width } => {
            let (lo, hi) = map.y_extent();
            if !(half_width >= 0.0) || -half_width < lo - 1e-12 * map.hy || half_width > hi + 1e-12 * map.hy {
                return Err(invalid("core band exceeds the field map"));
            }
            let picked: Vec<usize> =
                (0..map.ny).filter(|&j| map.y(j).abs() <= half_width + 1e-9 * map.hy).collect();
            if picked.is_empty() {
                return Err(invalid("core band contains no grid row"));
            }
            let w = 1.0 / picked.len() as f64;
            picked.into_iter().map(|j| (j, w)).collect()
        }
    };
    let mut x = Vec::with_capacity(map.nx);
    let mut shift = Vec::with_capacity(map.nx);
    for i in 0..map.nx {
        let mut s = 0.0;
        for &(j, w) in &rows {
            s += w * shift_from_field(preset, map.control_value(i, j))?;
        }
        x.push(map.x(i));
        shift.push(s);
    }
    ShiftProfile::new(x, shift)
}

/// Shift at every grid node with |y| <= half_width and x inside `span`, as
/// parallel (x, shift) vectors ordered by row, then column.
pub fn core_samples(
    map: &FieldMap,
    preset: &MaterialPreset,
    half_width: f64,
    span: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    preset.validate()?;
    let tol = 1e-9 * map.hx.min(map.hy);
    let (mut xs, mut shifts) = (Vec::new(), Vec::new());
    for j in (0..map.ny).filter(|&j| map.y(j).abs() <= half_width + tol) {
        for i in 0..map.nx {
            let x = map.x(i);
            if x >= span.0 - tol && x <= span.1 + tol {
                xs.push(x);
                shifts.push(shift_from_field(preset, map.control_value(i, j))?);
            }
        }
    }
    if xs.is_empty() {
        return Err(invalid("core band holds no grid node"));
    }
    Ok((xs, shifts))
}

/// Vertical boundary lines of a storage region, restricted to |y| <= half_height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub xs: Vec<f64>,
    pub half_height: f64,
}

impl RegionBoundary {
    pub fn of_region_a(layout: &ElectrodeLayout, half_height: f64) -> Self {
        RegionBoundary {
            xs: layout.region_a.iter().flat_map(|r| [r.0, r.1]).collect(),
            half_height,
        }
    }
}

/// Largest |field| along the region boundary lines, linearly interpolated
/// between grid columns.
pub fn max_field(map: &FieldMap, region: &RegionBoundary) -> Result<f64> {
    let (lo, hi) = map.y_extent();
    if -region.half_height < lo - 1e-9 * map.hy || region.half_height > hi + 1e-9 * map.hy {
        return Err(invalid("region exceeds the field map"));
    }
    let mut best = 0.0f64;
    for &x in &region.xs {
        let mut t = (x - map.x0) / map.hx;
        if map.periodic_x {
            t = t.rem_euclid(map.nx as f64);
        } else if t < 0.0 || t > (map.nx - 1) as f64 {
            return Err(invalid("region exceeds the field map"));
        }
        let i0 = (t.floor() as usize).min(map.nx - 1);
        let i1 = if map.periodic_x { (i0 + 1) % map.nx } else { (i0 + 1).min(map.nx - 1) };
        let frac = t - i0 as f64;
        for j in (0..map.ny).filter(|&j| map.y(j).abs() <= region.half_height + 1e-9 * map.hy) {
            let (a, b) = (map.idx(i0, j), map.idx(i1, j));
            let ex = map.fx[a] + frac * (map.fx[b] - map.fx[a]);
            let ey = map.fy[a] + frac * (map.fy[b] - map.fy[a]);
            best = best.max(ex.hypot(ey));
        }
    }
    Ok(best)
}

/// Solves Laplace's equation on the box `[-half_x, half_x] x [-half_y, half_y]`
/// with the boundary held at `boundary(x, y)`. `cells` is the node spacing
/// count along x; y uses the closest square spacing with an odd node count.
pub fn solve_dirichlet_box(
    half_x: f64,
    half_y: f64,
    cells: usize,
    tolerance: f64,
    boundary: impl Fn(f64, f64) -> f64,
) -> Result<FieldMap> {
    if cells < 4 || !(half_x > 0.0 && half_y > 0.0) {
        return Err(invalid("box grid is degenerate"));
    }
    let nx = cells + 1;
    let hx = 2.0 * half_x / cells as f64;
    let half_rows = (half_y / hx).round().max(1.0) as usize;
    let ny = 2 * half_rows + 1;
    let hy = 2.0 * half_y / (ny - 1) as f64;
    let (x0, y0) = (-half_x, -half_y);
    let mut prob = LaplaceProblem::new(nx, ny, hx, hy);
    prob.tolerance = tolerance;
    prob.x_boundary = XBoundary::Dirichlet;
    prob.y_boundary = YBoundary::Dirichlet;
    for j in 0..ny {
        for i in 0..nx {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                let idx = prob.index(i, j);
                prob.fixed[idx] = Some(boundary(x0 + i as f64 * hx, y0 + j as f64 * hy));
            }
        }
    }
    let sol = prob.solve()?;
    let (fx, fy) = gradient(&sol.phi, nx, ny, hx, hy, false);
    Ok(FieldMap {
        nx,
        ny,
        x0,
        y0,
        hx,
        hy,
        periodic_x: false,
        kind: FieldKind::Electric,
        phi: sol.phi,
        fx,
        fy,
        iterations: sol.iterations,
    })
}

/// `-∇φ` by central differences, second-order one-sided on open edges.
fn gradient(phi: &[f64], nx: usize, ny: usize, hx: f64, hy: f64, periodic_x: bool) -> (Vec<f64>, Vec<f64>) {
    let mut fx = vec![0.0; nx * ny];
    let mut fy = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            fx[k] = if periodic_x {
                let ip = j * nx + (i + 1) % nx;
                let im = j * nx + (i + nx - 1) % nx;
                -(phi[ip] - phi[im]) / (2.0 * hx)
            } else if i == 0 {
                -(-3.0 * phi[k] + 4.0 * phi[k + 1] - phi[k + 2]) / (2.0 * hx)
            } else if i == nx - 1 {
                -(3.0 * phi[k] - 4.0 * phi[k - 1] + phi[k - 2]) / (2.0 * hx)
            } else {
                -(phi[k + 1] - phi[k - 1]) / (2.0 * hx)
            };
            fy[k] = if j == 0 {
                -(-3.0 * phi[k] + 4.0 * phi[k + nx] - phi[k + 2 * nx]) / (2.0 * hy)
            } else if j == ny - 1 {
                -(3.0 * phi[k] - 4.0 * phi[k - nx] + phi[k - 2 * nx]) / (2.0 * hy)
            } else {
                -(phi[k + nx] - phi[k - nx]) / (2.0 * hy)
            };
        }
    }
    (fx, fy)
}
