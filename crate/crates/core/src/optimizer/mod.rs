//! Minimization of the shift-profile nonlinearity δν/Δν over electrode
//! potentials and positions.

pub mod nelder_mead;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use nelder_mead::{minimize, Algorithm, Evaluation, SearchConfig, SearchResult};

use crate::error::{invalid, Result};
use crate::field::{
    linearity_report, shift_profile, solve_dirichlet_box, solve_potential, ArrayFamily, CoreBand,
    ElectrodeLayout, GridSpec, LinearityReport, ShiftProfile,
};
use crate::materials::MaterialPreset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Potential,
    X,
    Y,
}

/// One search variable. Setting it to `v` writes `factor * v` into the
/// chosen coordinate of every target electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub name: String,
    pub dof: Dof,
    pub targets: Vec<(usize, f64)>,
    pub bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub base: ElectrodeLayout,
    pub params: Vec<FreeParameter>,
    /// x-interval the line is fitted over.
    pub span: (f64, f64),
    pub core: CoreBand,
    /// Grid used during the search.
    pub grid: GridSpec,
    /// Grid used to verify the final point.
    pub verify_grid: GridSpec,
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.params.is_empty() {
            return Err(invalid("at least one free parameter is required"));
        }
        for p in &self.params {
            let (lo, hi) = p.bounds;
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(invalid(format!("parameter `{}` needs finite bounds lo < hi", p.name)));
            }
            if p.targets.is_empty() || p.targets.iter().any(|(i, _)| *i >= self.base.electrodes.len()) {
                return Err(invalid(format!("parameter `{}` targets a missing electrode", p.name)));
            }
        }
        if !(self.span.1 > self.span.0) {
            return Err(invalid("objective span is empty"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.params.iter().map(|p| p.bounds).collect()
    }

    /// Parameter values read back from the base layout.
    pub fn current_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| {
                let (idx, f) = p.targets[0];
                let e = &self.base.electrodes[idx];
                let v = match p.dof {
                    Dof::Potential => e.potential,
                    Dof::X => e.center_x,
                    Dof::Y => e.center_y,
                };
                v / f
            })
            .collect()
    }

    pub fn layout_at(&self, values: &[f64]) -> Result<ElectrodeLayout> {
        if values.len() != self.params.len() {
            return Err(invalid("parameter vector has the wrong length"));
        }
        let mut layout = self.base.clone();
        for (p, &v) in self.params.iter().zip(values) {
            let (lo, hi) = p.bounds;
            let slack = 1e-12 * (hi - lo);
            if !(v >= lo - slack && v <= hi + slack) {
                return Err(invalid(format!("parameter `{}` = {v} is outside [{lo}, {hi}]", p.name)));
            }
            for &(idx, f) in &p.targets {
                let e = &mut layout.electrodes[idx];
                match p.dof {
                    Dof::Potential => e.potential = f * v,
                    Dof::X => e.center_x = f * v,
                    Dof::Y => e.center_y = f * v,
                }
            }
        }
        layout.validate()?;
        Ok(layout)
    }

    fn potentials_only(&self) -> bool {
        self.params.iter().all(|p| p.dof == Dof::Potential)
    }

    /// Potentials-only search over an antisymmetric array family with the
    /// region-A boundary electrode pinned at its current value (gauge).
    pub fn for_family(family: &ArrayFamily, bounds: &[(f64, f64)], core: CoreBand) -> Result<Self> {
        let gauge = family.boundary_index().ok_or_else(|| invalid("family has no boundary electrode"))?;
        let targets = family.potential_targets()?;
        let free: Vec<usize> = (0..family.potentials.len()).filter(|&k| k != gauge).collect();
        if bounds.len() != free.len() {
            return Err(invalid(format!("expected {} bounds, got {}", free.len(), bounds.len())));
        }
        let params = free
            .iter()
            .zip(bounds)
            .map(|(&k, &b)| FreeParameter {
                name: format!("U{}", k + 1),
                dof: Dof::Potential,
                targets: targets[k].clone(),
                bounds: b,
            })
            .collect();
        let base = family.build()?;
        let problem = OptimizationProblem {
            span: (-family.lx / 2.0, family.lx / 2.0),
            base,
            params,
            core,
            grid: GridSpec::new(256),
            verify_grid: GridSpec::new(512),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

/// Anything that maps a parameter vector to an axial shift profile.
pub trait ProfileModel {
    fn names(&self) -> Vec<String>;
    fn bounds(&self) -> Vec<(f64, f64)>;
    /// Starting point for the first simplex run, if the model has one.
    fn initial(&self) -> Option<Vec<f64>>;
    /// x-interval the line is fitted over.
    fn span(&self) -> (f64, f64);
    fn search_grid(&self) -> GridSpec;
    fn verify_grid(&self) -> GridSpec;
    fn profile(&self, values: &[f64], grid: GridSpec) -> Result<ShiftProfile>;

    /// Ratio on the search grid. Models may override this with a cheaper
    /// equivalent.
    fn search_objective(&self) -> Result<Box<dyn Fn(&[f64]) -> Result<f64> + '_>> {
        let grid = self.search_grid();
        Ok(Box::new(move |x: &[f64]| evaluate_on(self, x, grid).map(|r| r.ratio)))
    }
}

/// solve → profile → linearity at `values` on the search grid.
pub fn evaluate_objective<M: ProfileModel + ?Sized>(model: &M, values: &[f64]) -> Result<f64> {
    evaluate_on(model, values, model.search_grid()).map(|r| r.ratio)
}

pub fn evaluate_on<M: ProfileModel + ?Sized>(model: &M, values: &[f64], grid: GridSpec) -> Result<LinearityReport> {
    linearity_report(&model.profile(values, grid)?, model.span())
}

fn layout_profile(layout: &ElectrodeLayout, grid: GridSpec, core: CoreBand) -> Result<ShiftProfile> {
    // δν/Δν does not depend on the field-to-shift coefficient
    let map = solve_potential(layout, grid)?;
    shift_profile(&map, &MaterialPreset::ideal(), core)
}

impl ProfileModel for OptimizationProblem {
    fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        OptimizationProblem::bounds(self)
    }

    fn initial(&self) -> Option<Vec<f64>> {
        let start = self.current_values();
        let inside = start.iter().zip(&self.params).all(|(v, p)| *v >= p.bounds.0 && *v <= p.bounds.1);
        inside.then_some(start)
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn search_grid(&self) -> GridSpec {
        self.grid
    }

    fn verify_grid(&self) -> GridSpec {
        self.verify_grid
    }

    fn profile(&self, values: &[f64], grid: GridSpec) -> Result<ShiftProfile> {
        layout_profile(&self.layout_at(values)?, grid, self.core)
    }

    fn search_objective(&self) -> Result<Box<dyn Fn(&[f64]) -> Result<f64> + '_>> {
        let obj = Objective::new(self)?;
        Ok(Box::new(move |x: &[f64]| obj.ratio(x)))
    }
}

/// Objective with the field solves factored out. When every parameter is a
/// potential, the profile is linear in the parameters, so one solve per
/// parameter (plus one for the fixed electrodes) covers the whole search.
pub struct Objective<'a> {
    problem: &'a OptimizationProblem,
    basis: Option<(ShiftProfile, Vec<ShiftProfile>)>,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a OptimizationProblem) -> Result<Self> {
        problem.validate()?;
        let basis = if problem.potentials_only() {
            let mut fixed = problem.base.clone();
            for p in &problem.params {
                for &(idx, _) in &p.targets {
                    fixed.electrodes[idx].potential = 0.0;
                }
            }
            let fixed_profile = layout_profile(&fixed, problem.grid, problem.core)?;
            let mut unit = Vec::with_capacity(problem.params.len());
            for p in &problem.params {
                let mut l = fixed.clone();
                for e in &mut l.electrodes {
                    e.potential = 0.0;
                }
                for &(idx, f) in &p.targets {
                    l.electrodes[idx].potential = f;
                }
                unit.push(layout_profile(&l, problem.grid, problem.core)?);
            }
            Some((fixed_profile, unit))
        } else {
            None
        };
        Ok(Objective { problem, basis })
    }

    pub fn report(&self, values: &[f64]) -> Result<LinearityReport> {
        match &self.basis {
            Some((fixed, unit)) => {
                self.problem.layout_at(values)?;
                let mut shift = fixed.shift.clone();
                for (u, v) in unit.iter().zip(values) {
                    for (s, b) in shift.iter_mut().zip(&u.shift) {
                        *s += v * b;
                    }
                }
                linearity_report(&ShiftProfile::new(fixed.x.clone(), shift)?, self.problem.span)
            }
            None => evaluate_on(self.problem, values, self.problem.grid),
        }
    }

    pub fn ratio(&self, values: &[f64]) -> Result<f64> {
        self.report(values).map(|r| r.ratio)
    }
}

/// Closed-box quadrupole whose walls carry `-U x y + c (x³y - x y³)`.
///
/// Both terms are harmonic and reproduced exactly by the five-point
/// stencil, so on the axis the field is `U x - c x³` up to round-off and a
/// linear discretization term. The nonlinearity vanishes at `c = 0` for any
/// `U`, which makes this a reference problem for the search pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealQuadrupole {
    pub half_x: f64,
    pub half_y: f64,
    pub span: (f64, f64),
    pub bounds: [(f64, f64); 2],
    pub grid: GridSpec,
    pub verify_grid: GridSpec,
}

impl IdealQuadrupole {
    pub fn new(half_x: f64, half_y: f64) -> Self {
        IdealQuadrupole {
            half_x,
            half_y,
            span: (-0.5 * half_x, 0.5 * half_x),
            bounds: [(0.1, 10.0), (-1.0, 1.0)],
            grid: GridSpec::new(64),
            verify_grid: GridSpec::new(256),
        }
    }
}

impl ProfileModel for IdealQuadrupole {
    fn names(&self) -> Vec<String> {
        vec!["U".into(), "c".into()]
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.to_vec()
    }

    fn initial(&self) -> Option<Vec<f64>> {
        None
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn search_grid(&self) -> GridSpec {
        self.grid
    }

    fn verify_grid(&self) -> GridSpec {
        self.verify_grid
    }

    fn profile(&self, values: &[f64], grid: GridSpec) -> Result<ShiftProfile> {
        let &[u, c] = values else {
            return Err(invalid("ideal quadrupole takes (U, c)"));
        };
        let map = solve_dirichlet_box(self.half_x, self.half_y, grid.cells_per_period, grid.tolerance, |x, y| {
            -u * x * y + c * (x * x * x * y - x * y * y * y)
        })?;
        shift_profile(&map, &MaterialPreset::ideal(), CoreBand::Axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub names: Vec<String>,
    pub best_params: Vec<f64>,
    /// δν/Δν at the optimum on the search grid.
    pub ratio: f64,
    /// δν/Δν at the optimum re-solved on the verification grid.
    pub verified_ratio: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub history: Vec<Evaluation>,
}

impl OptimizationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns eval_index, one per parameter, ratio.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "eval_index")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w, ",ratio")?;
        for e in &self.history {
            write!(w, "{}", e.index)?;
            for p in &e.params {
                write!(w, ",{p}")?;
            }
            writeln!(w, ",{}", e.value)?;
        }
        Ok(())
    }
}

pub fn optimize<M: ProfileModel + ?Sized>(model: &M, config: &SearchConfig) -> Result<OptimizationResult> {
    let objective = model.search_objective()?;
    let bounds = model.bounds();
    let start = model.initial();
    let search = minimize(|x| objective(x), &bounds, start.as_deref(), config)?;
    let verified = evaluate_on(model, &search.best_params, model.verify_grid())?;
    if !search.converged {
        log::warn!("optimizer budget exhausted before the simplex converged");
    }
    Ok(OptimizationResult {
        names: model.names(),
        best_params: search.best_params,
        ratio: search.best_value,
        verified_ratio: verified.ratio,
        evaluations: search.evaluations,
        converged: search.converged,
        history: search.history,
    })
}
