//! The computations behind the page, kept free of wasm types so they run
//! and test natively.

use serde::Serialize;

use backret_core::ensemble::{run_protocol, ProtocolConfig, ResidualModel};
use backret_core::field::{linearity_report, shift_profile, solve_potential, ArrayFamily, CoreBand, GridSpec};
use backret_core::materials::MaterialPreset;
use backret_core::oracle;
use backret_core::propagation::{efficiency_sweep, PropagationConfig, RetrievalMode};
use backret_core::protocol::dephasing_efficiency;

#[derive(Debug, Serialize)]
pub struct ProfileView {
    pub x: Vec<f64>,
    pub shift: Vec<f64>,
    pub residual: Vec<f64>,
    pub ratio: f64,
}

/// Axial shift profile of the eight-electrode array (U2 = 1, unit Lx),
/// averaged over the core `|y| < Ly/10`.
pub fn eight_electrode_profile(u1: f64, u3: f64, cells: usize) -> Result<ProfileView, String> {
    let cells = cells.clamp(32, 512);
    let fam = ArrayFamily::eight_reference(1.0, [u1, 1.0, u3]);
    let map = solve_potential(&fam.build().map_err(|e| e.to_string())?, GridSpec::new(cells)).map_err(|e| e.to_string())?;
    let profile = shift_profile(&map, &MaterialPreset::ideal(), CoreBand::Average { half_width: 0.075 })
        .map_err(|e| e.to_string())?;
    let fit = linearity_report(&profile, (-0.5, 0.5)).map_err(|e| e.to_string())?;
    let shift = fit.x.iter().map(|&x| profile.at(x).unwrap_or(f64::NAN)).collect();
    Ok(ProfileView { x: fit.x, shift, residual: fit.residuals, ratio: fit.ratio })
}

#[derive(Debug, Serialize)]
pub struct EmissionView {
    pub t_rev: f64,
    pub t: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub predicted_backward: f64,
}

/// Forward and backward emission while the field is on, for a Pr:YSO
/// sample with residual nonlinearity `ratio` (two-point model).
pub fn ensemble_emission(n_atoms: usize, lx_mm: f64, delta_nu_ghz: f64, ratio: f64, samples: usize) -> Result<EmissionView, String> {
    let preset = MaterialPreset::pr_yso();
    let mut cfg = ProtocolConfig::ideal(&preset, lx_mm * 1e-3, delta_nu_ghz * 1e9, n_atoms.clamp(2, 200_000));
    cfg.samples = samples.clamp(2, 2001);
    cfg.residual = ResidualModel::TwoPoint { delta_nu: ratio.abs() * cfg.delta_nu };
    let run = run_protocol(&cfg).map_err(|e| e.to_string())?;
    Ok(EmissionView {
        t_rev: run.t_rev,
        t: run.series.iter().map(|r| r.t).collect(),
        forward: run.series.iter().map(|r| r.forward).collect(),
        backward: run.series.iter().map(|r| r.backward).collect(),
        predicted_backward: dephasing_efficiency(ratio.abs() * cfg.delta_nu, run.t_rev),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepView {
    pub optical_depth: Vec<f64>,
    pub eta_forward: Vec<f64>,
    pub eta_backward: Vec<f64>,
    pub oracle_forward: Vec<f64>,
    pub oracle_backward: Vec<f64>,
}

/// Retrieval efficiency in both directions for `points` optical depths up
/// to `max_od`, next to the closed forms.
pub fn propagation_sweep(max_od: f64, points: usize) -> Result<SweepView, String> {
    let points = points.clamp(2, 40);
    if !(max_od > 0.0 && max_od <= 12.0) {
        return Err("optical depth must lie in (0, 12]".into());
    }
    let grid: Vec<f64> = (1..=points).map(|k| max_od * k as f64 / points as f64).collect();
    let base = PropagationConfig::standard(0.0, RetrievalMode::BackwardConjugate).with_resolution(120, 520);
    let sweep = efficiency_sweep(&grid, &base).map_err(|e| e.to_string())?;
    Ok(SweepView {
        oracle_forward: grid.iter().map(|&d| oracle::forward_efficiency(d)).collect(),
        oracle_backward: grid.iter().map(|&d| oracle::backward_efficiency(d)).collect(),
        eta_forward: sweep.rows.iter().map(|r| r.eta_forward).collect(),
        eta_backward: sweep.rows.iter().map(|r| r.eta_backward).collect(),
        optical_depth: grid,
    })
}
