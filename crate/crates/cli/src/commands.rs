use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use backret_core::ensemble::{run_protocol, write_series_csv, Placement, ProtocolConfig};
use backret_core::field::{
    linearity_report, max_field, shift_profile, solve_potential, ArrayFamily, CoreBand, ElectrodeLayout, GridSpec,
    RegionBoundary, ShiftProfile,
};
use backret_core::materials::{load_registry, shift_from_field, ControlField, MaterialPreset};
use backret_core::optimizer::{optimize, OptimizationProblem, SearchConfig};
use backret_core::propagation::{efficiency_sweep, run, PropagationConfig, RetrievalMode};
use backret_core::protocol::{nonlinearity_bound_from_count, BoundMode, ReversalPlan};
use backret_core::reproduce::reproduce_checked;

use crate::units::{self, Dimension};
use crate::{
    BoundArgs, Cli, Command, Common, EnsembleArgs, FamilyArgs, FamilyKind, FieldArgs, ModeKind, OptimizeArgs,
    PlacementKind, PropagateArgs, TimingArgs,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CHECK: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] backret_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use backret_core::Error as E;
        match self {
            CliError::Core(E::NoConvergence { .. }) => EXIT_SOLVER,
            CliError::Core(E::Stability(_) | E::Calibration(_) | E::DegenerateFit(_)) => EXIT_CHECK,
            _ => EXIT_USAGE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn execute(cli: &Cli) -> Result<u8> {
    let c = &cli.common;
    match &cli.command {
        Command::Timing(a) => timing(c, a),
        Command::Bound(a) => bound(c, a),
        Command::Field(a) => field(c, a),
        Command::Optimize(a) => optimize_cmd(c, a),
        Command::Ensemble(a) => ensemble(c, a),
        Command::Propagate(a) => propagate(c, a),
        Command::ReproducePaper => reproduce(c),
    }
}

fn preset(common: &Common, name: &str) -> Result<MaterialPreset> {
    if let Some(path) = &common.registry {
        if let Some(p) = load_registry(path)?.into_iter().find(|p| p.name == name) {
            return Ok(p);
        }
    }
    MaterialPreset::by_name(name).ok_or_else(|| {
        let known: Vec<String> = MaterialPreset::builtin().into_iter().map(|p| p.name).collect();
        usage(format!("unknown preset `{name}` (built in: {})", known.join(", ")))
    })
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out)?;
    Ok(&common.out)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

fn timing(common: &Common, a: &TimingArgs) -> Result<u8> {
    let preset = preset(common, &a.preset)?;
    let delta_nu = match (&a.delta_nu, &a.field) {
        (Some(f), _) => f.0,
        (None, Some(text)) => {
            let field = if preset.is_electric() {
                ControlField::Electric(units::parse(text, Dimension::ElectricField).map_err(usage)?)
            } else {
                ControlField::Magnetic(units::parse(text, Dimension::MagneticField).map_err(usage)?)
            };
            shift_from_field(&preset, field)?.abs()
        }
        (None, None) => return Err(usage("give --delta-nu or --field")),
    };
    let plan = ReversalPlan::new(&preset, a.lx.0, delta_nu, a.m_max)?;
    println!("preset           {}", preset.name);
    println!("Δν               {:.4} MHz", delta_nu / 1e6);
    println!("t_rev = {:.3} µs", plan.t_rev * 1e6);
    println!("t_m spacing      {:.4} ns", plan.t_m[0] * 1e9);
    println!("switch tolerance {:.4} ns", plan.switching_tolerance * 1e9);
    if plan.t_rev > preset.t2 {
        log::warn!("reversal time exceeds the preset's T2 ({:.3e} s)", preset.t2);
    }
    let dir = out_dir(common)?;
    write_with(dir, "subradiance_times.csv", |w| {
        use std::io::Write;
        writeln!(w, "m,t_s")?;
        for (k, t) in plan.t_m.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, t)?;
        }
        Ok(())
    })?;
    write_json(dir, "timing.json", &plan)?;
    Ok(0)
}

fn bound(common: &Common, a: &BoundArgs) -> Result<u8> {
    let count = match (a.lx_over_lambda, &a.preset, &a.lx) {
        (Some(l), _, _) => l * a.n,
        (None, Some(name), Some(lx)) => preset(common, name)?.wavelengths_in(lx.0),
        _ => return Err(usage("give --lx-over-lambda (with --n) or --preset with --lx")),
    };
    let mode = match a.eps {
        Some(eps) => BoundMode::TargetEfficiency(eps),
        None => BoundMode::QuarterRule,
    };
    let ratio = nonlinearity_bound_from_count(count, mode)?;
    println!("wavelengths in sample  {count:.2}");
    println!("allowed δν/Δν = {ratio:.3e}");
    let dir = out_dir(common)?;
    write_json(dir, "bound.json", &json!({ "wavelengths": count, "mode": mode, "allowed_ratio": ratio }))?;
    Ok(0)
}

fn build_family(f: &FamilyArgs) -> Result<ArrayFamily> {
    let lx = f.lx.0;
    let (n_pot, default_ly) = match f.family {
        FamilyKind::Quadrupole => (1, lx),
        FamilyKind::Eight => (3, 0.75 * lx),
        FamilyKind::Twelve => (5, 0.75 * lx),
    };
    let u: Vec<f64> = if f.u.is_empty() {
        match f.family {
            FamilyKind::Quadrupole => vec![10.0],
            FamilyKind::Eight => vec![5.18, 10.0, 21.4],
            FamilyKind::Twelve => return Err(usage("the twelve-electrode family needs --u with five potentials")),
        }
    } else {
        f.u.iter().map(|v| v.0).collect()
    };
    if u.len() != n_pot {
        return Err(usage(format!("this family takes {n_pot} potentials, got {}", u.len())));
    }
    Ok(ArrayFamily {
        lx,
        ly: f.ly.map_or(default_ly, |l| l.0),
        d: f.d.map_or(0.05 * lx, |d| d.0),
        per_surface: 2 * (n_pot + 1),
        potentials: u,
    })
}

fn core_band(fraction: f64, ly: f64) -> Result<CoreBand> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(usage("--core must lie in [0, 0.5]"));
    }
    Ok(if fraction == 0.0 { CoreBand::Axis } else { CoreBand::Average { half_width: fraction * ly } })
}

fn profile_csv(w: &mut Vec<u8>, profile: &ShiftProfile, residual: &[f64], xs: &[f64]) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(w, "x_m,shift_hz,residual_hz")?;
    for (x, r) in xs.iter().zip(residual) {
        writeln!(w, "{},{},{}", x, profile.at(*x).unwrap_or(f64::NAN), r)?;
    }
    Ok(())
}

fn field(common: &Common, a: &FieldArgs) -> Result<u8> {
    let preset = preset(common, &a.preset)?;
    let layout = match &a.layout {
        Some(path) => ElectrodeLayout::load(path)?,
        None => build_family(&a.family)?.build()?,
    };
    let span = *layout.region_a.first().ok_or_else(|| usage("layout defines no region A"))?;
    let map = solve_potential(&layout, GridSpec::new(a.cells))?;
    let profile = shift_profile(&map, &preset, core_band(a.core, layout.ly)?)?;
    let fit = linearity_report(&profile, span)?;
    let e_max = max_field(&map, &RegionBoundary::of_region_a(&layout, 0.0))?;
    let boundary_shift = shift_from_field(&preset, ControlField::Electric(e_max)).ok();
    println!("δν/Δν = {:.4e}", fit.ratio);
    println!("Δν (fit)         {:.4} MHz", fit.delta_nu / 1e6);
    println!("|E| on boundary  {:.4} V/cm", e_max / 100.0);
    if let Some(s) = boundary_shift {
        println!("shift there      {:.4} MHz", s / 1e6);
    }
    let dir = out_dir(common)?;
    write_with(dir, "shift_profile.csv", |w| profile_csv(w, &profile, &fit.residuals, &fit.x))?;
    if a.map {
        write_with(dir, "field_map.csv", |w| map.write_csv(w))?;
    }
    write_json(
        dir,
        "field.json",
        &json!({
            "ratio": fit.ratio,
            "delta_nu_hz": fit.delta_nu,
            "delta_nu_rms_hz": fit.delta_nu_rms,
            "slope_hz_per_m": fit.slope,
            "intercept_hz": fit.intercept,
            "boundary_field_v_per_m": e_max,
            "boundary_shift_hz": boundary_shift,
            "cells_per_period": a.cells,
        }),
    )?;
    Ok(0)
}

fn optimize_cmd(common: &Common, a: &OptimizeArgs) -> Result<u8> {
    let (family, bounds): (ArrayFamily, Vec<(f64, f64)>) = match a.family {
        FamilyKind::Eight => (ArrayFamily::eight_reference(1.0, [0.518, 1.0, 2.14]), vec![(0.1, 1.5), (0.5, 4.0)]),
        FamilyKind::Twelve => (
            ArrayFamily::twelve_reference(1.0, [0.3, 0.6, 1.0, 1.5, 2.5]),
            vec![(0.0, 2.0), (0.0, 2.0), (0.2, 5.0), (0.2, 8.0)],
        ),
        FamilyKind::Quadrupole => return Err(usage("the quadrupole has no free potential once U is fixed")),
    };
    let mut problem = OptimizationProblem::for_family(&family, &bounds, core_band(a.core, family.ly)?)?;
    problem.grid = GridSpec::new(a.cells);
    problem.verify_grid = GridSpec::new(a.verify_cells);
    let cfg = SearchConfig { restarts: a.restarts, max_evals: a.max_evals, seed: common.seed, ..Default::default() };
    let r = optimize(&problem, &cfg)?;
    for (n, v) in r.names.iter().zip(&r.best_params) {
        println!("{n} = {v:.4}  (U{} = 1)", family.boundary_index().map_or(0, |k| k + 1));
    }
    println!("δν/Δν = {:.4e} (search grid), {:.4e} (verified)", r.ratio, r.verified_ratio);
    if !r.converged {
        println!("warning: evaluation budget exhausted before convergence");
    }
    let dir = out_dir(common)?;
    write_with(dir, "optimizer_history.csv", |w| r.write_history_csv(w))?;
    let summary = json!({
        "names": r.names,
        "best_params": r.best_params,
        "ratio": r.ratio,
        "verified_ratio": r.verified_ratio,
        "evaluations": r.evaluations,
        "converged": r.converged,
        "seed": common.seed,
    });
    write_json(dir, "optimize.json", &summary)?;
    Ok(0)
}

fn read_profile(path: &Path) -> Result<ShiftProfile> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| usage(format!("{} lacks a `{name}` column", path.display())))
    };
    let (ix, is) = (col("x_m")?, col("shift_hz")?);
    let (mut x, mut s) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| usage(format!("bad number `{}`", &rec[i])));
        x.push(num(ix)?);
        s.push(num(is)?);
    }
    Ok(ShiftProfile::new(x, s)?)
}

fn ensemble(common: &Common, a: &EnsembleArgs) -> Result<u8> {
    let preset = preset(common, &a.preset)?;
    let mut cfg = ProtocolConfig::ideal(&preset, a.lx.0, a.delta_nu.0, a.n);
    if a.profile != "ideal-linear" {
        cfg.profile = Some(read_profile(Path::new(&a.profile))?);
    }
    cfg.placement = match a.placement {
        PlacementKind::Equispaced => Placement::Equispaced,
        PlacementKind::Uniform => Placement::SeededUniform { seed: common.seed },
    };
    cfg.t2 = if a.preset_t2 { Some(preset.t2) } else { a.t2.map(|t| t.0) };
    cfg.samples = a.samples;
    cfg.m_max = a.m_max;
    let r = run_protocol(&cfg)?;
    println!("t_rev = {:.4} µs", r.t_rev * 1e6);
    println!("backward rate at t_rev = {:.6}", r.at_reversal.backward);
    println!("forward rate at t_rev  = {:.3e}", r.at_reversal.forward);
    println!("forward after reversed readout = {:.6}", r.restored_forward);
    let dir = out_dir(common)?;
    write_with(dir, "ensemble_series.csv", |w| write_series_csv(&r.series, w))?;
    write_with(dir, "subradiance.csv", |w| {
        use std::io::Write;
        writeln!(w, "m,t_s,r_forward")?;
        for p in &r.subradiance {
            writeln!(w, "{},{},{}", p.m, p.t, p.forward)?;
        }
        Ok(())
    })?;
    let summary = json!({
        "t_rev_s": r.t_rev,
        "at_reversal": r.at_reversal,
        "restored_forward": r.restored_forward,
        "verdict": r.verdict,
        "subradiance": r.subradiance,
        "config": { "n_atoms": a.n, "preset": preset.name, "lx_m": a.lx.0, "delta_nu_hz": a.delta_nu.0, "seed": common.seed },
    });
    write_json(dir, "ensemble.json", &summary)?;
    Ok(0)
}

fn propagate(common: &Common, a: &PropagateArgs) -> Result<u8> {
    let mode = match a.mode {
        ModeKind::Forward => RetrievalMode::ForwardCrib,
        ModeKind::Backward => RetrievalMode::BackwardConjugate,
        ModeKind::Ramp => RetrievalMode::GradientRamp { ramp_time_s: a.ramp_time.0, residual: None },
    };
    let mut cfg = match &a.config {
        Some(path) => PropagationConfig::from_json(&fs::read_to_string(path)?)?,
        None => PropagationConfig::standard(a.od, mode),
    };
    if let Some(nx) = a.nx {
        cfg.nx = nx;
    }
    if let Some(nt) = a.nt {
        cfg.nt = nt;
    }
    let dir = out_dir(common)?;
    write_json(dir, "propagation_config.json", &cfg)?;
    if !a.sweep.is_empty() {
        let sweep = efficiency_sweep(&a.sweep, &cfg)?;
        println!("{:>6} {:>10} {:>10} {:>10}", "αL", "T", "η_fwd", "η_bwd");
        for r in &sweep.rows {
            println!("{:>6} {:>10.5} {:>10.5} {:>10.5}", r.optical_depth, r.transmission, r.eta_forward, r.eta_backward);
        }
        if let Some(c) = sweep.crossover {
            println!("backward ahead from αL = {c}");
        }
        write_with(dir, "propagation_sweep.csv", |w| sweep.write_csv(w))?;
        write_json(dir, "propagation.json", &sweep)?;
        return Ok(0);
    }
    let (stored, out) = run(&cfg)?;
    println!("αL = {}", cfg.optical_depth);
    println!("transmitted  {:.6}", out.transmitted_energy);
    println!("stored       {:.6}", stored.stored_energy);
    println!("efficiency = {:.6}", out.efficiency);
    println!("ledger error {:.2e}", out.ledger_error);
    write_with(dir, "waveform.csv", |w| out.write_waveform_csv(w))?;
    let summary = json!({
        "optical_depth": cfg.optical_depth,
        "efficiency": out.efficiency,
        "input_energy": out.input_energy,
        "transmitted_energy": out.transmitted_energy,
        "stored_energy": stored.stored_energy,
        "emitted_energy": out.emitted_energy,
        "residual_energy": out.residual_energy,
        "ledger_error": out.ledger_error,
        "coupling": stored.coupling,
    });
    write_json(dir, "propagation.json", &summary)?;
    Ok(0)
}

fn reproduce(common: &Common) -> Result<u8> {
    let rep = reproduce_checked(common.seed)?;
    print!("{}", rep.table());
    let dir = out_dir(common)?;
    rep.write_to(dir)?;
    let failed: Vec<String> = rep.criteria().iter().filter(|c| !c.passed).map(|c| c.criterion.to_string()).collect();
    if failed.is_empty() {
        println!("all criteria pass");
        Ok(0)
    } else {
        println!("failing criteria: {}", failed.join(", "));
        Ok(EXIT_CHECK)
    }
}
