//! Phased-array model of the stored ensemble.
//!
//! Each atom carries an amplitude, a position and an accumulated phase. The
//! collective emission rate into direction `k_d` is
//! `|Σ a_j exp(i(k0 x_j + φ_j − k_d x_j))|² / (Σ |a_j(0)|)²`, so a freshly
//! written state radiates forward at rate 1.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Add;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{linearity_fit, ShiftProfile};
use crate::materials::{optical_wavevector, MaterialPreset};
use crate::protocol::{dephasing_efficiency, reversal_time, subradiance_times, FieldSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Cell centres of `n` equal cells.
    Equispaced,
    SeededUniform { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeProfile {
    Uniform,
    /// `a ∝ exp(−α x'/2)` with `x'` measured from the input face.
    Exponential { optical_depth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub positions: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub phases: Vec<f64>,
    pub k0: f64,
    pub lx: f64,
    pub elapsed: f64,
    /// `Σ |a_j|` at write time; fixes the rate normalization.
    pub reference_norm: f64,
    pub preset: String,
}

/// Sum with a fixed binary-tree shape, independent of thread count.
pub fn pairwise_sum<T: Copy + Add<Output = T> + Default>(v: &[T]) -> T {
    const LEAF: usize = 8;
    if v.len() <= LEAF {
        return v.iter().fold(T::default(), |a, &b| a + b);
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn init_ensemble(
    preset: &MaterialPreset,
    n_atoms: usize,
    lx: f64,
    placement: Placement,
    amplitude: AmplitudeProfile,
) -> Result<EnsembleState> {
    if n_atoms < 2 {
        return Err(invalid("an ensemble needs at least two atoms"));
    }
    if !(lx > 0.0 && lx.is_finite()) {
        return Err(invalid("sample length must be positive"));
    }
    let positions: Vec<f64> = match placement {
        Placement::Equispaced => {
            (0..n_atoms).map(|j| -lx / 2.0 + (j as f64 + 0.5) * lx / n_atoms as f64).collect()
        }
        Placement::SeededUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(-lx / 2.0..lx / 2.0)).collect();
            x.sort_by(f64::total_cmp);
            x
        }
    };
    let raw: Vec<f64> = match amplitude {
        AmplitudeProfile::Uniform => vec![1.0; n_atoms],
        AmplitudeProfile::Exponential { optical_depth } => {
            if !(optical_depth >= 0.0 && optical_depth.is_finite()) {
                return Err(invalid("optical depth must be non-negative"));
            }
            positions.iter().map(|x| (-0.5 * optical_depth * (x / lx + 0.5)).exp()).collect()
        }
    };
    let norm = pairwise_sum(&raw.iter().map(|a| a * a).collect::<Vec<_>>()).sqrt();
    let amplitudes: Vec<Complex64> = raw.iter().map(|a| Complex64::new(a / norm, 0.0)).collect();
    let reference_norm = pairwise_sum(&amplitudes.iter().map(|a| a.norm()).collect::<Vec<_>>());
    Ok(EnsembleState {
        phases: vec![0.0; n_atoms],
        positions,
        amplitudes,
        k0: optical_wavevector(preset),
        lx,
        elapsed: 0.0,
        reference_norm,
        preset: preset.name.clone(),
    })
}

impl EnsembleState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Per-atom shifts (Hz) sampled from `profile`.
    pub fn shifts_from(&self, profile: &ShiftProfile) -> Result<Vec<f64>> {
        self.positions.iter().map(|&x| profile.at(x)).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        pairwise_sum(&self.amplitudes.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>())
    }
}

/// Advances by `t` under `schedule`, with per-atom shifts given directly.
///
/// Each atom gets a single increment `2π s_j ∫₀ᵗ g`, so running the same
/// time under the negated schedule undoes it exactly from a zero phase.
pub fn evolve_shifts(
    state: &EnsembleState,
    shifts: &[f64],
    schedule: &FieldSchedule,
    t: f64,
    t2: Option<f64>,
) -> Result<EnsembleState> {
    if shifts.len() != state.len() {
        return Err(invalid("one shift per atom is required"));
    }
    if !(t >= 0.0) {
        return Err(invalid("evolution time must be non-negative"));
    }
    let area = schedule.area(t);
    let mut next = state.clone();
    if area != 0.0 {
        for (p, s) in next.phases.iter_mut().zip(shifts) {
            *p += 2.0 * PI * s * area;
        }
    }
    if let Some(t2) = t2 {
        if !(t2 > 0.0) {
            return Err(invalid("T2 must be positive"));
        }
        let f = (-t / t2).exp();
        for a in &mut next.amplitudes {
            *a *= f;
        }
    }
    next.elapsed += t;
    Ok(next)
}

pub fn evolve(
    state: &EnsembleState,
    profile: &ShiftProfile,
    schedule: &FieldSchedule,
    t: f64,
    t2: Option<f64>,
) -> Result<EnsembleState> {
    evolve_shifts(state, &state.shifts_from(profile)?, schedule, t, t2)
}

pub fn emission_rate(state: &EnsembleState, direction: Direction) -> f64 {
    let kd = match direction {
        Direction::Forward => state.k0,
        Direction::Backward => -state.k0,
    };
    let terms: Vec<Complex64> = state
        .positions
        .iter()
        .zip(&state.amplitudes)
        .zip(&state.phases)
        .map(|((&x, &a), &phi)| a * Complex64::from_polar(1.0, (state.k0 * x + phi) - kd * x))
        .collect();
    pairwise_sum(&terms).norm_sqr() / (state.reference_norm * state.reference_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionReport {
    pub t: f64,
    pub forward: f64,
    pub backward: f64,
    /// backward / forward; `None` when forward emission vanishes.
    pub contrast: Option<f64>,
}

pub fn emission_report(state: &EnsembleState) -> EmissionReport {
    let forward = emission_rate(state, Direction::Forward);
    let backward = emission_rate(state, Direction::Backward);
    let contrast = (forward > 0.0).then(|| backward / forward);
    EmissionReport { t: state.elapsed, forward, backward, contrast }
}

pub fn write_series_csv<W: Write>(series: &[EmissionReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t_s,r_forward,r_backward")?;
    for r in series {
        writeln!(w, "{},{},{}", r.t, r.forward, r.backward)?;
    }
    Ok(())
}

/// Spread of the per-atom shift around the nominal profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualModel {
    None,
    /// Alternate atoms get `+δν` and `−δν`.
    TwoPoint { delta_nu: f64 },
    /// Independent normal deviates with standard deviation `δν`.
    Gaussian { delta_nu: f64, seed: u64 },
}

impl ResidualModel {
    pub fn rms(&self) -> f64 {
        match *self {
            ResidualModel::None => 0.0,
            ResidualModel::TwoPoint { delta_nu } | ResidualModel::Gaussian { delta_nu, .. } => delta_nu.abs(),
        }
    }

    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        Ok(match *self {
            ResidualModel::None => vec![0.0; n],
            ResidualModel::TwoPoint { delta_nu } => {
                (0..n).map(|j| if j % 2 == 0 { delta_nu } else { -delta_nu }).collect()
            }
            ResidualModel::Gaussian { delta_nu, seed } => {
                let normal = Normal::new(0.0, delta_nu.abs()).map_err(|e| invalid(e.to_string()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub preset: MaterialPreset,
    pub lx: f64,
    /// Edge shift of the nominal profile (Hz).
    pub delta_nu: f64,
    /// Nominal profile; `None` means the ideal linear one.
    pub profile: Option<ShiftProfile>,
    pub n_atoms: usize,
    pub placement: Placement,
    pub amplitude: AmplitudeProfile,
    pub t2: Option<f64>,
    pub residual: ResidualModel,
    /// Subradiance orders probed for forward suppression.
    pub m_max: usize,
    /// Order used for the reverse-field forward readout.
    pub readout_m: usize,
    /// Time-series points on `[0, t_rev]`.
    pub samples: usize,
}

impl ProtocolConfig {
    pub fn ideal(preset: &MaterialPreset, lx: f64, delta_nu: f64, n_atoms: usize) -> Self {
        ProtocolConfig {
            preset: preset.clone(),
            lx,
            delta_nu,
            profile: None,
            n_atoms,
            placement: Placement::Equispaced,
            amplitude: AmplitudeProfile::Uniform,
            t2: None,
            residual: ResidualModel::None,
            m_max: 4,
            readout_m: 1,
            samples: 101,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubradiancePoint {
    pub m: usize,
    pub t: f64,
    pub forward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub t_rev: f64,
    /// Rates on an even grid over `[0, t_rev]` with the field on.
    pub series: Vec<EmissionReport>,
    pub subradiance: Vec<SubradiancePoint>,
    pub at_reversal: EmissionReport,
    /// Forward rate after `t_m` with the field on and `t_m` reversed.
    pub restored_forward: f64,
    /// Direction that dominates at `t_rev`.
    pub verdict: Direction,
}

pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolRun> {
    let t_rev = reversal_time(&config.preset, config.lx, config.delta_nu)?;
    if config.samples < 2 {
        return Err(invalid("need at least two time samples"));
    }
    let stored = init_ensemble(&config.preset, config.n_atoms, config.lx, config.placement, config.amplitude)?;
    let profile = match &config.profile {
        Some(p) => p.clone(),
        None => ShiftProfile::ideal_linear(config.delta_nu, config.lx),
    };
    let residual = config.residual.sample(stored.len())?;
    let shifts: Vec<f64> = stored.shifts_from(&profile)?.iter().zip(&residual).map(|(s, r)| s + r).collect();

    // every sample is evolved from the written state, so errors do not accumulate
    let on = FieldSchedule::rectangular(1.0, t_rev, t_rev)?;
    let at = |t: f64| evolve_shifts(&stored, &shifts, &on, t, config.t2).map(|s| emission_report(&s));
    let series = (0..config.samples)
        .map(|k| at(t_rev * k as f64 / (config.samples - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    let subradiance = subradiance_times(config.delta_nu, config.m_max.max(1))?
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let on = FieldSchedule::rectangular(1.0, t, t)?;
            let s = evolve_shifts(&stored, &shifts, &on, t, config.t2)?;
            Ok(SubradiancePoint { m: k + 1, t, forward: emission_rate(&s, Direction::Forward) })
        })
        .collect::<Result<Vec<_>>>()?;
    let at_reversal = at(t_rev)?;

    let t_m = config.readout_m.max(1) as f64 / (2.0 * config.delta_nu);
    let there = FieldSchedule::rectangular(1.0, t_m, t_m)?;
    let back = there.then(&there.negated())?;
    let restored = evolve_shifts(&stored, &shifts, &back, 2.0 * t_m, config.t2)?;

    let verdict =
        if at_reversal.backward >= at_reversal.forward { Direction::Backward } else { Direction::Forward };
    Ok(ProtocolRun {
        t_rev,
        series,
        subradiance,
        at_reversal,
        restored_forward: emission_rate(&restored, Direction::Forward),
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyModel {
    /// Ideal line plus `±ratio·Δν` on alternate atoms.
    TwoPoint { ratio: f64 },
    /// Ideal line plus normal residuals of RMS `ratio·Δν`.
    Gaussian { ratio: f64, seed: u64 },
    /// A computed axial profile; the line is fitted over `span`.
    FromProfile { profile: ShiftProfile, span: (f64, f64) },
    /// One atom per `(x, shift)` sample, e.g. every grid node of a core
    /// band. The line is fitted over `span`.
    FromSamples { x: Vec<f64>, shift: Vec<f64>, span: (f64, f64) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    /// Backward rate at `t_rev`.
    pub measured: f64,
    /// `cos²(2π δν t_rev)`.
    pub predicted: f64,
    pub difference: f64,
    /// δν/Δν that enters the prediction.
    pub ratio: f64,
    pub atoms: usize,
}

/// Maps fitted samples onto the unit frame: positions on `[-1/2, 1/2]`,
/// shifts in units of the fitted Δν with the polarity that ramps `k` down.
fn unit_frame(x: &[f64], shift: &[f64], span: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let fit = linearity_fit(x, shift, span)?;
    let len = span.1 - span.0;
    let mid = 0.5 * (span.0 + span.1);
    let scale = -fit.slope.signum() / fit.delta_nu;
    let tol = 1e-9 * len;
    let (pos, s): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(shift)
        .filter(|(x, _)| **x >= span.0 - tol && **x <= span.1 + tol)
        .map(|(x, v)| (((x - mid) / len).clamp(-0.5, 0.5), scale * v))
        .unzip();
    Ok((pos, s, fit.ratio))
}

/// Backward efficiency at reversal for a sample `wavelengths = L n / λ` long,
/// compared with the cos² estimate.
pub fn residual_dephasing_study(model: &StudyModel, wavelengths: f64, n_atoms: usize) -> Result<StudyReport> {
    if !(wavelengths > 0.0) {
        return Err(invalid("sample length in wavelengths must be positive"));
    }
    // unit-free frame: unit sample length, unit edge shift
    let mut preset = MaterialPreset::ideal();
    preset.lambda_vac = 1.0 / wavelengths;
    preset.refractive_index = 1.0;
    // `n_atoms` is ignored when the samples place the atoms
    let uniform = || init_ensemble(&preset, n_atoms, 1.0, Placement::Equispaced, AmplitudeProfile::Uniform);
    let line = ShiftProfile::ideal_linear(1.0, 1.0);

    let (stored, shifts, ratio) = match model {
        StudyModel::TwoPoint { ratio } | StudyModel::Gaussian { ratio, .. } => {
            if !(*ratio >= 0.0) {
                return Err(invalid("residual ratio must be non-negative"));
            }
            let residual = match *model {
                StudyModel::Gaussian { seed, .. } => ResidualModel::Gaussian { delta_nu: *ratio, seed },
                _ => ResidualModel::TwoPoint { delta_nu: *ratio },
            };
            let uniform = uniform()?;
            let r = residual.sample(uniform.len())?;
            let s = uniform.shifts_from(&line)?.iter().zip(&r).map(|(a, b)| a + b).collect();
            (uniform, s, *ratio)
        }
        StudyModel::FromProfile { profile, span } => {
            let (px, ps, ratio) = unit_frame(&profile.x, &profile.shift, *span)?;
            let unit = ShiftProfile::new(px, ps)?;
            let uniform = uniform()?;
            let s = uniform.shifts_from(&unit)?;
            (uniform, s, ratio)
        }
        StudyModel::FromSamples { x, shift, span } => {
            let (pos, s, ratio) = unit_frame(x, shift, *span)?;
            if pos.len() < 2 {
                return Err(invalid("need at least two samples inside the span"));
            }
            let a = 1.0 / (pos.len() as f64).sqrt();
            let state = EnsembleState {
                amplitudes: vec![Complex64::new(a, 0.0); pos.len()],
                phases: vec![0.0; pos.len()],
                reference_norm: a * pos.len() as f64,
                positions: pos,
                k0: optical_wavevector(&preset),
                lx: 1.0,
                elapsed: 0.0,
                preset: preset.name.clone(),
            };
            (state, s, ratio)
        }
    };
    let t_rev = reversal_time(&preset, 1.0, 1.0)?;
    let on = FieldSchedule::rectangular(1.0, t_rev, t_rev)?;
    let end = evolve_shifts(&stored, &shifts, &on, t_rev, None)?;
    let measured = emission_rate(&end, Direction::Backward);
    let predicted = dephasing_efficiency(ratio, t_rev);
    Ok(StudyReport { measured, predicted, difference: measured - predicted, ratio, atoms: stored.len() })
}
