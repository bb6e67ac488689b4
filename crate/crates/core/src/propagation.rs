//! One-dimensional linear storage and retrieval with re-absorption.
//!
//! Moving-frame equations on the normalized axis ζ = z/L ∈ [0, 1]:
//!
//! ```text
//! ∂E/∂ζ = i G Σ_c w_c P_c
//! ∂P_c/∂t = −i Δ_c P_c + i E
//! ```
//!
//! with `Δ_c = 2π·detuning_c`. The flux `|E|²` and the medium energy
//! `G ∫ Σ w |P|² dζ` are exchanged without loss, which gives the energy
//! ledger. Each class is advanced by an exponential integrator that treats
//! `E` as linear over a step; the field is then swept along ζ with the
//! trapezoid rule, which needs one scalar division per slice.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::ShiftProfile;
use crate::SPEED_OF_LIGHT;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningClass {
    pub detuning_hz: f64,
    pub weight: f64,
}

/// `n` equally spaced classes on `[−truncation·hwhm, truncation·hwhm]`
/// with Lorentzian weights summing to one.
pub fn lorentzian_classes(hwhm_hz: f64, truncation: f64, n: usize) -> Result<Vec<DetuningClass>> {
    if !(hwhm_hz > 0.0 && truncation > 0.0) || n < 2 {
        return Err(invalid("line needs a positive width, truncation and at least two classes"));
    }
    let edge = truncation * hwhm_hz;
    let raw: Vec<(f64, f64)> = (0..n)
        .map(|c| {
            let d = -edge + 2.0 * edge * c as f64 / (n - 1) as f64;
            (d, 1.0 / (1.0 + (d / hwhm_hz).powi(2)))
        })
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    Ok(raw.into_iter().map(|(d, w)| DetuningClass { detuning_hz: d, weight: w / total }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pulse {
    /// `exp(−(t − center)² / (2 sigma²))`, rescaled to unit energy.
    Gaussian { sigma_s: f64, center_s: f64 },
    /// Samples at `t = k·dt_s`, linearly interpolated and rescaled to unit
    /// energy; zero outside.
    Samples { dt_s: f64, re: Vec<f64>, im: Vec<f64> },
}

impl Pulse {
    fn raw(&self, t: f64) -> Complex64 {
        match self {
            Pulse::Gaussian { sigma_s, center_s } => {
                let u = (t - center_s) / sigma_s;
                Complex64::new((-0.5 * u * u).exp(), 0.0)
            }
            Pulse::Samples { dt_s, re, im } => {
                let s = t / dt_s;
                if s < 0.0 || s > (re.len() - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = (s.floor() as usize).min(re.len() - 2);
                let f = s - k as f64;
                let at = |k: usize| Complex64::new(re[k], im[k]);
                at(k) * (1.0 - f) + at(k + 1) * f
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Pulse::Gaussian { sigma_s, center_s } => {
                if !(*sigma_s > 0.0 && center_s.is_finite()) {
                    return Err(invalid("Gaussian pulse needs a positive width"));
                }
            }
            Pulse::Samples { dt_s, re, im } => {
                if !(*dt_s > 0.0) || re.len() != im.len() || re.len() < 2 {
                    return Err(invalid("sampled pulse needs dt > 0 and matching re/im of length >= 2"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Flip Δ → −Δ and read the forward field.
    ForwardCrib,
    /// Flip Δ → −Δ and read the backward field.
    BackwardConjugate,
    /// Hold for `ramp_time_s` while a field gradient reverses the grating,
    /// then flip Δ and read backward. `residual` is the part of the
    /// applied shift (Hz, on ζ ∈ [0, 1]) left over after the ideal linear
    /// ramp; it imprints an uncompensated phase.
    GradientRamp { ramp_time_s: f64, residual: Option<ShiftProfile> },
}

/// Physical sample used only for the transit-time check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transit {
    pub length_m: f64,
    pub refractive_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub optical_depth: f64,
    /// Spatial intervals along ζ.
    pub nx: usize,
    /// Time steps over the write window.
    pub nt: usize,
    pub pulse: Pulse,
    pub classes: Vec<DetuningClass>,
    pub mode: RetrievalMode,
    /// End of the write window (storage instant).
    pub write_duration_s: f64,
    /// Length of the read window after the flip (a ramp hold adds to it).
    pub read_duration_s: f64,
    pub transit: Option<Transit>,
}

impl PropagationConfig {
    /// Gaussian pulse 20× narrower than a 1 MHz half-width line truncated
    /// at half its half-width, 64 classes.
    pub fn standard(optical_depth: f64, mode: RetrievalMode) -> Self {
        let hwhm = 1e6;
        let sigma = 20.0 / (2.0 * PI * hwhm);
        PropagationConfig {
            optical_depth,
            nx: 200,
            nt: 520,
            pulse: Pulse::Gaussian { sigma_s: sigma, center_s: 6.0 * sigma },
            classes: lorentzian_classes(hwhm, 0.5, 64).expect("static line parameters"),
            mode,
            write_duration_s: 13.0 * sigma,
            read_duration_s: 14.0 * sigma,
            transit: None,
        }
    }

    pub fn with_resolution(mut self, nx: usize, nt: usize) -> Self {
        self.nx = nx;
        self.nt = nt;
        self
    }

    pub fn dt(&self) -> f64 {
        self.write_duration_s / self.nt as f64
    }

    /// Smallest spacing between class detunings (Hz).
    fn class_spacing(&self) -> f64 {
        let mut d: Vec<f64> = self.classes.iter().map(|c| c.detuning_hz).collect();
        d.sort_by(f64::total_cmp);
        d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    fn pulse_width(&self) -> f64 {
        match &self.pulse {
            Pulse::Gaussian { sigma_s, .. } => *sigma_s,
            Pulse::Samples { dt_s, re, .. } => dt_s * (re.len() - 1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.optical_depth >= 0.0 && self.optical_depth.is_finite()) {
            return Err(invalid("optical depth must be non-negative"));
        }
        if self.nx < 2 || self.nt < 2 {
            return Err(invalid("need at least two space and time steps"));
        }
        if self.classes.is_empty() || self.classes.iter().any(|c| !(c.weight >= 0.0) || !c.detuning_hz.is_finite()) {
            return Err(invalid("classes need finite detunings and non-negative weights"));
        }
        let total: f64 = self.classes.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("class weights sum to {total}, expected 1")));
        }
        self.pulse.validate()?;
        if !(self.write_duration_s > 0.0 && self.read_duration_s > 0.0) {
            return Err(invalid("write and read windows must be positive"));
        }
        if let Some(t) = self.transit {
            let transit = t.length_m * t.refractive_index / SPEED_OF_LIGHT;
            if transit > 0.01 * self.pulse_width() {
                return Err(invalid(format!(
                    "transit time {transit:.3e} s is not small against the pulse ({:.3e} s)",
                    self.pulse_width()
                )));
            }
        }
        Ok(())
    }

    fn hold(&self) -> f64 {
        match &self.mode {
            RetrievalMode::GradientRamp { ramp_time_s, .. } => *ramp_time_s,
            _ => 0.0,
        }
    }

    /// Step-size and window checks. A discrete set of classes rephases
    /// every `1/spacing`; that revival must fall outside the simulated
    /// windows or it shows up as spurious emission.
    fn check_stability(&self) -> Result<()> {
        let h = self.dt();
        if h > self.pulse_width() / 8.0 {
            return Err(Error::Stability(format!(
                "time step {h:.3e} s does not resolve the pulse ({:.3e} s); raise nt",
                self.pulse_width()
            )));
        }
        if self.classes.len() > 1 {
            let revival = 1.0 / self.class_spacing();
            let span = self.write_duration_s.max(self.read_duration_s + self.hold());
            if revival <= span {
                return Err(Error::Stability(format!(
                    "class revival at {revival:.3e} s falls inside the {span:.3e} s window; use more classes"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// `φ1(z) = (e^z − 1)/z` and `ψ(z) = (e^z(z − 1) + 1)/z²`.
fn phi_functions(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.1 {
        let (mut p1, mut p2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut zk = Complex64::new(1.0, 0.0);
        let mut fact = 1.0; // (k+1)!
        for k in 0..20 {
            fact *= (k + 1) as f64;
            p1 += zk / fact;
            p2 += zk * ((k + 1) as f64) / (fact * (k + 2) as f64);
            zk *= z;
        }
        (p1, p2)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, (ez * (z - 1.0) + 1.0) / (z * z))
    }
}

struct Stepper {
    w: Vec<f64>,
    rot: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    /// `i Σ w b`
    k: Complex64,
    g: f64,
    hz: f64,
}

impl Stepper {
    fn new(classes: &[DetuningClass], sign: f64, h: f64, g: f64, nx: usize) -> Self {
        let mut s = Stepper {
            w: Vec::with_capacity(classes.len()),
            rot: Vec::with_capacity(classes.len()),
            a: Vec::with_capacity(classes.len()),
            b: Vec::with_capacity(classes.len()),
            k: Complex64::new(0.0, 0.0),
            g,
            hz: 1.0 / nx as f64,
        };
        for c in classes {
            let delta = sign * 2.0 * PI * c.detuning_hz;
            let z = Complex64::new(0.0, -delta * h);
            let (p1, p2) = phi_functions(z);
            s.w.push(c.weight);
            s.rot.push(z.exp());
            s.a.push(h * p2);
            s.b.push(h * (p1 - p2));
            s.k += I * c.weight * h * (p1 - p2);
        }
        s
    }

    /// Advances `(e, p)` by one step; `e[0]` at the new time is `e_in`.
    fn step(&self, e: &mut [Complex64], p: &mut [Complex64], e_in: Complex64, scratch: &mut Vec<Complex64>) {
        let nc = self.w.len();
        let nodes = e.len();
        scratch.clear();
        for i in 0..nodes {
            let mut s = Complex64::new(0.0, 0.0);
            let row = &p[i * nc..(i + 1) * nc];
            for c in 0..nc {
                s += self.w[c] * (self.rot[c] * row[c] + I * self.a[c] * e[i]);
            }
            scratch.push(s);
        }
        let c = I * self.g * self.hz / 2.0;
        let num = 1.0 + c * self.k;
        let den = 1.0 - c * self.k;
        let mut e_new = Vec::with_capacity(nodes);
        e_new.push(e_in);
        for i in 0..nodes - 1 {
            let next = (e_new[i] * num + c * (scratch[i] + scratch[i + 1])) / den;
            e_new.push(next);
        }
        for i in 0..nodes {
            let row = &mut p[i * nc..(i + 1) * nc];
            for c in 0..nc {
                row[c] = self.rot[c] * row[c] + I * (self.a[c] * e[i] + self.b[c] * e_new[i]);
            }
        }
        e.copy_from_slice(&e_new);
    }
}

fn medium_energy(p: &[Complex64], w: &[f64], g: f64, nodes: usize) -> f64 {
    let nc = w.len();
    let hz = 1.0 / (nodes - 1) as f64;
    (0..nodes)
        .map(|i| {
            let s: f64 = p[i * nc..(i + 1) * nc].iter().zip(w).map(|(p, w)| w * p.norm_sqr()).sum();
            let end = i == 0 || i == nodes - 1;
            if end { 0.5 * s } else { s }
        })
        .sum::<f64>()
        * hz
        * g
}

fn trapezoid_energy(samples: &[Complex64], h: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = samples[1..n - 1].iter().map(|e| e.norm_sqr()).sum();
    h * (inner + 0.5 * (samples[0].norm_sqr() + samples[n - 1].norm_sqr()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub coupling: f64,
    /// Resonant steady-state amplitude transmission at that coupling.
    pub amplitude_transmission: f64,
    pub target: f64,
}

/// Resonant steady-state susceptibility `Im χ(0)`, with each class smeared
/// by a normalized Gaussian as wide as the class spacing so the discrete
/// set reads as a continuous line.
fn resonant_absorption(config: &PropagationConfig) -> f64 {
    if config.classes.len() == 1 {
        return 0.0;
    }
    let width = 2.0 * PI * config.class_spacing();
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    PI * config
        .classes
        .iter()
        .map(|c| {
            let u = 2.0 * PI * c.detuning_hz / width;
            c.weight * norm * (-0.5 * u * u).exp()
        })
        .sum::<f64>()
}

/// Fixes `G` so that a resonant monochromatic field leaves the sample with
/// amplitude `e^{−αL/2}`, checked by sweeping the steady state along ζ on
/// the configured grid.
pub fn calibrate_coupling(config: &PropagationConfig) -> Result<Calibration> {
    config.validate()?;
    let target = (-config.optical_depth / 2.0).exp();
    if config.optical_depth == 0.0 {
        return Ok(Calibration { coupling: 0.0, amplitude_transmission: 1.0, target });
    }
    let chi = resonant_absorption(config);
    if !(chi > 0.0) {
        return Err(Error::Calibration("line has no weight at resonance".into()));
    }
    let coupling = config.optical_depth / (2.0 * chi);
    // steady state: dE/dζ = i G (i χ) E, swept with the same trapezoid rule
    let x = -coupling * chi / config.nx as f64;
    let factor = (1.0 + 0.5 * x) / (1.0 - 0.5 * x);
    let amplitude_transmission = factor.powi(config.nx as i32).abs();
    if (amplitude_transmission / target - 1.0).abs() > 5e-3 {
        return Err(Error::Calibration(format!(
            "transmission {amplitude_transmission:.5} misses {target:.5} by more than 0.5%; refine nx"
        )));
    }
    Ok(Calibration { coupling, amplitude_transmission, target })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredState {
    pub coupling: f64,
    pub dt: f64,
    pub time: f64,
    /// Field at the nodes at the storage instant.
    pub field: Vec<Complex64>,
    /// Polarization, row-major `[node][class]`.
    pub polarization: Vec<Complex64>,
    pub input_energy: f64,
    pub transmitted_energy: f64,
    pub stored_energy: f64,
    /// Output field during the write window, one sample per step.
    pub transmitted: Vec<Complex64>,
}

impl StoredState {
    /// `input − (transmitted + stored)`.
    pub fn closure_error(&self) -> f64 {
        (self.input_energy - self.transmitted_energy - self.stored_energy).abs()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.field.iter_mut().for_each(|e| *e *= c);
        s.polarization.iter_mut().for_each(|p| *p *= c);
        s.transmitted.iter_mut().for_each(|e| *e *= c);
        let c2 = c * c;
        s.input_energy *= c2;
        s.transmitted_energy *= c2;
        s.stored_energy *= c2;
        s
    }
}

/// Input samples on the write grid, scaled to unit (trapezoid) energy.
fn input_samples(config: &PropagationConfig, amplitude: f64) -> Result<Vec<Complex64>> {
    let h = config.dt();
    let raw: Vec<Complex64> = (0..=config.nt).map(|n| config.pulse.raw(n as f64 * h)).collect();
    let energy = trapezoid_energy(&raw, h);
    if !(energy > 0.0) {
        return Err(invalid("input pulse has no energy inside the write window"));
    }
    let scale = amplitude / energy.sqrt();
    Ok(raw.into_iter().map(|e| e * scale).collect())
}

/// Writes the pulse into the medium. `amplitude` scales the unit-energy
/// input field.
pub fn simulate_storage(config: &PropagationConfig, amplitude: f64) -> Result<StoredState> {
    let cal = calibrate_coupling(config)?;
    config.check_stability()?;
    let h = config.dt();
    let nodes = config.nx + 1;
    let nc = config.classes.len();
    let input = input_samples(config, amplitude)?;
    let stepper = Stepper::new(&config.classes, 1.0, h, cal.coupling, config.nx);

    let mut e = vec![Complex64::new(0.0, 0.0); nodes];
    let mut p = vec![Complex64::new(0.0, 0.0); nodes * nc];
    let mut scratch = Vec::with_capacity(nodes);
    // the medium is empty at t = 0, so the field is the input everywhere
    e.iter_mut().for_each(|v| *v = input[0]);
    let mut transmitted = vec![e[nodes - 1]];
    for &e_in in &input[1..] {
        stepper.step(&mut e, &mut p, e_in, &mut scratch);
        transmitted.push(e[nodes - 1]);
    }
    Ok(StoredState {
        coupling: cal.coupling,
        dt: h,
        time: config.write_duration_s,
        input_energy: trapezoid_energy(&input, h),
        transmitted_energy: trapezoid_energy(&transmitted, h),
        stored_energy: medium_energy(&p, &stepper.w, cal.coupling, nodes),
        field: e,
        polarization: p,
        transmitted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    /// Emitted energy over input energy.
    pub efficiency: f64,
    pub input_energy: f64,
    pub transmitted_energy: f64,
    pub emitted_energy: f64,
    pub residual_energy: f64,
    /// `|input − (transmitted + emitted + residual)|`.
    pub ledger_error: f64,
    /// Output field, sampled every `dt` from the flip.
    pub output: Vec<Complex64>,
    pub dt: f64,
}

impl RetrievalOutcome {
    pub fn write_waveform_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,re,im,intensity")?;
        for (k, e) in self.output.iter().enumerate() {
            writeln!(w, "{},{},{},{}", k as f64 * self.dt, e.re, e.im, e.norm_sqr())?;
        }
        Ok(())
    }
}

/// Releases a stored excitation in the configured mode.
pub fn simulate_retrieval(stored: &StoredState, config: &PropagationConfig) -> Result<RetrievalOutcome> {
    config.validate()?;
    config.check_stability()?;
    let nodes = config.nx + 1;
    let nc = config.classes.len();
    if stored.polarization.len() != nodes * nc {
        return Err(invalid("stored state does not match the configuration grid"));
    }
    let h = stored.dt;
    let mut p = stored.polarization.clone();

    let backward = match &config.mode {
        RetrievalMode::ForwardCrib => false,
        RetrievalMode::BackwardConjugate => true,
        RetrievalMode::GradientRamp { ramp_time_s, residual } => {
            if !(*ramp_time_s >= 0.0) {
                return Err(invalid("ramp time must be non-negative"));
            }
            // free precession during the hold; emission while the grating is
            // between the two phase-matched orientations is neglected
            for i in 0..nodes {
                let extra = match residual {
                    Some(r) => -2.0 * PI * r.at(i as f64 / config.nx as f64)? * ramp_time_s,
                    None => 0.0,
                };
                for (c, class) in config.classes.iter().enumerate() {
                    let phase = -2.0 * PI * class.detuning_hz * ramp_time_s + extra;
                    p[i * nc + c] *= Complex64::from_polar(1.0, phase);
                }
            }
            true
        }
    };
    if backward {
        // the backward field enters at ζ = 1: reverse the node order
        let rows: Vec<Vec<Complex64>> = p.chunks(nc).rev().map(|r| r.to_vec()).collect();
        p = rows.concat();
    }

    let stepper = Stepper::new(&config.classes, -1.0, h, stored.coupling, config.nx);
    let steps = ((config.read_duration_s + config.hold()) / h).ceil() as usize;
    let mut e = vec![Complex64::new(0.0, 0.0); nodes];
    // the field at the flip instant is the free-induction field of the stored
    // polarization; with no input it starts from zero at the entrance
    let mut scratch = Vec::with_capacity(nodes);
    let mut output = vec![Complex64::new(0.0, 0.0)];
    for _ in 0..steps {
        stepper.step(&mut e, &mut p, Complex64::new(0.0, 0.0), &mut scratch);
        output.push(e[nodes - 1]);
    }
    let emitted_energy = trapezoid_energy(&output, h);
    let residual_energy = medium_energy(&p, &stepper.w, stored.coupling, nodes);
    let ledger_error =
        (stored.input_energy - (stored.transmitted_energy + emitted_energy + residual_energy)).abs();
    Ok(RetrievalOutcome {
        efficiency: if stored.input_energy > 0.0 { emitted_energy / stored.input_energy } else { 0.0 },
        input_energy: stored.input_energy,
        transmitted_energy: stored.transmitted_energy,
        emitted_energy,
        residual_energy,
        ledger_error,
        output,
        dt: h,
    })
}

/// Storage followed by retrieval in `config.mode`.
pub fn run(config: &PropagationConfig) -> Result<(StoredState, RetrievalOutcome)> {
    let stored = simulate_storage(config, 1.0)?;
    let outcome = simulate_retrieval(&stored, config)?;
    Ok((stored, outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub optical_depth: f64,
    pub transmission: f64,
    pub eta_forward: f64,
    pub eta_backward: f64,
    pub ledger_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Backward efficiency never decreases along the grid.
    pub backward_monotone: bool,
    /// Smallest grid value from which backward beats forward for good.
    pub crossover: Option<f64>,
    /// `(1 − η_b)·αL` never increases over the grid points with `αL ≥ 3`,
    /// i.e. the backward loss falls at least as fast as `1/αL` there.
    /// `None` when fewer than two points lie in that range.
    pub loss_falls_as_inverse_depth: Option<bool>,
}

impl Sweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "optical_depth,transmission,eta_forward,eta_backward,ledger_error")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.optical_depth, r.transmission, r.eta_forward, r.eta_backward, r.ledger_error
            )?;
        }
        Ok(())
    }
}

/// Forward and backward efficiency over a grid of optical depths. `base`
/// supplies everything but the optical depth and mode.
pub fn efficiency_sweep(grid: &[f64], base: &PropagationConfig) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(invalid("optical-depth grid is empty"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &od in grid {
        let mut cfg = base.clone();
        cfg.optical_depth = od;
        cfg.mode = RetrievalMode::ForwardCrib;
        let stored = simulate_storage(&cfg, 1.0)?;
        let fwd = simulate_retrieval(&stored, &cfg)?;
        cfg.mode = RetrievalMode::BackwardConjugate;
        let bwd = simulate_retrieval(&stored, &cfg)?;
        rows.push(SweepRow {
            optical_depth: od,
            transmission: stored.transmitted_energy / stored.input_energy,
            eta_forward: fwd.efficiency,
            eta_backward: bwd.efficiency,
            ledger_error: fwd.ledger_error.max(bwd.ledger_error),
        });
    }
    let backward_monotone = rows.windows(2).all(|w| w[1].eta_backward >= w[0].eta_backward);
    let crossover = (0..rows.len())
        .find(|&k| rows[k..].iter().all(|r| r.eta_backward > r.eta_forward))
        .map(|k| rows[k].optical_depth);
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.optical_depth >= 3.0)
        .map(|r| (1.0 - r.eta_backward) * r.optical_depth)
        .collect();
    let loss_falls_as_inverse_depth =
        (tail.len() >= 2).then(|| tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    Ok(Sweep { rows, backward_monotone, crossover, loss_falls_as_inverse_depth })
}
