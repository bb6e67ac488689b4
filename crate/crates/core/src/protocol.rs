//! Closed-form timing, linearity bounds and schedule checks for the
//! field-reversal protocol.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::materials::{optical_wavevector, MaterialPreset};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Field-on time that takes the stored grating from `k0` to `-k0`, given the
/// sample length in material wavelengths `L n / λ`.
pub fn reversal_time_from_count(wavelengths: f64, delta_nu: f64) -> Result<f64> {
    positive("sample length in wavelengths", wavelengths)?;
    positive("edge shift", delta_nu)?;
    Ok(wavelengths / delta_nu)
}

pub fn reversal_time(preset: &MaterialPreset, lx: f64, delta_nu: f64) -> Result<f64> {
    positive("sample length", lx)?;
    preset.validate()?;
    reversal_time_from_count(preset.wavelengths_in(lx), delta_nu)
}

/// `t_m = m / (2 Δν)` for `m = 1..=m_max`.
pub fn subradiance_times(delta_nu: f64, m_max: usize) -> Result<Vec<f64>> {
    positive("edge shift", delta_nu)?;
    if m_max == 0 {
        return Err(invalid("m_max must be at least 1"));
    }
    Ok((1..=m_max).map(|m| m as f64 / (2.0 * delta_nu)).collect())
}

/// Half of a quarter of the subradiance spacing: `1 / (8 Δν)`.
pub fn switching_tolerance(delta_nu: f64) -> Result<f64> {
    positive("edge shift", delta_nu)?;
    Ok(1.0 / (8.0 * delta_nu))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalPlan {
    pub delta_nu: f64,
    pub lx: f64,
    pub preset: MaterialPreset,
    pub k0: f64,
    /// Ramp rate of the wavevector, rad m⁻¹ s⁻¹.
    pub beta: f64,
    pub t_rev: f64,
    pub t_m: Vec<f64>,
    pub switching_tolerance: f64,
}

impl ReversalPlan {
    pub fn new(preset: &MaterialPreset, lx: f64, delta_nu: f64, m_max: usize) -> Result<Self> {
        let t_rev = reversal_time(preset, lx, delta_nu)?;
        Ok(ReversalPlan {
            delta_nu,
            lx,
            preset: preset.clone(),
            k0: optical_wavevector(preset),
            beta: 4.0 * PI * delta_nu / lx,
            t_rev,
            t_m: subradiance_times(delta_nu, m_max)?,
            switching_tolerance: switching_tolerance(delta_nu)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `k(t) = k0 - β t`.
pub fn wavevector_at(plan: &ReversalPlan, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("time must be non-negative"));
    }
    Ok(plan.k0 - plan.beta * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTwist {
    /// rad/m
    pub delta_k: f64,
    /// Spatial period of the twist, m.
    pub period: f64,
}

impl PhaseTwist {
    /// Whether the twist period fits inside one absorption length. Periods
    /// within 1e-9 (relative) of `1/α` count as fitting.
    pub fn freezes(&self, alpha: f64) -> bool {
        alpha > 0.0 && self.period * alpha <= 1.0 + 1e-9
    }
}

pub fn phase_twist(delta_nu: f64, t_m: f64, lx: f64) -> Result<PhaseTwist> {
    positive("edge shift", delta_nu)?;
    positive("time", t_m)?;
    positive("sample length", lx)?;
    let delta_k = 4.0 * PI * delta_nu * t_m / lx;
    Ok(PhaseTwist { delta_k, period: 2.0 * PI / delta_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    QuarterRule,
    TargetEfficiency(f64),
}

/// Allowed δν/Δν for a sample `wavelengths = L n / λ` long.
pub fn nonlinearity_bound_from_count(wavelengths: f64, mode: BoundMode) -> Result<f64> {
    positive("sample length in wavelengths", wavelengths)?;
    let fraction = match mode {
        BoundMode::QuarterRule => 0.25,
        BoundMode::TargetEfficiency(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(invalid(format!("target efficiency must lie in (0, 1), got {eps}")));
            }
            eps.sqrt().acos() / (2.0 * PI)
        }
    };
    Ok(fraction / wavelengths)
}

pub fn nonlinearity_bound(preset: &MaterialPreset, lx: f64, mode: BoundMode) -> Result<f64> {
    positive("sample length", lx)?;
    preset.validate()?;
    nonlinearity_bound_from_count(preset.wavelengths_in(lx), mode)
}

/// `cos²(2π δν t_rev)`, clamped to zero once the phase spread reaches π/2.
pub fn dephasing_efficiency(delta_nu_rms: f64, t_rev: f64) -> f64 {
    let arg = 2.0 * PI * delta_nu_rms.abs() * t_rev.abs();
    if arg >= PI / 2.0 {
        log::warn!("residual phase spread {arg:.3} rad is beyond the cos² model; reporting 0");
        return 0.0;
    }
    arg.cos().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub target: f64,
    pub allowed_ratio: f64,
    /// Efficiency factor evaluated at the allowed ratio (equals `target`).
    pub efficiency_factor: f64,
}

impl EfficiencyBudget {
    pub fn new(target: f64, wavelengths: f64) -> Result<Self> {
        let allowed_ratio = nonlinearity_bound_from_count(wavelengths, BoundMode::TargetEfficiency(target))?;
        // δν t_rev = ratio · Δν · (count / Δν)
        let efficiency_factor = dephasing_efficiency(allowed_ratio * wavelengths, 1.0);
        Ok(EfficiencyBudget { target, allowed_ratio, efficiency_factor })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Piecewise-linear function of time through `knots`. Repeated times mark a
/// jump; the value at a jump is the right-hand limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("need at least two knots"));
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(invalid("knots must be finite"));
        }
        if knots.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(invalid("knot times must be non-decreasing"));
        }
        if knots.windows(3).any(|w| w[0].0 == w[1].0 && w[1].0 == w[2].0) {
            return Err(invalid("at most two knots may share a time"));
        }
        if knots[0].0 == knots[knots.len() - 1].0 {
            return Err(invalid("function must span a positive interval"));
        }
        Ok(PiecewiseLinear { knots })
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Value at `t`; zero outside the knot range.
    pub fn at(&self, t: f64) -> f64 {
        if t < self.start() || t > self.end() {
            return 0.0;
        }
        // last segment whose start is <= t
        let k = self.knots.partition_point(|(tk, _)| *tk <= t);
        if k >= self.knots.len() {
            return self.knots[self.knots.len() - 1].1;
        }
        let (t0, v0) = self.knots[k - 1];
        let (t1, v1) = self.knots[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Exact integral over `[a, b]` (zero outside the knot range).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let mut sum = 0.0;
        for w in self.knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi <= lo {
                continue;
            }
            let f = |t: f64| v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            sum += 0.5 * (f(lo) + f(hi)) * (hi - lo);
        }
        sum
    }

    pub fn mean(&self) -> f64 {
        self.integral(self.start(), self.end()) / (self.end() - self.start())
    }
}

/// Amplitude g(t) ∈ [-1, 1] that multiplies the nominal shift profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchedule {
    pub g: PiecewiseLinear,
}

impl FieldSchedule {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let g = PiecewiseLinear::new(knots)?;
        if g.start() != 0.0 {
            return Err(invalid("schedule must start at t = 0"));
        }
        if g.knots.iter().any(|(_, v)| v.abs() > 1.0) {
            return Err(invalid("schedule amplitude must satisfy |g| <= 1"));
        }
        Ok(FieldSchedule { g })
    }

    /// `g = level` on `[0, t_on]`, then off until `duration`.
    pub fn rectangular(level: f64, t_on: f64, duration: f64) -> Result<Self> {
        positive("on time", t_on)?;
        if duration < t_on {
            return Err(invalid("duration shorter than the on time"));
        }
        let mut knots = vec![(0.0, level), (t_on, level)];
        if duration > t_on {
            knots.extend([(t_on, 0.0), (duration, 0.0)]);
        }
        Self::new(knots)
    }

    pub fn off(duration: f64) -> Result<Self> {
        positive("duration", duration)?;
        Self::new(vec![(0.0, 0.0), (duration, 0.0)])
    }

    /// Linear rise over `ramp`, hold, linear fall over `ramp`, with the
    /// same area as a rectangle of length `t_on`.
    pub fn trapezoid(t_on: f64, ramp: f64) -> Result<Self> {
        positive("on time", t_on)?;
        if !(ramp > 0.0 && ramp <= t_on) {
            return Err(invalid("ramp must lie in (0, t_on]"));
        }
        Self::new(vec![(0.0, 0.0), (ramp, 1.0), (t_on, 1.0), (t_on + ramp, 0.0)])
    }

    /// This schedule followed by `next`.
    pub fn then(&self, next: &FieldSchedule) -> Result<Self> {
        let offset = self.duration();
        let mut knots = self.g.knots.clone();
        knots.extend(next.g.knots.iter().map(|(t, v)| (t + offset, *v)));
        Self::new(knots)
    }

    /// Same timing with the field sign flipped.
    pub fn negated(&self) -> Self {
        FieldSchedule {
            g: PiecewiseLinear { knots: self.g.knots.iter().map(|(t, v)| (*t, -v)).collect() },
        }
    }

    pub fn duration(&self) -> f64 {
        self.g.end()
    }

    pub fn at(&self, t: f64) -> f64 {
        self.g.at(t)
    }

    /// `∫₀ᵗ g dt'`.
    pub fn area(&self, t: f64) -> f64 {
        self.g.integral(0.0, t)
    }

    /// Times at which the slope or value changes.
    pub fn switch_times(&self) -> Vec<f64> {
        let k = &self.g.knots;
        let mut out: Vec<f64> = k[1..k.len() - 1].iter().map(|(t, _)| *t).collect();
        out.dedup();
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,g")?;
        for (t, v) in &self.g.knots {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut knots = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("t_s")) {
                continue;
            }
            let mut it = line.split(',');
            let (Some(t), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(invalid(format!("line {}: expected `t_s,g`", n + 1)));
            };
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| invalid(format!("line {}: {e}", n + 1)))
            };
            knots.push((parse(t)?, parse(v)?));
        }
        Self::new(knots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    /// `limit - value`; negative when the check fails.
    pub margin: f64,
}

impl Check {
    fn upper(value: f64, limit: f64) -> Self {
        Check { passed: value < limit, value, limit, margin: limit - value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    /// |∫g dt − t_rev| against the switching tolerance (both in seconds).
    pub area: Check,
    /// |mean deviation| · t_rev against 1/4.
    pub average_deviation: Check,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.area.passed && self.average_deviation.passed
    }
}

/// Checks the effective pulse area and the time-averaged shift error of a
/// schedule. `deviation` is the error in the edge shift (Hz) versus time;
/// `None` means no error.
pub fn validate_schedule(
    schedule: &FieldSchedule,
    plan: &ReversalPlan,
    deviation: Option<&PiecewiseLinear>,
) -> ScheduleReport {
    let overshoot = (schedule.area(schedule.duration()) - plan.t_rev).abs();
    // equality with the tolerance still passes
    let area = Check {
        passed: overshoot <= plan.switching_tolerance * (1.0 + 1e-12),
        value: overshoot,
        limit: plan.switching_tolerance,
        margin: plan.switching_tolerance - overshoot,
    };
    let mean = deviation.map_or(0.0, |d| d.mean());
    ScheduleReport { area, average_deviation: Check::upper(mean.abs() * plan.t_rev, 0.25) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reversal_time_examples() {
        let t = reversal_time(&MaterialPreset::pr_yso(), 1e-3, 1.11e9).unwrap();
        assert_relative_eq!(t, 2.676e-6, max_relative = 1e-3);
        let t2 = reversal_time_from_count(133.3 * 1.8, 183e6).unwrap();
        assert_relative_eq!(t2, 1.311e-6, max_relative = 1e-3);
        assert_eq!(reversal_time(&MaterialPreset::ideal(), 1.0, 1.0).unwrap(), 1.0);
        assert!(reversal_time(&MaterialPreset::ideal(), 0.0, 1.0).is_err());
        assert!(reversal_time(&MaterialPreset::ideal(), 1.0, -1.0).is_err());
    }

    #[test]
    fn subradiance_spacing() {
        assert_eq!(subradiance_times(1.0, 3).unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(subradiance_times(0.5, 1).unwrap(), vec![1.0]);
        let t = subradiance_times(183e6, 2).unwrap();
        assert_relative_eq!(t[1] - t[0], 2.732e-9, max_relative = 1e-3);
        assert_relative_eq!(switching_tolerance(183e6).unwrap(), 0.683e-9, max_relative = 1e-3);
        assert!(subradiance_times(1.0, 0).is_err());
    }

    #[test]
    fn wavevector_conjugates_at_reversal() {
        let plan = ReversalPlan::new(&MaterialPreset::pr_yso(), 1e-3, 1.11e9, 4).unwrap();
        assert_eq!(wavevector_at(&plan, 0.0).unwrap(), plan.k0);
        assert_relative_eq!(wavevector_at(&plan, plan.t_rev).unwrap(), -plan.k0, max_relative = 1e-12);
        assert!(wavevector_at(&plan, plan.t_rev / 2.0).unwrap().abs() < 1e-9 * plan.k0);
        assert!(wavevector_at(&plan, -1.0).is_err());
    }

    #[test]
    fn twist_examples() {
        let one = phase_twist(1.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(one.delta_k, PI, max_relative = 1e-15);
        let ten = phase_twist(1e9, 10.0 / 2e9, 1e-3).unwrap();
        assert_relative_eq!(ten.delta_k, 2.0 * PI * 1e4, max_relative = 1e-12);
        assert_relative_eq!(ten.period, 1e-4, max_relative = 1e-12);
        assert!(ten.freezes(1e4));
        let nine = phase_twist(1e9, 9.0 / 2e9, 1e-3).unwrap();
        assert!(!nine.freezes(1e4));
    }

    #[test]
    fn bound_examples() {
        let count = 133.3 * 1.8;
        let b90 = nonlinearity_bound_from_count(count, BoundMode::TargetEfficiency(0.9)).unwrap();
        assert_relative_eq!(b90, 2.14e-4, max_relative = 0.01);
        let b99 = nonlinearity_bound_from_count(count, BoundMode::TargetEfficiency(0.99)).unwrap();
        assert_relative_eq!(b99, 6.7e-5, max_relative = 0.01);
        let q = nonlinearity_bound(&MaterialPreset::pr_yso(), 1e-3, BoundMode::QuarterRule).unwrap();
        assert_relative_eq!(q, 8.4e-5, max_relative = 0.01);
        for eps in [0.0, 1.0, -0.2] {
            assert!(nonlinearity_bound_from_count(count, BoundMode::TargetEfficiency(eps)).is_err());
        }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(dephasing_efficiency(0.0, 1.0), 1.0);
        let e = dephasing_efficiency(6e-4 * 240.0, 1.0);
        assert!((e - 0.381).abs() < 0.005, "{e}");
        assert_eq!(dephasing_efficiency(0.25, 1.0), 0.0);
        assert_eq!(dephasing_efficiency(0.3, 1.0), 0.0);
        let b = EfficiencyBudget::new(0.9, 240.0).unwrap();
        assert_relative_eq!(b.efficiency_factor, 0.9, max_relative = 1e-12);
    }

    #[test]
    fn schedule_area_checks() {
        let plan = ReversalPlan::new(&MaterialPreset::ideal(), 1.0, 183e6, 1).unwrap();
        let exact = FieldSchedule::rectangular(1.0, plan.t_rev, plan.t_rev).unwrap();
        let r = validate_schedule(&exact, &plan, None);
        assert!(r.passed());
        assert!(r.area.value < 1e-20);
        let long = FieldSchedule::rectangular(1.0, plan.t_rev + 0.25 / plan.delta_nu, 2.0 * plan.t_rev).unwrap();
        let r = validate_schedule(&long, &plan, None);
        assert!(!r.area.passed);
        assert_relative_eq!(r.area.value / r.area.limit, 2.0, max_relative = 1e-9);
        let dev = PiecewiseLinear::new(vec![(0.0, 0.3 / plan.t_rev), (plan.t_rev, 0.3 / plan.t_rev)]).unwrap();
        assert!(!validate_schedule(&exact, &plan, Some(&dev)).average_deviation.passed);
    }

    #[test]
    fn trapezoid_keeps_area() {
        let s = FieldSchedule::trapezoid(2.0, 0.5).unwrap();
        assert_relative_eq!(s.area(s.duration()), 2.0, max_relative = 1e-15);
        assert_eq!(s.at(0.25), 0.5);
        assert_eq!(s.switch_times(), vec![0.5, 2.0]);
    }

    #[test]
    fn piecewise_jumps_take_right_limit() {
        let s = FieldSchedule::rectangular(1.0, 1.0, 2.0).unwrap();
        assert_eq!(s.at(0.5), 1.0);
        assert_eq!(s.at(1.0), 0.0);
        assert_eq!(s.area(1.5), 1.0);
        assert_eq!(s.area(0.25), 0.25);
        assert!(FieldSchedule::new(vec![(0.0, 1.5), (1.0, 0.0)]).is_err());
        assert!(FieldSchedule::new(vec![(0.5, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn schedule_csv_roundtrip() {
        let s = FieldSchedule::trapezoid(1e-6, 1e-8).unwrap().then(&FieldSchedule::off(1e-6).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = FieldSchedule::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = ReversalPlan::new(&MaterialPreset::pr_yso(), 1e-3, 1.11e9, 3).unwrap();
        let text = plan.to_json().unwrap();
        let back = ReversalPlan::from_json(&text).unwrap();
        assert_eq!(back.t_m, plan.t_m);
        assert_eq!(back.t_rev, plan.t_rev);
        assert_eq!(back.preset.name, plan.preset.name);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
