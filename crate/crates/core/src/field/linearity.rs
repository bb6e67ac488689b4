use serde::{Deserialize, Serialize};

use super::map::ShiftProfile;
use crate::error::{Error, Result};

/// Straight-line fit statistics of a shift profile over a span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub intercept: f64,
    /// Hz/m.
    pub slope: f64,
    /// Half-range of the fitted line over the span, |slope|·L/2 (Hz).
    pub delta_nu: f64,
    /// RMS residual (Hz).
    pub delta_nu_rms: f64,
    /// delta_nu_rms / delta_nu.
    pub ratio: f64,
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Least-squares line through the profile samples inside `span`.
pub fn linearity_report(profile: &ShiftProfile, span: (f64, f64)) -> Result<LinearityReport> {
    linearity_fit(&profile.x, &profile.shift, span)
}

/// Least-squares line through arbitrary `(x, shift)` samples inside `span`.
/// The x values need not be sorted or distinct.
pub fn linearity_fit(xs: &[f64], shifts: &[f64], span: (f64, f64)) -> Result<LinearityReport> {
    let (a, b) = span;
    if !(b > a) {
        return Err(Error::DegenerateFit("span must have positive length".into()));
    }
    if xs.len() != shifts.len() {
        return Err(Error::DegenerateFit("x and shift lengths differ".into()));
    }
    let tol = 1e-9 * (b - a);
    let (x, y): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(shifts).filter(|(x, _)| **x >= a - tol && **x <= b + tol).map(|(x, s)| (*x, *s)).unzip();
    let n = x.len();
    if n < 3 {
        return Err(Error::DegenerateFit(format!("{n} samples in span, need at least 3")));
    }
    // centred normal equations
    let xm = x.iter().sum::<f64>() / n as f64;
    let ym = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in x.iter().zip(&y) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(&y).map(|(x, y)| y - (intercept + slope * x)).collect();
    let delta_nu_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let delta_nu = slope.abs() * (b - a) / 2.0;
    let ratio = if delta_nu > 0.0 { delta_nu_rms / delta_nu } else { f64::INFINITY };
    Ok(LinearityReport { intercept, slope, delta_nu, delta_nu_rms, ratio, x, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(n: usize, f: impl Fn(f64) -> f64) -> ShiftProfile {
        let x: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
        let s = x.iter().map(|&x| f(x)).collect();
        ShiftProfile::new(x, s).unwrap()
    }

    #[test]
    fn exact_line_has_zero_ratio() {
        let r = linearity_report(&sampled(101, |x| 3.0 - 2.0 * x), (-1.0, 1.0)).unwrap();
        assert!(r.delta_nu_rms < 1e-14);
        assert!(r.ratio < 1e-14);
        assert!((r.slope + 2.0).abs() < 1e-13);
        assert!((r.delta_nu - 2.0).abs() < 1e-13);
    }

    // Frozen from an exact rational 2x2 normal-equation solve (Cramer's rule
    // on raw sums) over 2001 samples of x + 0.1 x^3 on [-1, 1].
    #[test]
    fn cubic_perturbation_regression() {
        let r = linearity_report(&sampled(2001, |x| x + 0.1 * x.powi(3)), (-1.0, 1.0)).unwrap();
        assert!((r.ratio - 0.014_283_382_0).abs() < 1e-9, "ratio {}", r.ratio);
    }

    #[test]
    fn degenerate_inputs() {
        let p = sampled(11, |x| x);
        assert!(linearity_report(&p, (0.5, 0.5)).is_err());
        assert!(linearity_report(&p, (0.05, 0.15)).is_err());
    }

    proptest! {
        #[test]
        fn residuals_satisfy_normal_equations(coeffs in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let p = sampled(64, |x| coeffs[0] + coeffs[1] * x + coeffs[2] * x * x + coeffs[3] * (3.0 * x).sin());
            let r = linearity_report(&p, (-1.0, 1.0)).unwrap();
            let s0: f64 = r.residuals.iter().sum();
            let s1: f64 = r.residuals.iter().zip(&r.x).map(|(e, x)| e * x).sum();
            prop_assert!(s0.abs() < 1e-10 && s1.abs() < 1e-10);
            prop_assert!(r.delta_nu_rms >= 0.0);
        }
    }
}
