//! Closed-form efficiencies of a linear absorber with flat inhomogeneous
//! broadening, kept apart from the numerical propagation model so the two
//! can be compared.

/// Beer–Lambert intensity transmission `e^{−αL}`.
pub fn transmission(optical_depth: f64) -> f64 {
    (-optical_depth).exp()
}

/// Forward re-emission after detuning reversal: `(αL)² e^{−αL}`.
pub fn forward_efficiency(optical_depth: f64) -> f64 {
    optical_depth * optical_depth * (-optical_depth).exp()
}

/// Backward (time-reversed) re-emission: `(1 − e^{−αL})²`.
pub fn backward_efficiency(optical_depth: f64) -> f64 {
    let stored = 1.0 - (-optical_depth).exp();
    stored * stored
}
