use backret_core::materials::MaterialPreset;
use backret_core::protocol::*;
use proptest::prelude::*;

fn preset(lambda: f64, n: f64) -> MaterialPreset {
    let mut p = MaterialPreset::ideal();
    p.lambda_vac = lambda;
    p.refractive_index = n;
    p
}

proptest! {
    #[test]
    fn conjugation_identity(lambda in 3e-7..2e-6f64, n in 1.0..3.0f64, lx in 1e-5..1e-2f64, dnu in 1e6..1e10f64) {
        let plan = ReversalPlan::new(&preset(lambda, n), lx, dnu, 2).unwrap();
        let k_end = wavevector_at(&plan, plan.t_rev).unwrap();
        prop_assert!((k_end + plan.k0).abs() <= 1e-12 * plan.k0);
        prop_assert!((plan.beta * plan.t_rev / (2.0 * plan.k0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_time_inverse_in_shift(count in 1.0..1e5f64, dnu in 1e3..1e10f64, c in 0.1..10.0f64) {
        let a = reversal_time_from_count(count, dnu).unwrap();
        let b = reversal_time_from_count(count, c * dnu).unwrap();
        prop_assert!((a / b / c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn subradiance_spacing_is_exact(dnu in 1e3..1e10f64) {
        let t = subradiance_times(dnu, 2).unwrap();
        prop_assert!(((t[1] - t[0]) * 2.0 * dnu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_decreases_in_target(count in 10.0..1e4f64, e1 in 0.001..0.998f64, de in 1e-4..0.001f64) {
        let mode = |e| BoundMode::TargetEfficiency(e);
        let lo = nonlinearity_bound_from_count(count, mode(e1)).unwrap();
        let hi = nonlinearity_bound_from_count(count, mode(e1 + de)).unwrap();
        let quarter = nonlinearity_bound_from_count(count, BoundMode::QuarterRule).unwrap();
        prop_assert!(hi < lo);
        prop_assert!(lo < quarter);
    }

    #[test]
    fn dephasing_inverts_bound(count in 10.0..1e4f64, dnu in 1e6..1e10f64, eps in 0.01..0.99f64) {
        let ratio = nonlinearity_bound_from_count(count, BoundMode::TargetEfficiency(eps)).unwrap();
        let t_rev = reversal_time_from_count(count, dnu).unwrap();
        prop_assert!((dephasing_efficiency(ratio * dnu, t_rev) - eps).abs() < 1e-10);
    }
}

#[test]
fn quarter_rule_is_the_small_target_limit() {
    let q = nonlinearity_bound_from_count(1.0, BoundMode::QuarterRule).unwrap();
    let b = nonlinearity_bound_from_count(1.0, BoundMode::TargetEfficiency(1e-12)).unwrap();
    assert!(b < q && q - b < 1e-6);
}

#[test]
fn round_trip_on_decile_grid() {
    for k in 1..=10 {
        let eps = if k == 10 { 0.99 } else { k as f64 / 10.0 };
        let count = 133.3 * 1.8;
        let ratio = nonlinearity_bound_from_count(count, BoundMode::TargetEfficiency(eps)).unwrap();
        let t_rev = reversal_time_from_count(count, 183e6).unwrap();
        assert!((dephasing_efficiency(ratio * 183e6, t_rev) - eps).abs() < 1e-10);
    }
}

#[test]
fn schedule_overshoot_of_quarter_period_fails() {
    let plan = ReversalPlan::new(&MaterialPreset::pr_yso(), 1e-3, 1.11e9, 1).unwrap();
    let ok = FieldSchedule::trapezoid(plan.t_rev, plan.t_rev / 100.0).unwrap();
    assert!(validate_schedule(&ok, &plan, None).passed());
    let over = FieldSchedule::rectangular(1.0, plan.t_rev + 0.25 / plan.delta_nu, 2.0 * plan.t_rev).unwrap();
    let r = validate_schedule(&over, &plan, None);
    assert!(!r.area.passed && r.average_deviation.passed);
    assert!(r.area.margin < 0.0);
}
