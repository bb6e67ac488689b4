use backret_core::field::ShiftProfile;
use backret_core::oracle;
use backret_core::propagation::*;
use backret_core::Error;
use proptest::prelude::*;

fn both(od: f64) -> (StoredState, RetrievalOutcome, RetrievalOutcome) {
    let mut cfg = PropagationConfig::standard(od, RetrievalMode::ForwardCrib);
    let stored = simulate_storage(&cfg, 1.0).unwrap();
    let fwd = simulate_retrieval(&stored, &cfg).unwrap();
    cfg.mode = RetrievalMode::BackwardConjugate;
    let bwd = simulate_retrieval(&stored, &cfg).unwrap();
    (stored, fwd, bwd)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn matches_closed_forms() {
    for od in [1.0, 2.0, 5.0] {
        let (stored, fwd, bwd) = both(od);
        let t = stored.transmitted_energy / stored.input_energy;
        let t_tol = if od <= 2.0 { 0.01 } else { 0.02 };
        assert!(rel(t, oracle::transmission(od)) < t_tol, "T at {od}: {t}");
        assert!(rel(fwd.efficiency, oracle::forward_efficiency(od)) < 0.02, "forward at {od}: {}", fwd.efficiency);
        assert!(rel(bwd.efficiency, oracle::backward_efficiency(od)) < 0.02, "backward at {od}: {}", bwd.efficiency);
        assert!(stored.closure_error() < 1e-3);
        if od == 2.0 {
            assert!(rel(stored.stored_energy, 1.0 - oracle::transmission(2.0)) < 0.05);
        }
        assert!(fwd.ledger_error < 1e-3 && bwd.ledger_error < 1e-3);
    }
}

#[test]
fn backward_wins_beyond_crossover() {
    let base = PropagationConfig::standard(0.0, RetrievalMode::ForwardCrib);
    let sweep = efficiency_sweep(&[0.5, 1.5, 2.5, 4.0, 6.0], &base).unwrap();
    assert!(sweep.backward_monotone);
    assert_eq!(sweep.loss_falls_as_inverse_depth, Some(true));
    let r = &sweep.rows;
    assert!(r[2].eta_backward > r[2].eta_forward && r[3].eta_backward > r[3].eta_forward);
    assert!(sweep.crossover.unwrap() <= 2.5);
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 6);
}

#[test]
fn grid_refinement_changes_little() {
    let coarse = PropagationConfig::standard(2.0, RetrievalMode::BackwardConjugate);
    let fine = coarse.clone().with_resolution(2 * coarse.nx, 2 * coarse.nt);
    let a = run(&coarse).unwrap().1.efficiency;
    let b = run(&fine).unwrap().1.efficiency;
    assert!(rel(a, b) < 0.01, "{a} vs {b}");
}

#[test]
fn output_scales_linearly() {
    let cfg = PropagationConfig::standard(1.5, RetrievalMode::BackwardConjugate);
    let unit = simulate_storage(&cfg, 1.0).unwrap();
    let triple = simulate_storage(&cfg, 3.0).unwrap();
    for (a, b) in unit.polarization.iter().zip(&triple.polarization) {
        assert!((a * 3.0 - b).norm() <= 1e-12 * (1.0 + b.norm()));
    }
    let o1 = simulate_retrieval(&unit, &cfg).unwrap();
    let o3 = simulate_retrieval(&unit.scaled(3.0), &cfg).unwrap();
    for (a, b) in o1.output.iter().zip(&o3.output) {
        assert!((a * 3.0 - b).norm() <= 1e-12 * (1.0 + b.norm()));
    }
    assert!((o1.efficiency - o3.efficiency).abs() < 1e-12);
}

#[test]
fn ideal_ramp_matches_direct_reversal_and_residual_costs() {
    let sigma = 20.0 / (2.0 * std::f64::consts::PI * 1e6);
    let direct = run(&PropagationConfig::standard(3.0, RetrievalMode::BackwardConjugate)).unwrap().1.efficiency;
    let hold = 3.0 * sigma;
    let ideal = run(&PropagationConfig::standard(3.0, RetrievalMode::GradientRamp { ramp_time_s: hold, residual: None }))
        .unwrap()
        .1
        .efficiency;
    assert!(rel(ideal, direct) < 0.01, "{ideal} vs {direct}");
    // a uniform offset is a global phase
    let flat = ShiftProfile::new(vec![0.0, 1.0], vec![2e5, 2e5]).unwrap();
    let offset = run(&PropagationConfig::standard(
        3.0,
        RetrievalMode::GradientRamp { ramp_time_s: hold, residual: Some(flat) },
    ))
    .unwrap()
    .1
    .efficiency;
    assert!(rel(offset, ideal) < 1e-9);
    // a residual slope of half a cycle end to end dephases the grating
    let slope = ShiftProfile::new(vec![0.0, 1.0], vec![-0.25 / hold, 0.25 / hold]).unwrap();
    let tilted = run(&PropagationConfig::standard(
        3.0,
        RetrievalMode::GradientRamp { ramp_time_s: hold, residual: Some(slope) },
    ))
    .unwrap()
    .1
    .efficiency;
    assert!(tilted < 0.8 * ideal, "{tilted} vs {ideal}");
}

#[test]
fn zero_depth_stores_nothing() {
    let (stored, fwd, bwd) = both(0.0);
    assert!(rel(stored.transmitted_energy, 1.0) < 1e-12);
    assert_eq!((fwd.efficiency, bwd.efficiency), (0.0, 0.0));
}

#[test]
fn coarse_steps_fail_loudly() {
    let cfg = PropagationConfig::standard(2.0, RetrievalMode::ForwardCrib).with_resolution(100, 40);
    assert!(matches!(simulate_storage(&cfg, 1.0), Err(Error::Stability(_))));
}

#[test]
fn waveform_csv_has_one_row_per_sample() {
    let (_, _, bwd) = both(1.0);
    let mut buf = Vec::new();
    bwd.write_waveform_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), bwd.output.len() + 1);
    assert!(text.starts_with("t_s,re,im,intensity"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn energy_is_conserved(od in 0.1f64..6.0) {
        let (stored, fwd, bwd) = both(od);
        prop_assert!(stored.closure_error() < 1e-3);
        prop_assert!(fwd.ledger_error < 1e-3);
        prop_assert!(bwd.ledger_error < 1e-3);
        prop_assert!(fwd.efficiency <= 1.0 && bwd.efficiency <= 1.0);
    }
}
