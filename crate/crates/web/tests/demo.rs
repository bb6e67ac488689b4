use backret_web::demo::*;

#[test]
fn profile_ratio_drops_near_the_tuned_potentials() {
    let tuned = eight_electrode_profile(0.5105, 1.9456, 256).unwrap();
    let off = eight_electrode_profile(0.3, 1.0, 256).unwrap();
    assert!(tuned.ratio < 1e-3 && off.ratio > 10.0 * tuned.ratio);
    assert_eq!(tuned.x.len(), tuned.shift.len());
}

#[test]
fn emission_ends_backward() {
    let v = ensemble_emission(5000, 1.0, 1.11, 0.0, 51).unwrap();
    assert_eq!(v.t.len(), 51);
    assert!((v.backward[50] - 1.0).abs() < 1e-6);
    assert!((v.forward[0] - 1.0).abs() < 1e-12);
    let bent = ensemble_emission(5000, 1.0, 1.11, 2e-5, 11).unwrap();
    assert!((bent.backward[10] - bent.predicted_backward).abs() < 1e-9);
}

#[test]
fn sweep_tracks_closed_forms() {
    let v = propagation_sweep(4.0, 4).unwrap();
    for k in 0..4 {
        assert!((v.eta_backward[k] / v.oracle_backward[k] - 1.0).abs() < 0.03);
        assert!((v.eta_forward[k] / v.oracle_forward[k] - 1.0).abs() < 0.03);
    }
    assert!(propagation_sweep(-1.0, 4).is_err());
}
