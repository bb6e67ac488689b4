use backret_core::ensemble::*;
use backret_core::field::ShiftProfile;
use backret_core::materials::MaterialPreset;
use backret_core::protocol::{dephasing_efficiency, phase_twist, FieldSchedule};
use proptest::prelude::*;

fn pr_run(n: usize) -> ProtocolConfig {
    let mut c = ProtocolConfig::ideal(&MaterialPreset::pr_yso(), 1e-3, 1.11e9, n);
    c.m_max = 12;
    c.samples = 11;
    c
}

#[test]
fn forward_vanishes_at_subradiance_times() {
    let run = run_protocol(&pr_run(10_000)).unwrap();
    for p in &run.subradiance {
        assert!(p.forward < 1e-20, "m = {}: {}", p.m, p.forward);
    }
}

#[test]
fn backward_is_unity_at_reversal() {
    let run = run_protocol(&pr_run(10_000)).unwrap();
    assert!((run.at_reversal.backward - 1.0).abs() < 1e-6, "{}", run.at_reversal.backward);
    assert!(run.at_reversal.forward < 1e-3);
    assert_eq!(run.verdict, Direction::Backward);
    assert_eq!(run.restored_forward, 1.0);
}

#[test]
fn two_point_residuals_follow_cos_squared() {
    let mut c = pr_run(10_000);
    // same phase spread as δν/Δν = 6e-4 over 240 wavelengths
    let t_rev = backret_core::protocol::reversal_time(&c.preset, c.lx, c.delta_nu).unwrap();
    let dnu = 6e-4 * 240.0 / t_rev;
    c.residual = ResidualModel::TwoPoint { delta_nu: dnu };
    let run = run_protocol(&c).unwrap();
    let expected = dephasing_efficiency(dnu, run.t_rev);
    assert!((run.at_reversal.backward - expected).abs() < 1e-12, "{} {}", run.at_reversal.backward, expected);

    let s = residual_dephasing_study(&StudyModel::TwoPoint { ratio: 6e-4 }, 240.0, 10_000).unwrap();
    assert!(s.difference.abs() < 1e-12, "{s:?}");
    assert!((s.measured - 0.381).abs() < 0.005);
}

#[test]
fn gaussian_residuals_beat_cos_squared_slightly() {
    let s = residual_dephasing_study(&StudyModel::Gaussian { ratio: 6e-4, seed: 1 }, 240.0, 20_000).unwrap();
    // for a normal spread the mean phasor gives exp(-σ²), above cos² σ
    let sigma: f64 = 2.0 * std::f64::consts::PI * 6e-4 * 240.0;
    assert!((s.measured - (-sigma * sigma).exp()).abs() < 0.03, "{s:?}");
    assert!(s.difference > 0.0);
    let tiny = residual_dephasing_study(&StudyModel::Gaussian { ratio: 1e-9, seed: 1 }, 240.0, 1000).unwrap();
    assert!((tiny.measured - 1.0).abs() < 1e-9);
}

#[test]
fn t2_decay_scales_rates() {
    let mut c = pr_run(2000);
    let plain = run_protocol(&c).unwrap();
    c.t2 = Some(3e-6);
    let decayed = run_protocol(&c).unwrap();
    for (a, b) in plain.series.iter().zip(&decayed.series) {
        let f = (-2.0 * a.t / 3e-6).exp();
        if a.forward > 1e-12 {
            assert!((b.forward / a.forward / f - 1.0).abs() < 1e-6);
        }
        assert!((b.backward / a.backward / f - 1.0).abs() < 1e-6);
    }
}

#[test]
fn subradiant_state_stays_dark_with_field_off() {
    let (lx, dnu, m, od) = (1e-3, 1e9, 20usize, 4.0);
    let alpha = od / lx;
    let t_m = m as f64 / (2.0 * dnu);
    assert!(phase_twist(dnu, t_m, lx).unwrap().freezes(alpha));
    let s = init_ensemble(
        &MaterialPreset::pr_yso(),
        10_000,
        lx,
        Placement::Equispaced,
        AmplitudeProfile::Exponential { optical_depth: od },
    )
    .unwrap();
    let on = FieldSchedule::rectangular(1.0, t_m, t_m).unwrap();
    let line = ShiftProfile::ideal_linear(dnu, lx);
    let dark = evolve(&s, &line, &on, t_m, None).unwrap();
    let r0 = emission_rate(&dark, Direction::Forward);
    // continuum limit: (αL/2)² / ((αL/2)² + (2πm)²)
    let w = 2.0 * std::f64::consts::PI * m as f64;
    assert!((r0 / (4.0 / (4.0 + w * w)) - 1.0).abs() < 0.01, "{r0}");
    let later = evolve(&dark, &line, &FieldSchedule::off(1e-6).unwrap(), 1e-6, None).unwrap();
    assert_eq!(emission_rate(&later, Direction::Forward), r0);
    assert!(r0 < 1e-3);
}

#[test]
fn series_csv_has_header_and_rows() {
    let run = run_protocol(&pr_run(100)).unwrap();
    let mut buf = Vec::new();
    write_series_csv(&run.series, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t_s,r_forward,r_backward\n"));
    assert_eq!(text.lines().count(), run.series.len() + 1);
}

#[test]
fn seeded_uniform_rates_stay_bounded() {
    let n = 10_000;
    let bound = 1.0 + 5.0 / (n as f64).sqrt();
    let line = ShiftProfile::ideal_linear(1.11e9, 1e-3);
    let t = 0.37e-6;
    let on = FieldSchedule::rectangular(1.0, t, t).unwrap();
    for seed in 0..100 {
        let s = init_ensemble(
            &MaterialPreset::pr_yso(),
            n,
            1e-3,
            Placement::SeededUniform { seed },
            AmplitudeProfile::Uniform,
        )
        .unwrap();
        let e = evolve(&s, &line, &on, t, None).unwrap();
        for st in [&s, &e] {
            let r = emission_report(st);
            assert!(r.forward <= bound && r.backward <= bound);
        }
    }
}

proptest! {
    #[test]
    fn global_phase_is_invisible(offset in -100.0..100.0f64, t in 0.0..3e-6f64) {
        let s = init_ensemble(&MaterialPreset::pr_yso(), 500, 1e-3, Placement::Equispaced, AmplitudeProfile::Uniform).unwrap();
        let on = FieldSchedule::rectangular(1.0, 3e-6, 3e-6).unwrap();
        let e = evolve(&s, &ShiftProfile::ideal_linear(1.11e9, 1e-3), &on, t, None).unwrap();
        let mut shifted = e.clone();
        shifted.phases.iter_mut().for_each(|p| *p += offset);
        for d in [Direction::Forward, Direction::Backward] {
            let (a, b) = (emission_rate(&e, d), emission_rate(&shifted, d));
            prop_assert!((a - b).abs() <= 1e-12 + 1e-9 * a, "{} {} {}", a, b, offset);
        }
    }

    #[test]
    fn reversed_schedule_restores_phases(
        slope in -2e9..2e9f64,
        curve in -1e8..1e8f64,
        t in 1e-9..2e-6f64,
        ramp in 0.01..0.5f64,
    ) {
        let x: Vec<f64> = (0..41).map(|k| -0.5e-3 + k as f64 * 2.5e-5).collect();
        let shift = x.iter().map(|x| slope * x / 1e-3 + curve * (x / 1e-3).powi(3)).collect();
        let profile = ShiftProfile::new(x, shift).unwrap();
        let s = init_ensemble(&MaterialPreset::pr_yso(), 300, 1e-3, Placement::SeededUniform { seed: 9 }, AmplitudeProfile::Uniform).unwrap();
        let sched = FieldSchedule::trapezoid(t, ramp * t).unwrap();
        let dur = sched.duration();
        let there = evolve(&s, &profile, &sched, dur, None).unwrap();
        let back = evolve(&there, &profile, &sched.negated(), dur, None).unwrap();
        prop_assert_eq!(&back.phases, &s.phases);
    }
}

#[test]
fn optimized_eight_electrode_core_gives_paper_efficiency() {
    use backret_core::field::{core_samples, solve_potential, ArrayFamily, GridSpec};
    // optimum of the row-averaged core objective on the 8-electrode family
    let fam = ArrayFamily::eight_reference(1.0, [0.5105, 1.0, 1.9456]);
    let map = solve_potential(&fam.build().unwrap(), GridSpec::new(512)).unwrap();
    let (x, shift) = core_samples(&map, &MaterialPreset::ideal(), 0.075, (-0.5, 0.5)).unwrap();
    let r = residual_dephasing_study(&StudyModel::FromSamples { x, shift, span: (-0.5, 0.5) }, 240.0, 0).unwrap();
    assert!((r.measured - 0.38).abs() < 0.05, "{r:?}");
}
