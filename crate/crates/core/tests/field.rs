use backret_core::field::*;
use backret_core::materials::{shift_from_field, ControlField, MaterialPreset};
use proptest::prelude::*;

fn ratio_of(family: &ArrayFamily, cells: usize, core: CoreBand) -> f64 {
    let map = solve_potential(&family.build().unwrap(), GridSpec::new(cells)).unwrap();
    let profile = shift_profile(&map, &MaterialPreset::ideal(), core).unwrap();
    linearity_report(&profile, (-family.lx / 2.0, family.lx / 2.0)).unwrap().ratio
}

#[test]
fn boundary_field_of_the_eight_electrode_design() {
    let lx = 80.8e-6;
    let fam = ArrayFamily::eight(lx, 60.6e-6, 0.05 * lx, [5.18, 10.0, 21.4]);
    let layout = fam.build().unwrap();
    let map = solve_potential(&layout, GridSpec::new(256)).unwrap();
    let e = max_field(&map, &RegionBoundary::of_region_a(&layout, 0.0)).unwrap();
    let shift = shift_from_field(&MaterialPreset::pr_yso(), ControlField::Electric(e)).unwrap();
    assert!((shift / 183e6 - 1.0).abs() < 0.25, "{shift}");
    // the rule of thumb |E| = U2 / Ly
    let estimate = shift_from_field(&MaterialPreset::pr_yso(), ControlField::Electric(10.0 / 60.6e-6)).unwrap();
    assert!((estimate / 183e6 - 1.0).abs() < 0.01);

    let doubled = fam.clone();
    let doubled = ArrayFamily { potentials: doubled.potentials.iter().map(|u| 2.0 * u).collect(), ..doubled };
    let m2 = solve_potential(&doubled.build().unwrap(), GridSpec::new(256)).unwrap();
    let e2 = max_field(&m2, &RegionBoundary::of_region_a(&layout, 0.0)).unwrap();
    assert!((e2 / e - 2.0).abs() < 1e-7);

    let zero = ArrayFamily { potentials: vec![0.0; 3], ..fam };
    let m0 = solve_potential(&zero.build().unwrap(), GridSpec::new(128)).unwrap();
    assert_eq!(max_field(&m0, &RegionBoundary::of_region_a(&layout, 0.0)).unwrap(), 0.0);
}

#[test]
fn quadrupole_profile_is_odd_with_percent_level_bend() {
    let fam = ArrayFamily::quadrupole(1.0, 1.0, 0.05, 1.0);
    let map = solve_potential(&fam.build().unwrap(), GridSpec::new(256)).unwrap();
    let p = shift_profile(&map, &MaterialPreset::ideal(), CoreBand::Axis).unwrap();
    let r = linearity_report(&p, (-0.5, 0.5)).unwrap();
    assert!(r.intercept.abs() < 1e-9 * r.delta_nu);
    for (x, s) in p.x.iter().zip(&p.shift) {
        if x.abs() <= 0.5 {
            let mirror = p.at(-x).unwrap();
            assert!((s + mirror).abs() < 1e-8 * r.delta_nu);
        }
    }
    // regression value of this geometry
    assert!((r.ratio - 4.63e-2).abs() < 1e-3, "{}", r.ratio);
}

#[test]
fn eight_electrode_reference_ratio_is_stable_under_refinement() {
    let fam = ArrayFamily::eight_reference(1.0, [0.518, 1.0, 2.14]);
    let core = CoreBand::Average { half_width: 0.075 };
    let a = ratio_of(&fam, 256, core);
    let b = ratio_of(&fam, 512, core);
    assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
    // regression baseline at the published potentials; this geometry's own
    // optimum sits at U3 ≈ 1.95 and reaches below 6e-4
    assert!((b - 4.17e-3).abs() < 1e-4, "{b}");
    let tuned = ArrayFamily::eight_reference(1.0, [0.5105, 1.0, 1.9456]);
    assert!(ratio_of(&tuned, 512, core) < 6e-4);
}

#[test]
fn superposition_holds_on_a_shared_grid() {
    let a = ArrayFamily::eight_reference(1.0, [1.0, 0.0, 0.0]).build().unwrap();
    let b = ArrayFamily::eight_reference(1.0, [0.0, 1.0, 0.0]).build().unwrap();
    let grid = GridSpec::new(128);
    let (ma, mb) = (solve_potential(&a, grid).unwrap(), solve_potential(&b, grid).unwrap());
    let sum = solve_potential(&a.superposed(&b).unwrap(), grid).unwrap();
    let combo = FieldMap::linear_combination(&[(&ma, 1.0), (&mb, 1.0)]).unwrap();
    let scale = sum.fy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in sum.fy.iter().zip(&combo.fy) {
        assert!((x - y).abs() < 1e-7 * scale);
    }
}

#[test]
fn exact_harmonic_box_reproduces_linear_field() {
    let map = solve_dirichlet_box(1.0, 0.5, 128, 1e-12, |x, y| -x * y).unwrap();
    let p = shift_profile(&map, &MaterialPreset::ideal(), CoreBand::Axis).unwrap();
    let r = linearity_report(&p, (-0.5, 0.5)).unwrap();
    assert!(r.ratio < 1e-8, "{}", r.ratio);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn antisymmetric_layouts_have_zero_intercept(u1 in 0.1f64..2.0, u3 in 0.1f64..4.0) {
        let fam = ArrayFamily::eight_reference(1.0, [u1, 1.0, u3]);
        let map = solve_potential(&fam.build().unwrap(), GridSpec::new(128)).unwrap();
        let p = shift_profile(&map, &MaterialPreset::ideal(), CoreBand::Axis).unwrap();
        let r = linearity_report(&p, (-0.5, 0.5)).unwrap();
        prop_assert!(r.intercept.abs() < 1e-8 * r.delta_nu);
    }

    #[test]
    fn field_scales_with_potentials(c in 0.1f64..10.0) {
        let base = ArrayFamily::eight_reference(1.0, [0.518, 1.0, 2.14]);
        let scaled = ArrayFamily { potentials: base.potentials.iter().map(|u| c * u).collect(), ..base.clone() };
        let grid = GridSpec::new(128);
        let m1 = solve_potential(&base.build().unwrap(), grid).unwrap();
        let m2 = solve_potential(&scaled.build().unwrap(), grid).unwrap();
        let scale = m1.fy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in m1.fy.iter().zip(&m2.fy) {
            prop_assert!((c * a - b).abs() < 1e-7 * c * scale);
        }
    }
}
