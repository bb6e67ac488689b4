use backret_core::field::{ArrayFamily, CoreBand};
use backret_core::optimizer::*;

fn eight_problem() -> OptimizationProblem {
    let fam = ArrayFamily::eight_reference(1.0, [0.518, 1.0, 2.14]);
    OptimizationProblem::for_family(&fam, &[(0.1, 1.5), (0.5, 4.0)], CoreBand::Average { half_width: 0.075 }).unwrap()
}

#[test]
fn eight_electrode_search_recovers_the_design() {
    let r = optimize(&eight_problem(), &SearchConfig::default()).unwrap();
    assert!(r.verified_ratio < 1e-3, "{}", r.verified_ratio);
    let (u1, u3) = (r.best_params[0], r.best_params[1]);
    assert!((u1 / 0.518 - 1.0).abs() < 0.2, "U1 = {u1}");
    assert!((u3 / 2.14 - 1.0).abs() < 0.2, "U3 = {u3}");
    assert_eq!(r.names, ["U1", "U3"]);
}

#[test]
fn history_is_monotone_and_reproducible() {
    let cfg = SearchConfig { restarts: 2, max_evals: 120, ..Default::default() };
    let p = eight_problem();
    let a = optimize(&p, &cfg).unwrap();
    let b = optimize(&p, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert!(a.history.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
    let mut csv = Vec::new();
    a.write_history_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("eval_index,U1,U3,ratio"));
    assert_eq!(text.lines().count(), a.history.len() + 1);
}

#[test]
fn different_seeds_agree_on_the_optimum() {
    let p = eight_problem();
    let a = optimize(&p, &SearchConfig { seed: 1, ..Default::default() }).unwrap();
    let b = optimize(&p, &SearchConfig { seed: 99, ..Default::default() }).unwrap();
    assert!((a.best_params[0] - b.best_params[0]).abs() < 1e-3);
    assert!((a.best_params[1] - b.best_params[1]).abs() < 1e-2);
}

#[test]
fn ideal_quadrupole_reaches_machine_linearity() {
    let q = IdealQuadrupole::new(1.0, 0.5);
    let r = optimize(&q, &SearchConfig { restarts: 2, max_evals: 200, ..Default::default() }).unwrap();
    assert!(r.verified_ratio < 1e-6);
}
