use super::*;
use crate::models::{ornstein_uhlenbeck, two_state};
use crate::process::{Region, SemigroupMode, TestFunction};

#[test]
fn two_state_laws_distance() {
    let d = phi_variation_exact(&[0.7, 0.3], &[0.4, 0.6], &[1.0, 1.0]).unwrap();
    assert!((d - 0.6).abs() < 1e-15);
    assert_eq!(phi_variation_exact(&[0.2, 0.8], &[0.2, 0.8], &[3.0, 1.0]).unwrap(), 0.0);

    let n = 40_000;
    let a: Vec<usize> = (0..n).map(|i| usize::from(i % 10 >= 7)).collect();
    let b: Vec<usize> = (0..n).map(|i| usize::from(i % 10 >= 4)).collect();
    let est = phi_variation_distance(&a, &b, &TestFunction::constant(1.0), &Bins::States(2)).unwrap();
    assert!((est.value - 0.6).abs() < 1e-12);
    assert!((est.plug_in - 0.6).abs() < 1e-12);
}

#[test]
fn refining_bins_never_lowers_plug_in() {
    let mut rng = crate::rng::path_rng(3, 0);
    use rand_distr::{Distribution, Normal};
    let n1 = Normal::new(0.0, 1.0).unwrap();
    let n2 = Normal::new(0.5, 1.2).unwrap();
    let a: Vec<f64> = (0..5000).map(|_| n1.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..5000).map(|_| n2.sample(&mut rng)).collect();
    let phi = TestFunction::new(|x: &f64| 1.0 + x.abs());
    let coarse = phi_variation_distance(&a, &b, &phi, &Bins::uniform(-4.0, 4.0, 8)).unwrap();
    let fine = phi_variation_distance(&a, &b, &phi, &Bins::uniform(-4.0, 4.0, 32)).unwrap();
    assert!(fine.plug_in >= coarse.plug_in - 1e-12);
}

#[test]
fn doeblin_two_state_closed_form() {
    let chain = two_state(1.0, 1.0).unwrap();
    let t = 0.4;
    let exact = doeblin_coefficient(&chain, &[0, 1], t, 10, &Bins::States(2), 1, SemigroupMode::Auto).unwrap();
    assert!(exact.exact);
    assert!((exact.kappa - (-2.0 * t).exp()).abs() < 1e-12);

    let mc = doeblin_coefficient(
        &chain,
        &[0, 1],
        t,
        20_000,
        &Bins::States(2),
        2,
        SemigroupMode::MonteCarlo,
    )
    .unwrap();
    assert!(!mc.exact);
    assert!((mc.kappa - (-2.0 * t).exp()).abs() < 3.0 * mc.std_error, "{mc:?}");

    let single = doeblin_coefficient(&chain, &[1], t, 10, &Bins::States(2), 3, SemigroupMode::Auto).unwrap();
    assert_eq!(single.kappa, 0.0);
}

#[test]
fn extended_coefficient_dominates() {
    let chain = two_state(1.0, 2.0).unwrap();
    let bins = Bins::States(2);
    let plain = doeblin_coefficient(&chain, &[0, 1], 0.5, 10, &bins, 1, SemigroupMode::Auto).unwrap();
    let ext =
        doeblin_coefficient_extended(&chain, &[0, 1], &[0.3, 0.5, 0.8], 10, &bins, 1, SemigroupMode::Auto).unwrap();
    assert!(ext.kappa >= plain.kappa);
}

#[test]
fn start_inside_region_hits_at_zero() {
    let chain = two_state(1.0, 1.0).unwrap();
    let h = hitting_time_samples(&chain, &1, &Region::states([1]), 100, 10.0, 4).unwrap();
    assert!(h.samples.iter().all(|&t| t == 0.0));
    assert_eq!(h.censored, 0);
}

#[test]
fn holding_time_is_standard_exponential() {
    let chain = two_state(1.0, 1.0).unwrap();
    let h = hitting_time_samples(&chain, &0, &Region::states([1]), 20_000, 100.0, 5).unwrap();
    let (m, se) = crate::numerics::mean_se(&h.samples);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");

    let zero = exp_moment(&h, 0.0);
    assert_eq!((zero.value, zero.std_error), (1.0, 0.0));
    let half = exp_moment(&h, 0.5);
    assert!(!half.divergence_flag);
    assert!((half.value - 2.0).abs() < 0.1, "{half:?}");
    assert!(exp_moment(&h, 0.7).value >= half.value);
    let beyond = exp_moment(&h, 1.2);
    assert!(beyond.divergence_flag, "{beyond:?}");
}

#[test]
fn censoring_raises_the_flag() {
    let chain = two_state(1.0, 1.0).unwrap();
    let h = hitting_time_samples(&chain, &0, &Region::states([1]), 2000, 0.5, 6).unwrap();
    assert!(h.censored > 0);
    assert!(exp_moment(&h, 0.1).divergence_flag);

    let mut out = Vec::new();
    h.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("path_id,tau,censored\n"));
    assert_eq!(text.lines().count(), 2001);
    assert!(text.contains(",0.5,true"));
}

#[test]
fn shift_identity_holds_pathwise() {
    let chain = two_state(1.0, 0.5).unwrap();
    let t = 0.7;
    let sh = shifted_hitting_time_samples(&chain, &0, &Region::states([1]), t, 5000, 20.0, 7).unwrap();
    let mut checked = 0;
    for (b, s) in sh.base.per_path.iter().zip(&sh.shifted.per_path) {
        if let Some(b) = b {
            if *b > t {
                assert!((s.unwrap() - (b - t)).abs() < 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn phi_table_from_hitting_times() {
    let chain = two_state(1.0, 1.0).unwrap();
    let phi = build_phi_from_hitting(&chain, &Region::states([1]), 0.5, &[0, 1], 50_000, 200.0, 8).unwrap();
    assert_eq!(phi.eval_at(1.0), 1.0);
    assert!((phi.values[0] - 2.0).abs() < 0.1, "{phi:?}");
    assert!(phi.eval_at(-3.0) == phi.values[0]);

    let err = build_phi_from_hitting(&chain, &Region::states([1]), 1.5, &[0, 1], 5000, 200.0, 8).unwrap_err();
    assert!(matches!(err, crate::Error::NodeDivergence { .. }));
}

#[test]
fn ou_mean_hitting_time_matches_quadrature() {
    use statrs::function::erf::erfc;
    let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap();
    let tail = |y: f64| (std::f64::consts::PI / 2.0).sqrt() * erfc(y / 2f64.sqrt());
    let exact = crate::numerics::integrate(|y| (y * y / 2.0).exp() * tail(y), 1.0, 2.0, Default::default())
        .unwrap()
        .value;
    let h = hitting_time_samples(&ou, &2.0, &Region::interval(-1.0, 1.0), 2000, 50.0, 9).unwrap();
    let (m, se) = crate::numerics::mean_se(&h.samples);
    assert_eq!(h.censored, 0);
    assert!((m - exact).abs() < 3.0 * se + 0.03, "{m} ± {se} vs {exact}");
}

fn chain_budget() -> ConditionBudget<usize> {
    ConditionBudget {
        x_grid: vec![0, 1],
        k_grid: vec![1],
        t_grid: vec![0.5, 1.0, 2.0],
        c_grid: vec![1.5, 3.0],
        far_grid: vec![0],
        n_paths: 20_000,
        horizon: 100.0,
        seed: 10,
    }
}

#[test]
fn constant_weight_fails_fast_drift() {
    let chain = two_state(1.0, 1.0).unwrap();
    let report = check_coupling_preconditions(
        &chain,
        &TestFunction::constant(1.0),
        &Region::states([1]),
        3.0,
        1.0,
        &chain_budget(),
    )
    .unwrap();
    let drift = report.get("drift").unwrap();
    assert_eq!(drift.verdict, Verdict::Fail);
    assert_eq!(drift.witness.as_ref().unwrap().x, 0.0);
}

#[test]
fn exact_drift_passes_every_check() {
    // φ(0) = E_0 e^{τ/2} = 2 for unit holding rate; slower α leaves room.
    let chain = two_state(1.0, 1.0).unwrap();
    let phi = TestFunction::new(|x: &usize| if *x == 0 { 2.0 } else { 1.0 });
    let report = check_coupling_preconditions(&chain, &phi, &Region::states([1]), 0.25, 1.0, &chain_budget()).unwrap();
    for c in report.conditions.iter().filter(|c| !c.evidence_only) {
        assert_eq!(c.verdict, Verdict::Pass, "{}: {:?}", c.name, c.witness);
    }
    let mut json = Vec::new();
    report.write_json(&mut json).unwrap();
    assert!(String::from_utf8(json).unwrap().contains("\"uniform_integrability\""));
}
