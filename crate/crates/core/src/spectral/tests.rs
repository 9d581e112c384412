use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;
use crate::models::{cycle_chain, random_chain, random_reversible_chain, two_state, FiniteChain};
use crate::process::{SemigroupMode, TestFunction};
use crate::rng::path_rng;

fn random_mean_zero(chain: &FiniteChain, seed: u64) -> Vec<f64> {
    let mut rng = path_rng(seed, 0);
    let f: Vec<f64> = (0..chain.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let m: f64 = f.iter().zip(chain.pi().iter()).map(|(a, b)| a * b).sum();
    f.iter().map(|v| v - m).collect()
}

#[test]
fn norms_by_hand() {
    let ctx = WeightedNormContext::new(vec![0usize, 1], vec![0.5, 0.5], vec![1.0, 4.0], 2.0).unwrap();
    let n = weighted_norm(&ctx, &[1.0, 1.0]).unwrap();
    assert!((n.primal - (5.0f64 / 8.0).sqrt()).abs() < 1e-15);
    assert!(n.embedding_holds);

    let plain = WeightedNormContext::new(vec![0usize, 1, 2], vec![0.2, 0.3, 0.5], vec![1.0; 3], 3.0).unwrap();
    let f = [1.0, -2.0, 0.5];
    let n = weighted_norm(&plain, &f).unwrap();
    let lp = (0.2 * 1.0 + 0.3 * 8.0 + 0.5 * 0.125f64).powf(1.0 / 3.0);
    let lq = (0.2 * 1.0 + 0.3 * 2f64.powf(1.5) + 0.5 * 0.5f64.powf(1.5)).powf(2.0 / 3.0);
    assert!((n.primal - lp).abs() < 1e-14);
    assert!((n.dual - lq).abs() < 1e-14);
    assert!((plain.q - 1.5).abs() < 1e-15 && (1.0 / plain.p + 1.0 / plain.q - 1.0).abs() < 1e-14);
}

#[test]
fn two_state_and_cycle_spectra() {
    let rep = finite_chain_spectrum(&two_state(1.0, 1.0).unwrap()).unwrap();
    assert_eq!(rep.eigenvalues.len(), 1);
    assert!((rep.eigenvalues[0].re + 2.0).abs() < 1e-12);
    assert!((rep.spectral_gap - 2.0).abs() < 1e-12);
    assert!((rep.poincare_gap - 2.0).abs() < 1e-12 && (rep.poincare_constant - 0.5).abs() < 1e-12);

    let rep = finite_chain_spectrum(&cycle_chain(3, 1.0).unwrap()).unwrap();
    assert!((rep.spectral_gap - 1.5).abs() < 1e-12);
    for z in &rep.eigenvalues {
        assert!((z.re + 1.5).abs() < 1e-12);
        assert!((z.im.abs() - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }
    // The symmetric walk on the 3-cycle with rates ½ has gap 3/2 too.
    assert!((rep.poincare_gap - 1.5).abs() < 1e-12);
    let mut csv = Vec::new();
    rep.write_eigenvalues_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

#[test]
fn gap_survives_relabeling() {
    let chain = random_chain(5, 11, 0.2, 2.0).unwrap();
    let perm = [3, 0, 4, 1, 2];
    let q = chain.generator();
    let pq = DMatrix::from_fn(5, 5, |i, j| q[(perm[i], perm[j])]);
    let relabeled = FiniteChain::new(pq, None).unwrap();
    let a = finite_chain_spectrum(&chain).unwrap();
    let b = finite_chain_spectrum(&relabeled).unwrap();
    assert!((a.spectral_gap - b.spectral_gap).abs() < 1e-10);
    assert!((a.poincare_gap - b.poincare_gap).abs() < 1e-10);
}

#[test]
fn symmetrization_properties() {
    let rev = random_reversible_chain(5, 2, 0.3, 1.5).unwrap();
    let s = symmetrize_generator(&rev).unwrap();
    assert!((s.generator() - rev.generator()).amax() < 1e-12);

    let cyc = symmetrize_generator(&cycle_chain(3, 1.0).unwrap()).unwrap();
    let expected = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.5, 0.5, -1.0, 0.5, 0.5, 0.5, -1.0]);
    assert!((cyc.generator() - expected).amax() < 1e-12);

    let chain = random_chain(6, 4, 0.1, 2.0).unwrap();
    let s = symmetrize_generator(&chain).unwrap();
    assert!((s.pi() - chain.pi()).amax() < 1e-10);
    assert!(s.is_reversible(1e-12));
}

#[test]
fn adjointness_and_conjugate_spectra() {
    let chain = random_chain(5, 9, 0.2, 2.0).unwrap();
    let dual = chain.dual().unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let ei: Vec<f64> = (0..5).map(|k| f64::from(u8::from(k == i))).collect();
            let ej: Vec<f64> = (0..5).map(|k| f64::from(u8::from(k == j))).collect();
            let qf = chain.generator() * DVector::from_column_slice(&ei);
            let qg = dual.generator() * DVector::from_column_slice(&ej);
            let lhs = inner_pi(&chain, qf.as_slice(), &ej);
            let rhs = inner_pi(&chain, &ei, qg.as_slice());
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
    let a = finite_chain_spectrum(&chain).unwrap().eigenvalues;
    let b = finite_chain_spectrum(&dual).unwrap().eigenvalues;
    for z in &a {
        assert!(b
            .iter()
            .any(|w| (w.re - z.re).abs() < 1e-10 && (w.im + z.im).abs() < 1e-10));
    }
}

#[test]
fn poincare_matches_rayleigh_and_contracts() {
    let chain = random_chain(4, 21, 0.2, 2.0).unwrap();
    let pc = poincare_constant(&chain).unwrap();
    let mut min_ratio = f64::INFINITY;
    for s in 0..20_000 {
        let f = random_mean_zero(&chain, 100 + s);
        min_ratio = min_ratio.min(dirichlet_form(&chain, &f, &f) / inner_pi(&chain, &f, &f));
    }
    assert!(min_ratio >= pc.gamma - 1e-10);
    assert!(min_ratio < pc.gamma * 1.05);

    for s in 0..50 {
        let f = random_mean_zero(&chain, 1000 + s);
        let norm0 = inner_pi(&chain, &f, &f).sqrt();
        for t in [0.1, 1.0, 10.0] {
            let g = chain.kernel(t).unwrap() * DVector::from_column_slice(&f);
            let norm = inner_pi(&chain, g.as_slice(), g.as_slice()).sqrt();
            assert!(norm <= (-pc.gamma * t).exp() * norm0 + 1e-10);
        }
    }
}

#[test]
fn exp_moment_linear_solve() {
    let chain = two_state(1.0, 1.0).unwrap();
    assert_eq!(finite_chain_exp_moment(&chain, &[1], 0.0).unwrap(), vec![1.0, 1.0]);
    let h = finite_chain_exp_moment(&chain, &[1], 0.5).unwrap();
    assert!((h[0] - 2.0).abs() < 1e-12 && h[1] == 1.0);
    let lap = finite_chain_exp_moment(&chain, &[1], -1.0).unwrap();
    assert!((lap[0] - 0.5).abs() < 1e-12);
    assert!(matches!(
        finite_chain_exp_moment(&chain, &[1], 1.0),
        Err(crate::Error::MomentDivergence { .. })
    ));
    assert_eq!(finite_chain_exp_moment(&chain, &[0, 1], 7.0).unwrap(), vec![1.0, 1.0]);
}

#[test]
fn exp_moment_agrees_with_hitting_estimator() {
    use crate::estimators::{exp_moment, hitting_time_samples};
    use crate::process::Region;
    let chain = random_chain(6, 5, 0.5, 2.0).unwrap();
    let k = [2, 4];
    let h = finite_chain_exp_moment(&chain, &k, 0.3).unwrap();
    for x in [0usize, 5] {
        let s = hitting_time_samples(&chain, &x, &Region::states(k), 40_000, 200.0, 7 + x as u64).unwrap();
        let m = exp_moment(&s, 0.3);
        assert!((m.value - h[x]).abs() < 3.0 * m.std_error, "{x}: {m:?} vs {}", h[x]);
    }
}

#[test]
fn hitting_moment_bound_on_small_chains() {
    let rep = check_hitting_moment_bound(&two_state(1.0, 1.0).unwrap()).unwrap();
    assert!((rep.gamma - 2.0).abs() < 1e-12);
    assert_eq!(rep.subsets, 2);
    assert!(rep.violations.is_empty());
    assert!((rep.min_margin - (1.0 - 0.45)).abs() < 1e-12);
    for seed in 0..5 {
        let rep = check_hitting_moment_bound(&random_reversible_chain(6, seed, 0.1, 2.0).unwrap()).unwrap();
        assert_eq!(rep.subsets, 62);
        assert!(rep.violations.is_empty() && rep.min_margin > 0.0);
    }
}

#[test]
fn two_state_growth_rate_is_two() {
    let chain = two_state(1.0, 1.0).unwrap();
    let ctx = WeightedNormContext::for_chain(&chain, vec![1.0, 1.0], 2.0).unwrap();
    let f = TestFunction::new(|x: &usize| if *x == 0 { 1.0 } else { -1.0 });
    let zero = TestFunction::constant(0.0);
    let fit = growth_bound_fit(
        &chain,
        &[f, zero],
        &ctx,
        &[0.5, 1.0, 2.0, 3.0],
        1,
        1,
        GrowthOptions::default(),
    )
    .unwrap();
    assert_eq!(fit.degenerate_functions, vec![1]);
    assert!((fit.fit.beta_hat - 2.0).abs() < 1e-9);

    let mc = GrowthOptions {
        weighted: false,
        mode: SemigroupMode::MonteCarlo,
    };
    let f = TestFunction::new(|x: &usize| if *x == 0 { 1.0 } else { -1.0 });
    let fit = growth_bound_fit(&chain, &[f], &ctx, &[0.25, 0.5, 0.75, 1.0], 40_000, 2, mc).unwrap();
    assert!(
        (fit.fit.beta_hat - 2.0).abs() < 3.0 * fit.fit.beta_se + 0.05,
        "{:?}",
        fit.fit
    );
}
