use ergodyn::coupling::{maximal_coupling, overlap};
use ergodyn::models::{random_chain, random_reversible_chain};
use ergodyn::numerics::fit_exponential;
use ergodyn::numerics::linalg::expm;
use ergodyn::rng::{par_map, path_rng, with_threads};
use ergodyn::spectral::{
    check_hitting_moment_bound, finite_chain_exp_moment, finite_chain_spectrum, poincare_constant,
};
use ergodyn::Region;
use proptest::prelude::*;

fn law(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn overlap_is_one_minus_half_the_distance(raw in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..12)) {
        let p = law(&raw.iter().map(|r| r.0).collect::<Vec<_>>());
        let q = law(&raw.iter().map(|r| r.1).collect::<Vec<_>>());
        let tv: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        let w = overlap(&p, &q);
        prop_assert!((w - (1.0 - tv / 2.0)).abs() < 1e-12);
        prop_assert!((overlap(&q, &p) - w).abs() < 1e-15);
    }

    #[test]
    fn maximal_coupling_reports_equal_draws(seed in any::<u64>(), raw in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 2..6)) {
        let p: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let q: Vec<f64> = raw.iter().map(|r| r.1).collect();
        let mut rng = path_rng(seed, 0);
        for _ in 0..50 {
            let (i, j, equal) = maximal_coupling(&p, &q, &mut rng);
            prop_assert!(i < p.len() && j < q.len());
            prop_assert_eq!(equal, i == j);
        }
    }

    #[test]
    fn kernels_are_stochastic(n in 2usize..9, seed in any::<u64>(), t in 0.0f64..5.0) {
        let chain = random_chain(n, seed, 0.1, 3.0).unwrap();
        let k = expm(&(chain.generator() * t));
        for i in 0..n {
            let row: f64 = (0..n).map(|j| k[(i, j)]).sum();
            prop_assert!((row - 1.0).abs() < 1e-10);
            prop_assert!((0..n).all(|j| k[(i, j)] > -1e-12));
        }
        // π is invariant.
        let pi = chain.pi();
        for j in 0..n {
            let m: f64 = (0..n).map(|i| pi[i] * k[(i, j)]).sum();
            prop_assert!((m - pi[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn reversible_gaps_agree(n in 2usize..8, seed in any::<u64>()) {
        let chain = random_reversible_chain(n, seed, 0.2, 2.0).unwrap();
        let s = finite_chain_spectrum(&chain).unwrap();
        prop_assert!((s.spectral_gap - s.poincare_gap).abs() < 1e-8 * (1.0 + s.spectral_gap));
        prop_assert!((poincare_constant(&chain).unwrap().gamma - s.poincare_gap).abs() < 1e-8 * (1.0 + s.poincare_gap));
    }

    #[test]
    fn symmetrized_gap_never_exceeds_the_spectral_gap(n in 2usize..8, seed in any::<u64>()) {
        let chain = random_chain(n, seed, 0.2, 2.0).unwrap();
        let s = finite_chain_spectrum(&chain).unwrap();
        prop_assert!(s.poincare_gap <= s.spectral_gap + 1e-9 * (1.0 + s.spectral_gap));
    }

    #[test]
    fn hitting_bound_has_no_violations(n in 2usize..7, seed in any::<u64>()) {
        let chain = random_chain(n, seed, 0.2, 2.0).unwrap();
        let r = check_hitting_moment_bound(&chain).unwrap();
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        prop_assert_eq!(r.subsets, (1usize << n) - 2);
        prop_assert!(r.min_margin > 0.0);
    }

    #[test]
    fn exponential_moments_grow_with_alpha(n in 3usize..7, seed in any::<u64>(), a in 0.01f64..0.3) {
        let chain = random_chain(n, seed, 0.5, 2.0).unwrap();
        let low = finite_chain_exp_moment(&chain, &[0], a).unwrap();
        let high = finite_chain_exp_moment(&chain, &[0], 1.5 * a).unwrap();
        prop_assert!((low[0] - 1.0).abs() < 1e-12);
        for x in 1..n {
            prop_assert!(low[x] > 1.0 && high[x] > low[x]);
        }
    }

    #[test]
    fn exact_exponentials_are_fitted_exactly(c in 0.1f64..10.0, beta in 0.05f64..3.0) {
        let times: Vec<f64> = (1..=8).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| c * (-beta * t).exp()).collect();
        let fit = fit_exponential(&times, &values, &vec![0.0; times.len()]);
        prop_assert!((fit.beta_hat - beta).abs() < 1e-9 * (1.0 + beta));
        prop_assert!((fit.c_hat - c).abs() < 1e-8 * c);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn states_regions_are_sorted_sets(v in prop::collection::vec(0usize..20, 0..30)) {
        let Region::States(s) = Region::states(v.clone()) else { unreachable!() };
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(v.iter().all(|x| s.contains(x)));
    }

    #[test]
    fn par_map_does_not_depend_on_threads(n in 0usize..200, threads in 1usize..4) {
        let f = |i: usize| (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let serial: Vec<u64> = (0..n).map(f).collect();
        prop_assert_eq!(with_threads(threads, || par_map(n, f)), serial);
    }
}
