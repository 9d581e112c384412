use super::*;
use crate::models::{ornstein_uhlenbeck, pdmp_build, random_chain, two_state, FiniteChain, PdmpParams};
use crate::rng::par_map;
use approx::assert_relative_eq;
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

fn freq(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt().max(0.5 / n as f64))
}

fn half_tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[test]
fn maximal_coupling_overlap_frequency() {
    let p = [0.5, 0.3, 0.2];
    let q = [0.1, 0.3, 0.6];
    assert_relative_eq!(overlap(&p, &q), 0.6);
    let n = 40_000;
    let mut rng = path_rng(1, 0);
    let mut equal = 0;
    let mut first = [0usize; 3];
    for _ in 0..n {
        let (i, j, eq) = maximal_coupling(&p, &q, &mut rng);
        assert_eq!(eq, i == j);
        equal += eq as usize;
        first[i] += 1;
    }
    let (f, se) = freq(equal, n);
    assert!((f - 0.6).abs() < 4.0 * se);
    for (k, c) in first.iter().enumerate() {
        let (f, se) = freq(*c, n);
        assert!((f - p[k]).abs() < 4.0 * se);
    }
}

#[test]
fn two_state_gluing_probability() {
    let chain = two_state(1.0, 1.0).unwrap();
    let opts = GluingOptions::default();
    assert_eq!(gluing_mode(&chain, &0), GluingMode::Exact);
    let n = 20_000;
    let hits = par_map(n, |i| {
        gluing_coupling(&chain, &0, &1, 1.0, i as u64, &opts)
            .unwrap()
            .endpoints_equal
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    let (f, se) = freq(hits, n);
    assert!((f - (1.0 - (-2.0f64).exp())).abs() < 4.0 * se, "{f}");
}

#[test]
fn identical_starts_are_coupled_from_zero() {
    let chain = random_chain(4, 3, 0.5, 2.0).unwrap();
    let run = gluing_coupling(&chain, &2, &2, 1.5, 9, &GluingOptions::default()).unwrap();
    assert_eq!(run.coupled_at, Some(0.0));
    assert_eq!(run.traj1, run.traj2);
}

#[test]
fn bridges_end_at_the_glued_endpoints() {
    let chain = random_chain(5, 8, 0.5, 2.0).unwrap();
    for seed in 0..200 {
        let run = gluing_coupling(&chain, &0, &3, 0.7, seed, &GluingOptions::default()).unwrap();
        assert!(run.traj1.is_valid() && run.traj2.is_valid());
        let (a, b) = (*run.traj1.state_at(0.7), *run.traj2.state_at(0.7));
        assert_eq!(run.endpoints_equal, a == b);
        assert!(run.is_sticky());
    }
}

#[test]
fn gluing_marginals_match_kernels() {
    let chain = random_chain(4, 5, 0.5, 2.0).unwrap();
    let t = 0.6;
    let n = 40_000;
    let ends = par_map(n, |i| {
        let r = gluing_coupling(&chain, &0, &3, t, 100 + i as u64, &GluingOptions::default()).unwrap();
        (*r.traj1.state_at(t), *r.traj2.state_at(t))
    });
    let k = chain.kernel(t).unwrap();
    for s in 0..4 {
        let (f1, se1) = freq(ends.iter().filter(|e| e.0 == s).count(), n);
        let (f2, se2) = freq(ends.iter().filter(|e| e.1 == s).count(), n);
        assert!((f1 - k[(0, s)]).abs() < 4.0 * se1);
        assert!((f2 - k[(3, s)]).abs() < 4.0 * se2);
    }
}

#[test]
fn extended_gluing() {
    let chain = two_state(1.0, 1.0).unwrap();
    let opts = GluingOptions::default();
    for seed in 0..50 {
        let a = gluing_coupling(&chain, &0, &1, 0.8, seed, &opts).unwrap();
        let b = extended_gluing_coupling(&chain, &0, &1, 0.8, 0.8, seed, &opts).unwrap();
        assert_eq!(a, b);
    }
    // same start, different horizons
    let k1 = chain.kernel(1.0).unwrap();
    let k2 = chain.kernel(2.0).unwrap();
    let exact = 1.0 - half_tv(&[k1[(0, 0)], k1[(0, 1)]], &[k2[(0, 0)], k2[(0, 1)]]);
    assert!(exact < 1.0);
    let n = 20_000;
    let hits = par_map(n, |i| {
        extended_gluing_coupling(&chain, &0, &0, 1.0, 2.0, i as u64, &opts)
            .unwrap()
            .endpoints_equal
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    let (f, se) = freq(hits, n);
    assert!((f - exact).abs() < 4.0 * se, "{f} vs {exact}");
}

#[test]
fn binned_gluing_of_gaussian_laws() {
    let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap();
    assert_eq!(gluing_mode(&ou, &0.0), GluingMode::Binned);
    let t = 0.5;
    let (m1, v) = ou.exact().unwrap().mean_var(1.0, t);
    let (m2, _) = ou.exact().unwrap().mean_var(-0.5, t);
    let exact = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(-(m1 - m2).abs() / (2.0 * v.sqrt()));
    let n = 20_000;
    let runs = par_map(n, |i| {
        gluing_coupling(&ou, &1.0, &-0.5, t, i as u64, &GluingOptions::default()).unwrap()
    });
    let hits = runs.iter().filter(|r| r.endpoints_equal).count();
    let (f, se) = freq(hits, n);
    let grid = runs[0].grid_error;
    assert!((f - exact).abs() < 4.0 * se + grid, "{f} vs {exact}");
    // the second component keeps its law up to the grid width
    let ends: Vec<f64> = runs.iter().map(|r| *r.traj2.state_at(t)).collect();
    let (mean, se) = mean_se(&ends);
    assert!((mean - m2).abs() < 4.0 * se + grid);
    assert!(runs.iter().all(|r| r.traj1.events.last().unwrap().0 == t));
}

#[test]
fn empirical_gluing_couples_pdmp_paths() {
    let m = pdmp_build(&PdmpParams::bounded_gaps()).unwrap();
    assert_eq!(gluing_mode(&m, &0.2), GluingMode::Empirical);
    let n = 400;
    let runs = par_map(n, |i| {
        gluing_coupling(&m, &0.2, &0.4, 1.0, i as u64, &GluingOptions::default()).unwrap()
    });
    let hits = runs.iter().filter(|r| r.endpoints_equal).count();
    assert!(hits > n / 10, "{hits}");
    for r in &runs {
        assert!(r.traj1.is_valid() && r.traj2.is_valid());
        if r.endpoints_equal {
            assert_eq!(r.traj1.position(&m, 1.0), r.traj2.position(&m, 1.0));
        }
    }
}

#[test]
fn switching_ladder_and_stickiness() {
    let chain = random_chain(5, 12, 0.5, 2.0).unwrap();
    let phi = TestFunction::new(|x: &usize| 1.0 + *x as f64);
    let c = 3.0;
    for seed in 0..100 {
        let run =
            switching_coupling_from(&chain, &phi, c, 0.5, &0, &4, 10.0, seed, &SwitchingOptions::default()).unwrap();
        assert!(run.theta_ladder.windows(2).all(|w| w[1].time > w[0].time));
        for (i, e) in run.theta_ladder.iter().enumerate() {
            if e.phase == Phase::Gluing {
                let x1 = run.traj1.position(&chain, e.time);
                let x2 = run.traj2.position(&chain, e.time);
                assert!(phi.eval(&x1) <= c && phi.eval(&x2) <= c);
                if let Some(next) = run.theta_ladder.get(i + 1) {
                    assert!(next.time >= e.time + 0.5 - 1e-12);
                }
            }
        }
        assert!(run.traj1.is_valid() && run.traj2.is_valid());
        assert!(run.is_sticky());
        if let Some(tc) = run.coupled_at {
            assert_eq!(run.traj1.state_at(tc), run.traj2.state_at(tc));
        }
    }
}

#[test]
fn geometric_attempt_bound() {
    let chain = two_state(1.0, 1.0).unwrap();
    let phi = TestFunction::constant(1.0);
    let t = 0.3;
    let n = 10_000;
    let runs = par_map(n, |i| {
        switching_coupling_from(
            &chain,
            &phi,
            1.0,
            t,
            &0,
            &1,
            3.0,
            i as u64,
            &SwitchingOptions::default(),
        )
        .unwrap()
    });
    let kappa = (-2.0 * t).exp();
    for k in 1..=4 {
        let (f, m) = uncoupled_after_attempts(&runs, k);
        let se = (kappa.powi(k as i32) * (1.0 - kappa.powi(k as i32)) / m as f64).sqrt();
        assert!(f <= kappa.powi(k as i32) + 3.0 * se, "k = {k}: {f}");
    }
}

/// `P(two independent copies from (i, j) have not met by t)` from the
/// product chain with the diagonal made absorbing.
fn exact_uncoupled(chain: &FiniteChain, i: usize, j: usize, t: f64) -> f64 {
    let n = chain.len();
    let pair = chain.independent_pair().unwrap();
    let off: Vec<usize> = (0..n * n).filter(|s| s / n != s % n).collect();
    let q = pair.generator();
    let sub = DMatrix::from_fn(off.len(), off.len(), |a, b| q[(off[a], off[b])]);
    let k = crate::numerics::linalg::expm(&(sub * t));
    let row = off.iter().position(|&s| s == i * n + j).unwrap();
    k.row(row).sum()
}

#[test]
fn simple_phase_matches_pair_chain_absorption() {
    let chain = random_chain(3, 4, 0.5, 2.0).unwrap();
    let phi = TestFunction::constant(1.0);
    // c below φ: no gluing, only independent motion until meeting
    let times = [0.25, 0.5, 1.0, 1.5];
    let decay = coupling_decay_estimate(
        &chain,
        &phi,
        0.5,
        1.0,
        &[0usize],
        &|_: &mut SimRng| 2usize,
        &times,
        20_000,
        3,
        &SwitchingOptions::default(),
    )
    .unwrap();
    for (k, &t) in times.iter().enumerate() {
        let exact = exact_uncoupled(&chain, 0, 2, t);
        let f = decay.uncoupled[0][k];
        let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!((f - exact).abs() < 4.0 * se, "t = {t}: {f} vs {exact}");
        assert_relative_eq!(decay.values[0][k], 2.0 * f, epsilon = 1e-12);
    }
}

#[test]
fn coupled_start_gives_zero_decay() {
    let chain = random_chain(3, 4, 0.5, 2.0).unwrap();
    let phi = TestFunction::new(|x: &usize| 1.0 + *x as f64);
    let decay = coupling_decay_estimate(
        &chain,
        &phi,
        10.0,
        0.5,
        &[1usize],
        &|_: &mut SimRng| 1usize,
        &[0.5, 1.0],
        200,
        1,
        &SwitchingOptions::default(),
    )
    .unwrap();
    assert!(decay.values[0].iter().all(|&v| v == 0.0));
    assert!(decay.fit.degenerate);
}

#[test]
fn uncoupled_mass_constant_values() {
    assert_relative_eq!(uncoupled_mass_constant(1.0, 1.0, 2.0, 1.0, 0.25).unwrap(), 37.0);
    assert_eq!(uncoupled_mass_constant(1.0, 1.0, 2.0, 1.0, 0.5).unwrap(), f64::INFINITY);
    assert!(uncoupled_mass_constant(1.0, 1.0, 2.0, 1.0, 0.6).is_err());
    assert!(uncoupled_mass_constant(1.0, 1.0, 1.0, 2.0, 0.1).is_err());
    let near = uncoupled_mass_constant(1.0, 1.0, 2.0, 1.0, 0.5 - 1e-9).unwrap();
    assert!(near > 1e9);
}

#[test]
fn uncoupled_mass_bound_on_a_small_chain() {
    // State 2 is heavy but left quickly, so the constant is finite.
    let q = DMatrix::from_row_slice(3, 3, &[-1.05, 1.0, 0.05, 1.0, -1.05, 0.05, 5.0, 5.0, -10.0]);
    let chain = FiniteChain::new(q.clone(), None).unwrap();
    let phi_v = [1.0, 2.0, 4.0];
    let phi = TestFunction::new(move |x: &usize| phi_v[*x]);
    // K = {0}, K′ = {φ ≤ 2}
    let qcc = DMatrix::from_fn(2, 2, |i, j| q[(i + 1, j + 1)]);
    let (alpha, gamma) = (0.9, 0.45);
    let (mut d1, mut d2, mut delta): (f64, f64, f64) = (1.0, 0.0, 0.0);
    for i in 0..=400 {
        let t = i as f64 * 0.05;
        let sub = crate::numerics::linalg::expm(&(&qcc * t));
        for x in 0..2 {
            let e: f64 = (0..2).map(|y| sub[(x, y)] * phi_v[y + 1]).sum();
            d1 = d1.max((alpha * t).exp() * e / phi_v[x + 1]);
        }
        let k = chain.kernel(t).unwrap();
        d2 = d2.max((0..3).map(|j| k[(0, j)] * phi_v[j]).sum());
        delta = delta.max(k[(0, 2)] * 4.0);
    }
    assert!(d1.is_finite());
    assert!(delta < 1.0 - gamma / alpha, "delta = {delta}");
    let d3 = uncoupled_mass_constant(d1, d2, alpha, gamma, delta).unwrap();
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
    let pts = check_uncoupled_mass_bound(&chain, &phi, 2.0, &2, &2, d3, gamma, &times, 4000, 5).unwrap();
    assert!(pts.iter().all(|p| p.holds));
}

#[test]
fn csv_export() {
    let chain = two_state(1.0, 1.0).unwrap();
    let phi = TestFunction::constant(1.0);
    let run = switching_coupling_from(&chain, &phi, 1.0, 0.5, &0, &1, 3.0, 4, &SwitchingOptions::default()).unwrap();
    let mut buf = Vec::new();
    run.write_csv(&chain, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time,state1,state2,phase,coupled\n"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn coverage_level() {
    let phi = TestFunction::new(|x: &f64| *x);
    let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
    assert_eq!(level_for_coverage(&phi, &xs, 0.9).unwrap(), 90.0);
}
