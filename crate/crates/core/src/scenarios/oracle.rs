use std::fs;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coupling::{
    check_uncoupled_mass_bound, coupling_decay_estimate, gluing_coupling, uncoupled_mass_constant, GluingOptions,
    SwitchingOptions,
};
use crate::error::{Error, Result};
use crate::estimators::{
    build_phi_from_hitting, doeblin_coefficient, exp_moment, hitting_time_samples, phi_variation_distance,
    phi_variation_exact, Bins,
};
use crate::models::{random_chain, random_reversible_chain, FiniteChain};
use crate::numerics::linalg::{eigenvalues, expm};
use crate::process::{advance, Region, SemigroupMode, TestFunction};
use crate::rng::{derive_seed, par_map, path_rng, SimRng};
use crate::spectral::{
    check_hitting_moment_bound, finite_chain_exp_moment, finite_chain_spectrum, growth_bound_fit, poincare_constant,
    GrowthOptions, WeightedNormContext,
};

use super::{claim, within, Claim, ScenarioConfig, ScenarioReport};

/// Chain sizes cycle through `3..=8`.
fn oracle_chain(seed: u64, i: usize) -> Result<FiniteChain> {
    random_chain(3 + i % 6, derive_seed(derive_seed(seed, 30), i as u64), 0.5, 2.0)
}

/// `−max Re` of the spectrum of `Q` restricted to the complement of `k`.
fn exit_abscissa(chain: &FiniteChain, k: &[usize]) -> f64 {
    let q = chain.generator();
    let comp: Vec<usize> = (0..chain.len()).filter(|s| !k.contains(s)).collect();
    let qcc = DMatrix::from_fn(comp.len(), comp.len(), |i, j| q[(comp[i], comp[j])]);
    eigenvalues(&qcc).first().map(|z| -z.re).unwrap_or(f64::INFINITY)
}

fn pi_norm(pi: &DVector<f64>, f: &DVector<f64>) -> f64 {
    pi.iter().zip(f.iter()).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

/// Random vectors with `π`-mean zero.
fn mean_zero_vectors(pi: &DVector<f64>, count: usize, rng: &mut SimRng) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| {
            let f = DVector::from_fn(pi.len(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let m = pi.dot(&f);
            f.map(|v| v - m)
        })
        .collect()
}

/// Largest `‖e^{tQ}f‖ − e^{−γt}‖f‖` over the vectors and times.
fn contraction_excess(chain: &FiniteChain, gamma: f64, vectors: &[DVector<f64>]) -> Result<f64> {
    let pi = chain.pi();
    let mut worst = f64::NEG_INFINITY;
    for t in [0.1, 1.0, 10.0] {
        let k = chain.kernel(t)?;
        for f in vectors {
            worst = worst.max(pi_norm(pi, &(&k * f)) - (-gamma * t).exp() * pi_norm(pi, f));
        }
    }
    Ok(worst)
}

struct Tally {
    checks: usize,
    failures: usize,
    worst_z: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            failures: 0,
            worst_z: 0.0,
        }
    }

    fn add(&mut self, est: f64, exact: f64, se: f64, sigma: f64) {
        self.checks += 1;
        if !within(est, exact, se, sigma) {
            self.failures += 1;
        }
        let z = if se > 0.0 { (est - exact).abs() / se } else { 0.0 };
        self.worst_z = self.worst_z.max(z);
    }

    fn claim(&self, sigma: f64) -> Claim {
        claim()
            .measure("checks", self.checks as f64)
            .measure("failures", self.failures as f64)
            .measure("max_abs_z", self.worst_z)
            .tolerance("sigma", sigma)
            .pass_if(self.checks > 0 && self.failures == 0)
    }
}

pub fn scenario_oracle(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(cfg);
    let th = &cfg.thresholds;
    let b = &cfg.budgets;
    let seed = cfg.seed;
    let chains: Vec<FiniteChain> = (0..b.oracle_chains)
        .map(|i| oracle_chain(seed, i))
        .collect::<Result<_>>()?;

    report.run(
        "phi_variation_oracle",
        "sampled weighted distances between transition laws match exact kernels",
        || {
            let mut tally = Tally::new();
            for (i, chain) in chains.iter().enumerate() {
                let n = chain.len();
                let phi_v: Vec<f64> = (0..n).map(|x| 1.0 + x as f64).collect();
                let pv = phi_v.clone();
                let phi = TestFunction::new(move |x: &usize| pv[*x]);
                for (j, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
                    let k = chain.kernel(t)?;
                    let row = |x: usize| (0..n).map(|y| k[(x, y)]).collect::<Vec<f64>>();
                    let exact = phi_variation_exact(&row(0), &row(n - 1), &phi_v)?;
                    let stream = derive_seed(derive_seed(seed, 31), (3 * i + j) as u64);
                    let sample = |x: usize, off: u64| -> Result<Vec<usize>> {
                        par_map(b.n_paths, |p| {
                            advance(chain, &x, t, &mut path_rng(stream, off + p as u64))
                        })
                        .into_iter()
                        .collect()
                    };
                    let a = sample(0, 0)?;
                    let c = sample(n - 1, b.n_paths as u64)?;
                    let est = phi_variation_distance(&a, &c, &phi, &Bins::States(n))?;
                    tally.add(est.value, exact, est.std_error, th.sigma);
                }
            }
            Ok(tally.claim(th.sigma))
        },
    );

    report.run(
        "doeblin_oracle",
        "sampled Doeblin coefficient over all states matches the exact kernel",
        || {
            let mut tally = Tally::new();
            for (i, chain) in chains.iter().enumerate() {
                let n = chain.len();
                let states: Vec<usize> = (0..n).collect();
                let exact = doeblin_coefficient(chain, &states, 1.0, 4, &Bins::States(n), 0, SemigroupMode::Exact)?;
                let mc = doeblin_coefficient(
                    chain,
                    &states,
                    1.0,
                    b.n_paths,
                    &Bins::States(n),
                    derive_seed(derive_seed(seed, 36), i as u64),
                    SemigroupMode::MonteCarlo,
                )?;
                tally.add(mc.kappa, exact.kappa, mc.std_error, th.sigma);
            }
            Ok(tally.claim(th.sigma))
        },
    );

    report.run(
        "hitting_moment_oracle",
        "sampled exponential hitting moments match the linear solve",
        || {
            let mut tally = Tally::new();
            for (i, chain) in chains.iter().enumerate() {
                let n = chain.len();
                let triples: [(usize, Vec<usize>); 3] = [(n - 1, vec![0]), (0, vec![n - 1]), (n - 1, vec![0, 1])];
                for (j, (x, k)) in triples.iter().enumerate() {
                    let alpha = 0.3 * exit_abscissa(chain, k);
                    let exact = finite_chain_exp_moment(chain, k, alpha)?[*x];
                    let h = hitting_time_samples(
                        chain,
                        x,
                        &Region::states(k.iter().copied()),
                        b.n_paths,
                        b.hitting_horizon,
                        derive_seed(derive_seed(seed, 37), (3 * i + j) as u64),
                    )?;
                    let e = exp_moment(&h, alpha);
                    tally.add(e.value, exact, e.std_error, th.sigma);
                }
            }
            Ok(tally.claim(th.sigma))
        },
    );

    report.run(
        "gluing_frequency",
        "gluing succeeds with the maximal-coupling probability",
        || {
            let chain = random_chain(5, derive_seed(seed, 42), 0.5, 2.0)?;
            let t = 0.25;
            let k = chain.kernel(t)?;
            let exact: f64 = (0..5).map(|y| k[(0, y)].min(k[(4, y)])).sum();
            let stream = derive_seed(seed, 43);
            let opts = GluingOptions::default();
            let hits = par_map(b.gluing_runs, |i| {
                gluing_coupling(&chain, &0, &4, t, derive_seed(stream, i as u64), &opts).map(|r| r.endpoints_equal)
            })
            .into_iter()
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&h| h)
            .count();
            let freq = hits as f64 / b.gluing_runs as f64;
            let se = (exact * (1.0 - exact) / b.gluing_runs as f64).sqrt();
            Ok(claim()
                .measure("frequency", freq)
                .measure("exact", exact)
                .measure("binomial_se", se)
                .tolerance("sigma", th.sigma)
                .pass_if(within(freq, exact, se, th.sigma)))
        },
    );

    let reversible: Vec<FiniteChain> = (0..b.reversible_chains)
        .map(|i| random_reversible_chain(3 + i % 8, derive_seed(derive_seed(seed, 50), i as u64), 0.5, 2.0))
        .collect::<Result<_>>()?;

    report.run(
        "gap_sandwich",
        "exact spectral gap is at least half the coupling decay rate",
        || {
            let mut fails = 0;
            let mut worst_margin = f64::INFINITY;
            let mut degenerate = 0;
            for (i, chain) in reversible.iter().enumerate() {
                let gap = finite_chain_spectrum(chain)?.spectral_gap;
                let times: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64 / gap).collect();
                let states: Vec<usize> = (0..chain.len()).collect();
                let sampler = |r: &mut SimRng| chain.sample_pi(r);
                let d = coupling_decay_estimate(
                    chain,
                    &TestFunction::constant(1.0),
                    1.0,
                    0.5,
                    &states,
                    &sampler,
                    &times,
                    b.coupling_paths,
                    derive_seed(derive_seed(seed, 52), i as u64),
                    &SwitchingOptions::default(),
                )?;
                if d.fit.degenerate {
                    degenerate += 1;
                    continue;
                }
                let margin = gap - (d.fit.beta_hat / 2.0 - th.sigma * d.fit.beta_se);
                worst_margin = worst_margin.min(margin);
                if margin < 0.0 {
                    fails += 1;
                }
            }
            Ok(claim()
                .measure("chains", reversible.len() as f64)
                .measure("violations", fails as f64)
                .measure("degenerate_fits", degenerate as f64)
                .measure("min_margin", worst_margin)
                .tolerance("sigma", th.sigma)
                .pass_if(fails == 0 && degenerate == 0))
        },
    );

    report.run(
        "l2_contraction",
        "semigroup contracts mean-zero vectors at the symmetrized gap",
        || {
            let mut worst = f64::NEG_INFINITY;
            for (i, chain) in reversible.iter().enumerate() {
                let gamma = poincare_constant(chain)?.gamma;
                let mut rng = path_rng(derive_seed(derive_seed(seed, 54), i as u64), 0);
                let vectors = mean_zero_vectors(chain.pi(), 50, &mut rng);
                worst = worst.max(contraction_excess(chain, gamma, &vectors)?);
            }
            Ok(claim()
                .measure("max_excess", worst)
                .tolerance("abs", 1e-10)
                .pass_if(worst <= 1e-10))
        },
    );

    report.run(
        "growth_gap_ordering",
        "late-time norm decay does not outrun the spectral gap",
        || {
            let mut worst: f64 = 0.0;
            for (i, chain) in reversible.iter().enumerate() {
                let gap = finite_chain_spectrum(chain)?.spectral_gap;
                let ctx = WeightedNormContext::for_chain(chain, vec![1.0; chain.len()], 2.0)?;
                let mut rng = path_rng(derive_seed(derive_seed(seed, 56), i as u64), 0);
                let fns: Vec<TestFunction<usize>> = mean_zero_vectors(chain.pi(), 20, &mut rng)
                    .into_iter()
                    .map(|v| TestFunction::new(move |x: &usize| v[*x]))
                    .collect();
                let times: Vec<f64> = (4..=10).map(|k| k as f64 / gap).collect();
                let g = growth_bound_fit(chain, &fns, &ctx, &times, 1, 0, GrowthOptions::default())?;
                worst = worst.max(g.fit.beta_hat / gap - 1.0);
            }
            Ok(claim()
                .measure("max_relative_excess", worst)
                .tolerance("relative", th.relative)
                .pass_if(worst <= th.relative))
        },
    );

    report.run(
        "hitting_moment_bound",
        "stationary hitting moments are finite below the spectral threshold",
        || {
            let mut violations = 0;
            let mut subsets = 0;
            let mut min_margin = f64::INFINITY;
            for i in 0..b.hitting_bound_chains {
                let chain = random_chain(6, derive_seed(derive_seed(seed, 60), i as u64), 0.5, 2.0)?;
                let rep = check_hitting_moment_bound(&chain)?;
                violations += rep.violations.len();
                subsets += rep.subsets;
                min_margin = min_margin.min(rep.min_margin);
            }
            Ok(claim()
                .measure("chains", b.hitting_bound_chains as f64)
                .measure("subsets", subsets as f64)
                .measure("violations", violations as f64)
                .measure("min_margin", min_margin)
                .pass_if(violations == 0 && min_margin > 0.0))
        },
    );

    report.run(
        "uncoupled_mass_bound",
        "independent copies carry bounded weighted mass before joint entry",
        || {
            let chain = FiniteChain::new(
                DMatrix::from_row_slice(3, 3, &[-1.05, 1.0, 0.05, 1.0, -1.05, 0.05, 5.0, 5.0, -10.0]),
                None,
            )?;
            let phi_v = [1.0, 2.0, 4.0];
            let phi = TestFunction::new(move |x: &usize| phi_v[*x]);
            // K = {0}, K′ = {φ ≤ 2} = {0, 1}.
            let q = chain.generator();
            let qcc = DMatrix::from_fn(2, 2, |i, j| q[(i + 1, j + 1)]);
            let alpha = 0.9 * exit_abscissa(&chain, &[0]);
            let gamma = alpha / 2.0;
            let fine: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
            let (mut d1, mut d2, mut delta): (f64, f64, f64) = (1.0, 0.0, 0.0);
            for &t in &fine {
                let sub = expm(&(&qcc * t));
                for x in 0..2 {
                    let e: f64 = (0..2).map(|y| sub[(x, y)] * phi_v[y + 1]).sum();
                    d1 = d1.max((alpha * t).exp() * e / phi_v[x + 1]);
                }
                let k = chain.kernel(t)?;
                d2 = d2.max((0..3).map(|j| k[(0, j)] * phi_v[j]).sum());
                delta = delta.max(k[(0, 2)] * phi_v[2]);
            }
            let c = claim()
                .measure("alpha", alpha)
                .measure("d1", d1)
                .measure("d2", d2)
                .measure("delta", delta);
            if delta >= 1.0 - gamma / alpha {
                return Ok(c.evidence().note("constant undefined for this chain"));
            }
            let d3 = uncoupled_mass_constant(d1, d2, alpha, gamma, delta)?;
            let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
            let pts = check_uncoupled_mass_bound(
                &chain,
                &phi,
                2.0,
                &2,
                &2,
                d3,
                gamma,
                &times,
                b.hitting_paths,
                derive_seed(seed, 64),
            )?;
            let worst = pts.iter().map(|p| p.lhs / p.rhs).fold(0.0, f64::max);
            Ok(c.measure("constant", d3)
                .measure("max_lhs_over_rhs", worst)
                .tolerance("sigma", 3.0)
                .pass_if(pts.iter().all(|p| p.holds)))
        },
    );

    report.run(
        "phi_table_oracle",
        "weight tabulated from hitting times matches the linear solve",
        || {
            let chain = &chains[0];
            let n = chain.len();
            let alpha = 0.3 * exit_abscissa(chain, &[0]);
            let exact = finite_chain_exp_moment(chain, &[0], alpha)?;
            let grid: Vec<usize> = (0..n).collect();
            let table = build_phi_from_hitting(
                chain,
                &Region::states([0]),
                alpha,
                &grid,
                b.hitting_paths,
                b.hitting_horizon,
                derive_seed(seed, 66),
            )?;
            let mut tally = Tally::new();
            for (v, (se, e)) in table.values.iter().zip(table.std_errors.iter().zip(&exact)) {
                tally.add(*v, *e, *se, th.sigma);
            }
            Ok(tally.claim(th.sigma))
        },
    );

    Ok(report)
}

/// Loads the generator named by the chain section of the config.
pub fn load_chain(cfg: &ScenarioConfig) -> Result<FiniteChain> {
    let c = &cfg.model.chain;
    if let Some(rows) = &c.generator {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config(
                "model.chain.generator must be a nonempty square matrix".into(),
            ));
        }
        return FiniteChain::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), None);
    }
    if let Some(path) = &c.file {
        let path = match &cfg.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.clone(),
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        return FiniteChain::from_text(&text);
    }
    Err(Error::Config("no chain configured".into()))
}

pub fn scenario_custom(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(cfg);
    let chain = load_chain(cfg)?;
    let spectrum = finite_chain_spectrum(&chain)?;

    report.run("spectrum", "spectrum of the generator on mean-zero functions", || {
        let mut c = claim()
            .measure("states", chain.len() as f64)
            .measure("spectral_gap", spectrum.spectral_gap)
            .measure("poincare_gap", spectrum.poincare_gap)
            .measure("poincare_constant", spectrum.poincare_constant);
        if spectrum.eigencondition_warning {
            c = c.note("nearly repeated eigenvalues");
        }
        Ok(c.evidence())
    });

    report.run(
        "symmetrized_gap_ordering",
        "symmetrized gap never exceeds the spectral gap",
        || {
            let scale = spectrum.spectral_gap.abs().max(1.0);
            Ok(claim()
                .measure("spectral_gap", spectrum.spectral_gap)
                .measure("poincare_gap", spectrum.poincare_gap)
                .pass_if(chain.len() == 1 || spectrum.poincare_gap <= spectrum.spectral_gap + 1e-9 * scale))
        },
    );

    report.run(
        "l2_contraction",
        "semigroup contracts mean-zero vectors at the symmetrized gap",
        || {
            if chain.len() == 1 {
                return Ok(claim().evidence().note("single state"));
            }
            let mut rng = path_rng(derive_seed(cfg.seed, 700), 0);
            let vectors = mean_zero_vectors(chain.pi(), 50, &mut rng);
            let worst = contraction_excess(&chain, spectrum.poincare_gap, &vectors)?;
            Ok(claim()
                .measure("max_excess", worst)
                .tolerance("abs", 1e-10)
                .pass_if(worst <= 1e-10))
        },
    );

    report.run(
        "hitting_moment_bound",
        "stationary hitting moments are finite below the spectral threshold",
        || {
            let rep = check_hitting_moment_bound(&chain)?;
            Ok(claim()
                .measure("subsets", rep.subsets as f64)
                .measure("violations", rep.violations.len() as f64)
                .measure("min_margin", rep.min_margin)
                .measure("max_moment", rep.max_moment)
                .pass_if(rep.violations.is_empty()))
        },
    );

    Ok(report)
}
