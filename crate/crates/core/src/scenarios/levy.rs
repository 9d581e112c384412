use crate::error::Result;
use crate::models::{
    dual_drift_bound, levy_m, levy_script_m, levy_xi_of_x, lyapunov_phi, ou_invariant_residual, stationary_cf,
    stationary_density, GridDensity, LevyOu,
};
use crate::process::{advance, apply_extended_generator, TestFunction};
use crate::rng::{derive_seed, par_map, path_rng};
use crate::spectral::{growth_bound_fit, GrowthOptions, WeightedNormContext};

use super::pdmp::growth_series;
use super::{claim, ScenarioConfig, ScenarioReport};

pub fn scenario_levy_ou(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(cfg);
    let p = cfg.model.levy_ou.clone();
    let model = LevyOu::new(p.clone())?;
    let th = &cfg.thresholds;
    let b = &cfg.budgets;
    let seed = cfg.seed;
    let mut series = Vec::new();
    let sd = (levy_m(&p, 0.0, 2)? / (2.0 * p.a)).sqrt();
    let half_width = (8.0 * sd).max(4.0);

    report.run(
        "xi_round_trip",
        "the dual scale map inverts its integrated exponent",
        || {
            let mut worst: f64 = 0.0;
            for x in [-10.0, -3.0, -1.0, -0.1, 0.1, 1.0, 3.0, 10.0] {
                let xi = levy_xi_of_x(&p, x)?;
                worst = worst.max((levy_script_m(&p, xi, 1)? - x).abs() / (1.0 + x.abs()));
            }
            Ok(claim()
                .measure("max_relative_error", worst)
                .tolerance("relative", 1e-8)
                .pass_if(worst <= 1e-8))
        },
    );

    report.run(
        "characteristic_function",
        "simulated stationary law matches the closed-form characteristic function",
        || {
            let burn = (1e8f64).ln() / p.a;
            let stream = derive_seed(seed, 100);
            let xs: Vec<f64> = par_map(b.stationary_samples, |i| {
                advance(&model, &0.0, burn, &mut path_rng(stream, i as u64))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let n = xs.len() as f64;
            let mut sup: f64 = 0.0;
            let mut sup_se: f64 = 0.0;
            for k in -20..=20 {
                let xi = 0.5 * k as f64;
                let (mut c, mut s, mut c2, mut s2) = (0.0, 0.0, 0.0, 0.0);
                for x in &xs {
                    let (sn, cs) = (xi * x).sin_cos();
                    c += cs;
                    s += sn;
                    c2 += cs * cs;
                    s2 += sn * sn;
                }
                let (c, s) = (c / n, s / n);
                let var = (c2 / n - c * c) + (s2 / n - s * s);
                let z = stationary_cf(&p, xi)?;
                let d = ((c - z.re).powi(2) + (s - z.im).powi(2)).sqrt();
                if d > sup {
                    sup = d;
                    sup_se = (var / n).sqrt();
                }
            }
            Ok(claim()
                .measure("sup_distance", sup)
                .measure("std_error_at_sup", sup_se)
                .measure("samples", n)
                .tolerance("cf_distance", th.cf_distance)
                .pass_if(sup <= th.cf_distance))
        },
    );

    report.run(
        "stationary_equation",
        "inverted density solves the stationary equation",
        || {
            let h = 0.01;
            let n = (2.0 * half_width / h).round() as usize + 1;
            let rho = stationary_density(&p, -half_width, h, n, 0.01, 200.0)?;
            let grid: Vec<f64> = (0..=60)
                .map(|i| -0.75 * half_width + 0.025 * half_width * i as f64)
                .collect();
            let exact = ou_invariant_residual(&p, &rho, &grid)?;
            let flat = GridDensity::from_fn(-half_width, h, n, |x| {
                if x.abs() < half_width / 2.0 {
                    1.0 / half_width
                } else {
                    0.0
                }
            });
            let wrong = ou_invariant_residual(&p, &flat, &grid)?;
            Ok(claim()
                .measure("residual_sup", exact.sup_norm)
                .measure("residual_l1", exact.l1_norm)
                .measure("wrong_density_residual_sup", wrong.sup_norm)
                .measure("total_mass", rho.total_mass())
                .tolerance("residual", th.residual)
                .pass_if(exact.sup_norm <= th.residual && wrong.sup_norm > 100.0 * exact.sup_norm))
        },
    );

    report.run(
        "lyapunov_drift",
        "the piecewise weight has drift at most minus half itself outside a compact",
        || {
            let inner = 1.0;
            let support = p.measure.support_bound();
            let r = inner + support;
            let shift = p.measure.signed_moment(0.0, 1.0);
            let threshold = (r + 1.0 + support).max(2.0 * shift.abs() / p.a);
            let phi = lyapunov_phi(&p, inner);
            let mut worst = f64::NEG_INFINITY;
            for i in 0..50 {
                let z = threshold + 20.0 * i as f64 / 49.0;
                let x = if i % 2 == 0 { z } else { -z };
                let g = apply_extended_generator(&model, &phi, &x)?;
                worst = worst.max(g + 0.5 * p.a * phi.eval(&x));
            }
            Ok(claim()
                .measure("threshold", threshold)
                .measure("max_drift_excess", worst)
                .tolerance("abs", 1e-9)
                .pass_if(worst <= 1e-9))
        },
    );

    report.run(
        "dual_drift",
        "dual drift bound turns negative far from the origin",
        || {
            let delta = 0.1;
            let scan: Vec<f64> = (1..=40).map(|i| 0.5 * i as f64).collect();
            let mut negative = Vec::with_capacity(scan.len());
            for &x in &scan {
                negative.push(dual_drift_bound(&p, x, delta)? < 0.0 && dual_drift_bound(&p, -x, delta)? < 0.0);
            }
            let first = (0..scan.len()).find(|&i| negative[i..].iter().all(|&v| v));
            let c = claim()
                .measure("delta", delta)
                .measure("scan_max", scan[scan.len() - 1]);
            Ok(match first {
                Some(i) => c.measure("threshold", scan[i]).pass_if(true),
                None => c.note("bound not negative at the end of the scan").pass_if(false),
            })
        },
    );

    report.run(
        "growth_bound",
        "semigroup norm on mean-zero functions decays exponentially",
        || {
            let nodes: Vec<f64> = (0..41).map(|i| -half_width + half_width * i as f64 / 20.0).collect();
            let rho = stationary_density(
                &p,
                -half_width - 1.0,
                0.01,
                (2.0 * (half_width + 1.0) / 0.01) as usize + 1,
                0.01,
                200.0,
            )?;
            let w: Vec<f64> = nodes.iter().map(|x| rho.eval(*x).max(0.0)).collect();
            let total: f64 = w.iter().sum();
            let pi: Vec<f64> = w.iter().map(|v| v / total).collect();
            let ctx = WeightedNormContext::new(nodes, pi, vec![1.0; 41], 2.0)?;
            let fns = vec![
                TestFunction::new(|x: &f64| *x),
                TestFunction::new(|x: &f64| x.sin()),
                TestFunction::new(|x: &f64| x.powi(3)),
            ];
            let times: Vec<f64> = (1..=6).map(|i| 0.5 * i as f64).collect();
            let g = growth_bound_fit(
                &model,
                &fns,
                &ctx,
                &times,
                b.semigroup_paths,
                derive_seed(seed, 110),
                GrowthOptions::default(),
            )?;
            series.push(growth_series("levy_ou_growth_bound", &g.points));
            Ok(claim()
                .measure("gamma_hat", g.fit.beta_hat)
                .measure("gamma_se", g.fit.beta_se)
                .measure("c_hat", g.fit.c_hat)
                .measure("r_squared", g.fit.r_squared)
                .measure("mean_reversion", p.a)
                .tolerance("sigma", th.sigma)
                .tolerance("r_squared", th.r_squared)
                .pass_if(
                    !g.fit.degenerate
                        && g.fit.beta_hat - th.sigma * g.fit.beta_se > 0.0
                        && g.fit.r_squared >= th.r_squared,
                ))
        },
    );

    report.timeseries = series;
    Ok(report)
}
