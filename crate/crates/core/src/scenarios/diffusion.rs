use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erf;

use crate::coupling::{coupling_decay_estimate, level_for_coverage, switching_coupling_from, SwitchingOptions};
use crate::error::{Error, Result};
use crate::estimators::{exp_moment, hitting_times_from_law, Verdict};
use crate::models::ornstein_uhlenbeck;
use crate::numerics::quadrature::gauss_hermite_normal;
use crate::process::{Region, SemigroupMode, TestFunction};
use crate::rng::{derive_seed, path_rng, SimRng};
use crate::spectral::{growth_bound_fit, GrowthOptions, WeightedNormContext};

use super::pdmp::growth_series;
use super::{cap_rows, claim, ScenarioConfig, ScenarioReport, TimeSeries};

pub fn scenario_diffusion(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(cfg);
    let dc = &cfg.model.diffusion;
    let th = &cfg.thresholds;
    let b = &cfg.budgets;
    let seed = cfg.seed;
    let model = ornstein_uhlenbeck(dc.theta, dc.b)?;
    let sd = (dc.b / (2.0 * dc.theta)).sqrt();
    let sampler = move |r: &mut SimRng| -> f64 {
        let z: f64 = StandardNormal.sample(r);
        sd * z
    };
    let phi = TestFunction::new(|x: &f64| 1.0 + x * x).with_derivative(|x: &f64| 2.0 * x);
    let mut series = Vec::new();
    let mut beta: Option<(f64, f64)> = None;
    let mut gamma: Option<(f64, f64)> = None;

    let pi_samples: Vec<f64> = {
        let mut rng = path_rng(derive_seed(seed, 200), 0);
        (0..b.stationary_samples.min(100_000))
            .map(|_| sampler(&mut rng))
            .collect()
    };
    let c = level_for_coverage(&phi, &pi_samples, 0.9)?;
    let starts = [0.0, 1.5 * sd, -3.0 * sd];

    report.run(
        "coupling_decay",
        "switching coupling decays exponentially in the weighted distance",
        || {
            let times: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64 / dc.theta).collect();
            let d = coupling_decay_estimate(
                &model,
                &phi,
                c,
                0.5 / dc.theta,
                &starts,
                &sampler,
                &times,
                b.coupling_paths,
                derive_seed(seed, 210),
                &SwitchingOptions::default(),
            )?;
            let points = (0..times.len())
                .map(|k| {
                    (
                        times[k],
                        d.values[d.worst_start[k]][k],
                        d.std_errors[d.worst_start[k]][k],
                    )
                })
                .collect();
            series.push(TimeSeries {
                name: "diffusion_coupling_decay".into(),
                points,
            });
            let ok =
                !d.fit.degenerate && d.fit.beta_hat - th.sigma * d.fit.beta_se > 0.0 && d.fit.r_squared >= th.r_squared;
            if ok {
                beta = Some((d.fit.beta_hat, d.fit.beta_se));
            }
            Ok(claim()
                .measure("beta_hat", d.fit.beta_hat)
                .measure("beta_se", d.fit.beta_se)
                .measure("c_hat", d.fit.c_hat)
                .measure("r_squared", d.fit.r_squared)
                .measure("level_c", c)
                .measure("mean_attempts", d.mean_attempts)
                .measure("grid_error", d.grid_error)
                .tolerance("sigma", th.sigma)
                .tolerance("r_squared", th.r_squared)
                .pass_if(ok))
        },
    );

    if cfg.outputs.trajectories {
        let run = switching_coupling_from(
            &model,
            &phi,
            c,
            0.5 / dc.theta,
            &starts[2],
            &0.0,
            4.0 / dc.theta,
            derive_seed(seed, 211),
            &SwitchingOptions::default(),
        )?;
        let mut buf = Vec::new();
        run.write_csv(&model, &mut buf)?;
        let text = String::from_utf8_lossy(&buf).into_owned();
        report.trajectories.push((
            "diffusion_coupling".into(),
            cap_rows(text, cfg.outputs.max_trajectory_rows),
        ));
    }

    report.run(
        "growth_bound",
        "semigroup norm on mean-zero functions decays exponentially",
        || {
            let (z, w) = gauss_hermite_normal(20);
            let nodes: Vec<f64> = z.iter().map(|v| sd * v).collect();
            let ctx = WeightedNormContext::new(nodes, w, vec![1.0; 20], 2.0)?;
            let fns = vec![
                TestFunction::new(move |x: &f64| x / sd),
                TestFunction::new(move |x: &f64| (x / sd).powi(2) - 1.0),
                TestFunction::new(move |x: &f64| (x / sd).powi(3) - 3.0 * x / sd),
            ];
            let times: Vec<f64> = (1..=8).map(|i| 0.25 * i as f64 / dc.theta).collect();
            // Gaussian transition laws are integrated exactly.
            let opts = GrowthOptions {
                weighted: false,
                mode: SemigroupMode::Auto,
            };
            let g = growth_bound_fit(
                &model,
                &fns,
                &ctx,
                &times,
                b.semigroup_paths,
                derive_seed(seed, 220),
                opts,
            )?;
            series.push(growth_series("diffusion_growth_bound", &g.points));
            let ok =
                !g.fit.degenerate && g.fit.beta_hat - th.sigma * g.fit.beta_se > 0.0 && g.fit.r_squared >= th.r_squared;
            if ok {
                gamma = Some((g.fit.beta_hat, g.fit.beta_se));
            }
            Ok(claim()
                .measure("gamma_hat", g.fit.beta_hat)
                .measure("gamma_se", g.fit.beta_se)
                .measure("c_hat", g.fit.c_hat)
                .measure("r_squared", g.fit.r_squared)
                .tolerance("sigma", th.sigma)
                .tolerance("r_squared", th.r_squared)
                .pass_if(ok))
        },
    );

    report.run(
        "poincare_witness",
        "fitted norm decay is at least half the coupling rate",
        || {
            let (Some((bh, bs)), Some((gh, gs))) = (beta, gamma) else {
                return Ok(claim().evidence().note("needs both decay fits"));
            };
            let se = (gs * gs + 0.25 * bs * bs).sqrt();
            Ok(claim()
                .measure("gamma_hat", gh)
                .measure("half_beta_hat", bh / 2.0)
                .measure("combined_se", se)
                .tolerance("sigma", th.sigma)
                .pass_if(gh >= bh / 2.0 - th.sigma * se))
        },
    );

    report.run("gap_accuracy", "fitted norm decay recovers the spectral gap", || {
        let Some((gh, gs)) = gamma else {
            return Err(Error::Config("growth-bound fit unavailable".into()));
        };
        let rel = (gh - dc.theta).abs() / dc.theta;
        Ok(claim()
            .measure("gamma_hat", gh)
            .measure("gamma_se", gs)
            .measure("exact_gap", dc.theta)
            .measure("relative_error", rel)
            .tolerance("gap_relative", th.gap_relative)
            .pass_if(rel <= th.gap_relative))
    });

    let region = Region::interval(-dc.region_radius, dc.region_radius);
    let mass = erf(dc.region_radius / (sd * std::f64::consts::SQRT_2));
    let mut tail_rate = None;

    report.run(
        "hitting_moment",
        "stationary exponential hitting moment is finite at the spectral rate",
        || {
            let Some((gh, _)) = gamma else {
                return Err(Error::Config("growth-bound fit unavailable".into()));
            };
            let alpha = 0.9 * gh * mass / 2.0;
            let h = hitting_times_from_law(
                &model,
                &sampler,
                &region,
                b.hitting_paths,
                b.hitting_horizon,
                derive_seed(seed, 230),
            )?;
            let e = exp_moment(&h, alpha);
            tail_rate = e.tail_rate.map(|r| (r, h));
            let c = claim()
                .measure("alpha", alpha)
                .measure("region_mass", mass)
                .measure("moment", e.value)
                .measure("std_error", e.std_error)
                .measure("censored", e.censored as f64)
                .measure("max_sample_share", e.max_sample_share);
            Ok(if e.divergence_flag {
                c.verdict(Verdict::Inconclusive).note("divergence flag raised")
            } else {
                c.pass_if(e.value.is_finite())
            })
        },
    );

    report.run(
        "hitting_moment_control",
        "moments above the tail rate are flagged",
        || {
            let Some((rate, h)) = tail_rate.take() else {
                return Ok(claim().evidence().note("tail rate unavailable"));
            };
            let e = exp_moment(&h, 1.5 * rate);
            Ok(claim()
                .measure("tail_rate", rate)
                .measure("alpha", 1.5 * rate)
                .measure("moment", e.value)
                .pass_if(e.divergence_flag))
        },
    );

    report.run("whole_space_moment", "hitting the whole space takes no time", || {
        let h = hitting_times_from_law(&model, &sampler, &Region::Everything, 1000, 1.0, derive_seed(seed, 240))?;
        let e = exp_moment(&h, 1.0);
        Ok(claim()
            .measure("moment", e.value)
            .pass_if(e.value == 1.0 && !e.divergence_flag))
    });

    report.timeseries = series;
    Ok(report)
}
