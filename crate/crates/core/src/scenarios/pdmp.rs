use crate::coupling::{coupling_decay_estimate, level_for_coverage, switching_coupling_from, SwitchingOptions};
use crate::error::Result;
use crate::estimators::{
    check_coupling_preconditions, doeblin_coefficient, Bins, ConditionBudget, ConditionReport, Verdict,
};
use crate::models::pdmp::occupation_histogram;
use crate::models::{Pdmp, PdmpParams, PiecewiseDensity};
use crate::process::{evaluate_semigroup, simulate_trajectory, Region, SemigroupMode, TestFunction};
use crate::rng::{derive_seed, path_rng};
use crate::spectral::{growth_bound_fit, GrowthOptions, NormPoint, WeightedNormContext};

use super::{cap_rows, claim, within, Claim, ScenarioConfig, ScenarioReport, TimeSeries};

const COUPLING_STARTS: [f64; 3] = [0.25, 2.0, 5.0];

fn exp_weight(rate: f64) -> TestFunction<f64> {
    TestFunction::new(move |x: &f64| (rate * x).exp()).with_derivative(move |x: &f64| rate * (rate * x).exp())
}

/// `f = 1` on `(x_k, y_k)`, `−1` on `[y_k, z_k)`, with `y_k = x_k + d_k/4`
/// and `z_k = x_k + d_k/2`.
fn witness(points: &[f64], k: usize) -> (f64, f64, f64) {
    let d = points[k + 1] - points[k];
    (points[k], points[k] + d / 4.0, points[k] + d / 2.0)
}

fn witness_fn(x: f64, y: f64, z: f64) -> TestFunction<f64> {
    TestFunction::new(move |s: &f64| {
        if *s > x && *s < y {
            1.0
        } else if *s >= y && *s < z {
            -1.0
        } else {
            0.0
        }
    })
}

/// `‖T_t f‖₂ / ‖f‖₂` for the witness on cell `k`. Below the first ladder
/// point nothing jumps, so `T_t f(s) = f(s − t)` and the norm ratio is a
/// ratio of invariant masses of translated intervals.
fn witness_ratio(rho: &PiecewiseDensity, (x, _, z): (f64, f64, f64), t: f64) -> Result<f64> {
    Ok((rho.mass(x + t, z + t)? / rho.mass(x, z)?).sqrt())
}

pub(crate) fn conditions_claim(rep: &ConditionReport) -> Claim {
    let mut claim = claim().measure("alpha", rep.alpha).measure("s", rep.s);
    let mut notes = Vec::new();
    let mut any_fail = false;
    let mut all_pass = true;
    for c in &rep.conditions {
        let tag = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        notes.push(format!(
            "{}: {}{}",
            c.name,
            tag,
            if c.evidence_only { " (evidence)" } else { "" }
        ));
        if let Some(w) = &c.witness {
            claim = claim.measure(&format!("{}_estimate", c.name), w.estimate);
            claim = claim.measure(&format!("{}_bound", c.name), w.bound);
        }
        if !c.evidence_only {
            any_fail |= c.verdict == Verdict::Fail;
            all_pass &= c.verdict == Verdict::Pass;
        }
    }
    let verdict = if any_fail {
        Verdict::Fail
    } else if all_pass {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    claim.verdict(verdict).note(notes.join("; "))
}

pub fn scenario_pdmp(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut report = ScenarioReport::new(cfg);
    let pc = &cfg.model.pdmp;
    let th = &cfg.thresholds;
    let b = &cfg.budgets;
    let model = Pdmp::new(&PdmpParams::new(pc.ladder.clone(), pc.p))?;
    let rho = model.invariant_density()?;
    let phi = exp_weight(pc.phi_rate);
    let seed = cfg.seed;
    let mut series = Vec::new();

    report.run(
        "density_ratios",
        "invariant density drops by the factor p at each ladder point",
        || {
            let ratios = rho.breakpoint_ratios();
            let worst = ratios.iter().map(|r| (r - pc.p).abs()).fold(0.0, f64::max);
            Ok(claim()
                .measure("max_abs_error", worst)
                .measure("ratios_checked", ratios.len() as f64)
                .tolerance("abs", 1e-10)
                .pass_if(!ratios.is_empty() && worst <= 1e-10))
        },
    );

    report.run(
        "occupation_ratios",
        "long-run occupation matches the invariant density",
        || {
            let pts = model.points();
            let claim = claim().tolerance("sigma", th.sigma);
            if pts.len() < 5 {
                return Ok(claim.evidence().note("ladder too short"));
            }
            let traj = simulate_trajectory(&model, &0.5, b.occupation_horizon, derive_seed(seed, 10))?;
            let mid = |k: usize| (pts[k] + pts[k + 1]) / 2.0;
            let edges = [mid(0), pts[1], mid(1), pts[2], mid(2), pts[3], mid(3)];
            let hist = occupation_histogram(&model, &traj, &edges, 100.0_f64.min(b.occupation_horizon / 10.0), 50);
            let mut ok = true;
            let mut claim = claim;
            for k in 0..3 {
                let (r, se) = hist.density_ratio(2 * k, 2 * k + 1);
                let exact = rho.level(k + 2) / rho.level(k + 1);
                ok &= within(r, exact, se, th.sigma);
                claim = claim
                    .measure(&format!("ratio_{}", k + 2), r)
                    .measure(&format!("se_{}", k + 2), se)
                    .measure(&format!("exact_{}", k + 2), exact);
            }
            Ok(claim.pass_if(ok))
        },
    );

    let pi_samples: Vec<f64> = {
        let mut rng = path_rng(derive_seed(seed, 20), 0);
        (0..b.stationary_samples.min(100_000))
            .map(|_| rho.sample(&mut rng))
            .collect()
    };
    let c = level_for_coverage(&phi, &pi_samples, 0.9)?;

    report.run(
        "coupling_decay",
        "switching coupling decays exponentially in the weighted distance",
        || {
            let times: Vec<f64> = (5..=14).map(f64::from).collect();
            let sampler = |r: &mut crate::rng::SimRng| rho.sample(r);
            let d = coupling_decay_estimate(
                &model,
                &phi,
                c,
                1.0,
                &COUPLING_STARTS,
                &sampler,
                &times,
                b.coupling_paths,
                derive_seed(seed, 30),
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
                name: "pdmp_coupling_decay".into(),
                points,
            });
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
                .pass_if(
                    !d.fit.degenerate
                        && d.fit.beta_hat - th.sigma * d.fit.beta_se > 0.0
                        && d.fit.r_squared >= th.r_squared,
                ))
        },
    );

    if cfg.outputs.trajectories {
        let run = switching_coupling_from(
            &model,
            &phi,
            c,
            1.0,
            &5.0,
            &0.25,
            14.0,
            derive_seed(seed, 31),
            &SwitchingOptions::default(),
        )?;
        let mut buf = Vec::new();
        run.write_csv(&model, &mut buf)?;
        let text = String::from_utf8_lossy(&buf).into_owned();
        report
            .trajectories
            .push(("pdmp_coupling".into(), cap_rows(text, cfg.outputs.max_trajectory_rows)));
    }

    report.run(
        "doeblin",
        "transition laws from the small set overlap after one time unit",
        || {
            let k_grid = [0.0, 0.25, 0.5];
            let d = doeblin_coefficient(
                &model,
                &k_grid,
                1.0,
                b.n_paths.min(40_000),
                &Bins::uniform(0.0, 4.0, 80),
                derive_seed(seed, 40),
                SemigroupMode::Auto,
            )?;
            Ok(claim()
                .measure("kappa", d.kappa)
                .measure("std_error", d.std_error)
                .tolerance("sigma", th.sigma)
                .note(if d.resolution_warning { "sparse bins" } else { "" })
                .pass_if(d.kappa + th.sigma * d.std_error < 1.0))
        },
    );

    report.run(
        "growth_bound",
        "semigroup norm on mean-zero functions decays exponentially",
        || {
            let width = 0.5;
            let support: Vec<f64> = (0..24).map(|i| width * (i as f64 + 0.5)).collect();
            let masses: Vec<f64> = support
                .iter()
                .map(|m| rho.mass(m - width / 2.0, m + width / 2.0))
                .collect::<Result<_>>()?;
            let total: f64 = masses.iter().sum();
            let pi: Vec<f64> = masses.iter().map(|m| m / total).collect();
            let ctx = WeightedNormContext::new(support, pi, vec![1.0; 24], 2.0)?;
            let tent = |centre: f64| TestFunction::new(move |x: &f64| (1.0 - (x - centre).abs()).max(0.0));
            let fns = vec![TestFunction::new(|x: &f64| x.min(8.0)), tent(2.0), tent(4.0)];
            let times: Vec<f64> = (1..=8).map(|i| i as f64 * 1.5).collect();
            let g = growth_bound_fit(
                &model,
                &fns,
                &ctx,
                &times,
                b.semigroup_paths,
                derive_seed(seed, 50),
                GrowthOptions::default(),
            )?;
            series.push(growth_series("pdmp_growth_bound", &g.points));
            Ok(claim()
                .measure("gamma_hat", g.fit.beta_hat)
                .measure("gamma_se", g.fit.beta_se)
                .measure("c_hat", g.fit.c_hat)
                .measure("r_squared", g.fit.r_squared)
                .tolerance("sigma", th.sigma)
                .pass_if(!g.fit.degenerate && g.fit.beta_hat - th.sigma * g.fit.beta_se > 0.0))
        },
    );

    report.run(
        "no_poincare_witness",
        "mean-zero steps below a ladder gap keep their norm for half the gap",
        || {
            let pts = model.points();
            let mut worst: f64 = 0.0;
            let mut pointwise: f64 = 0.0;
            let cells = 5.min(pts.len().saturating_sub(1));
            for k in 0..cells {
                let w = witness(pts, k);
                let d = pts[k + 1] - pts[k];
                let f = witness_fn(w.0, w.1, w.2);
                for t in [d / 8.0, d / 4.0, d / 2.0] {
                    worst = worst.max((witness_ratio(&rho, w, t)? - 1.0).abs());
                    for s in [w.0 + t + d / 8.0, w.1 + t + d / 8.0] {
                        let e = evaluate_semigroup(
                            &model,
                            &f,
                            &s,
                            t,
                            4,
                            derive_seed(seed, 60 + k as u64),
                            SemigroupMode::Auto,
                        )?;
                        pointwise = pointwise.max((e.value - f.eval(&(s - t))).abs());
                    }
                }
            }
            Ok(claim()
                .measure("max_norm_ratio_error", worst)
                .measure("max_pointwise_error", pointwise)
                .measure("cells", cells as f64)
                .tolerance("abs", 1e-12)
                .pass_if(cells > 0 && worst <= 1e-12 && pointwise <= 1e-12))
        },
    );

    report.run(
        "unbounded_gaps",
        "with growing gaps the norm stays at one for ever longer times",
        || {
            let contrast = Pdmp::new(&PdmpParams::new(pc.contrast_ladder.clone(), pc.p))?;
            let crho = contrast.invariant_density()?;
            let pts = contrast.points();
            let mut claim = claim();
            let mut longest: f64 = 0.0;
            for k in 0..5.min(pts.len().saturating_sub(1)) {
                let w = witness(pts, k);
                let t = (pts[k + 1] - pts[k]) / 2.0;
                let r = witness_ratio(&crho, w, t)?;
                claim = claim.measure(&format!("ratio_at_half_gap_{}", k + 1), r);
                if (r - 1.0).abs() <= 1e-12 {
                    longest = longest.max(t);
                }
            }
            Ok(claim.measure("longest_unit_norm_time", longest).evidence())
        },
    );

    report.run(
        "dual_weight_bound",
        "dual exit moment stays below its geometric series bound",
        || {
            let alpha = pc.phi_rate;
            let pts = model.points();
            let sup_gap = pts.windows(2).map(|w| w[1] - w[0]).fold(pts[0] - 1.0, f64::max);
            let r = pc.p * (alpha * sup_gap).exp();
            let claim = claim().measure("alpha", alpha).measure("sup_gap", sup_gap);
            if r >= 1.0 {
                return Ok(claim.evidence().note("series bound diverges for this ladder"));
            }
            let bound = (1.0 - pc.p) * (alpha * sup_gap).exp() / (1.0 - r);
            let top = pts[pts.len().min(30) - 1];
            let sup = (0..=400)
                .map(|i| 1.0 + (top - 1.0) * i as f64 / 400.0)
                .map(|x| model.dual_exit_moment(x, alpha))
                .fold(0.0, f64::max);
            // With unbounded gaps the series itself diverges; report partial sums.
            let cp = pc.contrast_ladder.points(pc.p);
            let mut claim = claim.measure("sup_dual_weight", sup).measure("series_bound", bound);
            let mut partial = 0.0;
            for (k, x) in cp.iter().enumerate().take(40) {
                partial += (1.0 - pc.p) * pc.p.powi(k as i32) * (alpha * (x - 1.0)).exp();
                if (k + 1) % 10 == 0 {
                    claim = claim.measure(&format!("contrast_partial_sum_{}", k + 1), partial);
                }
            }
            Ok(claim.tolerance("relative", 1e-12).pass_if(sup <= bound * (1.0 + 1e-12)))
        },
    );

    report.run(
        "coupling_preconditions",
        "drift, integrability and hitting-moment hypotheses hold on a grid",
        || {
            let budget = ConditionBudget {
                x_grid: vec![0.25, 0.75, 2.0, 5.0, 10.0],
                k_grid: vec![0.0, 0.25, 0.5],
                t_grid: vec![0.5, 1.0, 2.0, 4.0],
                c_grid: vec![2.0, 4.0, 8.0],
                far_grid: vec![10.0, 20.0, 40.0],
                n_paths: b.hitting_paths,
                horizon: b.hitting_horizon,
                seed: derive_seed(seed, 70),
            };
            let rep = check_coupling_preconditions(&model, &phi, &Region::interval(0.0, 0.5), 0.05, 1.0, &budget)?;
            Ok(conditions_claim(&rep))
        },
    );

    report.timeseries = series;
    Ok(report)
}

pub(crate) fn growth_series(name: &str, points: &[NormPoint]) -> TimeSeries {
    TimeSeries {
        name: name.into(),
        points: points.iter().map(|p| (p.t, p.ratio, p.std_error)).collect(),
    }
}
