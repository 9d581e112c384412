use serde::{Deserialize, Serialize};

use super::WeightedNormContext;
use crate::error::{Error, Result};
use crate::numerics::{fit_exponential, RateFit};
use crate::process::{evaluate_semigroup, ProcessModel, SemigroupMode, TestFunction};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GrowthOptions {
    /// Measure decay in `‖·‖_{p,φ}` instead of the plain `L_p(π)` norm.
    pub weighted: bool,
    pub mode: SemigroupMode,
}

/// One time point of the worst-case normalized decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPoint {
    pub t: f64,
    /// `max_f ‖T_t Πf‖ / ‖Πf‖`.
    pub ratio: f64,
    pub std_error: f64,
    /// Index of the maximizing test function.
    pub worst: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundFit {
    pub p: f64,
    pub weighted: bool,
    pub fit: RateFit,
    pub points: Vec<NormPoint>,
    /// Test functions dropped because `Πf = 0` on the support.
    pub degenerate_functions: Vec<usize>,
}

/// `‖·‖_p` (or `‖·‖_{p,φ}`) of a function known at the nodes up to
/// independent errors, with its standard error. At `p = 2` the squared
/// errors are subtracted from the squared values.
fn noisy_norm<S>(ctx: &WeightedNormContext<S>, vals: &[f64], ses: &[f64], weighted: bool) -> (f64, f64) {
    let p = ctx.p;
    let mut sum = 0.0;
    let mut var = 0.0;
    for (i, (v, se)) in vals.iter().zip(ses).enumerate() {
        let scale = if weighted { ctx.phi[i].powf(-p / ctx.q) } else { 1.0 };
        let w = ctx.pi[i] * scale;
        let bias = if p == 2.0 { se * se } else { 0.0 };
        sum += w * (v.abs().powf(p) - bias);
        let d = p * v.abs().powf(p - 1.0) * se;
        var += w * w * d * d;
    }
    let norm = sum.max(0.0).powf(1.0 / p);
    let se_pow = var.sqrt();
    let se = if norm > 0.0 {
        se_pow / (p * norm.powf(p - 1.0))
    } else {
        se_pow.powf(1.0 / p)
    };
    (norm, se)
}

/// Fits `C e^{−γt}` to the worst-case normalized semigroup norm of the
/// mean-zero projections of `test_functions`, with `T_t` evaluated at the
/// support points of `ctx`.
pub fn growth_bound_fit<M: ProcessModel + ?Sized>(
    model: &M,
    test_functions: &[TestFunction<M::State>],
    ctx: &WeightedNormContext<M::State>,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
    opts: GrowthOptions,
) -> Result<GrowthBoundFit> {
    if test_functions.is_empty() || time_grid.is_empty() {
        return Err(Error::InvalidParameter("need test functions and a time grid".into()));
    }
    let n = ctx.support.len();
    let zeros = vec![0.0; n];
    let mut best: Vec<Option<NormPoint>> = vec![None; time_grid.len()];
    let mut degenerate = Vec::new();
    for (k, f) in test_functions.iter().enumerate() {
        let vals: Vec<f64> = ctx.support.iter().map(|x| f.eval(x)).collect();
        let mean = ctx.mean(&vals);
        let g0 = ctx.project(&vals);
        let (norm0, _) = noisy_norm(ctx, &g0, &zeros, opts.weighted);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm0 > 1e-12 * scale.max(1e-300)) {
            degenerate.push(k);
            continue;
        }
        for (j, &t) in time_grid.iter().enumerate() {
            let mut tv = Vec::with_capacity(n);
            let mut ts = Vec::with_capacity(n);
            for (i, x) in ctx.support.iter().enumerate() {
                let stream = derive_seed(seed, ((k * time_grid.len() + j) * n + i) as u64);
                let est = evaluate_semigroup(model, f, x, t, n_paths, stream, opts.mode)?;
                tv.push(est.value - mean);
                ts.push(est.std_error);
            }
            let (norm, se) = noisy_norm(ctx, &tv, &ts, opts.weighted);
            let point = NormPoint {
                t,
                ratio: norm / norm0,
                std_error: se / norm0,
                worst: k,
            };
            if best[j].map(|b| point.ratio > b.ratio).unwrap_or(true) {
                best[j] = Some(point);
            }
        }
    }
    let points: Vec<NormPoint> = best.into_iter().flatten().collect();
    let fit = fit_exponential(
        &points.iter().map(|p| p.t).collect::<Vec<_>>(),
        &points.iter().map(|p| p.ratio).collect::<Vec<_>>(),
        &points.iter().map(|p| p.std_error).collect::<Vec<_>>(),
    );
    Ok(GrowthBoundFit {
        p: ctx.p,
        weighted: opts.weighted,
        fit,
        points,
        degenerate_functions: degenerate,
    })
}
