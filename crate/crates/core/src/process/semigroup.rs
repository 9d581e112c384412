use serde::{Deserialize, Serialize};

use super::simulate::{advance, path_integral, simulate_path};
use super::{ProcessModel, Region, State, TestFunction};
use crate::error::{Error, Result};
use crate::numerics::mean_se;
use crate::rng::{par_map, path_rng};

/// A Monte Carlo (or exact) estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMode {
    /// Exact kernel when the model has one, sampling otherwise.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

/// `T_t f(x) = E_x f(X_t)`.
pub fn evaluate_semigroup<M: ProcessModel + ?Sized>(
    model: &M,
    f: &TestFunction<M::State>,
    x: &M::State,
    t: f64,
    n_paths: usize,
    seed: u64,
    mode: SemigroupMode,
) -> Result<MonteCarloEstimate> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be ≥ 0, got {t}")));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be ≥ 1".into()));
    }
    if mode != SemigroupMode::MonteCarlo {
        if let Some(law) = model.exact_kernel(x, t) {
            let mut value = 0.0;
            for (y, w) in &law {
                let v = f.eval(y);
                if !v.is_finite() {
                    return Err(Error::NonFiniteEvaluation {
                        state: format!("{y:?}"),
                    });
                }
                value += w * v;
            }
            return Ok(MonteCarloEstimate {
                value,
                std_error: 0.0,
                n_paths,
                seed,
            });
        }
        if mode == SemigroupMode::Exact {
            return Err(Error::Unsupported(format!(
                "{} has no exact kernel",
                model.description()
            )));
        }
    }
    let samples = par_map(n_paths, |i| -> Result<f64> {
        let mut rng = path_rng(seed, i as u64);
        let y = advance(model, x, t, &mut rng)?;
        let v = f.eval(&y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation {
                state: format!("{y:?}"),
            })
        }
    });
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let (value, std_error) = mean_se(&samples);
    Ok(MonteCarloEstimate {
        value,
        std_error,
        n_paths,
        seed,
    })
}

/// `(𝓐f)(x)` through the model's generator.
pub fn apply_extended_generator<M: ProcessModel + ?Sized>(
    model: &M,
    f: &TestFunction<M::State>,
    x: &M::State,
) -> Result<f64> {
    model.generator_apply(f, x)
}

/// Drift certificate `𝓐φ ≤ −αφ + C` outside of (and within) `region`.
#[derive(Clone, Debug)]
pub struct LyapunovCertificate<S> {
    pub phi: TestFunction<S>,
    pub alpha: f64,
    pub c: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingalePoint {
    pub start: f64,
    pub t: f64,
    pub phi_start: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub points: Vec<SupermartingalePoint>,
    pub failed_paths: usize,
    pub passed: bool,
}

/// Time grid of the supermartingale check: {1/16, 1/8, 1/4, 1/2, 1}·horizon.
pub fn supermartingale_grid(horizon: f64) -> [f64; 5] {
    [0.25, 0.5, 1.0, 2.0, 4.0].map(|c| c * horizon / 4.0)
}

/// Estimates `E_x[φ(X_t) + ∫_0^t (αφ(X_s) − C) ds]` on a fixed time grid and
/// flags any estimate exceeding `φ(x)` by more than three standard errors.
pub fn check_supermartingale<M: ProcessModel + ?Sized>(
    model: &M,
    cert: &LyapunovCertificate<M::State>,
    starts: &[M::State],
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SupermartingaleReport> {
    if !(horizon > 0.0) || n_paths == 0 {
        return Err(Error::InvalidParameter("horizon > 0 and n_paths ≥ 1 required".into()));
    }
    let grid = supermartingale_grid(horizon);
    let phi = &cert.phi;
    let mut points = Vec::new();
    let mut failed_paths = 0;
    for (k, x0) in starts.iter().enumerate() {
        let phi0 = phi.eval(x0);
        if !(phi0 >= 1.0) {
            return Err(Error::InvalidParameter(format!("phi({x0:?}) = {phi0} < 1")));
        }
        let stream = crate::rng::derive_seed(seed, k as u64);
        let per_path: Vec<Option<[f64; 5]>> = par_map(n_paths, |i| {
            let mut rng = path_rng(stream, i as u64);
            let traj = simulate_path(model, x0, horizon, &mut rng).ok()?;
            let g = |y: &M::State| cert.alpha * phi.eval(y) - cert.c;
            let mut out = [0.0; 5];
            let mut acc = 0.0;
            let mut prev = 0.0;
            for (j, &t) in grid.iter().enumerate() {
                acc += segment_integral(model, &traj, &g, prev, t);
                prev = t;
                out[j] = phi.eval(&traj.position(model, t)) + acc;
            }
            out.iter().all(|v| v.is_finite()).then_some(out)
        });
        let ok: Vec<[f64; 5]> = per_path.iter().flatten().cloned().collect();
        failed_paths += per_path.len() - ok.len();
        for (j, &t) in grid.iter().enumerate() {
            let vals: Vec<f64> = ok.iter().map(|o| o[j]).collect();
            let (estimate, std_error) = mean_se(&vals);
            points.push(SupermartingalePoint {
                start: x0.coordinate(),
                t,
                phi_start: phi0,
                estimate,
                std_error,
                violated: estimate > phi0 + 3.0 * std_error + 1e-12 * phi0,
            });
        }
    }
    let passed = points.iter().all(|p| !p.violated);
    Ok(SupermartingaleReport {
        points,
        failed_paths,
        passed,
    })
}

fn segment_integral<M: ProcessModel + ?Sized>(
    model: &M,
    traj: &super::Trajectory<M::State>,
    g: &dyn Fn(&M::State) -> f64,
    from: f64,
    to: f64,
) -> f64 {
    path_integral(model, traj, g, to) - path_integral(model, traj, g, from)
}
