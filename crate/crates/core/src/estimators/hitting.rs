use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_se;
use crate::process::{first_entry, simulate_path, trajectory_entry, ProcessModel, Region, State, TestFunction};
use crate::rng::{derive_seed, par_map, path_rng};

/// Hitting times `τ_K` (or `τ_K^t`) of a region from one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSample<S> {
    pub start: S,
    pub region: Region,
    /// Uncensored hitting times, in path order.
    pub samples: Vec<f64>,
    /// Number of paths that had not hit by `horizon`.
    pub censored: usize,
    pub horizon: f64,
    /// Shift `t` of `τ_K^t`; zero for plain hitting times.
    pub offset: f64,
    /// Per-path result, `None` when censored.
    pub per_path: Vec<Option<f64>>,
    pub seed: u64,
}

impl<S: State> HittingSample<S> {
    fn from_paths(start: S, region: Region, per_path: Vec<Option<f64>>, horizon: f64, offset: f64, seed: u64) -> Self {
        let samples: Vec<f64> = per_path.iter().flatten().copied().collect();
        HittingSample {
            start,
            region,
            censored: per_path.len() - samples.len(),
            samples,
            horizon,
            offset,
            per_path,
            seed,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.per_path.len()
    }

    /// No path reached the region.
    pub fn all_censored(&self) -> bool {
        self.samples.is_empty() && self.censored > 0
    }

    /// CSV with columns `path_id, tau, censored`; censored rows carry the
    /// horizon as `tau`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path_id", "tau", "censored"])?;
        for (i, tau) in self.per_path.iter().enumerate() {
            let (t, c) = match tau {
                Some(t) => (*t, false),
                None => (self.horizon, true),
            };
            w.serialize((i, t, c))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples of `τ_K = inf{t ≥ 0 : X_t ∈ K}` from `x0`, censored at `horizon`.
pub fn hitting_time_samples<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &M::State,
    region: &Region,
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<HittingSample<M::State>> {
    if n_paths == 0 || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter("need n_paths ≥ 1 and horizon ≥ 0".into()));
    }
    let per_path: Vec<Option<f64>> = par_map(n_paths, |i| {
        first_entry(model, x0, region, horizon, &mut path_rng(seed, i as u64))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(HittingSample::from_paths(
        x0.clone(),
        region.clone(),
        per_path,
        horizon,
        0.0,
        seed,
    ))
}

/// Hitting times from starts drawn from a law, one start per path; `start`
/// records the first draw.
pub fn hitting_times_from_law<M, F>(
    model: &M,
    law: &F,
    region: &Region,
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<HittingSample<M::State>>
where
    M: ProcessModel + ?Sized,
    F: Fn(&mut crate::rng::SimRng) -> M::State + Sync + ?Sized,
{
    if n_paths == 0 || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter("need n_paths ≥ 1 and horizon ≥ 0".into()));
    }
    let runs: Vec<(M::State, Option<f64>)> = par_map(n_paths, |i| -> Result<_> {
        let mut rng = path_rng(seed, i as u64);
        let x0 = law(&mut rng);
        let tau = first_entry(model, &x0, region, horizon, &mut rng)?;
        Ok((x0, tau))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let start = runs[0].0.clone();
    let per_path = runs.into_iter().map(|r| r.1).collect();
    Ok(HittingSample::from_paths(
        start,
        region.clone(),
        per_path,
        horizon,
        0.0,
        seed,
    ))
}

/// Plain and shifted hitting times read off the same paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedHitting<S> {
    /// `τ_K`, censored at `offset + horizon`.
    pub base: HittingSample<S>,
    /// `τ_K^t = inf{s ≥ 0 : X_{t+s} ∈ K}`, censored at `horizon`.
    pub shifted: HittingSample<S>,
}

/// Samples of `τ_K` and `τ_K^t` with `t = offset`, pathwise coupled.
pub fn shifted_hitting_time_samples<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &M::State,
    region: &Region,
    offset: f64,
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<ShiftedHitting<M::State>> {
    if n_paths == 0 || !(horizon >= 0.0) || !(offset >= 0.0) {
        return Err(Error::InvalidParameter(
            "need n_paths ≥ 1, horizon ≥ 0 and offset ≥ 0".into(),
        ));
    }
    let pairs: Vec<(Option<f64>, Option<f64>)> = par_map(n_paths, |i| -> Result<_> {
        let traj = simulate_path(model, x0, offset + horizon, &mut path_rng(seed, i as u64))?;
        let base = trajectory_entry(model, &traj, region, 0.0);
        let shifted = trajectory_entry(model, &traj, region, offset).map(|s| s - offset);
        Ok((base, shifted))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (base, shifted): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(ShiftedHitting {
        base: HittingSample::from_paths(x0.clone(), region.clone(), base, offset + horizon, 0.0, seed),
        shifted: HittingSample::from_paths(x0.clone(), region.clone(), shifted, horizon, offset, seed),
    })
}

/// Estimate of `E e^{ατ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentEstimate {
    pub alpha: f64,
    /// Mean of `e^{ατ}`; censored paths contribute `e^{α·horizon}`, which
    /// makes the value a lower bound whenever `censored > 0`.
    pub value: f64,
    pub std_error: f64,
    pub divergence_flag: bool,
    /// Share of the sum contributed by the largest term.
    pub max_sample_share: f64,
    pub censored: usize,
    /// Exponential tail rate of `τ` fitted to the top `√n` samples; `None`
    /// when fewer than ten tail points are available.
    pub tail_rate: Option<f64>,
}

/// Minimum number of tail points for the tail-rate check.
const MIN_TAIL: usize = 10;

/// Maximum-likelihood rate of the exponential excesses over the
/// `(k+1)`-th largest sample, `k = ⌊√n⌋`.
fn tail_rate(samples: &[f64]) -> Option<(f64, usize)> {
    let k = (samples.len() as f64).sqrt() as usize;
    if k < MIN_TAIL || samples.len() <= k {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let excess: f64 = sorted[..k].iter().map(|x| x - threshold).sum();
    (excess > 0.0).then(|| (k as f64 / excess, k))
}

/// Sample mean of `e^{ατ}` with a heuristic divergence flag.
///
/// The flag is raised by censoring, by a single term carrying more than half
/// of the sum, or by `α` reaching the fitted tail rate of `τ` within two
/// standard errors of that rate.
pub fn exp_moment<S: State>(sample: &HittingSample<S>, alpha: f64) -> ExpMomentEstimate {
    let capped = (alpha * sample.horizon).exp();
    let terms: Vec<f64> = sample
        .per_path
        .iter()
        .map(|t| t.map(|t| (alpha * t).exp()).unwrap_or(capped))
        .collect();
    let (value, std_error) = mean_se(&terms);
    let total: f64 = terms.iter().sum();
    let max = terms.iter().copied().fold(0.0, f64::max);
    let max_sample_share = if total > 0.0 { max / total } else { 0.0 };
    let fitted = tail_rate(&sample.samples);
    let near_pole = match fitted {
        Some((rate, k)) if alpha > 0.0 => alpha >= rate * (1.0 - 2.0 / (k as f64).sqrt()),
        _ => false,
    };
    ExpMomentEstimate {
        alpha,
        value,
        std_error,
        divergence_flag: sample.censored > 0 || max_sample_share > 0.5 || near_pole,
        max_sample_share,
        censored: sample.censored,
        tail_rate: fitted.map(|f| f.0),
    }
}

/// `φ` tabulated on a grid of states, linear in the coordinate between
/// nodes and constant beyond the outermost nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPhi {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl TabulatedPhi {
    pub fn eval_at(&self, c: f64) -> f64 {
        let n = self.nodes.len();
        let v = if c <= self.nodes[0] {
            self.values[0]
        } else if c >= self.nodes[n - 1] {
            self.values[n - 1]
        } else {
            let i = self.nodes.partition_point(|&x| x <= c) - 1;
            let w = (c - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
            self.values[i] + w * (self.values[i + 1] - self.values[i])
        };
        v.max(1.0)
    }

    pub fn to_test_function<S: State>(&self) -> TestFunction<S> {
        let table = self.clone();
        TestFunction::new(move |x: &S| table.eval_at(x.coordinate()))
    }
}

/// Tabulates `φ(x) = E_x e^{α′τ_K}` on `grid`.
pub fn build_phi_from_hitting<M: ProcessModel + ?Sized>(
    model: &M,
    region: &Region,
    alpha_prime: f64,
    grid: &[M::State],
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<TabulatedPhi> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (k, x) in grid.iter().enumerate() {
        let est = if x.in_region(region) {
            ExpMomentEstimate {
                alpha: alpha_prime,
                value: 1.0,
                std_error: 0.0,
                divergence_flag: false,
                max_sample_share: 0.0,
                censored: 0,
                tail_rate: None,
            }
        } else {
            let s = hitting_time_samples(model, x, region, n_paths, horizon, derive_seed(seed, k as u64))?;
            exp_moment(&s, alpha_prime)
        };
        if est.divergence_flag {
            return Err(Error::NodeDivergence { node: format!("{x:?}") });
        }
        rows.push((x.coordinate(), est.value.max(1.0), est.std_error));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("grid has repeated coordinates".into()));
    }
    Ok(TabulatedPhi {
        nodes: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
        std_errors: rows.iter().map(|r| r.2).collect(),
    })
}
