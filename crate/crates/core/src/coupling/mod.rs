//! Couplings of two copies of a process.
//!
//! The building blocks are the *gluing* coupling, which draws the endpoints
//! of two transition laws from their maximal coupling, and independent
//! motion. The switching coupling alternates the two: independent motion
//! until both components sit in `K′ = {φ ≤ c}`, then one gluing attempt.

mod gluing;
mod switching;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use gluing::{extended_gluing_coupling, gluing_coupling, gluing_mode, maximal_coupling, overlap};
pub use switching::{switching_coupling, switching_coupling_from, SwitchingOptions};

use crate::error::{Error, Result};
use crate::numerics::{fit_exponential, mean_se, RateFit};
use crate::process::{simulate_path, ProcessModel, State, TestFunction, Trajectory};
use crate::rng::{derive_seed, par_map, path_rng, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Simple,
    Gluing,
}

/// A stopping time of the ladder and the phase that starts there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub time: f64,
    pub phase: Phase,
}

/// How transition laws are compared in a gluing block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GluingMode {
    /// Atom-by-atom on exact kernels; bridges fill the interior.
    Exact,
    /// Closed-form laws integrated over a shared grid; the endpoint inside
    /// the chosen bin is drawn from the exact conditional law.
    Binned,
    /// Histograms of simulated candidate paths on a shared grid.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingOptions {
    /// Bin width of the shared grid for continuous states.
    pub grid_width: f64,
    /// Candidate paths per component in [`GluingMode::Empirical`].
    pub candidates: usize,
}

impl Default for GluingOptions {
    fn default() -> Self {
        GluingOptions {
            grid_width: 1e-2,
            candidates: 256,
        }
    }
}

/// A pair of coupled paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRun<S> {
    pub traj1: Trajectory<S>,
    pub traj2: Trajectory<S>,
    /// First time from which both paths coincide.
    pub coupled_at: Option<f64>,
    /// Whether the endpoints of a gluing run agree (also for two different
    /// horizons, where `coupled_at` stays empty).
    pub endpoints_equal: bool,
    pub theta_ladder: Vec<LadderEntry>,
    pub attempts: usize,
    /// Gluing attempts made before the components met.
    pub coupled_on_attempt: Option<usize>,
    /// Width of the grid the endpoint laws were compared on; 0 when exact.
    pub grid_error: f64,
    pub seed: u64,
    pub diagnostic: Option<String>,
}

impl<S: State> CouplingRun<S> {
    pub fn is_coupled_at(&self, t: f64) -> bool {
        self.coupled_at.map(|c| c <= t).unwrap_or(false)
    }

    /// Whether both trajectories agree event by event after `coupled_at`.
    pub fn is_sticky(&self) -> bool {
        let Some(c) = self.coupled_at else { return true };
        let after = |tr: &Trajectory<S>| -> Vec<(f64, S)> { tr.events.iter().filter(|e| e.0 > c).cloned().collect() };
        after(&self.traj1) == after(&self.traj2)
    }

    /// Writes one row per event of either path: time, both coordinates,
    /// phase and coupled flag.
    pub fn write_csv<M: ProcessModel<State = S> + ?Sized, W: Write>(&self, model: &M, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "state1", "state2", "phase", "coupled"])?;
        let mut times: Vec<f64> = self
            .traj1
            .events
            .iter()
            .chain(&self.traj2.events)
            .map(|e| e.0)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        for t in times {
            let coupled = self.is_coupled_at(t);
            let phase = if coupled {
                "coupled"
            } else {
                match self.theta_ladder.iter().rev().find(|e| e.time <= t).map(|e| e.phase) {
                    Some(Phase::Gluing) => "gluing",
                    _ => "simple",
                }
            };
            let x1 = self.traj1.position(model, t.min(self.traj1.horizon)).coordinate();
            let x2 = self.traj2.position(model, t.min(self.traj2.horizon)).coordinate();
            w.write_record([
                t.to_string(),
                x1.to_string(),
                x2.to_string(),
                phase.into(),
                coupled.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pointwise decay curves of `E[φ(Z¹_t) + φ(Z²_t)]1{Z¹_t ≠ Z²_t} / φ(x)` and
/// the exponential fit of their supremum over the starting points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDecay {
    pub fit: RateFit,
    pub times: Vec<f64>,
    /// Per starting point, per time.
    pub values: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub uncoupled: Vec<Vec<f64>>,
    /// Starting point attaining the supremum at each time.
    pub worst_start: Vec<usize>,
    pub mean_attempts: f64,
    pub grid_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of the φ-coupling decay from each start in
/// `x_list`, each paired with an independent draw from `pi_sampler`.
#[allow(clippy::too_many_arguments)]
pub fn coupling_decay_estimate<M, F>(
    model: &M,
    phi: &TestFunction<M::State>,
    c: f64,
    t_glue: f64,
    x_list: &[M::State],
    pi_sampler: &F,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &SwitchingOptions,
) -> Result<CouplingDecay>
where
    M: ProcessModel + ?Sized,
    F: Fn(&mut SimRng) -> M::State + Sync + ?Sized,
{
    if x_list.is_empty() || time_grid.is_empty() || n_paths == 0 {
        return Err(Error::InvalidParameter("need starting points, times and paths".into()));
    }
    if time_grid.windows(2).any(|w| w[1] <= w[0]) || time_grid[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "time grid must be increasing and nonnegative".into(),
        ));
    }
    let horizon = *time_grid.last().unwrap_or(&0.0);
    let nt = time_grid.len();
    let mut values = Vec::new();
    let mut std_errors = Vec::new();
    let mut uncoupled = Vec::new();
    let mut attempts_total = 0usize;
    let mut grid_error: f64 = 0.0;
    for (a, x) in x_list.iter().enumerate() {
        let phi_x = phi.eval(x);
        let start_seed = derive_seed(seed, a as u64);
        let per_path = par_map(n_paths, |i| -> Result<(Vec<f64>, Vec<f64>, usize, f64)> {
            let run = switching_coupling(
                model,
                phi,
                c,
                t_glue,
                x,
                pi_sampler,
                horizon,
                derive_seed(start_seed, i as u64),
                opts,
            )?;
            let mut q = Vec::with_capacity(nt);
            let mut u = Vec::with_capacity(nt);
            for &t in time_grid {
                if run.is_coupled_at(t) {
                    q.push(0.0);
                    u.push(0.0);
                } else {
                    let v = phi.eval(&run.traj1.position(model, t)) + phi.eval(&run.traj2.position(model, t));
                    q.push(v / phi_x);
                    u.push(1.0);
                }
            }
            Ok((q, u, run.attempts, run.grid_error))
        });
        let per_path: Vec<_> = per_path.into_iter().collect::<Result<_>>()?;
        let mut vals = Vec::with_capacity(nt);
        let mut ses = Vec::with_capacity(nt);
        let mut unc = Vec::with_capacity(nt);
        for k in 0..nt {
            let col: Vec<f64> = per_path.iter().map(|p| p.0[k]).collect();
            let (m, se) = mean_se(&col);
            vals.push(m);
            ses.push(se);
            unc.push(per_path.iter().map(|p| p.1[k]).sum::<f64>() / n_paths as f64);
        }
        attempts_total += per_path.iter().map(|p| p.2).sum::<usize>();
        grid_error = per_path.iter().map(|p| p.3).fold(grid_error, f64::max);
        values.push(vals);
        std_errors.push(ses);
        uncoupled.push(unc);
    }
    let worst_start: Vec<usize> = (0..nt)
        .map(|k| {
            (0..x_list.len())
                .max_by(|&i, &j| values[i][k].total_cmp(&values[j][k]))
                .unwrap_or(0)
        })
        .collect();
    let sup: Vec<f64> = (0..nt).map(|k| values[worst_start[k]][k]).collect();
    let sup_se: Vec<f64> = (0..nt).map(|k| std_errors[worst_start[k]][k]).collect();
    Ok(CouplingDecay {
        fit: fit_exponential(time_grid, &sup, &sup_se),
        times: time_grid.to_vec(),
        values,
        std_errors,
        uncoupled,
        worst_start,
        mean_attempts: attempts_total as f64 / (n_paths * x_list.len()) as f64,
        grid_error,
        n_paths,
        seed,
    })
}

/// Smallest level `c` with `π(φ ≤ c) ≥ coverage`, from invariant samples.
pub fn level_for_coverage<S>(phi: &TestFunction<S>, pi_samples: &[S], coverage: f64) -> Result<f64> {
    if pi_samples.is_empty() || !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::InvalidParameter("need samples and a coverage in (0, 1]".into()));
    }
    let mut v: Vec<f64> = pi_samples.iter().map(|x| phi.eval(x)).collect();
    v.sort_by(f64::total_cmp);
    let k = ((coverage * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Ok(v[k - 1])
}

/// The constant `D₃ = 2D₂ + 3 + 2(D₂ + 1)²(1 − γ/α − δ)⁻¹` bounding the
/// uncoupled φ-mass of two independent copies before their joint entry
/// into `K′`. Infinite when `δ = 1 − γ/α`.
pub fn uncoupled_mass_constant(d1: f64, d2: f64, alpha: f64, gamma: f64, delta: f64) -> Result<f64> {
    if !(d1 >= 0.0 && d2 >= 0.0) || !d1.is_finite() || !d2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "D₁, D₂ must be finite and ≥ 0, got {d1}, {d2}"
        )));
    }
    if !(gamma > 0.0 && gamma < alpha) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < γ < α, got γ = {gamma}, α = {alpha}"
        )));
    }
    let margin = 1.0 - gamma / alpha - delta;
    if !(delta >= 0.0) || margin < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need 0 ≤ δ < 1 − γ/α = {}, got δ = {delta}",
            1.0 - gamma / alpha
        )));
    }
    if margin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * d2 + 3.0 + 2.0 * (d2 + 1.0).powi(2) / margin)
}

/// One time point of [`check_uncoupled_mass_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncoupledMassPoint {
    pub t: f64,
    pub lhs: f64,
    pub std_error: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Monte Carlo check of `E[φ(Y¹_t) + φ(Y²_t)]1{θ > t} ≤ D₃e^{−γt}[φ(y¹) + φ(y²)]`
/// for independent copies, `θ` being their first joint visit to `{φ ≤ c}`.
/// A point holds when the estimate minus three standard errors is below the
/// bound.
#[allow(clippy::too_many_arguments)]
pub fn check_uncoupled_mass_bound<M: ProcessModel + ?Sized>(
    model: &M,
    phi: &TestFunction<M::State>,
    c: f64,
    y1: &M::State,
    y2: &M::State,
    d3: f64,
    gamma: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<UncoupledMassPoint>> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let in_k = |x: &M::State| phi.eval(x) <= c;
    let rows = par_map(n_paths, |i| -> Result<Vec<f64>> {
        let a = simulate_path(model, y1, horizon, &mut path_rng(seed, 2 * i as u64))?;
        let b = simulate_path(model, y2, horizon, &mut path_rng(seed, 2 * i as u64 + 1))?;
        let mut ts: Vec<f64> = a.events.iter().chain(&b.events).map(|e| e.0).collect();
        ts.push(horizon);
        ts.sort_by(f64::total_cmp);
        let theta = ts
            .into_iter()
            .find(|&s| in_k(&a.position(model, s)) && in_k(&b.position(model, s)))
            .unwrap_or(f64::INFINITY);
        Ok(times
            .iter()
            .map(|&t| {
                if theta > t {
                    phi.eval(&a.position(model, t)) + phi.eval(&b.position(model, t))
                } else {
                    0.0
                }
            })
            .collect())
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let start = phi.eval(y1) + phi.eval(y2);
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (lhs, se) = mean_se(&col);
            let rhs = d3 * (-gamma * t).exp() * start;
            UncoupledMassPoint {
                t,
                lhs,
                std_error: se,
                rhs,
                holds: lhs - 3.0 * se <= rhs,
            }
        })
        .collect())
}

/// Fraction of runs still uncoupled after their `k`-th gluing attempt, among
/// runs that either made `k` attempts or coupled before; with the count.
pub fn uncoupled_after_attempts<S>(runs: &[CouplingRun<S>], k: usize) -> (f64, usize) {
    let eligible: Vec<&CouplingRun<S>> = runs
        .iter()
        .filter(|r| r.attempts >= k || r.coupled_on_attempt.map(|a| a <= k).unwrap_or(false))
        .collect();
    let n = eligible.len();
    let still = eligible
        .iter()
        .filter(|r| r.coupled_on_attempt.map(|a| a > k).unwrap_or(true))
        .count();
    (if n > 0 { still as f64 / n as f64 } else { f64::NAN }, n)
}

#[cfg(test)]
mod tests;
