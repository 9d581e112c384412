//! Piecewise-deterministic process on `[0, ∞)`: drift `ẋ = −a(x)` between
//! jumps, jumps to ladder point `x_k` at rate `θ(x)(1 − p)p^{k−1}`.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::shape::Shape;
use crate::error::{Error, Result};
use crate::numerics::{integrate, Tolerance};
use crate::process::{ProcessModel, Region, Step, TestFunction, Trajectory};
use crate::rng::SimRng;

/// Geometric tail mass below which the ladder is cut.
pub const LADDER_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ladder {
    /// `x_k = first + (k − 1)·gap`
    Arithmetic {
        first: f64,
        gap: f64,
    },
    /// `x_k = k^exponent`
    Power {
        exponent: f64,
    },
    Explicit {
        points: Vec<f64>,
    },
}

impl Ladder {
    pub fn points(&self, p: f64) -> Vec<f64> {
        let n = ((LADDER_TAIL.ln() / p.ln()).ceil() as usize).max(1);
        match self {
            Ladder::Arithmetic { first, gap } => (0..n).map(|k| first + k as f64 * gap).collect(),
            Ladder::Power { exponent } => (1..=n).map(|k| (k as f64).powf(*exponent)).collect(),
            Ladder::Explicit { points } => points.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdmpParams {
    pub ladder: Ladder,
    pub p: f64,
    pub shape: Arc<Shape>,
}

fn shared_default_shape() -> Arc<Shape> {
    static SHAPE: OnceLock<Arc<Shape>> = OnceLock::new();
    SHAPE.get_or_init(|| Arc::new(Shape::default())).clone()
}

impl PdmpParams {
    pub fn new(ladder: Ladder, p: f64) -> Self {
        PdmpParams {
            ladder,
            p,
            shape: shared_default_shape(),
        }
    }

    /// `p = ½`, `x_k = k`.
    pub fn bounded_gaps() -> Self {
        Self::new(Ladder::Arithmetic { first: 1.0, gap: 1.0 }, 0.5)
    }

    /// `p = ½`, `x_k = k²`.
    pub fn unbounded_gaps() -> Self {
        Self::new(Ladder::Power { exponent: 2.0 }, 0.5)
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = Arc::new(shape);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Pdmp {
    p: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    shape: Arc<Shape>,
}

pub fn pdmp_build(params: &PdmpParams) -> Result<Pdmp> {
    Pdmp::new(params)
}

fn ladder_weights(p: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k < n {
                (1.0 - p) * p.powi(k as i32 - 1)
            } else {
                p.powi(n as i32 - 1)
            }
        })
        .collect()
}

impl Pdmp {
    pub fn new(params: &PdmpParams) -> Result<Self> {
        let p = params.p;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
        }
        let points = params.ladder.points(p);
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty jump ladder".into()));
        }
        if points[0] < 1.0 || !points.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("ladder points must be finite and ≥ 1".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("ladder points must increase strictly".into()));
        }
        let weights = ladder_weights(p, points.len());
        let cdf = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Pdmp {
            p,
            points,
            weights,
            cdf,
            shape: params.shape.clone(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Probability of landing on each ladder point; the tail beyond the cut
    /// sits on the last point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> &Arc<Shape> {
        &self.shape
    }

    /// Total jump intensity `θ(x)`.
    pub fn jump_rate(&self, x: f64) -> f64 {
        self.shape.theta(x)
    }

    pub fn sample_target(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let k = self.cdf.partition_point(|&c| c <= u).min(self.points.len() - 1);
        self.points[k]
    }

    /// Time spent by a recorded path in `[lo, hi]` during `[t0, t1]`.
    pub fn occupation(&self, traj: &Trajectory<f64>, lo: f64, hi: f64, t0: f64, t1: f64) -> f64 {
        let mut total = 0.0;
        let start = traj.event_index_at(t0);
        for i in start..traj.events.len() {
            let (ti, xi) = traj.events[i];
            if ti >= t1 {
                break;
            }
            let a = ti.max(t0);
            let b = traj.events.get(i + 1).map(|e| e.0).unwrap_or(traj.horizon).min(t1);
            if b <= a {
                continue;
            }
            let top = self.shape.flow_down(xi, a - ti);
            let bottom = self.shape.flow_down(xi, b - ti);
            let (u, l) = (top.min(hi), bottom.max(lo));
            if u > l {
                total += self.shape.clock(u) - self.shape.clock(l);
            }
        }
        total
    }

    /// Invariant density: `C e^{Λ}/a` on `(0, 1)`, `C` on `[1, x₁)` and
    /// `C p^k` on `[x_k, x_{k+1})`.
    pub fn invariant_density(&self) -> Result<PiecewiseDensity> {
        const ETA: f64 = 1e-6;
        let shape = &self.shape;
        if shape.theta(ETA) * ETA / shape.a(ETA) < 1e-3 {
            return Err(Error::Divergent(format!(
                "θ/a is integrable at 0 (θ(η)η/a(η) = {:e} at η = {ETA}); the process leaks towards the origin",
                shape.theta(ETA) * ETA / shape.a(ETA)
            )));
        }
        let smooth_part = integrate(
            |y| (1.0 - shape.theta(y)) * shape.hazard(y).exp() / shape.a(y),
            0.5,
            1.0,
            Tolerance::rel(1e-13),
        )?;
        let n = self.points.len();
        let mut unnormalized = 1.0 + smooth_part.value + (self.points[0] - 1.0);
        for k in 1..n {
            unnormalized += self.p.powi(k as i32) * (self.points[k] - self.points[k - 1]);
        }
        let c = 1.0 / unnormalized;
        let levels = (0..n)
            .map(|k| if k + 1 < n { c * self.p.powi(k as i32 + 1) } else { 0.0 })
            .collect();
        let bound = (0..=400)
            .map(|i| {
                let y = 0.5 + i as f64 / 800.0;
                (1.0 - shape.theta(y)) * shape.hazard(y).exp() / shape.a(y)
            })
            .fold(0.0, f64::max)
            * 1.25;
        Ok(PiecewiseDensity {
            breakpoints: self.points.clone(),
            levels,
            c,
            smooth_mass: smooth_part.value,
            smooth_bound: bound,
            p: self.p,
            shape: shape.clone(),
        })
    }

    /// `φ*(x) = E_x e^{ατ*}` for the dual started above 1, where `τ*` is the
    /// first jump back into `[0, 1]`.
    pub fn dual_exit_moment(&self, x: f64, alpha: f64) -> f64 {
        let q = dual_jump_probabilities(&self.weights);
        let start = self.points.partition_point(|&xk| xk <= x);
        let mut survive = 1.0;
        let mut total = 0.0;
        for (xk, qk) in self.points.iter().zip(&q).skip(start) {
            total += survive * qk * (alpha * (xk - x)).exp();
            survive *= 1.0 - qk;
        }
        total
    }

    pub fn dual(&self) -> Result<PdmpDual> {
        self.invariant_density()?;
        Ok(PdmpDual {
            points: self.points.clone(),
            jump_prob: dual_jump_probabilities(&self.weights),
            shape: self.shape.clone(),
        })
    }

    fn monotone_entry(&self, x: f64, duration: f64, region: &Region, up: bool) -> Option<f64> {
        let Region::Intervals(iv) = region else {
            return None;
        };
        iv.iter()
            .filter_map(|&(lo, hi)| {
                if x >= lo && x <= hi {
                    return Some(0.0);
                }
                let s = if up && x < lo {
                    self.shape.clock(lo) - self.shape.clock(x)
                } else if !up && x > hi {
                    self.shape.clock(x) - self.shape.clock(hi)
                } else {
                    return None;
                };
                (s < duration).then_some(s)
            })
            .min_by(f64::total_cmp)
    }
}

fn dual_jump_probabilities(weights: &[f64]) -> Vec<f64> {
    let mut tail = 0.0;
    let mut q = vec![0.0; weights.len()];
    for k in (0..weights.len()).rev() {
        tail += weights[k];
        q[k] = weights[k] / tail;
    }
    q
}

impl ProcessModel for Pdmp {
    type State = f64;

    fn description(&self) -> String {
        format!(
            "piecewise-deterministic process, p = {}, {} ladder points from {}",
            self.p,
            self.points.len(),
            self.points[0]
        )
    }

    fn next_event(&self, x: &f64, max_dt: f64, rng: &mut SimRng) -> Result<Step<f64>> {
        let x = *x;
        if x > 1.0 {
            // θ vanishes above 1, so nothing happens before the flow reaches it.
            let free = x - 1.0;
            return Ok(if free >= max_dt {
                Step {
                    dt: max_dt,
                    state: x - max_dt,
                    jump: false,
                }
            } else {
                Step {
                    dt: free,
                    state: 1.0,
                    jump: false,
                }
            });
        }
        // θ ≤ 1: thinning against a unit-rate clock.
        let e: f64 = Exp1.sample(rng);
        if e >= max_dt {
            return Ok(Step {
                dt: max_dt,
                state: self.shape.flow_down(x, max_dt),
                jump: false,
            });
        }
        let y = self.shape.flow_down(x, e);
        if rng.random::<f64>() < self.shape.theta(y) {
            Ok(Step {
                dt: e,
                state: self.sample_target(rng),
                jump: true,
            })
        } else {
            Ok(Step {
                dt: e,
                state: y,
                jump: false,
            })
        }
    }

    fn flow(&self, x: &f64, elapsed: f64) -> f64 {
        self.shape.flow_down(*x, elapsed)
    }

    fn flow_entry(&self, x: &f64, duration: f64, region: &Region) -> Option<f64> {
        self.monotone_entry(*x, duration, region, false)
    }

    fn generator_apply(&self, f: &TestFunction<f64>, x: &f64) -> Result<f64> {
        let x = *x;
        let a = self.shape.a(x);
        let transport = if a == 0.0 { 0.0 } else { -a * f.derivative_at(x)? };
        let theta = self.shape.theta(x);
        if theta == 0.0 {
            return Ok(transport);
        }
        let fx = f.eval(&x);
        let jumps: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(xk, w)| w * (f.eval(xk) - fx))
            .sum();
        Ok(transport + theta * jumps)
    }
}

/// Time reversal of [`Pdmp`]: drifts up at speed `a`, and at each ladder
/// point jumps back into `[0, 1]` with probability `1 − p`, landing with
/// density `(θ/a)e^{Λ}`.
#[derive(Debug, Clone)]
pub struct PdmpDual {
    points: Vec<f64>,
    jump_prob: Vec<f64>,
    shape: Arc<Shape>,
}

pub fn pdmp_dual_build(params: &PdmpParams) -> Result<PdmpDual> {
    Pdmp::new(params)?.dual()
}

impl PdmpDual {
    pub fn jump_probabilities(&self) -> &[f64] {
        &self.jump_prob
    }

    pub fn sample_landing(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        self.shape.hazard_inv(u.ln())
    }
}

impl ProcessModel for PdmpDual {
    type State = f64;

    fn description(&self) -> String {
        format!(
            "dual piecewise-deterministic process, {} ladder points",
            self.points.len()
        )
    }

    fn next_event(&self, x: &f64, max_dt: f64, rng: &mut SimRng) -> Result<Step<f64>> {
        let x = *x;
        let k = self.points.partition_point(|&xk| xk <= x);
        let Some(&target) = self.points.get(k) else {
            return Ok(Step {
                dt: max_dt,
                state: self.shape.flow_up(x, max_dt),
                jump: false,
            });
        };
        let dt = (target - 1.0) - self.shape.clock(x);
        if dt >= max_dt {
            return Ok(Step {
                dt: max_dt,
                state: self.shape.flow_up(x, max_dt),
                jump: false,
            });
        }
        if rng.random::<f64>() < self.jump_prob[k] {
            Ok(Step {
                dt,
                state: self.sample_landing(rng),
                jump: true,
            })
        } else {
            Ok(Step {
                dt,
                state: target,
                jump: false,
            })
        }
    }

    fn flow(&self, x: &f64, elapsed: f64) -> f64 {
        self.shape.flow_up(*x, elapsed)
    }

    fn flow_entry(&self, x: &f64, duration: f64, region: &Region) -> Option<f64> {
        let Region::Intervals(iv) = region else {
            return None;
        };
        iv.iter()
            .filter_map(|&(lo, hi)| {
                if *x >= lo && *x <= hi {
                    Some(0.0)
                } else if *x < lo {
                    let s = self.shape.clock(lo) - self.shape.clock(*x);
                    (s < duration).then_some(s)
                } else {
                    None
                }
            })
            .min_by(f64::total_cmp)
    }
}

/// Invariant density of [`Pdmp`] in closed form.
#[derive(Debug, Clone)]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    /// Constant level on `[x_k, x_{k+1})`; zero past the last point.
    levels: Vec<f64>,
    c: f64,
    /// `∫_{1/2}^1 (1 − θ)e^{Λ}/a` and an envelope for rejection sampling it.
    smooth_mass: f64,
    smooth_bound: f64,
    p: f64,
    shape: Arc<Shape>,
}

impl PiecewiseDensity {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    pub fn level(&self, k: usize) -> f64 {
        if k == 0 {
            self.c
        } else {
            self.levels[k - 1]
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x < 1.0 {
            self.c * self.shape.hazard(x).exp() / self.shape.a(x)
        } else if x < self.breakpoints[0] {
            self.c
        } else {
            let k = self.breakpoints.partition_point(|&b| b <= x);
            self.levels[k - 1]
        }
    }

    /// `π([lo, hi])`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let (lo, hi) = (lo.max(0.0), hi);
        if hi <= lo {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if lo < 1.0 {
            let top = hi.min(1.0);
            // θe^{Λ}/a integrates to e^{Λ}; only the (1 − θ) part needs quadrature.
            total += self.shape.hazard(top).exp() - self.shape.hazard(lo).exp();
            let a = lo.max(0.5);
            if top > a {
                total += integrate(
                    |y| (1.0 - self.shape.theta(y)) * self.shape.hazard(y).exp() / self.shape.a(y),
                    a,
                    top,
                    Tolerance::rel(1e-13),
                )?
                .value;
            }
            total *= self.c;
        }
        let mut edges = vec![1.0];
        edges.extend_from_slice(&self.breakpoints);
        for (i, w) in edges.windows(2).enumerate() {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            if b > a {
                total += self.level(i) * (b - a);
            }
        }
        Ok(total)
    }

    /// `ρ_k(x_k) / ρ_{k−1}(x_k)` for each interior ladder point.
    pub fn breakpoint_ratios(&self) -> Vec<f64> {
        (1..self.breakpoints.len())
            .map(|k| self.level(k) / self.level(k - 1))
            .collect()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Exact draw from the invariant law. On `(0, 1)` the density splits as
    /// `θe^{Λ}/a`, sampled as `Λ⁻¹(ln U)`, plus `(1 − θ)e^{Λ}/a` on
    /// `[1/2, 1]`, sampled by rejection; the rest is piecewise uniform.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let mut u = rng.random::<f64>() / self.c;
        if u < 1.0 {
            return self.shape.hazard_inv(rng.random::<f64>().max(f64::MIN_POSITIVE).ln());
        }
        u -= 1.0;
        if u < self.smooth_mass {
            loop {
                let y = 0.5 + 0.5 * rng.random::<f64>();
                let g = (1.0 - self.shape.theta(y)) * self.shape.hazard(y).exp() / self.shape.a(y);
                if rng.random::<f64>() * self.smooth_bound < g {
                    return y;
                }
            }
        }
        u -= self.smooth_mass;
        let mut lo = 1.0;
        for (k, &hi) in self.breakpoints.iter().enumerate() {
            let m = self.level(k) / self.c * (hi - lo);
            if u < m || k + 1 == self.breakpoints.len() {
                return lo + (hi - lo) * rng.random::<f64>();
            }
            u -= m;
            lo = hi;
        }
        lo
    }
}

/// Per-interval occupation fractions of one long path with batch-means
/// standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationHistogram {
    pub edges: Vec<f64>,
    pub fractions: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `batches × bins` per-batch fractions.
    pub batch_fractions: Vec<Vec<f64>>,
}

pub fn occupation_histogram(
    model: &Pdmp,
    traj: &Trajectory<f64>,
    edges: &[f64],
    burn_in: f64,
    batches: usize,
) -> OccupationHistogram {
    let span = (traj.horizon - burn_in) / batches as f64;
    let bins = edges.len() - 1;
    let batch_fractions: Vec<Vec<f64>> = (0..batches)
        .map(|b| {
            let t0 = burn_in + b as f64 * span;
            (0..bins)
                .map(|i| model.occupation(traj, edges[i], edges[i + 1], t0, t0 + span) / span)
                .collect()
        })
        .collect();
    let mut fractions = vec![0.0; bins];
    let mut std_errors = vec![0.0; bins];
    for i in 0..bins {
        let col: Vec<f64> = batch_fractions.iter().map(|r| r[i]).collect();
        let (m, se) = crate::numerics::mean_se(&col);
        fractions[i] = m;
        std_errors[i] = se;
    }
    OccupationHistogram {
        edges: edges.to_vec(),
        fractions,
        std_errors,
        batch_fractions,
    }
}

impl OccupationHistogram {
    /// Ratio of average densities of bins `j` and `i` with a delta-method
    /// standard error from the batch covariance.
    pub fn density_ratio(&self, i: usize, j: usize) -> (f64, f64) {
        let len = |k: usize| self.edges[k + 1] - self.edges[k];
        let n = self.batch_fractions.len() as f64;
        let a: Vec<f64> = self.batch_fractions.iter().map(|r| r[j] / len(j)).collect();
        let b: Vec<f64> = self.batch_fractions.iter().map(|r| r[i] / len(i)).collect();
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let r = ma / mb;
        let var: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let d = (x - ma) - r * (y - mb);
                d * d
            })
            .sum::<f64>()
            / (n - 1.0);
        (r, (var / n).sqrt() / mb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{apply_extended_generator, evaluate_semigroup, simulate_trajectory, SemigroupMode};
    use crate::rng::path_rng;
    use approx::assert_relative_eq;

    fn bounded() -> Pdmp {
        pdmp_build(&PdmpParams::bounded_gaps()).unwrap()
    }

    #[test]
    fn ladder_truncation() {
        let m = bounded();
        assert_eq!(m.points().len(), 40);
        assert_relative_eq!(m.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(*m.weights().last().unwrap() < 1e-11);
        let sq = pdmp_build(&PdmpParams::unbounded_gaps()).unwrap();
        assert_eq!(sq.points()[3], 16.0);
    }

    #[test]
    fn deterministic_transport_above_one() {
        let m = bounded();
        let tr = simulate_trajectory(&m, &5.0, 2.0, 1).unwrap();
        assert_eq!(tr.jump_count(), 0);
        assert_eq!(tr.position(&m, 2.0), 3.0);
        // no jump before the flow reaches 1
        for seed in 0..50 {
            let tr = simulate_trajectory(&m, &5.0, 4.0, seed).unwrap();
            assert_eq!(tr.jump_count(), 0);
        }
    }

    #[test]
    fn semigroup_is_shift_without_jumps() {
        let m = bounded();
        let f = TestFunction::new(|y: &f64| (y * 0.7).sin());
        let est = evaluate_semigroup(&m, &f, &6.0, 1.5, 200, 3, SemigroupMode::MonteCarlo).unwrap();
        assert_relative_eq!(est.value, (4.5f64 * 0.7).sin(), epsilon = 1e-12);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn jump_intensity_and_mean_target() {
        let m = bounded();
        assert_eq!(m.jump_rate(0.3), 1.0);
        let mut rng = path_rng(4, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample_target(&mut rng)).collect();
        let (mean, se) = crate::numerics::mean_se(&xs);
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn generator_at_origin_is_geometric_series() {
        let m = bounded();
        let f = TestFunction::new(|y: &f64| (-y).exp());
        let g = apply_extended_generator(&m, &f, &0.0).unwrap();
        let r = (-1.0f64).exp() / 2.0;
        assert_relative_eq!(g, r / (1.0 - r) - 1.0, epsilon = 1e-12);
        let lin = TestFunction::new(|y: &f64| 3.0 * y).with_derivative(|_| 3.0);
        assert_relative_eq!(apply_extended_generator(&m, &lin, &2.5).unwrap(), -3.0);
        let c = TestFunction::constant(2.0).with_derivative(|_| 0.0);
        assert_eq!(apply_extended_generator(&m, &c, &0.3).unwrap(), 0.0);
    }

    #[test]
    fn density_normalized_with_exact_ratios() {
        for params in [PdmpParams::bounded_gaps(), PdmpParams::unbounded_gaps()] {
            let m = pdmp_build(&params).unwrap();
            let d = m.invariant_density().unwrap();
            let total = d.mass(0.0, f64::INFINITY.min(1e9)).unwrap();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
            for r in d.breakpoint_ratios() {
                assert_relative_eq!(r, 0.5, epsilon = 1e-14);
            }
            // ρ₀ reaches the constant C at 1, and there are no atoms
            assert_relative_eq!(d.eval(1.0 - 1e-9), d.normalization(), max_relative = 1e-7);
            assert_eq!(d.mass(3.0, 3.0).unwrap(), 0.0);
            // mass on [0, 1] agrees with direct quadrature away from the origin
            let direct = integrate(|y| d.eval(y), 1e-8, 1.0, Tolerance::rel(1e-12))
                .unwrap()
                .value;
            assert_relative_eq!(direct, d.mass(1e-8, 1.0).unwrap(), max_relative = 1e-8);
        }
    }

    #[test]
    fn leaking_shape_is_reported() {
        let s = Shape::new(
            Arc::new(|x: f64| if x >= 1.0 { 1.0 } else { (x * (2.0 - x)).sqrt() }),
            Arc::new(super::super::shape::default_switch),
            "sqrt",
        )
        .unwrap();
        let m = pdmp_build(&PdmpParams::bounded_gaps().with_shape(s)).unwrap();
        assert!(matches!(m.invariant_density(), Err(Error::Divergent(_))));
    }

    #[test]
    fn occupation_matches_density() {
        let m = bounded();
        let d = m.invariant_density().unwrap();
        let tr = simulate_trajectory(&m, &0.5, 20_000.0, 11).unwrap();
        let edges = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0];
        let h = occupation_histogram(&m, &tr, &edges, 100.0, 40);
        for i in 0..edges.len() - 1 {
            let exact = d.mass(edges[i], edges[i + 1]).unwrap();
            assert!(
                (h.fractions[i] - exact).abs() < 4.0 * h.std_errors[i],
                "bin {i}: {} vs {exact} (se {})",
                h.fractions[i],
                h.std_errors[i]
            );
        }
        let (r, se) = h.density_ratio(3, 4);
        assert!((r - 0.5).abs() < 4.0 * se, "{r} ± {se}");
    }

    #[test]
    fn dual_moves_up_and_survives_geometrically() {
        let m = bounded();
        let dual = m.dual().unwrap();
        let tr = simulate_trajectory(&dual, &1.5, 0.4, 2).unwrap();
        assert_eq!(tr.jump_count(), 0);
        assert_relative_eq!(tr.position(&dual, 0.4), 1.9, epsilon = 1e-14);
        // survive past three ladder points (2, 3, 4) from 1.5: p³
        let n = 100_000;
        let survived = (0..n)
            .filter(|&i| {
                let mut rng = path_rng(5, i);
                crate::process::first_entry(&dual, &1.5, &Region::interval(0.0, 1.0), 3.0, &mut rng)
                    .unwrap()
                    .is_none()
            })
            .count();
        let phat = survived as f64 / n as f64;
        let se = (0.125f64 * 0.875 / n as f64).sqrt();
        assert!((phat - 0.125).abs() < 3.0 * se, "{phat}");
    }

    #[test]
    fn dual_landing_law() {
        let m = bounded();
        let dual = m.dual().unwrap();
        let shape = m.shape().clone();
        let mut rng = path_rng(8, 0);
        let n = 100_000;
        let below = (0..n).filter(|_| dual.sample_landing(&mut rng) <= 0.5).count();
        let exact = shape.hazard(0.5).exp();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((below as f64 / n as f64 - exact).abs() < 3.0 * se);
    }

    #[test]
    fn dual_exit_moment_matches_series() {
        let m = bounded();
        // x = 2.5, α = 0.3: Σ_{k≥3} ½^{k−2} e^{0.3(k − 2.5)}, up to the ladder cut
        let mut series = 0.0;
        for k in 3..200 {
            series += 0.5f64.powi(k - 2) * (0.3 * (k as f64 - 2.5)).exp();
        }
        assert_relative_eq!(m.dual_exit_moment(2.5, 0.3), series, max_relative = 1e-6);
    }

    #[test]
    fn stationary_sampler_matches_masses() {
        let rho = bounded().invariant_density().unwrap();
        let mut rng = path_rng(21, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rho.sample(&mut rng)).collect();
        for (lo, hi) in [
            (0.0, 0.25),
            (0.25, 0.75),
            (0.75, 1.0),
            (1.0, 2.0),
            (2.0, 3.0),
            (3.0, 6.0),
        ] {
            let m = rho.mass(lo, hi).unwrap();
            let f = xs.iter().filter(|&&x| x >= lo && x < hi).count() as f64 / n as f64;
            let se = (m * (1.0 - m) / n as f64).sqrt();
            assert!((f - m).abs() < 4.0 * se, "[{lo}, {hi}): {f} vs {m}");
        }
    }
}
