//! One-dimensional diffusions with generator `b∂ + ½B∂²`, simulated by
//! Euler–Maruyama; the Ornstein–Uhlenbeck case also samples exact Gaussian
//! transitions.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::shape::ScalarFn;
use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_hermite_normal;
use crate::process::{ProcessModel, Step, TestFunction};
use crate::rng::SimRng;

pub const DEFAULT_STEP: f64 = 1e-3;

/// Exact linear dynamics `dX = −θX dt + √B dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuExact {
    pub theta: f64,
    pub b: f64,
}

impl OuExact {
    pub fn mean_var(&self, x: f64, t: f64) -> (f64, f64) {
        let decay = (-self.theta * t).exp();
        let var = self.b / (2.0 * self.theta) * (-(-2.0 * self.theta * t).exp_m1());
        (x * decay, var)
    }

    pub fn stationary_variance(&self) -> f64 {
        self.b / (2.0 * self.theta)
    }
}

pub struct Diffusion {
    drift: ScalarFn,
    coeff: ScalarFn,
    step: f64,
    floor: f64,
    exact: Option<OuExact>,
    ellipticity_warnings: Arc<AtomicU64>,
    name: String,
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffusion")
            .field("name", &self.name)
            .field("step", &self.step)
            .field("exact", &self.exact)
            .finish()
    }
}

impl Clone for Diffusion {
    fn clone(&self) -> Self {
        Diffusion {
            drift: self.drift.clone(),
            coeff: self.coeff.clone(),
            step: self.step,
            floor: self.floor,
            exact: self.exact,
            ellipticity_warnings: Arc::new(AtomicU64::new(0)),
            name: self.name.clone(),
        }
    }
}

/// Euler–Maruyama diffusion with drift `b` and diffusion coefficient `B`.
pub fn diffusion_build(drift: ScalarFn, coeff: ScalarFn) -> Diffusion {
    Diffusion {
        drift,
        coeff,
        step: DEFAULT_STEP,
        floor: 1e-8,
        exact: None,
        ellipticity_warnings: Arc::new(AtomicU64::new(0)),
        name: "diffusion".into(),
    }
}

/// `dX = −θX dt + √B dW`; stationary law `N(0, B/(2θ))`.
pub fn ornstein_uhlenbeck(theta: f64, b: f64) -> Result<Diffusion> {
    if !(theta > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "OU needs θ > 0 and B > 0, got {theta}, {b}"
        )));
    }
    let mut d = diffusion_build(Arc::new(move |x| -theta * x), Arc::new(move |_| b));
    d.exact = Some(OuExact { theta, b });
    d.name = format!("Ornstein–Uhlenbeck θ = {theta}, B = {b}");
    Ok(d)
}

impl Diffusion {
    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be > 0, got {h}")));
        }
        self.step = h;
        Ok(self)
    }

    /// Declared lower bound for `B` on visited states.
    pub fn with_ellipticity_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    /// Forgets the closed-form transition so every path uses the scheme.
    pub fn without_exact(mut self) -> Self {
        self.exact = None;
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn exact(&self) -> Option<OuExact> {
        self.exact
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn coeff(&self, x: f64) -> f64 {
        (self.coeff)(x)
    }

    /// Number of visited states where `B` fell below the declared floor.
    pub fn ellipticity_warnings(&self) -> u64 {
        self.ellipticity_warnings.load(Ordering::Relaxed)
    }
}

impl ProcessModel for Diffusion {
    type State = f64;

    fn description(&self) -> String {
        format!("{} (step {:e})", self.name, self.step)
    }

    fn next_event(&self, x: &f64, max_dt: f64, rng: &mut SimRng) -> Result<Step<f64>> {
        let dt = self.step.min(max_dt);
        let z: f64 = StandardNormal.sample(rng);
        if let Some(ou) = self.exact {
            let (m, v) = ou.mean_var(*x, dt);
            return Ok(Step {
                dt,
                state: m + v.sqrt() * z,
                jump: true,
            });
        }
        let b = self.coeff(*x);
        if b < self.floor {
            self.ellipticity_warnings.fetch_add(1, Ordering::Relaxed);
        }
        let y = x + self.drift(*x) * dt + (b.max(0.0) * dt).sqrt() * z;
        Ok(Step {
            dt,
            state: y,
            jump: true,
        })
    }

    fn continuous_paths(&self) -> bool {
        true
    }

    fn exact_kernel(&self, x: &f64, t: f64) -> Option<Vec<(f64, f64)>> {
        let ou = self.exact?;
        let (m, v) = ou.mean_var(*x, t);
        let (nodes, weights) = gauss_hermite_normal(40);
        Some(nodes.iter().zip(weights).map(|(z, w)| (m + v.sqrt() * z, w)).collect())
    }

    fn sample_kernel(&self, x: &f64, t: f64, rng: &mut SimRng) -> Option<Result<f64>> {
        let ou = self.exact?;
        let (m, v) = ou.mean_var(*x, t);
        let z: f64 = StandardNormal.sample(rng);
        Some(Ok(m + v.sqrt() * z))
    }

    fn binned_kernel(&self, x: &f64, t: f64, edges: &[f64]) -> Option<Vec<f64>> {
        let ou = self.exact?;
        let (m, v) = ou.mean_var(*x, t);
        if v <= 0.0 {
            return Some(
                edges
                    .windows(2)
                    .map(|w| if m >= w[0] && m < w[1] { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
        let n = Normal::new(m, v.sqrt()).ok()?;
        Some(edges.windows(2).map(|w| n.cdf(w[1]) - n.cdf(w[0])).collect())
    }

    /// Exact Gaussian bridge on the simulation grid.
    fn sample_bridge(&self, x: &f64, y: &f64, t: f64, rng: &mut SimRng) -> Option<Result<Vec<(f64, f64)>>> {
        let ou = self.exact?;
        let mut events = Vec::new();
        let (mut s, mut cur) = (0.0, *x);
        while t - s > 1e-12 * t.max(1.0) {
            let h = self.step.min(t - s);
            let rest = t - s - h;
            if rest <= 1e-12 * t.max(1.0) {
                break;
            }
            let (m1, v1) = ou.mean_var(cur, h);
            let (_, v2) = ou.mean_var(0.0, rest);
            let g = (-ou.theta * rest).exp();
            let precision = 1.0 / v1 + g * g / v2;
            let mean = (m1 / v1 + y * g / v2) / precision;
            let z: f64 = StandardNormal.sample(rng);
            cur = mean + z / precision.sqrt();
            s += h;
            events.push((s, cur));
        }
        events.push((t, *y));
        Some(Ok(events))
    }

    fn generator_apply(&self, f: &TestFunction<f64>, x: &f64) -> Result<f64> {
        let d1 = f.derivative_at(*x)?;
        let d2 = f.second_derivative_at(*x)?;
        Ok(self.drift(*x) * d1 + 0.5 * self.coeff(*x) * d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{apply_extended_generator, evaluate_semigroup, SemigroupMode, Smoothness};
    use crate::rng::{par_map, path_rng};
    use approx::assert_relative_eq;

    #[test]
    fn euler_maruyama_stationary_second_moment() {
        let ou = ornstein_uhlenbeck(1.0, 2.0)
            .unwrap()
            .without_exact()
            .with_step(1e-2)
            .unwrap();
        let n = 20_000;
        let xs = par_map(n, |i| {
            let mut rng = path_rng(3, i as u64);
            crate::process::advance(&ou, &0.0, 8.0, &mut rng).unwrap()
        });
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m, se) = crate::numerics::mean_se(&sq);
        // Euler bias on the variance is h/(2 − h) ≈ 0.005
        assert!((m - 1.0).abs() < 3.0 * se + 0.01, "{m} ± {se}");
    }

    #[test]
    fn martingale_without_drift() {
        let bm = diffusion_build(Arc::new(|_| 0.0), Arc::new(|_| 1.0))
            .with_step(1e-2)
            .unwrap();
        let f = TestFunction::new(|x: &f64| *x);
        let est = evaluate_semigroup(&bm, &f, &1.5, 1.0, 20_000, 1, SemigroupMode::MonteCarlo).unwrap();
        assert!((est.value - 1.5).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn exact_kernel_moments() {
        let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap();
        let k = ou.exact_kernel(&2.0, 0.5).unwrap();
        let mass: f64 = k.iter().map(|p| p.1).sum();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
        let mean: f64 = k.iter().map(|p| p.0 * p.1).sum();
        assert_relative_eq!(mean, 2.0 * (-0.5f64).exp(), epsilon = 1e-12);
        let f = TestFunction::new(|x: &f64| x * x);
        let e = evaluate_semigroup(&ou, &f, &2.0, 0.5, 1, 0, SemigroupMode::Exact).unwrap();
        let (m, v) = ou.exact().unwrap().mean_var(2.0, 0.5);
        assert_relative_eq!(e.value, m * m + v, epsilon = 1e-12);
        let edges: Vec<f64> = (0..=80).map(|i| -8.0 + 0.2 * i as f64).collect();
        let binned = ou.binned_kernel(&2.0, 0.5, &edges).unwrap();
        assert_relative_eq!(binned.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn bridge_midpoint_law() {
        let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap().with_step(0.05).unwrap();
        let n = 20_000;
        let mids = par_map(n, |i| {
            let ev = ou
                .sample_bridge(&1.0, &-0.5, 1.0, &mut path_rng(4, i as u64))
                .unwrap()
                .unwrap();
            assert_eq!(*ev.last().unwrap(), (1.0, -0.5));
            ev.iter().find(|e| (e.0 - 0.5).abs() < 1e-9).unwrap().1
        });
        // X_{1/2} | X_0 = 1, X_1 = −1/2 by Gaussian conditioning
        let (m1, v1) = ou.exact().unwrap().mean_var(1.0, 0.5);
        let g = (-0.5f64).exp();
        let prec = 1.0 / v1 + g * g / v1;
        let mean = (m1 / v1 - 0.5 * g / v1) / prec;
        let (m, se) = crate::numerics::mean_se(&mids);
        assert!((m - mean).abs() < 4.0 * se, "{m} vs {mean}");
        let var = mids.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        assert!((var * prec - 1.0).abs() < 0.05);
    }

    #[test]
    fn finite_difference_generator() {
        let ou = ornstein_uhlenbeck(1.0, 2.0).unwrap();
        let f = TestFunction::new(|x: &f64| x * x).smooth(Smoothness::C2);
        // L x² = −2x² + 2
        assert_relative_eq!(
            apply_extended_generator(&ou, &f, &1.5).unwrap(),
            -2.0 * 2.25 + 2.0,
            epsilon = 1e-4
        );
        let rough = TestFunction::new(|x: &f64| x.abs());
        assert!(matches!(
            apply_extended_generator(&ou, &rough, &1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ellipticity_counter() {
        let d = diffusion_build(Arc::new(|_| 0.0), Arc::new(|x: f64| x.abs().min(1.0)))
            .with_ellipticity_floor(0.5)
            .with_step(0.01)
            .unwrap();
        let mut rng = path_rng(0, 0);
        crate::process::advance(&d, &0.0, 0.05, &mut rng).unwrap();
        assert!(d.ellipticity_warnings() > 0);
    }
}
