//! Ornstein–Uhlenbeck process driven by a pure-jump Lévy noise,
//! `dX = −aX dt + dZ`, with bounded jump support.
//!
//! Small jumps below `ε` are dropped and replaced by their compensator
//! drift; the rest form a compound Poisson stream simulated exactly.

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::roots::solve_increasing;
use crate::numerics::{integrate, Tolerance};
use crate::process::{ProcessModel, Region, Step, TestFunction};
use crate::rng::{par_map, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasure {
    /// Density `c_neg|u|^{−power}` on `[−bound, 0)` and `c_pos u^{−power}` on `(0, bound]`.
    Power {
        c_neg: f64,
        c_pos: f64,
        power: f64,
        bound: f64,
    },
    /// Total `mass` spread uniformly over `[lo, hi]`.
    Uniform { lo: f64, hi: f64, mass: f64 },
}

impl Default for LevyMeasure {
    fn default() -> Self {
        LevyMeasure::Power {
            c_neg: 1.0,
            c_pos: 1.0,
            power: 0.5,
            bound: 1.0,
        }
    }
}

/// One-sided power piece: density `c|u|^{−beta}` for `|u| ∈ (lo, hi]`, on
/// the side given by `sign`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    sign: f64,
    c: f64,
    beta: f64,
    lo: f64,
    hi: f64,
}

impl Piece {
    /// `∫ |u|^k c|u|^{−β}` over `|u| ∈ (l, h]`.
    fn abs_moment(&self, k: f64, l: f64, h: f64) -> f64 {
        let (l, h) = (l.max(self.lo), h.min(self.hi));
        if h <= l {
            return 0.0;
        }
        let e = k + 1.0 - self.beta;
        if e.abs() < 1e-14 {
            self.c * (h / l).ln()
        } else {
            self.c * (h.powf(e) - l.powf(e)) / e
        }
    }

    fn sample_abs(&self, l: f64, u: f64) -> f64 {
        let (l, h) = (l.max(self.lo), self.hi);
        let e = 1.0 - self.beta;
        if e.abs() < 1e-14 {
            l * (h / l).powf(u)
        } else {
            (l.powf(e) + u * (h.powf(e) - l.powf(e))).powf(1.0 / e)
        }
    }
}

impl LevyMeasure {
    fn pieces(&self) -> Vec<Piece> {
        match *self {
            LevyMeasure::Power {
                c_neg,
                c_pos,
                power,
                bound,
            } => vec![
                Piece {
                    sign: -1.0,
                    c: c_neg,
                    beta: power,
                    lo: 0.0,
                    hi: bound,
                },
                Piece {
                    sign: 1.0,
                    c: c_pos,
                    beta: power,
                    lo: 0.0,
                    hi: bound,
                },
            ],
            LevyMeasure::Uniform { lo, hi, mass } => {
                let d = mass / (hi - lo);
                let mut v = Vec::new();
                if lo < 0.0 {
                    v.push(Piece {
                        sign: -1.0,
                        c: d,
                        beta: 0.0,
                        lo: (-hi).max(0.0),
                        hi: -lo,
                    });
                }
                if hi > 0.0 {
                    v.push(Piece {
                        sign: 1.0,
                        c: d,
                        beta: 0.0,
                        lo: lo.max(0.0),
                        hi,
                    });
                }
                v
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyMeasure::Power {
                c_neg,
                c_pos,
                power,
                bound,
            } => {
                if !(c_neg >= 0.0 && c_pos >= 0.0 && bound > 0.0 && bound.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "Lévy power law needs c ≥ 0 and a finite bound > 0".into(),
                    ));
                }
                if !(power < 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power {power} ≥ 2 makes ∫|u|²μ(du) infinite"
                    )));
                }
            }
            LevyMeasure::Uniform { lo, hi, mass } => {
                if !(lo < hi && mass >= 0.0 && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "uniform Lévy measure needs lo < hi, mass ≥ 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `σ_* = inf{σ : μ(|u| > σ) = 0}`.
    pub fn support_bound(&self) -> f64 {
        self.pieces()
            .iter()
            .filter(|p| p.c > 0.0)
            .map(|p| p.hi)
            .fold(0.0, f64::max)
    }

    pub fn density(&self, u: f64) -> f64 {
        self.pieces()
            .iter()
            .filter(|p| u * p.sign > 0.0 && u.abs() > p.lo && u.abs() <= p.hi)
            .map(|p| p.c * u.abs().powf(-p.beta))
            .sum()
    }

    /// `μ(|u| > ε)`.
    pub fn mass_above(&self, eps: f64) -> f64 {
        self.pieces()
            .iter()
            .map(|p| p.abs_moment(0.0, eps, f64::INFINITY))
            .sum()
    }

    /// `∫_{lo < |u| ≤ hi} u μ(du)`.
    pub fn signed_moment(&self, lo: f64, hi: f64) -> f64 {
        self.pieces().iter().map(|p| p.sign * p.abs_moment(1.0, lo, hi)).sum()
    }

    /// `∫_{|u| ≤ ε} |u| μ(du)`.
    pub fn abs_moment_below(&self, eps: f64) -> f64 {
        self.pieces().iter().map(|p| p.abs_moment(1.0, 0.0, eps)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            LevyMeasure::Power { c_neg, c_pos, .. } => c_neg == c_pos,
            LevyMeasure::Uniform { lo, hi, mass } => lo == -hi || mass == 0.0,
        }
    }

    /// Whether `μ(ℝ⁻) = μ(ℝ⁺) = ∞`.
    pub fn infinite_activity_both_sides(&self) -> bool {
        match *self {
            LevyMeasure::Power {
                c_neg, c_pos, power, ..
            } => power >= 1.0 && c_neg > 0.0 && c_pos > 0.0,
            LevyMeasure::Uniform { .. } => false,
        }
    }

    /// `∫_{|u| > ε} g(u) μ(du)`; power singularities are removed through
    /// `|u| = h t²`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64, eps: f64, tol: Tolerance) -> Result<f64> {
        let mut total = 0.0;
        for p in self.pieces() {
            let l = eps.max(p.lo);
            if p.c == 0.0 || p.hi <= l {
                continue;
            }
            if p.beta > 0.0 {
                let h = p.hi;
                let scale = 2.0 * p.c * h.powf(1.0 - p.beta);
                let t0 = (l / h).sqrt();
                total += scale
                    * integrate(
                        |t| {
                            let w = if p.beta == 0.5 { 1.0 } else { t.powf(1.0 - 2.0 * p.beta) };
                            g(p.sign * h * t * t) * w
                        },
                        t0,
                        1.0,
                        tol,
                    )?
                    .value;
            } else {
                total += p.c * integrate(|a| g(p.sign * a), l, p.hi, tol)?.value;
            }
        }
        Ok(total)
    }

    /// Draws a jump from `μ` restricted to `|u| > ε`.
    pub fn sample_jump(&self, eps: f64, rng: &mut SimRng) -> f64 {
        let pieces = self.pieces();
        let masses: Vec<f64> = pieces.iter().map(|p| p.abs_moment(0.0, eps, f64::INFINITY)).collect();
        let total: f64 = masses.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (p, m) in pieces.iter().zip(&masses) {
            if u < *m || std::ptr::eq(p, pieces.last().unwrap()) {
                return p.sign * p.sample_abs(eps, rng.random::<f64>());
            }
            u -= m;
        }
        unreachable!("pieces are non-empty when total mass is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyOuParams {
    pub a: f64,
    pub measure: LevyMeasure,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-4
}

impl Default for LevyOuParams {
    fn default() -> Self {
        LevyOuParams {
            a: 1.0,
            measure: LevyMeasure::default(),
            eps: default_eps(),
        }
    }
}

/// Truncated-jump simulator for the Lévy-driven OU process.
#[derive(Debug, Clone)]
pub struct LevyOu {
    params: LevyOuParams,
    rate: f64,
    drift: f64,
}

pub fn levy_ou_build(params: &LevyOuParams) -> Result<LevyOu> {
    LevyOu::new(params.clone())
}

const QUAD: Tolerance = Tolerance {
    abs: 1e-14,
    rel: 1e-12,
    max_intervals: 4000,
};

impl LevyOu {
    pub fn new(params: LevyOuParams) -> Result<Self> {
        if !(params.a > 0.0 && params.a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mean reversion a must be > 0, got {}",
                params.a
            )));
        }
        if !(params.eps > 0.0) {
            return Err(Error::InvalidParameter("truncation ε must be > 0".into()));
        }
        params.measure.validate()?;
        let rate = params.measure.mass_above(params.eps);
        if !rate.is_finite() {
            return Err(Error::InvalidParameter("infinite jump activity above ε".into()));
        }
        let drift = -params.measure.signed_moment(params.eps, 1.0);
        Ok(LevyOu { params, rate, drift })
    }

    pub fn params(&self) -> &LevyOuParams {
        &self.params
    }

    /// Intensity of simulated jumps, `μ(|u| > ε)`.
    pub fn jump_rate(&self) -> f64 {
        self.rate
    }

    /// Compensator drift `−∫_{ε<|u|<1} u μ(du)`.
    pub fn compensator_drift(&self) -> f64 {
        self.drift
    }

    /// Bias bound `t ∫_{|u|≤ε} |u| μ(du)` from dropping small jumps.
    pub fn truncation_bias(&self, t: f64) -> f64 {
        t * self.params.measure.abs_moment_below(self.params.eps)
    }

    fn flow_value(&self, x: f64, s: f64) -> f64 {
        let a = self.params.a;
        let c = self.drift / a;
        (x - c) * (-a * s).exp() + c
    }
}

impl ProcessModel for LevyOu {
    type State = f64;

    fn description(&self) -> String {
        format!("Lévy-driven OU, a = {}, ε = {:e}", self.params.a, self.params.eps)
    }

    fn next_event(&self, x: &f64, max_dt: f64, rng: &mut SimRng) -> Result<Step<f64>> {
        if self.rate == 0.0 {
            return Ok(Step {
                dt: max_dt,
                state: self.flow_value(*x, max_dt),
                jump: false,
            });
        }
        let e: f64 = Exp1.sample(rng);
        let dt = e / self.rate;
        if dt >= max_dt {
            return Ok(Step {
                dt: max_dt,
                state: self.flow_value(*x, max_dt),
                jump: false,
            });
        }
        let u = self.params.measure.sample_jump(self.params.eps, rng);
        Ok(Step {
            dt,
            state: self.flow_value(*x, dt) + u,
            jump: true,
        })
    }

    fn flow(&self, x: &f64, elapsed: f64) -> f64 {
        self.flow_value(*x, elapsed)
    }

    fn flow_entry(&self, x: &f64, duration: f64, region: &Region) -> Option<f64> {
        let Region::Intervals(iv) = region else {
            return None;
        };
        let a = self.params.a;
        let c = self.drift / a;
        iv.iter()
            .filter_map(|&(lo, hi)| {
                if *x >= lo && *x <= hi {
                    return Some(0.0);
                }
                // monotone approach towards c
                let edge = if *x > hi { hi } else { lo };
                let ratio = (edge - c) / (*x - c);
                if ratio <= 0.0 || ratio >= 1.0 {
                    return None;
                }
                let s = -ratio.ln() / a;
                (s < duration).then_some(s)
            })
            .min_by(f64::total_cmp)
    }

    fn generator_apply(&self, f: &TestFunction<f64>, x: &f64) -> Result<f64> {
        let x = *x;
        let df = f.derivative_at(x)?;
        let fx = f.eval(&x);
        let jumps = self.params.measure.integrate(
            |u| f.eval(&(x + u)) - fx - if u.abs() < 1.0 { u * df } else { 0.0 },
            0.0,
            QUAD,
        )?;
        Ok(-self.params.a * x * df + jumps)
    }
}

/// `M₁(ξ) = ∫u(e^{ξu} − 1)μ(du)` or `M₂(ξ) = ∫u²e^{ξu}μ(du)`.
pub fn levy_m(params: &LevyOuParams, xi: f64, order: u8) -> Result<f64> {
    match order {
        1 => params.measure.integrate(|u| u * (xi * u).exp_m1(), 0.0, QUAD),
        2 => params.measure.integrate(|u| u * u * (xi * u).exp(), 0.0, QUAD),
        _ => Err(Error::InvalidParameter(format!("order must be 1 or 2, got {order}"))),
    }
}

/// `M₁(v)/v`, continuous through `v = 0`.
fn m1_over_v(params: &LevyOuParams, v: f64) -> Result<f64> {
    if v == 0.0 {
        return levy_m(params, 0.0, 2);
    }
    params.measure.integrate(|u| u * (v * u).exp_m1() / v, 0.0, QUAD)
}

/// `𝓜_k(ξ) = ∫₀^∞ M_k(e^{−as}ξ) ds`.
///
/// For `k = 1` the substitution `v = e^{−as}ξ` gives `(1/a)∫₀^ξ M₁(v)/v dv`.
/// For `k = 2` the integrand tends to `M₂(0)` as `s → ∞`, so the integral is
/// finite only for the zero measure.
pub fn levy_script_m(params: &LevyOuParams, xi: f64, order: u8) -> Result<f64> {
    match order {
        1 => {
            if xi == 0.0 {
                return Ok(0.0);
            }
            let inner = |v: f64| m1_over_v(params, v).unwrap_or(f64::NAN);
            Ok(integrate(
                inner,
                0.0,
                xi,
                Tolerance {
                    abs: 1e-13,
                    rel: 1e-12,
                    max_intervals: 200,
                },
            )?
            .value
                / params.a)
        }
        2 => {
            let m2 = levy_m(params, 0.0, 2)?;
            if m2 > 0.0 {
                Err(Error::Divergent(format!(
                    "𝓜₂ diverges: M₂(e^{{-as}}ξ) → M₂(0) = {m2} as s → ∞"
                )))
            } else {
                Ok(0.0)
            }
        }
        _ => Err(Error::InvalidParameter(format!("order must be 1 or 2, got {order}"))),
    }
}

/// Root `ξ(x)` of `𝓜₁(ξ) = x`.
pub fn levy_xi_of_x(params: &LevyOuParams, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    solve_increasing(|xi| levy_script_m(params, xi, 1), x, 1.0, 1e-10, 1000)
}

/// Lévy exponent `ψ(v) = ∫(e^{ivu} − 1 − ivu·1_{|u|<1})μ(du)` divided by `v`.
fn psi_over_v(params: &LevyOuParams, v: f64) -> Result<Complex<f64>> {
    if v == 0.0 {
        return Ok(Complex::new(0.0, 0.0));
    }
    let m = &params.measure;
    let re = m.integrate(
        |u| {
            let s = (0.5 * v * u).sin();
            -2.0 * s * s / v
        },
        0.0,
        QUAD,
    )?;
    if m.is_symmetric() {
        return Ok(Complex::new(re, 0.0));
    }
    let im = m.integrate(
        |u| {
            let lin = if u.abs() < 1.0 { v * u } else { 0.0 };
            ((v * u).sin() - lin) / v
        },
        0.0,
        QUAD,
    )?;
    Ok(Complex::new(re, im))
}

/// Lévy exponent `ψ(v)`.
pub fn levy_exponent(params: &LevyOuParams, v: f64) -> Result<Complex<f64>> {
    Ok(psi_over_v(params, v)? * v)
}

/// Stationary characteristic function `exp((1/a)∫₀^ξ ψ(v)/v dv)`.
pub fn stationary_cf(params: &LevyOuParams, xi: f64) -> Result<Complex<f64>> {
    if xi == 0.0 {
        return Ok(Complex::new(1.0, 0.0));
    }
    let re = integrate(
        |v| psi_over_v(params, v).map(|z| z.re).unwrap_or(f64::NAN),
        0.0,
        xi,
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 400,
        },
    )?
    .value;
    let im = integrate(
        |v| psi_over_v(params, v).map(|z| z.im).unwrap_or(f64::NAN),
        0.0,
        xi,
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 400,
        },
    )?
    .value;
    Ok((Complex::new(re, im) / params.a).exp())
}

/// Density sampled on a uniform grid, cubic interpolation in between and
/// zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn from_fn(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        GridDensity {
            x0,
            h,
            values: (0..n).map(|i| f(x0 + i as f64 * h)).collect(),
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    fn at(&self, i: isize) -> f64 {
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// Catmull–Rom interpolation.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        if s < -1.0 || s > self.values.len() as f64 {
            return 0.0;
        }
        let i = s.floor() as isize;
        let t = s - i as f64;
        let (p0, p1, p2, p3) = (self.at(i - 1), self.at(i), self.at(i + 1), self.at(i + 2));
        p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }

    pub fn total_mass(&self) -> f64 {
        // Simpson on the grid (trapezoid on an odd tail cell)
        let n = self.values.len();
        let mut s = 0.0;
        let pairs = (n - 1) / 2;
        for k in 0..pairs {
            let i = 2 * k;
            s += self.values[i] + 4.0 * self.values[i + 1] + self.values[i + 2];
        }
        let mut total = s * self.h / 3.0;
        if (n - 1) % 2 == 1 {
            total += 0.5 * self.h * (self.values[n - 2] + self.values[n - 1]);
        }
        total
    }
}

/// Stationary density by Fourier inversion of [`stationary_cf`] on a grid.
///
/// The characteristic function is tabulated with step `dxi` until its modulus
/// drops below `1e-9` (or `xi_max`), then inverted by Simpson's rule.
pub fn stationary_density(
    params: &LevyOuParams,
    x0: f64,
    h: f64,
    n: usize,
    dxi: f64,
    xi_max: f64,
) -> Result<GridDensity> {
    let (gz, gw) = gauss_legendre(2);
    let cells = (xi_max / dxi).ceil() as usize;
    let cell = |i: usize| -> Result<Complex<f64>> {
        let (lo, hi) = (i as f64 * dxi, (i + 1) as f64 * dxi);
        let mut s = Complex::new(0.0, 0.0);
        for (z, w) in gz.iter().zip(&gw) {
            let v = 0.5 * (lo + hi) + 0.5 * (hi - lo) * z;
            s += psi_over_v(params, v)? * *w;
        }
        Ok(s * (0.5 * (hi - lo)))
    };
    let mut cf = vec![Complex::new(1.0, 0.0)];
    let mut acc = Complex::new(0.0, 0.0);
    let batch = 512;
    'outer: for start in (0..cells).step_by(batch) {
        let len = batch.min(cells - start);
        for ci in par_map(len, |j| cell(start + j)) {
            acc += ci?;
            let z = (acc / params.a).exp();
            cf.push(z);
            if z.norm() < 1e-9 && cf.len() % 2 == 1 {
                break 'outer;
            }
        }
    }
    let m = cf.len();
    let simpson = |k: usize| -> f64 {
        if k == 0 || k == m - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let values = par_map(n, |i| {
        let x = x0 + i as f64 * h;
        let mut s = 0.0;
        for (k, z) in cf.iter().enumerate() {
            let xi = k as f64 * dxi;
            let (sn, cs) = (xi * x).sin_cos();
            // Re[φ(ξ)e^{−iξx}]
            s += simpson(k) * (z.re * cs + z.im * sn);
        }
        (s * dxi / 3.0 / std::f64::consts::PI).max(0.0)
    });
    Ok(GridDensity { x0, h, values })
}

/// Pointwise residual of the stationary equation
/// `axρ′ + aρ + bρ′ + ∫[ρ(x−u) − ρ(x)]μ(du) = 0`, `b = ∫_{|u|<1}uμ(du)`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualProfile {
    pub grid: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup_norm: f64,
    pub l1_norm: f64,
}

pub fn ou_invariant_residual(params: &LevyOuParams, rho: &GridDensity, grid: &[f64]) -> Result<ResidualProfile> {
    let support = params.measure.support_bound();
    if rho.h > support / 4.0 {
        return Err(Error::Resolution {
            spacing: rho.h,
            support,
        });
    }
    let a = params.a;
    let b = params.measure.signed_moment(0.0, 1.0);
    let h = rho.h;
    let residual = par_map(grid.len(), |i| {
        let x = grid[i];
        let r = rho.eval(x);
        let d = (rho.eval(x + h) - rho.eval(x - h)) / (2.0 * h);
        let conv = params
            .measure
            .integrate(
                |u| rho.eval(x - u) - r,
                0.0,
                Tolerance {
                    abs: 1e-12,
                    rel: 1e-9,
                    max_intervals: 2000,
                },
            )
            .unwrap_or(f64::NAN);
        a * x * d + a * r + b * d + conv
    });
    if residual.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFiniteEvaluation {
            state: "invariant-equation residual".into(),
        });
    }
    let sup_norm = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let l1_norm = if grid.len() > 1 {
        residual.iter().map(|r| r.abs()).sum::<f64>() * (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    } else {
        0.0
    };
    Ok(ResidualProfile {
        grid: grid.to_vec(),
        residual,
        sup_norm,
        l1_norm,
    })
}

/// `C¹` Lyapunov function: constant `R + ½` on `[−R, R]`, quadratic blend on
/// `R ≤ |x| ≤ R + 1`, and `|x|` beyond. `R = inner + σ_*`.
pub fn lyapunov_phi(params: &LevyOuParams, inner: f64) -> TestFunction<f64> {
    let r = inner + params.measure.support_bound();
    let value = move |x: f64| {
        let z = x.abs();
        if z <= r {
            r + 0.5
        } else if z <= r + 1.0 {
            r + 0.5 + 0.5 * (z - r) * (z - r)
        } else {
            z
        }
    };
    let slope = move |x: f64| {
        let z = x.abs();
        let s = if z <= r {
            0.0
        } else if z <= r + 1.0 {
            z - r
        } else {
            1.0
        };
        s * x.signum()
    };
    TestFunction::new(move |x: &f64| value(*x)).with_derivative(move |x: &f64| slope(*x))
}

/// Right side of the dual drift bound, `|x|[a − (1 − δ)x⁻¹M₁(ξ(x))]`.
pub fn dual_drift_bound(params: &LevyOuParams, x: f64, delta: f64) -> Result<f64> {
    let xi = levy_xi_of_x(params, x)?;
    let m1 = levy_m(params, xi, 1)?;
    Ok(x.abs() * (params.a - (1.0 - delta) * m1 / x))
}
