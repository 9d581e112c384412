//! Flow clock `Φ(x) = ∫₁ˣ dy/a(y)` and hazard `Λ(x) = ∫₁ˣ θ(y)/a(y) dy`
//! for the piecewise-deterministic model, tabulated once per shape.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss_legendre;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const FLOOR: f64 = 1e-12;
const LOG_NODES: usize = 240;
const LIN_NODES: usize = 400;
const KNEE: f64 = 1e-2;

/// Speed `a` and jump switch `θ` on `[0, 1]`, with `a = 1`, `θ = 0` beyond.
#[derive(Clone)]
pub struct Shape {
    a: ScalarFn,
    theta: ScalarFn,
    nodes: Vec<f64>,
    clock: Vec<f64>,
    hazard: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
    name: String,
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Shape").field("name", &self.name).finish()
    }
}

/// `a(x) = x(2 − x)` on `[0, 1]`: zero at the origin, `C¹` join with 1.
pub fn default_speed(x: f64) -> f64 {
    if x >= 1.0 {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        x * (2.0 - x)
    }
}

/// `θ = 1` below ½, `0` above 1, cubic smoothstep in between.
pub fn default_switch(x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let s = 2.0 * x - 1.0;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

impl Default for Shape {
    fn default() -> Self {
        Shape::new(Arc::new(default_speed), Arc::new(default_switch), "smooth default").expect("default shape is valid")
    }
}

impl Shape {
    pub fn new(a: ScalarFn, theta: ScalarFn, name: &str) -> Result<Self> {
        for i in 0..=400 {
            let x = i as f64 / 200.0;
            let (ax, tx) = (a(x), theta(x));
            if !(0.0..=1.0).contains(&ax) || !(0.0..=1.0).contains(&tx) {
                return Err(Error::InvalidParameter(format!("a or θ outside [0, 1] at x = {x}")));
            }
            if x > 0.0 && ax <= 0.0 {
                return Err(Error::InvalidParameter(format!("a vanishes at x = {x} > 0")));
            }
            if x >= 1.0 && (ax != 1.0 || tx != 0.0) {
                return Err(Error::InvalidParameter(format!("need a = 1, θ = 0 at x = {x}")));
            }
            if x <= 0.5 && tx != 1.0 {
                return Err(Error::InvalidParameter(format!("need θ = 1 at x = {x}")));
            }
        }
        if a(0.0) != 0.0 {
            return Err(Error::InvalidParameter("need a(0) = 0".into()));
        }
        let mut nodes = Vec::with_capacity(LOG_NODES + LIN_NODES + 1);
        let ratio = (KNEE / FLOOR).ln() / LOG_NODES as f64;
        for i in 0..LOG_NODES {
            nodes.push(FLOOR * (ratio * i as f64).exp());
        }
        for i in 0..=LIN_NODES {
            nodes.push(KNEE + (1.0 - KNEE) * i as f64 / LIN_NODES as f64);
        }
        let mut shape = Shape {
            a,
            theta,
            clock: vec![0.0; nodes.len()],
            hazard: vec![0.0; nodes.len()],
            nodes,
            gl: gauss_legendre(10),
            name: name.to_string(),
        };
        for i in (0..shape.nodes.len() - 1).rev() {
            let (lo, hi) = (shape.nodes[i], shape.nodes[i + 1]);
            shape.clock[i] = shape.clock[i + 1] - shape.cell(lo, hi, false);
            shape.hazard[i] = shape.hazard[i + 1] - shape.cell(lo, hi, true);
        }
        Ok(shape)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    pub fn theta(&self, x: f64) -> f64 {
        (self.theta)(x)
    }

    fn cell(&self, lo: f64, hi: f64, weighted: bool) -> f64 {
        let (z, w) = &self.gl;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        z.iter()
            .zip(w)
            .map(|(z, w)| {
                let y = mid + half * z;
                let g = 1.0 / self.a(y);
                w * if weighted { self.theta(y) * g } else { g }
            })
            .sum::<f64>()
            * half
    }

    fn cell_index(&self, x: f64) -> usize {
        self.nodes
            .partition_point(|&n| n <= x)
            .saturating_sub(1)
            .min(self.nodes.len() - 2)
    }

    fn near_zero_slope(&self) -> f64 {
        FLOOR / self.a(FLOOR)
    }

    /// `Φ(x)`; `−∞` at the origin.
    pub fn clock(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return x - 1.0;
        }
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if x < FLOOR {
            return self.clock[0] + self.near_zero_slope() * (x / FLOOR).ln();
        }
        let i = self.cell_index(x);
        self.clock[i] + self.cell(self.nodes[i], x, false)
    }

    /// `Λ(x)`; zero on `[1, ∞)`.
    pub fn hazard(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 0.0;
        }
        if x <= 0.0 {
            return if self.theta(FLOOR) > 0.0 {
                f64::NEG_INFINITY
            } else {
                self.hazard[0]
            };
        }
        if x < FLOOR {
            return self.hazard[0] + self.theta(FLOOR) * self.near_zero_slope() * (x / FLOOR).ln();
        }
        let i = self.cell_index(x);
        self.hazard[i] + self.cell(self.nodes[i], x, true)
    }

    /// Inverse of `Φ`.
    pub fn clock_inv(&self, v: f64) -> f64 {
        if v >= 0.0 {
            return 1.0 + v;
        }
        if v < self.clock[0] {
            return FLOOR * ((v - self.clock[0]) / self.near_zero_slope()).exp();
        }
        let i = self.clock.partition_point(|&c| c <= v).saturating_sub(1);
        self.invert(v, i, |x| self.clock(x), |x| 1.0 / self.a(x))
    }

    /// Smallest `x` with `Λ(x) = v`, for `v ≤ 0`.
    pub fn hazard_inv(&self, v: f64) -> f64 {
        if v >= 0.0 {
            let i = self.hazard.partition_point(|&h| h < 0.0);
            return self.nodes[i.min(self.nodes.len() - 1)].min(1.0);
        }
        if v < self.hazard[0] {
            let slope = self.theta(FLOOR) * self.near_zero_slope();
            return FLOOR * ((v - self.hazard[0]) / slope).exp();
        }
        let i = self.hazard.partition_point(|&h| h < v).saturating_sub(1);
        self.invert(v, i, |x| self.hazard(x), |x| self.theta(x) / self.a(x))
    }

    /// Safeguarded Newton solve of `g(x) = v` inside table cell `i`.
    fn invert(&self, v: f64, i: usize, g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[(i + 1).min(self.nodes.len() - 1)]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let r = g(x) - v;
            if r == 0.0 {
                return x;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = dg(x);
            if d > 0.0 && (r / d).abs() <= 1e-15 * x {
                return x - r / d;
            }
            let newton = x - r / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        x
    }

    /// Position after following `ẋ = −a(x)` for time `s`.
    pub fn flow_down(&self, x: f64, s: f64) -> f64 {
        if x - s >= 1.0 {
            return x - s;
        }
        if s == 0.0 {
            return x;
        }
        self.clock_inv(self.clock(x) - s)
    }

    /// Position after following `ẋ = +a(x)` for time `s`.
    pub fn flow_up(&self, x: f64, s: f64) -> f64 {
        if x >= 1.0 {
            return x + s;
        }
        if s == 0.0 {
            return x;
        }
        self.clock_inv(self.clock(x) + s)
    }
}
