use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FiniteChain;

/// A discrete probability measure with a weight `φ ≥ 1` and an exponent
/// pair `1/p + 1/q = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormContext<S> {
    pub support: Vec<S>,
    pub pi: Vec<f64>,
    /// `φ` on the support.
    pub phi: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

impl<S> WeightedNormContext<S> {
    pub fn new(support: Vec<S>, pi: Vec<f64>, phi: Vec<f64>, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
        }
        if support.is_empty() || pi.len() != support.len() || phi.len() != support.len() {
            return Err(Error::InvalidParameter(
                "support, weights and phi must share a nonzero length".into(),
            ));
        }
        if pi.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter("negative quadrature weight".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        if let Some(v) = phi.iter().find(|&&v| !(v >= 1.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must be finite and ≥ 1, got {v}")));
        }
        let q = p / (p - 1.0);
        Ok(WeightedNormContext { support, pi, phi, p, q })
    }

    /// `∫φ dπ`.
    pub fn phi_mass(&self) -> f64 {
        self.pi.iter().zip(&self.phi).map(|(w, f)| w * f).sum()
    }

    /// `∫f dπ`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.pi.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `f − ∫f dπ`.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let m = self.mean(f);
        f.iter().map(|v| v - m).collect()
    }
}

impl WeightedNormContext<usize> {
    /// The invariant law of a chain as the measure.
    pub fn for_chain(chain: &FiniteChain, phi: Vec<f64>, p: f64) -> Result<Self> {
        Self::new((0..chain.len()).collect(), chain.pi().iter().copied().collect(), phi, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    /// `(∫|f/φ^{1/q}|^p dπ)^{1/p}`.
    pub primal: f64,
    /// `(∫|f|^q φ dπ)^{1/q}`.
    pub dual: f64,
    /// `∫|f| dπ`.
    pub l1: f64,
    /// `‖f‖_{L₁} ≤ ‖f‖_{p,φ}·‖φ‖_{L₁}^{1/q}`.
    pub embedding_holds: bool,
}

/// Weighted norm of `f` given by its values on the support.
pub fn weighted_norm<S>(ctx: &WeightedNormContext<S>, f: &[f64]) -> Result<WeightedNorms> {
    if f.len() != ctx.support.len() {
        return Err(Error::InvalidParameter("f must be given on the support".into()));
    }
    let (p, q) = (ctx.p, ctx.q);
    let mut primal = 0.0;
    let mut dual = 0.0;
    let mut l1 = 0.0;
    for ((w, phi), v) in ctx.pi.iter().zip(&ctx.phi).zip(f) {
        primal += w * (v.abs() / phi.powf(1.0 / q)).powf(p);
        dual += w * v.abs().powf(q) * phi;
        l1 += w * v.abs();
    }
    let primal = primal.powf(1.0 / p);
    let bound = primal * ctx.phi_mass().powf(1.0 / q);
    Ok(WeightedNorms {
        primal,
        dual: dual.powf(1.0 / q),
        l1,
        embedding_holds: l1 <= bound * (1.0 + 1e-12) + 1e-300,
    })
}
