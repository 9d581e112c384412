use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Eigenvalue, SpectralReport};
use crate::error::{Error, Result};
use crate::models::FiniteChain;
use crate::numerics::linalg::{eigenvalues, symmetric_eigenvalues};

/// Eigenvalues of `Q` on the mean-zero subspace, read off the deflated
/// matrix `Q + s·1πᵀ`, which moves the trivial eigenvalue to `s` and leaves
/// the rest in place.
pub fn finite_chain_spectrum(chain: &FiniteChain) -> Result<SpectralReport> {
    let q = chain.generator();
    let n = chain.len();
    let pi = chain.pi();
    let radius = (0..n).map(|i| 2.0 * q[(i, i)].abs()).fold(0.0, f64::max);
    let s = 1.0 + 2.0 * radius;
    let shifted = DMatrix::from_fn(n, n, |i, j| q[(i, j)] + s * pi[j]);
    let mut ev = eigenvalues(&shifted);
    let k = ev
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - s).norm().total_cmp(&(b.1 - s).norm()))
        .map(|(k, _)| k)
        .unwrap();
    ev.remove(k);
    let scale = radius.max(1.0);
    let close = ev
        .iter()
        .enumerate()
        .any(|(i, a)| ev.iter().skip(i + 1).any(|b| (a - b).norm() < 1e-7 * scale));
    let spectral_gap = ev.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    let pc = poincare_constant(chain)?;
    Ok(SpectralReport {
        eigenvalues: ev.iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect(),
        spectral_gap: if n == 1 { f64::INFINITY } else { spectral_gap },
        poincare_gap: pc.gamma,
        poincare_constant: pc.c,
        growth_bound_fits: Vec::new(),
        eigencondition_warning: close,
    })
}

/// `Q⋄ = ½(Q + Q*)` with `Q*` the π-adjoint.
pub fn symmetrize_generator(chain: &FiniteChain) -> Result<FiniteChain> {
    let dual = chain.dual()?;
    let q = (chain.generator() + dual.generator()) * 0.5;
    FiniteChain::new(q, Some(chain.labels().to_vec()))
}

/// Poincaré rate `γ` (gap of the symmetrized generator) and constant
/// `c = 1/γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareConstant {
    pub gamma: f64,
    pub c: f64,
}

pub fn poincare_constant(chain: &FiniteChain) -> Result<PoincareConstant> {
    let n = chain.len();
    if n == 1 {
        return Ok(PoincareConstant {
            gamma: f64::INFINITY,
            c: 0.0,
        });
    }
    let sym = symmetrize_generator(chain)?;
    let q = sym.generator();
    let root: Vec<f64> = chain.pi().iter().map(|p| p.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| root[i] * q[(i, j)] / root[j]);
    let m = (&m + m.transpose()) * 0.5;
    let ev = symmetric_eigenvalues(&m);
    let gamma = -ev[1];
    Ok(PoincareConstant { gamma, c: 1.0 / gamma })
}

/// `(f, g)_π = Σ π(x) f(x) g(x)`.
pub fn inner_pi(chain: &FiniteChain, f: &[f64], g: &[f64]) -> f64 {
    chain.pi().iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
}

/// `𝓔(f, g) = −(Qf, g)_π`.
pub fn dirichlet_form(chain: &FiniteChain, f: &[f64], g: &[f64]) -> f64 {
    let qf = chain.generator() * DVector::from_column_slice(f);
    -inner_pi(chain, qf.as_slice(), g)
}

/// `h(x) = E_x e^{ατ_K}` from the linear system on the complement of `K`.
/// For `α < 0` this is the Laplace transform `E_x e^{−|α|τ_K}`.
pub fn finite_chain_exp_moment(chain: &FiniteChain, k: &[usize], alpha: f64) -> Result<Vec<f64>> {
    let n = chain.len();
    if k.is_empty() || k.iter().any(|&s| s >= n) {
        return Err(Error::InvalidParameter(
            "K must be a nonempty set of chain states".into(),
        ));
    }
    let comp: Vec<usize> = (0..n).filter(|s| !k.contains(s)).collect();
    let mut h = vec![1.0; n];
    if comp.is_empty() {
        return Ok(h);
    }
    let q = chain.generator();
    let m = comp.len();
    let qcc = DMatrix::from_fn(m, m, |i, j| q[(comp[i], comp[j])]);
    let abscissa = exit_abscissa(&qcc);
    if alpha >= abscissa {
        return Err(Error::MomentDivergence { alpha, abscissa });
    }
    let a = &qcc + DMatrix::identity(m, m) * alpha;
    let rhs = DVector::from_fn(m, |i, _| -k.iter().map(|&s| q[(comp[i], s)]).sum::<f64>());
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("singular hitting system".into()))?;
    for (i, &s) in comp.iter().enumerate() {
        h[s] = sol[i];
    }
    Ok(h)
}

/// Smallest real part of the spectrum of `−Q_CC`: the exponential rate of
/// `P_x(τ_K > t)`.
fn exit_abscissa(qcc: &DMatrix<f64>) -> f64 {
    eigenvalues(qcc).first().map(|z| -z.re).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingBoundViolation {
    pub subset: Vec<usize>,
    pub alpha: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingBoundReport {
    pub gamma: f64,
    pub subsets: usize,
    /// Smallest `1 − α/abscissa` over subsets; positive means every linear
    /// solve was below the pole.
    pub min_margin: f64,
    pub max_moment: f64,
    pub violations: Vec<HittingBoundViolation>,
}

/// Largest chain handled by [`check_hitting_moment_bound`].
pub const HITTING_BOUND_MAX_STATES: usize = 12;

/// For every nonempty proper subset `K`, solves for `E_π e^{ατ_K}` at
/// `α = 0.9·γπ(K)/2` with `γ` the Poincaré rate.
pub fn check_hitting_moment_bound(chain: &FiniteChain) -> Result<HittingBoundReport> {
    let n = chain.len();
    if n > HITTING_BOUND_MAX_STATES {
        return Err(Error::InvalidParameter(format!(
            "subset enumeration is limited to {HITTING_BOUND_MAX_STATES} states, got {n}"
        )));
    }
    let gamma = poincare_constant(chain)?.gamma;
    let pi = chain.pi();
    let q = chain.generator();
    let mut report = HittingBoundReport {
        gamma,
        subsets: 0,
        min_margin: f64::INFINITY,
        max_moment: 1.0,
        violations: Vec::new(),
    };
    for mask in 1u32..(1 << n) - 1 {
        let k: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mass: f64 = k.iter().map(|&i| pi[i]).sum();
        let alpha = 0.9 * gamma * mass / 2.0;
        report.subsets += 1;
        let comp: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        let qcc = DMatrix::from_fn(comp.len(), comp.len(), |i, j| q[(comp[i], comp[j])]);
        report.min_margin = report.min_margin.min(1.0 - alpha / exit_abscissa(&qcc));
        match finite_chain_exp_moment(chain, &k, alpha) {
            Ok(h) => {
                let m: f64 = h.iter().zip(pi.iter()).map(|(a, b)| a * b).sum();
                if m.is_finite() && h.iter().all(|&v| v >= 1.0 - 1e-12) {
                    report.max_moment = report.max_moment.max(m);
                } else {
                    report.violations.push(HittingBoundViolation {
                        subset: k,
                        alpha,
                        reason: format!("invalid moment {m}"),
                    });
                }
            }
            Err(e) => report.violations.push(HittingBoundViolation {
                subset: k,
                alpha,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}
