//! Weighted norms, growth-bound fits, and the exact spectral layer for
//! finite chains: mean-zero spectrum, symmetrized generator, Poincaré
//! constant and exponential hitting moments.

mod chain;
mod growth;
mod norms;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use chain::{
    check_hitting_moment_bound, dirichlet_form, finite_chain_exp_moment, finite_chain_spectrum, inner_pi,
    poincare_constant, symmetrize_generator, HittingBoundReport, HittingBoundViolation, PoincareConstant,
    HITTING_BOUND_MAX_STATES,
};
pub use growth::{growth_bound_fit, GrowthBoundFit, GrowthOptions, NormPoint};
pub use norms::{weighted_norm, WeightedNormContext, WeightedNorms};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Spectrum of the generator on mean-zero functions, by decreasing
    /// real part.
    pub eigenvalues: Vec<Eigenvalue>,
    /// `−max Re λ` over [`SpectralReport::eigenvalues`].
    pub spectral_gap: f64,
    /// Gap of the symmetrized generator.
    pub poincare_gap: f64,
    pub poincare_constant: f64,
    pub growth_bound_fits: Vec<GrowthBoundFit>,
    /// Two eigenvalues nearly coincide, so the eigenbasis may be
    /// ill-conditioned.
    pub eigencondition_warning: bool,
}

impl SpectralReport {
    pub fn write_eigenvalues_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["re", "im"])?;
        for z in &self.eigenvalues {
            w.serialize((z.re, z.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
