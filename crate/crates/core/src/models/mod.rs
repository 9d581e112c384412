//! Concrete process models.

pub mod chain;
pub mod pdmp;
pub mod shape;

pub use chain::{
    birth_death_chain, cycle_chain, finite_chain_build, finite_chain_kernel, random_chain, random_reversible_chain,
    two_state, FiniteChain,
};
pub use pdmp::{pdmp_build, pdmp_dual_build, Ladder, Pdmp, PdmpDual, PdmpParams, PiecewiseDensity};
pub use shape::Shape;
pub mod levy_ou;
pub use levy_ou::{
    dual_drift_bound, levy_exponent, levy_m, levy_ou_build, levy_script_m, levy_xi_of_x, lyapunov_phi,
    ou_invariant_residual, stationary_cf, stationary_density, GridDensity, LevyMeasure, LevyOu, LevyOuParams,
};
pub mod diffusion;
pub use diffusion::{diffusion_build, ornstein_uhlenbeck, Diffusion, OuExact};
