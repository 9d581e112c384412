//! Numerical kernels: quadrature, root finding, dense linear algebra and
//! fitting statistics.

pub mod linalg;
pub mod quadrature;
pub mod roots;
pub mod stats;

pub use quadrature::{integrate, integrate_to_infinity, Quadrature, Tolerance};
pub use stats::{fit_exponential, mean_se, DecayPoint, RateFit};
