//! Simulation and estimation toolkit for ergodicity of Markov processes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod estimators;
pub mod models;
pub mod numerics;
pub mod process;
pub mod rng;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::Verdict;
pub use models::FiniteChain;
pub use process::{ProcessModel, Region, State, TestFunction, Trajectory};
pub use scenarios::{run_scenario, ScenarioConfig, ScenarioId, ScenarioReport};
