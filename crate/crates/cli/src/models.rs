//! Model selection for the single-model subcommands.

use std::path::Path;

use clap::ValueEnum;
use ergodyn::estimators::Bins;
use ergodyn::models::{lyapunov_phi, ornstein_uhlenbeck, Diffusion, FiniteChain, LevyOu, Pdmp, PdmpParams};
use ergodyn::scenarios::{load_chain, ModelConfig};
use ergodyn::{Error, ProcessModel, Result, ScenarioConfig, ScenarioId, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Chain,
    Pdmp,
    LevyOu,
    Ou,
}

impl ModelKind {
    fn for_scenario(id: ScenarioId) -> ModelKind {
        match id {
            ScenarioId::Pdmp => ModelKind::Pdmp,
            ScenarioId::LevyOu => ModelKind::LevyOu,
            ScenarioId::Diffusion => ModelKind::Ou,
            ScenarioId::Oracle | ScenarioId::Custom => ModelKind::Chain,
        }
    }
}

pub enum AnyModel {
    Chain(FiniteChain),
    Pdmp(Pdmp),
    LevyOu(LevyOu),
    Ou(Diffusion),
}

/// Runs `$body` with `$m` bound to the concrete model.
macro_rules! with_model {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            $crate::models::AnyModel::Chain($m) => $body,
            $crate::models::AnyModel::Pdmp($m) => $body,
            $crate::models::AnyModel::LevyOu($m) => $body,
            $crate::models::AnyModel::Ou($m) => $body,
        }
    };
}
pub(crate) use with_model;

/// Builds the model named by `kind`, falling back to the kind implied by the
/// config's scenario. A chain comes from `chain_file` or the config.
pub fn build(kind: Option<ModelKind>, chain_file: Option<&Path>, cfg: Option<&ScenarioConfig>) -> Result<AnyModel> {
    let kind = match (kind, cfg, chain_file) {
        (Some(k), _, _) => k,
        (None, _, Some(_)) => ModelKind::Chain,
        (None, Some(c), None) => ModelKind::for_scenario(c.scenario),
        (None, None, None) => return Err(Error::Config("choose a model with --model or --config".into())),
    };
    let defaults = ModelConfig::default();
    let mc = cfg.map(|c| &c.model).unwrap_or(&defaults);
    Ok(match kind {
        ModelKind::Chain => AnyModel::Chain(match (chain_file, cfg) {
            (Some(path), _) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                FiniteChain::from_text(&text)?
            }
            (None, Some(c)) => load_chain(c)?,
            (None, None) => {
                return Err(Error::Config(
                    "a chain needs --chain or a config with a chain section".into(),
                ))
            }
        }),
        ModelKind::Pdmp => AnyModel::Pdmp(Pdmp::new(&PdmpParams::new(mc.pdmp.ladder.clone(), mc.pdmp.p))?),
        ModelKind::LevyOu => AnyModel::LevyOu(LevyOu::new(mc.levy_ou.clone())?),
        ModelKind::Ou => AnyModel::Ou(ornstein_uhlenbeck(mc.diffusion.theta, mc.diffusion.b)?),
    })
}

/// What the subcommands need beyond [`ProcessModel`].
pub trait CliModel: ProcessModel {
    fn state(&self, x: f64) -> Result<Self::State>;
    /// Default weight of the model family.
    fn weight(&self, mc: &ModelConfig) -> TestFunction<Self::State>;
    fn bins(&self, edges: Option<(f64, f64, usize)>) -> Bins;
}

fn real(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("state {x} is not finite")))
    }
}

fn edges_or(edges: Option<(f64, f64, usize)>, lo: f64, hi: f64) -> Bins {
    let (lo, hi, n) = edges.unwrap_or((lo, hi, 100));
    Bins::uniform(lo, hi, n)
}

impl CliModel for FiniteChain {
    fn state(&self, x: f64) -> Result<usize> {
        if x >= 0.0 && x.fract() == 0.0 && (x as usize) < self.len() {
            Ok(x as usize)
        } else {
            Err(Error::Config(format!("state {x} is not an index below {}", self.len())))
        }
    }
    fn weight(&self, _: &ModelConfig) -> TestFunction<usize> {
        TestFunction::constant(1.0)
    }
    fn bins(&self, _: Option<(f64, f64, usize)>) -> Bins {
        Bins::States(self.len())
    }
}

impl CliModel for Pdmp {
    fn state(&self, x: f64) -> Result<f64> {
        real(x)
    }
    fn weight(&self, mc: &ModelConfig) -> TestFunction<f64> {
        let r = mc.pdmp.phi_rate;
        TestFunction::new(move |x: &f64| (r * x).exp()).with_derivative(move |x: &f64| r * (r * x).exp())
    }
    fn bins(&self, edges: Option<(f64, f64, usize)>) -> Bins {
        edges_or(edges, 0.0, 10.0)
    }
}

impl CliModel for LevyOu {
    fn state(&self, x: f64) -> Result<f64> {
        real(x)
    }
    fn weight(&self, mc: &ModelConfig) -> TestFunction<f64> {
        lyapunov_phi(&mc.levy_ou, 1.0)
    }
    fn bins(&self, edges: Option<(f64, f64, usize)>) -> Bins {
        edges_or(edges, -5.0, 5.0)
    }
}

impl CliModel for Diffusion {
    fn state(&self, x: f64) -> Result<f64> {
        real(x)
    }
    fn weight(&self, _: &ModelConfig) -> TestFunction<f64> {
        TestFunction::new(|x: &f64| 1.0 + x * x).with_derivative(|x: &f64| 2.0 * x)
    }
    fn bins(&self, edges: Option<(f64, f64, usize)>) -> Bins {
        edges_or(edges, -5.0, 5.0)
    }
}
