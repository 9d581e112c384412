//! Config-driven scenario runs: each scenario checks a set of claims about
//! one model family and returns a machine-checkable report.

mod diffusion;
mod levy;
mod oracle;
mod pdmp;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::Verdict;
use crate::models::{Ladder, LevyOuParams};

pub use diffusion::scenario_diffusion;
pub use levy::scenario_levy_ou;
pub use oracle::{load_chain, scenario_custom, scenario_oracle};
pub use pdmp::scenario_pdmp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Pdmp,
    LevyOu,
    Diffusion,
    Oracle,
    Custom,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Pdmp => "pdmp",
            ScenarioId::LevyOu => "levy_ou",
            ScenarioId::Diffusion => "diffusion",
            ScenarioId::Oracle => "oracle",
            ScenarioId::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdmpConfig {
    pub p: f64,
    /// Rate of the weight `φ(x) = e^{rate·x}`.
    pub phi_rate: f64,
    pub ladder: Ladder,
    /// Ladder with unbounded gaps used as the contrast case.
    pub contrast_ladder: Ladder,
}

impl Default for PdmpConfig {
    fn default() -> Self {
        PdmpConfig {
            p: 0.5,
            phi_rate: 0.1,
            ladder: Ladder::Arithmetic { first: 1.0, gap: 1.0 },
            contrast_ladder: Ladder::Power { exponent: 2.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    /// Drift `−θx`.
    pub theta: f64,
    /// Diffusion coefficient `B`.
    pub b: f64,
    /// Half-width of the target interval `K = [−r, r]`.
    pub region_radius: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            theta: 1.0,
            b: 2.0,
            region_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Generator rows.
    pub generator: Option<Vec<Vec<f64>>>,
    /// Whitespace-separated generator file, relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub pdmp: PdmpConfig,
    pub levy_ou: LevyOuParams,
    pub diffusion: DiffusionConfig,
    pub chain: ChainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Paths per estimate in the finite-chain oracle battery.
    pub n_paths: usize,
    /// Coupling paths per starting point in decay fits.
    pub coupling_paths: usize,
    /// Paths per quadrature node in growth-bound fits.
    pub semigroup_paths: usize,
    /// Paths per start for hitting times and condition checks.
    pub hitting_paths: usize,
    /// Censoring horizon of hitting times.
    pub hitting_horizon: f64,
    /// Length of the single path behind occupation histograms.
    pub occupation_horizon: f64,
    pub stationary_samples: usize,
    pub gluing_runs: usize,
    pub oracle_chains: usize,
    pub reversible_chains: usize,
    pub hitting_bound_chains: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            n_paths: 100_000,
            coupling_paths: 4000,
            semigroup_paths: 2000,
            hitting_paths: 4000,
            hitting_horizon: 200.0,
            occupation_horizon: 1e5,
            stationary_samples: 1_000_000,
            gluing_runs: 100_000,
            oracle_chains: 5,
            reversible_chains: 10,
            hitting_bound_chains: 20,
        }
    }
}

impl Budgets {
    /// Multiplies every path count and the occupation horizon by `factor`,
    /// keeping each count at least 1. Chain counts and the hitting horizon
    /// are left alone.
    pub fn scaled(&self, factor: f64) -> Budgets {
        let s = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        Budgets {
            n_paths: s(self.n_paths),
            coupling_paths: s(self.coupling_paths),
            semigroup_paths: s(self.semigroup_paths),
            hitting_paths: s(self.hitting_paths),
            occupation_horizon: self.occupation_horizon * factor,
            stationary_samples: s(self.stationary_samples),
            gluing_runs: s(self.gluing_runs),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let counts = [
            ("n_paths", self.n_paths),
            ("coupling_paths", self.coupling_paths),
            ("semigroup_paths", self.semigroup_paths),
            ("hitting_paths", self.hitting_paths),
            ("stationary_samples", self.stationary_samples),
            ("gluing_runs", self.gluing_runs),
            ("oracle_chains", self.oracle_chains),
            ("reversible_chains", self.reversible_chains),
            ("hitting_bound_chains", self.hitting_bound_chains),
        ];
        if let Some((name, _)) = counts.iter().find(|c| c.1 == 0) {
            return Err(Error::Config(format!("budget {name} must be positive")));
        }
        if !(self.hitting_horizon > 0.0 && self.occupation_horizon > 0.0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        Ok(())
    }
}

/// Pre-registered verdict thresholds, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Standard errors allowed between an estimate and its exact value.
    pub sigma: f64,
    /// Minimum `r²` of exponential decay fits.
    pub r_squared: f64,
    /// Relative tolerance for deterministic numerical comparisons.
    pub relative: f64,
    /// Relative tolerance of a fitted rate against a known gap.
    pub gap_relative: f64,
    /// Sup-distance allowed between empirical and exact characteristic
    /// functions.
    pub cf_distance: f64,
    /// Sup-norm allowed for the stationary-equation residual.
    pub residual: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sigma: 3.0,
            r_squared: 0.9,
            relative: 0.05,
            gap_relative: 0.15,
            cf_distance: 0.02,
            residual: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    /// Also write one sample coupling trajectory per coupling claim.
    pub trajectories: bool,
    pub max_trajectory_rows: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: None,
            trajectories: false,
            max_trajectory_rows: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub outputs: Outputs,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            seed,
            model: ModelConfig::default(),
            budgets: Budgets::default(),
            thresholds: Thresholds::default(),
            outputs: Outputs::default(),
            base_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.budgets.validate()?;
        let t = &self.thresholds;
        if !(t.sigma > 0.0 && t.r_squared > 0.0 && t.r_squared <= 1.0 && t.relative > 0.0 && t.gap_relative > 0.0) {
            return Err(Error::Config("thresholds must be positive, with r_squared ≤ 1".into()));
        }
        let p = self.model.pdmp.p;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("pdmp p must lie in (0, 1), got {p}")));
        }
        if self.scenario == ScenarioId::Custom
            && self.model.chain.generator.is_none()
            && self.model.chain.file.is_none()
        {
            return Err(Error::Config(
                "the custom scenario needs model.chain.generator or model.chain.file".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the configuration without its output section.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.outputs = Outputs::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One checked claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    /// Short description of the property being checked.
    pub anchor: String,
    pub verdict: Verdict,
    /// Supporting evidence only; never fails a run.
    pub evidence_only: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub note: String,
}

impl Claim {
    pub fn new(id: &str, anchor: &str) -> Self {
        Claim {
            id: id.into(),
            anchor: anchor.into(),
            verdict: Verdict::Inconclusive,
            evidence_only: false,
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            note: String::new(),
        }
    }

    /// Records a value; non-finite values go to the note, since JSON has
    /// no representation for them.
    pub fn measure(mut self, key: &str, value: f64) -> Self {
        if value.is_finite() {
            self.measured.insert(key.into(), value);
            self
        } else {
            self.note(format!("{key} = {value}"))
        }
    }

    pub fn tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.into(), value);
        self
    }

    /// Appends to the note.
    pub fn note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if !self.note.is_empty() && !note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(&note);
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }

    pub fn pass_if(self, ok: bool) -> Self {
        self.verdict(if ok { Verdict::Pass } else { Verdict::Fail })
    }

    pub fn evidence(mut self) -> Self {
        self.evidence_only = true;
        self.verdict = Verdict::Inconclusive;
        self
    }

    pub fn failed(&self) -> bool {
        !self.evidence_only && self.verdict == Verdict::Fail
    }
}

/// A curve written to `timeseries/<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    /// `(time, value, std_error)`
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub thresholds: Thresholds,
    pub budgets: Budgets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioId,
    pub claims: Vec<Claim>,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<Runtime>,
    #[serde(skip)]
    pub timeseries: Vec<TimeSeries>,
    /// `(name, csv text)`
    #[serde(skip)]
    pub trajectories: Vec<(String, String)>,
}

impl ScenarioReport {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        ScenarioReport {
            scenario: cfg.scenario,
            claims: Vec::new(),
            provenance: Provenance {
                config_hash: cfg.hash(),
                seed: cfg.seed,
                version: env!("CARGO_PKG_VERSION").into(),
                thresholds: cfg.thresholds.clone(),
                budgets: cfg.budgets.clone(),
            },
            runtime: None,
            timeseries: Vec::new(),
            trajectories: Vec::new(),
        }
    }

    /// Appends the claim produced by `f`, or a failed claim carrying the
    /// error when the sub-run aborts.
    pub fn run(&mut self, id: &str, anchor: &str, f: impl FnOnce() -> Result<Claim>) {
        let mut claim = f().unwrap_or_else(|e| claim().verdict(Verdict::Fail).note(format!("sub-run failed: {e}")));
        claim.id = id.into();
        claim.anchor = anchor.into();
        self.claims.push(claim);
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }

    pub fn all_pass(&self) -> bool {
        !self.claims.iter().any(Claim::failed)
    }

    /// JSON without the runtime section; identical for identical configs.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.runtime = None;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    /// Writes `report.json`, `timeseries/*.csv` and `trajectories/*.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        if !self.timeseries.is_empty() {
            let ts = dir.join("timeseries");
            fs::create_dir_all(&ts)?;
            for s in &self.timeseries {
                let mut w = csv::Writer::from_path(ts.join(format!("{}.csv", s.name)))?;
                w.write_record(["time", "value", "std_error"])?;
                for p in &s.points {
                    w.serialize(p)?;
                }
                w.flush()?;
            }
        }
        if !self.trajectories.is_empty() {
            let tr = dir.join("trajectories");
            fs::create_dir_all(&tr)?;
            for (name, text) in &self.trajectories {
                fs::write(tr.join(format!("{name}.csv")), text)?;
            }
        }
        Ok(())
    }
}

/// Runs the configured scenario on `threads` worker threads (0 = all).
pub fn run_scenario(cfg: &ScenarioConfig, threads: usize) -> Result<ScenarioReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = crate::rng::with_threads(threads, || match cfg.scenario {
        ScenarioId::Pdmp => scenario_pdmp(cfg),
        ScenarioId::LevyOu => scenario_levy_ou(cfg),
        ScenarioId::Diffusion => scenario_diffusion(cfg),
        ScenarioId::Oracle => scenario_oracle(cfg),
        ScenarioId::Custom => scenario_custom(cfg),
    })?;
    report.runtime = Some(Runtime {
        seconds: start.elapsed().as_secs_f64(),
        threads: crate::rng::with_threads(threads, rayon::current_num_threads),
    });
    Ok(report)
}

/// A claim whose id and anchor are filled in by [`ScenarioReport::run`].
pub(crate) fn claim() -> Claim {
    Claim::new("", "")
}

/// Truncates a CSV text to its header plus `max_rows` rows.
pub(crate) fn cap_rows(text: String, max_rows: usize) -> String {
    let mut out: Vec<&str> = text.lines().take(max_rows + 1).collect();
    out.push("");
    out.join("\n")
}

/// `|a − b| ≤ k·se`, with exact agreement required when `se = 0`.
pub(crate) fn within(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se + 1e-12 * (1.0 + b.abs())
}
