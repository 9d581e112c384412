mod models;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergodyn::coupling::{gluing_coupling, switching_coupling_from, CouplingRun, GluingOptions, SwitchingOptions};
use ergodyn::estimators::{doeblin_coefficient, exp_moment, hitting_time_samples, phi_variation_distance};
use ergodyn::models::FiniteChain;
use ergodyn::process::{advance, simulate_trajectory, SemigroupMode};
use ergodyn::rng::{derive_seed, par_map, path_rng, with_threads};
use ergodyn::scenarios::ModelConfig;
use ergodyn::spectral::{check_hitting_moment_bound, finite_chain_spectrum, HITTING_BOUND_MAX_STATES};
use ergodyn::{Error, Region, ScenarioConfig, ScenarioId, ScenarioReport, State, TestFunction, Verdict};
use serde_json::{json, Value};

use models::{with_model, CliModel, ModelKind};

/// Simulate, couple and estimate ergodicity properties of Markov processes.
#[derive(Parser)]
#[command(name = "ergodyn", version)]
struct Cli {
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed; required without a config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report and data files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and print its events.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
    /// Couple two copies started at different states.
    Couple {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, allow_hyphen_values = true)]
        x2: f64,
        #[arg(long, value_enum, default_value_t = CouplingKind::Switching)]
        kind: CouplingKind,
        /// Run length; the gluing block length for `--kind gluing`.
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        /// Gluing block length of the switching coupling.
        #[arg(long, default_value_t = 1.0)]
        t_glue: f64,
        /// Gluing is attempted once both copies have weight at most this.
        #[arg(long, default_value_t = 4.0)]
        level: f64,
    },
    /// Monte Carlo estimators.
    Estimate {
        #[command(subcommand)]
        what: Estimate,
    },
    /// Spectrum and hitting-moment check of a finite chain.
    Spectral {
        /// Generator matrix file, one whitespace-separated row per line.
        #[arg(long)]
        chain: Option<PathBuf>,
    },
    /// Run a scenario and report a verdict per claim.
    Scenario {
        /// Scenario to run when no config is given.
        #[arg(value_enum)]
        id: Option<ScenarioArg>,
        /// Multiplies path counts and the occupation horizon.
        #[arg(long)]
        budget_scale: Option<f64>,
    },
    /// Run the finite-chain oracle battery.
    Oracle {
        #[arg(long)]
        budget_scale: Option<f64>,
    },
}

#[derive(Subcommand)]
enum Estimate {
    /// Exponential moment of a hitting time of `[lo, hi]` (chain states by index).
    Hitting {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 4000)]
        paths: usize,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
    },
    /// Distance between the laws at time `t` from two starting states.
    Distance {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, allow_hyphen_values = true)]
        x2: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 20000)]
        paths: usize,
        /// Weight the distance by the model's default weight.
        #[arg(long)]
        weighted: bool,
        #[command(flatten)]
        edges: EdgeArgs,
    },
    /// Largest total-variation distance at time `t` over pairs of starts.
    Doeblin {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        starts: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 20000)]
        paths: usize,
        #[command(flatten)]
        edges: EdgeArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Defaults to the model of the config's scenario.
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Args)]
struct EdgeArgs {
    /// Histogram range and bin count for real-valued states.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "N"], allow_hyphen_values = true)]
    edges: Option<Vec<f64>>,
}

impl EdgeArgs {
    fn get(&self) -> ergodyn::Result<Option<(f64, f64, usize)>> {
        match self.edges.as_deref() {
            None => Ok(None),
            Some(&[lo, hi, n]) if lo < hi && n >= 1.0 => Ok(Some((lo, hi, n as usize))),
            Some(_) => Err(Error::Config("--edges needs LO < HI and N ≥ 1".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CouplingKind {
    Switching,
    Gluing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Pdmp,
    LevyOu,
    Diffusion,
    Oracle,
}

impl From<ScenarioArg> for ScenarioId {
    fn from(a: ScenarioArg) -> Self {
        match a {
            ScenarioArg::Pdmp => ScenarioId::Pdmp,
            ScenarioArg::LevyOu => ScenarioId::LevyOu,
            ScenarioArg::Diffusion => ScenarioId::Diffusion,
            ScenarioArg::Oracle => ScenarioId::Oracle,
        }
    }
}

/// Process exit status.
enum Status {
    Pass,
    ClaimFailed,
    Config(String),
    Runtime(String),
}

impl From<Error> for Status {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Status::Config(e.to_string()),
            _ => Status::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Status::Pass => ExitCode::SUCCESS,
        Status::ClaimFailed => ExitCode::from(2),
        Status::Config(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Status::Runtime(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

fn run(cli: &Cli) -> Status {
    let cfg = match cli.config.as_deref().map(ScenarioConfig::load).transpose() {
        Ok(c) => c,
        Err(e) => return e.into(),
    };
    let result = match &cli.command {
        Command::Scenario { id, budget_scale } => return scenario(cli, cfg, id.map(Into::into), *budget_scale),
        Command::Oracle { budget_scale } => return scenario(cli, cfg, Some(ScenarioId::Oracle), *budget_scale),
        _ => with_threads(cli.threads, || tool(cli, cfg.as_ref())),
    };
    match result {
        Ok(()) => Status::Pass,
        Err(e) => e.into(),
    }
}

fn scenario(cli: &Cli, cfg: Option<ScenarioConfig>, id: Option<ScenarioId>, scale: Option<f64>) -> Status {
    let mut cfg = match (cfg, id) {
        (Some(c), Some(id)) if c.scenario != id => {
            return Status::Config(format!(
                "config is for scenario {}, not {}",
                c.scenario.name(),
                id.name()
            ))
        }
        (Some(c), _) => c,
        (None, Some(id)) => match cli.seed {
            Some(seed) => ScenarioConfig::new(id, seed),
            None => return Status::Config("--seed is required without --config".into()),
        },
        (None, None) => return Status::Config("name a scenario or pass --config".into()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(f) = scale {
        if !(f > 0.0 && f.is_finite()) {
            return Status::Config("--budget-scale must be positive".into());
        }
        cfg.budgets = cfg.budgets.scaled(f);
    }
    let report = match ergodyn::run_scenario(&cfg, cli.threads) {
        Ok(r) => r,
        Err(e) => return e.into(),
    };
    let out = cli.out.clone().or_else(|| cfg.outputs.dir.clone());
    let printed = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from),
        Format::Csv => claims_csv(&report),
    };
    let written = printed.and_then(|text| {
        println!("{}", text.trim_end());
        match &out {
            Some(dir) => report.write(dir),
            None => Ok(()),
        }
    });
    match written {
        Err(e) => e.into(),
        Ok(()) if report.all_pass() => Status::Pass,
        Ok(()) => Status::ClaimFailed,
    }
}

/// One row per measured value; claims without measurements get one row.
fn claims_csv(report: &ScenarioReport) -> ergodyn::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["claim", "verdict", "evidence_only", "key", "value"])?;
    for c in &report.claims {
        let verdict = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        let evidence = c.evidence_only.to_string();
        if c.measured.is_empty() {
            w.write_record([c.id.as_str(), verdict, &evidence, "", ""])?;
        }
        for (k, v) in &c.measured {
            w.write_record([c.id.as_str(), verdict, &evidence, k, &v.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn tool(cli: &Cli, cfg: Option<&ScenarioConfig>) -> ergodyn::Result<()> {
    let seed = || {
        cli.seed
            .or(cfg.map(|c| c.seed))
            .ok_or_else(|| Error::Config("--seed is required without --config".into()))
    };
    let defaults = ModelConfig::default();
    let mc = cfg.map(|c| &c.model).unwrap_or(&defaults);
    let build = |m: &ModelArgs| models::build(m.model, m.chain.as_deref(), cfg);
    let output = match &cli.command {
        Command::Simulate { model, x0, horizon } => {
            with_model!(&build(model)?, m => simulate(m, *x0, *horizon, seed()?))?
        }
        Command::Couple {
            model,
            x1,
            x2,
            kind,
            horizon,
            t_glue,
            level,
        } => with_model!(&build(model)?, m => couple(m, mc, *x1, *x2, *kind, *horizon, *t_glue, *level, seed()?))?,
        Command::Estimate { what } => match what {
            Estimate::Hitting {
                model,
                x0,
                lo,
                hi,
                alpha,
                paths,
                horizon,
            } => with_model!(&build(model)?, m => hitting(m, *x0, (*lo, *hi), *alpha, *paths, *horizon, seed()?))?,
            Estimate::Distance {
                model,
                x1,
                x2,
                t,
                paths,
                weighted,
                edges,
            } => {
                let edges = edges.get()?;
                with_model!(&build(model)?, m => distance(m, mc, *x1, *x2, *t, *paths, *weighted, edges, seed()?))?
            }
            Estimate::Doeblin {
                model,
                starts,
                t,
                paths,
                edges,
            } => {
                let edges = edges.get()?;
                with_model!(&build(model)?, m => doeblin(m, starts, *t, *paths, edges, seed()?))?
            }
        },
        Command::Spectral { chain } => {
            let model = models::build(Some(ModelKind::Chain), chain.as_deref(), cfg)?;
            let models::AnyModel::Chain(c) = model else {
                unreachable!()
            };
            spectral(&c)?
        }
        Command::Scenario { .. } | Command::Oracle { .. } => unreachable!(),
    };
    emit(cli, output)
}

/// A tool result in both output formats.
struct Output {
    name: &'static str,
    json: Value,
    csv: String,
}

fn emit(cli: &Cli, output: Output) -> ergodyn::Result<()> {
    let (text, ext) = match cli.format {
        Format::Json => (serde_json::to_string_pretty(&output.json)? + "\n", "json"),
        Format::Csv => (output.csv, "csv"),
    };
    std::io::stdout().write_all(text.as_bytes())?;
    if let Some(dir) = &cli.out {
        write_file(dir, &format!("{}.{ext}", output.name), &text)?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> ergodyn::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> ergodyn::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn simulate<M: CliModel>(model: &M, x0: f64, horizon: f64, seed: u64) -> ergodyn::Result<Output> {
    let traj = simulate_trajectory(model, &model.state(x0)?, horizon, seed)?;
    let mut rows: Vec<(f64, f64)> = traj.events.iter().map(|(t, x)| (*t, x.coordinate())).collect();
    if rows.last().map(|r| r.0 < horizon).unwrap_or(true) {
        rows.push((horizon, traj.position(model, horizon).coordinate()));
    }
    Ok(Output {
        name: "simulate",
        json: json!({
            "model": model.description(),
            "seed": seed,
            "horizon": horizon,
            "jumps": traj.jump_count(),
            "events": rows,
        }),
        csv: csv_rows(
            &["time", "state"],
            rows.iter().map(|(t, x)| vec![t.to_string(), x.to_string()]),
        )?,
    })
}

#[allow(clippy::too_many_arguments)]
fn couple<M: CliModel>(
    model: &M,
    mc: &ModelConfig,
    x1: f64,
    x2: f64,
    kind: CouplingKind,
    horizon: f64,
    t_glue: f64,
    level: f64,
    seed: u64,
) -> ergodyn::Result<Output> {
    let (z1, z2) = (model.state(x1)?, model.state(x2)?);
    let run: CouplingRun<M::State> = match kind {
        CouplingKind::Switching => {
            let phi = model.weight(mc);
            switching_coupling_from(
                model,
                &phi,
                level,
                t_glue,
                &z1,
                &z2,
                horizon,
                seed,
                &SwitchingOptions::default(),
            )?
        }
        CouplingKind::Gluing => gluing_coupling(model, &z1, &z2, horizon, seed, &GluingOptions::default())?,
    };
    let mut buf = Vec::new();
    run.write_csv(model, &mut buf)?;
    Ok(Output {
        name: "couple",
        json: json!({
            "model": model.description(),
            "seed": seed,
            "coupled_at": run.coupled_at,
            "endpoints_equal": run.endpoints_equal,
            "attempts": run.attempts,
            "coupled_on_attempt": run.coupled_on_attempt,
            "grid_error": run.grid_error,
            "diagnostic": run.diagnostic,
        }),
        csv: String::from_utf8_lossy(&buf).into_owned(),
    })
}

fn hitting<M: CliModel>(
    model: &M,
    x0: f64,
    (lo, hi): (f64, f64),
    alpha: f64,
    paths: usize,
    horizon: f64,
    seed: u64,
) -> ergodyn::Result<Output> {
    if lo > hi {
        return Err(Error::Config("need lo ≤ hi".into()));
    }
    let h = hitting_time_samples(
        model,
        &model.state(x0)?,
        &Region::interval(lo, hi),
        paths,
        horizon,
        seed,
    )?;
    let e = exp_moment(&h, alpha);
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    Ok(Output {
        name: "hitting",
        json: json!({ "model": model.description(), "seed": seed, "estimate": e }),
        csv: String::from_utf8_lossy(&buf).into_owned(),
    })
}

#[allow(clippy::too_many_arguments)]
fn distance<M: CliModel>(
    model: &M,
    mc: &ModelConfig,
    x1: f64,
    x2: f64,
    t: f64,
    paths: usize,
    weighted: bool,
    edges: Option<(f64, f64, usize)>,
    seed: u64,
) -> ergodyn::Result<Output> {
    let sample = |x: &M::State, stream: u64| -> ergodyn::Result<Vec<M::State>> {
        par_map(paths, |i| advance(model, x, t, &mut path_rng(stream, i as u64)))
            .into_iter()
            .collect()
    };
    let a = sample(&model.state(x1)?, derive_seed(seed, 1))?;
    let b = sample(&model.state(x2)?, derive_seed(seed, 2))?;
    let phi = if weighted {
        model.weight(mc)
    } else {
        TestFunction::constant(1.0)
    };
    let d = phi_variation_distance(&a, &b, &phi, &model.bins(edges))?;
    Ok(Output {
        name: "distance",
        json: json!({ "model": model.description(), "seed": seed, "t": t, "weighted": weighted, "estimate": d }),
        csv: csv_rows(
            &["t", "value", "std_error", "plug_in"],
            [vec![
                t.to_string(),
                d.value.to_string(),
                d.std_error.to_string(),
                d.plug_in.to_string(),
            ]],
        )?,
    })
}

fn doeblin<M: CliModel>(
    model: &M,
    starts: &[f64],
    t: f64,
    paths: usize,
    edges: Option<(f64, f64, usize)>,
    seed: u64,
) -> ergodyn::Result<Output> {
    let grid: Vec<M::State> = starts.iter().map(|&x| model.state(x)).collect::<ergodyn::Result<_>>()?;
    let k = doeblin_coefficient(model, &grid, t, paths, &model.bins(edges), seed, SemigroupMode::Auto)?;
    Ok(Output {
        name: "doeblin",
        json: json!({ "model": model.description(), "seed": seed, "t": t, "estimate": k }),
        csv: csv_rows(
            &["t", "kappa", "std_error", "exact"],
            [vec![
                t.to_string(),
                k.kappa.to_string(),
                k.std_error.to_string(),
                k.exact.to_string(),
            ]],
        )?,
    })
}

fn spectral(chain: &FiniteChain) -> ergodyn::Result<Output> {
    let report = finite_chain_spectrum(chain)?;
    let bound = if chain.len() <= HITTING_BOUND_MAX_STATES {
        Some(check_hitting_moment_bound(chain)?)
    } else {
        None
    };
    let mut buf = Vec::new();
    report.write_eigenvalues_csv(&mut buf)?;
    Ok(Output {
        name: "spectral",
        json: json!({ "spectrum": report, "hitting_moment_bound": bound }),
        csv: String::from_utf8_lossy(&buf).into_owned(),
    })
}
