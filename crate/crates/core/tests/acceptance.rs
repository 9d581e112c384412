//! Acceptance battery: one line per criterion, non-zero exit on any failure.
//!
//! Every scenario runs at full default budgets on one thread, then again on
//! two threads for the determinism check.

use std::process::ExitCode;
use std::time::Instant;

use ergodyn::scenarios::Claim;
use ergodyn::{run_scenario, ScenarioConfig, ScenarioId, ScenarioReport, Verdict};

const SEED: u64 = 7;

struct Criterion {
    id: usize,
    title: &'static str,
    scenario: ScenarioId,
    claims: &'static [&'static str],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "oracle equivalence",
        scenario: ScenarioId::Oracle,
        claims: &["phi_variation_oracle", "doeblin_oracle", "hitting_moment_oracle"],
    },
    Criterion {
        id: 2,
        title: "maximal coupling frequency",
        scenario: ScenarioId::Oracle,
        claims: &["gluing_frequency"],
    },
    Criterion {
        id: 3,
        title: "gap sandwich and L2 contraction",
        scenario: ScenarioId::Oracle,
        claims: &["gap_sandwich", "l2_contraction"],
    },
    Criterion {
        id: 4,
        title: "hitting-moment brute force",
        scenario: ScenarioId::Oracle,
        claims: &["hitting_moment_bound"],
    },
    Criterion {
        id: 5,
        title: "jump-transport process",
        scenario: ScenarioId::Pdmp,
        claims: &[
            "density_ratios",
            "occupation_ratios",
            "coupling_decay",
            "no_poincare_witness",
        ],
    },
    Criterion {
        id: 6,
        title: "Levy-driven OU",
        scenario: ScenarioId::LevyOu,
        claims: &[
            "xi_round_trip",
            "characteristic_function",
            "lyapunov_drift",
            "growth_bound",
        ],
    },
    Criterion {
        id: 7,
        title: "OU diffusion",
        scenario: ScenarioId::Diffusion,
        claims: &["gap_accuracy", "hitting_moment", "hitting_moment_control"],
    },
];

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else if v.abs() >= 1e-3 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

fn summary(c: &Claim) -> String {
    let keys = [
        "max_abs_z",
        "failures",
        "checks",
        "frequency",
        "exact",
        "min_margin",
        "max_excess",
        "violations",
        "max_abs_error",
        "ratio_2",
        "se_2",
        "ratio_3",
        "se_3",
        "ratio_4",
        "se_4",
        "max_norm_ratio_error",
        "max_pointwise_error",
        "beta_hat",
        "r_squared",
        "max_relative_error",
        "sup_distance",
        "max_drift_excess",
        "gamma_hat",
        "relative_error",
        "moment",
        "alpha",
        "tail_rate",
    ];
    let parts: Vec<String> = keys
        .iter()
        .filter_map(|k| c.measured.get(*k).map(|v| format!("{k}={}", number(*v))))
        .collect();
    format!("{} {:?} [{}]", c.id, c.verdict, parts.join(" "))
}

fn main() -> ExitCode {
    let scenarios = [
        ScenarioId::Oracle,
        ScenarioId::Pdmp,
        ScenarioId::LevyOu,
        ScenarioId::Diffusion,
    ];
    let mut reports: Vec<(ScenarioId, ScenarioReport, f64)> = Vec::new();
    let mut determinism = Vec::new();
    for id in scenarios {
        let cfg = ScenarioConfig::new(id, SEED);
        let start = Instant::now();
        let one = run_scenario(&cfg, 1);
        let secs = start.elapsed().as_secs_f64();
        let two = run_scenario(&cfg, 2);
        match (one, two) {
            (Ok(a), Ok(b)) => {
                determinism.push((id, a.canonical_json() == b.canonical_json()));
                reports.push((id, a, secs));
            }
            (Err(e), _) | (_, Err(e)) => {
                println!("scenario {} aborted: {e}", id.name());
                determinism.push((id, false));
            }
        }
    }

    let mut all = true;
    for c in CRITERIA {
        let Some((_, report, secs)) = reports.iter().find(|r| r.0 == c.scenario) else {
            println!("FAIL criterion {} ({}): scenario did not run", c.id, c.title);
            all = false;
            continue;
        };
        let mut ok = true;
        let mut details = Vec::new();
        for name in c.claims {
            match report.claim(name) {
                Some(claim) => {
                    ok &= claim.verdict == Verdict::Pass;
                    details.push(summary(claim));
                }
                None => {
                    ok = false;
                    details.push(format!("{name} missing"));
                }
            }
        }
        all &= ok;
        println!(
            "{} criterion {} ({}, {} scenario {:.1}s): {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            c.scenario.name(),
            secs,
            details.join("; ")
        );
    }

    let same = determinism.iter().all(|d| d.1);
    all &= same;
    let detail: Vec<String> = determinism
        .iter()
        .map(|(id, eq)| format!("{} {}", id.name(), if *eq { "identical" } else { "differs" }))
        .collect();
    println!(
        "{} criterion 8 (determinism, 1 vs 2 threads): {}",
        if same { "PASS" } else { "FAIL" },
        detail.join(", ")
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
