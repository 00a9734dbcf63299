//! `curio` — run, verify and validate insider-detection scenarios.
//!
//! Exit codes: 0 success, 1 property violations found by `verify`,
//! 2 invalid input or usage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curio_core::engine::run;
use curio_core::protocols::Outcome;
use curio_core::scenario::Scenario;
use curio_core::verify::{exhaustive_verify, VerifyOptions};

/// Seed source, lowest to highest precedence: scenario file, CURIO_SEED
/// environment variable, --seed flag.
const SEED_ENV: &str = "CURIO_SEED";

#[derive(Parser)]
#[command(
    name = "curio",
    version,
    about = "Deterministic insider-curiosity detection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a scenario and write the report as JSONL.
    Run {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Seed override; beats CURIO_SEED and the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively verify detection properties over a template scenario.
    Verify {
        /// Template scenario file; its behaviors are reset to loyal and
        /// curious roles are enumerated over the positions.
        #[arg(long)]
        template: PathBuf,
        /// Upper bound on template size (at most 10).
        #[arg(long, default_value_t = 10)]
        max_players: usize,
        /// Enumerate up to this many simultaneous curious players.
        #[arg(long, default_value_t = 2)]
        max_curious: usize,
        /// Also enumerate colluding traitor pairs (expected to evade).
        #[arg(long, default_value_t = false)]
        include_traitors: bool,
        /// Output property-report path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Commands::Run {
            scenario,
            seed,
            out,
        } => run_command(&scenario, seed, &out),
        Commands::Verify {
            template,
            max_players,
            max_curious,
            include_traitors,
            out,
        } => verify_command(&template, max_players, max_curious, include_traitors, &out),
        Commands::Validate { scenario } => validate_command(&scenario),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text =
        fs::read_to_string(path).map_err(|err| format!("cannot read {}: {err}", path.display()))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|err| format!("cannot parse {}: {err}", path.display()))?;
    scenario
        .validate()
        .map_err(|err| format!("{}: {err}", path.display()))?;
    Ok(scenario)
}

fn invalid_input(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn run_command(scenario_path: &Path, seed_flag: Option<u64>, out: &Path) -> ExitCode {
    let mut scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(message) => return invalid_input(message),
    };

    let env_seed = match std::env::var(SEED_ENV) {
        Ok(raw) => match raw.parse::<u64>() {
            Ok(value) => Some(value),
            Err(_) => {
                return invalid_input(format!("{SEED_ENV}={raw} is not a valid u64 seed"));
            }
        },
        Err(_) => None,
    };
    if let Some(seed) = seed_flag.or(env_seed) {
        scenario.seed = seed;
    }

    let report = match run(&scenario) {
        Ok(report) => report,
        Err(err) => return invalid_input(err.to_string()),
    };
    if let Err(err) = fs::write(out, report.to_jsonl()) {
        return invalid_input(format!("cannot write {}: {err}", out.display()));
    }

    for check in report.checks() {
        let curious: Vec<String> = check
            .verdicts
            .iter()
            .filter(|v| v.outcome == Outcome::Curious)
            .map(|v| v.player.to_string())
            .collect();
        if curious.is_empty() {
            println!("check round {}: all loyal", check.round);
        } else {
            println!(
                "check round {}: curious [{}]",
                check.round,
                curious.join(", ")
            );
        }
    }
    if let Some(metrics) = report.metrics() {
        println!(
            "tp={} fp={} fn={} transfers={} ba_messages={}",
            metrics.true_positives,
            metrics.false_positives,
            metrics.false_negatives,
            metrics.transfers,
            metrics.ba_messages
        );
    }
    println!("report written to {}", out.display());
    ExitCode::SUCCESS
}

fn verify_command(
    template_path: &Path,
    max_players: usize,
    max_curious: usize,
    include_traitors: bool,
    out: &Path,
) -> ExitCode {
    let template = match load_scenario(template_path) {
        Ok(s) => s,
        Err(message) => return invalid_input(message),
    };
    let options = VerifyOptions {
        max_players,
        max_curious,
        include_traitor_pairs: include_traitors,
    };
    let report = match exhaustive_verify(&template, &options) {
        Ok(report) => report,
        Err(err) => return invalid_input(err.to_string()),
    };

    let rendered = serde_json::to_string_pretty(&report).expect("property report serializes");
    if let Err(err) = fs::write(out, rendered) {
        return invalid_input(format!("cannot write {}: {err}", out.display()));
    }

    println!(
        "runs={} (curious {}, traitor {}) detections_evaluated={} violations={}",
        report.runs,
        report.curious_runs,
        report.traitor_runs,
        report.detections_evaluated,
        report.violations.len()
    );
    for violation in &report.violations {
        println!(
            "violation: {:?} player {} — {} (assignment {:?})",
            violation.kind, violation.player, violation.detail, violation.assignment
        );
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn validate_command(scenario_path: &Path) -> ExitCode {
    match load_scenario(scenario_path) {
        Ok(scenario) => {
            println!(
                "OK ({} players, {} rounds)",
                scenario.player_count(),
                scenario.rounds
            );
            ExitCode::SUCCESS
        }
        Err(message) => invalid_input(message),
    }
}
