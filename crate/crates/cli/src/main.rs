use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{error, info};

use holodyn::analysis::{analyze, run_halvings, ConvergenceTable, StudyRow};
use holodyn::models::{parse_config_with_seed, ModelConfig};
use holodyn::report::{csv_records, ConvergenceSection, RunReport, CSV_HEADER};
use holodyn::verify::{verify_suite, VERIFY_HALVINGS};
use holodyn::{ConfigError, Error};

const SEED_VAR: &str = "HOLODYN_SEED";

#[derive(Parser)]
#[command(
    name = "holodyn",
    version,
    about = "Subspace evolution, holonomy and dynamic factors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once and write a JSON report.
    Run {
        config: PathBuf,
        /// Report path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Step-halving study. Writes CSV to --out and the JSON report beside it.
    Convergence {
        config: PathBuf,
        #[arg(long)]
        halvings: u32,
        /// CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full invariant suite and print one line per check.
    Verify { config: PathBuf },
}

enum Failure {
    Checks,
    Config(String),
    Pipeline(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks => 1,
            Failure::Config(_) => 2,
            Failure::Pipeline(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Pipeline(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Convergence {
            config,
            halvings,
            out,
        } => cmd_convergence(&config, halvings, out.as_deref()),
        Command::Verify { config } => cmd_verify(&config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Checks => {}
                Failure::Config(msg) => eprintln!("config error: {msg}"),
                Failure::Pipeline(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: &Path) -> Result<ModelConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let seed = match std::env::var(SEED_VAR) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
            Failure::Config(format!(
                "{SEED_VAR} must be an unsigned integer (got `{s}`)"
            ))
        })?),
        Err(_) => None,
    };
    let config = parse_config_with_seed(&text, seed)?;
    info!(
        "loaded {} (N = {}, rank = {}, steps = {}, dt = {:e})",
        config.model.name(),
        config.model.dim(),
        config.model.rank(),
        config.steps,
        config.dt()
    );
    Ok(config)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| Failure::Pipeline(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Pipeline(format!("cannot write to stdout: {e}"))),
    }
}

fn to_json(report: &RunReport) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| Failure::Pipeline(format!("cannot serialize report: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn report_tier_one(report: &RunReport) -> Result<(), Failure> {
    for c in report.tier_one.iter().filter(|c| !c.pass) {
        error!("tier-1 check failed: {}", c.line());
        eprintln!("{}", c.line());
    }
    if report.tier_one_passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn cmd_run(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(path)?;
    let start = Instant::now();
    let analysis = analyze(&config)?;
    let report = RunReport::new(&config, &analysis, start.elapsed().as_secs_f64());
    write_output(out, &to_json(&report)?)?;
    report_tier_one(&report)
}

fn csv_bytes(table: &ConvergenceTable) -> Result<Vec<u8>, Failure> {
    let fail = |e: csv::Error| Failure::Pipeline(format!("cannot write CSV: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(fail)?;
    for rec in csv_records(table) {
        w.write_record(&rec).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| Failure::Pipeline(format!("cannot write CSV: {e}")))
}

fn cmd_convergence(path: &Path, halvings: u32, out: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(path)?;
    if halvings < 2 {
        return Err(Failure::Config(format!(
            "--halvings must be ≥ 2 (got {halvings})"
        )));
    }
    let start = Instant::now();
    let runs = run_halvings(&config, halvings)?;
    let table = ConvergenceTable::from_rows(runs.iter().map(StudyRow::from_analysis).collect());
    info!(
        "fitted orders: factorization {}, ode {}",
        table.order_factorization, table.order_ode
    );
    write_output(out, &csv_bytes(&table)?)?;

    let finest = runs.last().expect("at least three runs");
    let finest_config = config.with_steps(finest.trajectory.steps());
    let mut report = RunReport::new(&finest_config, finest, start.elapsed().as_secs_f64());
    report.convergence = Some(ConvergenceSection::new(&table));
    if let Some(p) = out {
        write_output(Some(&p.with_extension("json")), &to_json(&report)?)?;
    }

    let mut tier_one_ok = true;
    for run in &runs {
        let cfg = config.with_steps(run.trajectory.steps());
        let r = RunReport::new(&cfg, run, 0.0);
        tier_one_ok &= report_tier_one(&r).is_ok();
    }
    if tier_one_ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn cmd_verify(path: &Path) -> Result<(), Failure> {
    let config = load_config(path)?;
    let report = verify_suite(&config, VERIFY_HALVINGS)?;
    println!(
        "verify {} (N = {}, rank = {}, steps = {})",
        report.model,
        config.model.dim(),
        config.model.rank(),
        config.steps
    );
    for c in &report.checks {
        println!("{}", c.line());
    }
    let failed = report.failures().count();
    if failed == 0 {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        println!("{failed} of {} checks failed", report.checks.len());
        Err(Failure::Checks)
    }
}
