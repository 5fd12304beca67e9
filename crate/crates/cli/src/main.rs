//! `lrm run|check|oracle <config>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrm::experiments::{emit_outputs, run_oracle, run_scenario, Mode, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "lrm", version, about = "Lattice random-walk scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run(Common),
    /// Run a scenario, write its outputs and exit 3 if any threshold fails.
    Check(Common),
    /// Write the reference curves only.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; beats the one in the configuration.
    #[arg(long, env = "LRM_OUT")]
    out: Option<PathBuf>,
    /// microscopic or expected_motion.
    #[arg(long)]
    mode: Option<Mode>,
    /// Worker threads; defaults to one per core. Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

const DEFAULT_OUT: &str = "lrm-out";

enum Failure {
    Config(String),
    Checks,
    Other(String),
}

impl From<lrm::Error> for Failure {
    fn from(e: lrm::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn print_checks(report: &RunReport) {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    let (args, kind) = match command {
        Command::Run(a) => (a, "run"),
        Command::Check(a) => (a, "check"),
        Command::Oracle(a) => (a, "oracle"),
    };
    // An unreadable file is as much a configuration problem as a malformed one.
    let mut cfg = ScenarioConfig::from_path(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Other(e.to_string()))?;

    let report = pool.install(|| if kind == "oracle" { run_oracle(&cfg) } else { run_scenario(&cfg) })?;
    let files = emit_outputs(&cfg, &report, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    print_checks(&report);
    if kind == "check" && !report.passed() {
        return Err(Failure::Checks);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("lrm: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Checks) => {
            eprintln!("lrm: thresholds failed");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("lrm: {msg}");
            ExitCode::from(1)
        }
    }
}
