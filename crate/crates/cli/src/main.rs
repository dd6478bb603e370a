use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ni_cli::runner::{self, Mode, RunFailure};
use ni_cli::scenario::Scenario;

/// Exit codes: 0 success, 1 certification or consensus failure, 2 config
/// parse/validation error, 3 integration or i/o failure.
#[derive(Parser)]
#[command(
    name = "ni-consensus",
    version,
    about = "Simulate and certify networked negative-imaginary consensus scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Override the certification seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the simulation horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Override both integrator tolerances (abs_tol and rel_tol).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify and simulate a scenario, writing trajectory.csv, summary.csv,
    /// and report.txt.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run only the certification checks of a scenario (writes report.txt).
    Certify {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a bundled scenario by name (`paper-fig7`).
    Example {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse a scenario (a path or `paper-fig7`) and write it back as TOML.
    Dump {
        config: String,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("{failure}");
            match failure {
                RunFailure::Config(_) => ExitCode::from(2),
                RunFailure::Integration(_) | RunFailure::Io(_) => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, RunFailure> {
    match cli.command {
        Command::Run { config, overrides } => {
            let scenario = load_path(&config, &overrides)?;
            run(&scenario, &overrides, Mode::Full)
        }
        Command::Certify { config, overrides } => {
            let scenario = load_path(&config, &overrides)?;
            run(&scenario, &overrides, Mode::CertifyOnly)
        }
        Command::Example { name, overrides } => {
            if name != "paper-fig7" {
                return Err(RunFailure::Config(ni_cli::scenario::ConfigError(format!(
                    "unknown example `{name}` (available: paper-fig7)"
                ))));
            }
            let mut scenario =
                Scenario::parse(ni_cli::PAPER_FIG7_SCENARIO).map_err(RunFailure::Config)?;
            apply_overrides(&mut scenario, &overrides);
            run(&scenario, &overrides, Mode::Full)
        }
        Command::Dump { config, out } => {
            let text = if config == "paper-fig7" {
                ni_cli::PAPER_FIG7_SCENARIO.to_string()
            } else {
                std::fs::read_to_string(&config)
                    .map_err(|e| RunFailure::Io(format!("cannot read `{config}`: {e}")))?
            };
            let scenario = Scenario::parse(&text).map_err(RunFailure::Config)?;
            let dumped = runner::dump_scenario(&scenario).map_err(RunFailure::Config)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, dumped).map_err(|e| RunFailure::Io(e.to_string()))?
                }
                None => print!("{dumped}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_path(path: &PathBuf, overrides: &Overrides) -> Result<Scenario, RunFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunFailure::Io(format!("cannot read `{}`: {e}", path.display())))?;
    let mut scenario = Scenario::parse(&text).map_err(RunFailure::Config)?;
    apply_overrides(&mut scenario, overrides);
    Ok(scenario)
}

fn apply_overrides(scenario: &mut Scenario, overrides: &Overrides) {
    if let Some(seed) = overrides.seed {
        scenario.certification.seed = seed;
    }
    if let Some(t_end) = overrides.t_end {
        scenario.integrator.t_end = t_end;
    }
    if let Some(tol) = overrides.tol {
        scenario.integrator.abs_tol = tol;
        scenario.integrator.rel_tol = tol;
    }
    if let Some(dir) = &overrides.out_dir {
        scenario.output.dir = dir.display().to_string();
    }
}

fn run(scenario: &Scenario, overrides: &Overrides, mode: Mode) -> Result<ExitCode, RunFailure> {
    let out_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    let summary = runner::execute(scenario, &out_dir, mode)?;
    for line in &summary.reports {
        println!("{} # {}", line.report.summary_line(), line.subject);
    }
    if let Some(metric) = summary.consensus_final {
        println!(
            "consensus {} metric={metric:.6e} threshold={:.6e}",
            if summary.consensus_reached() {
                "pass"
            } else {
                "fail"
            },
            summary.consensus_threshold
        );
    }
    if summary.gate_ok() {
        println!("ok: artifacts in {}", summary.out_dir.display());
        Ok(ExitCode::SUCCESS)
    } else {
        for line in summary.failing_lines() {
            eprintln!("{line}");
        }
        Ok(ExitCode::from(1))
    }
}
