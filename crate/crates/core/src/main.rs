use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zeno::commands::{self, CommandError, Engine, RunOptions, EXIT_INVALID};

/// Projective-measurement dynamics with constant and moving projectors.
#[derive(Debug, Parser)]
#[command(name = "zeno", version)]
struct Cli {
    /// Overrides the scenario's stroboscopic seeds with this single seed.
    #[arg(long, env = "ZENO_SEED", global = true)]
    seed: Option<u64>,

    /// Seconds since the epoch recorded in the JSON report. Without it the
    /// report carries no timestamp and repeated runs are byte-identical.
    #[arg(long, env = "SOURCE_DATE_EPOCH", global = true)]
    stamp: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory.csv and report.json.
    Simulate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "effective")]
        engine: Engine,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stroboscopic convergence table; writes sweep.csv and report.json.
    Sweep {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite and print one line per check.
    Verify {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Also write report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32, CommandError> {
    let opts = RunOptions { seed_override: cli.seed, timestamp: cli.stamp };
    match cli.command {
        Command::Simulate { scenario, engine, out } => {
            let model = commands::load_model(&scenario)?;
            let artifacts = commands::simulate(&model, engine, &opts)?;
            artifacts.write(&out)?;
            for c in &artifacts.report.checks {
                println!("{}", c.line());
            }
            Ok(artifacts.exit_code())
        }
        Command::Sweep { scenario, out } => {
            let model = commands::load_model(&scenario)?;
            let artifacts = commands::sweep(&model, &opts)?;
            artifacts.write(&out)?;
            print!("{}", artifacts.tables[0].1);
            if let Some(s) = &artifacts.report.sweep {
                match (&s.note, s.loss_order, s.state_order) {
                    (Some(note), _, _) => println!("fit: {note}"),
                    (None, loss, state) => println!("fit: loss_order={loss:?} state_order={state:?}"),
                }
            }
            for c in &artifacts.report.checks {
                println!("{}", c.line());
            }
            Ok(artifacts.exit_code())
        }
        Command::Verify { scenario, out } => {
            let model = commands::load_model(&scenario)?;
            let report = commands::verify(&model, &opts)?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            if let Some(dir) = out {
                let artifacts = commands::Artifacts { report: report.clone(), tables: Vec::new() };
                artifacts.write(&dir)?;
            }
            Ok(if report.passed { commands::EXIT_OK } else { commands::EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
