use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nls_cli::{emit_plotdata, load_config, run_experiment, Mode};

#[derive(Parser)]
#[command(version, about = "Power-law NLS experiments: solve, refine, perturb and compare")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "solve")]
        mode: Mode,
        /// Overrides `output.dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Extract a two-column series from a finished run.
    Plotdata {
        /// Run directory.
        #[arg(short, long)]
        run: PathBuf,
        /// e.g. `norm_sh`, `schwartz_3_3`, `snapshot:0.5`, `convergence`.
        #[arg(short, long)]
        series: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Run { config, mode, out } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            match run_experiment(&cfg, mode) {
                Ok(outcome) => {
                    for c in &outcome.checks {
                        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    println!("artifacts in {}", outcome.dir.display());
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Plotdata { run, series } => match emit_plotdata(&run, &series) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
