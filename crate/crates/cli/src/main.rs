use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use huberdecay_cli::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "huberdecay", version, about = "Huber-decay optimizer experiments and oracle checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output root (default: $HUBERDECAY_OUT, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override applied after the config file, e.g. `optimizer=adamhd_prox`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every cell of a sweep grid on a worker pool.
    Sweep {
        /// Sweep file: `{"base": {...}, "grid": {"key": [values...]}}`.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Compare two configs on the same problem at a matched loss target.
    Compare {
        /// Pass twice: run A, then run B.
        #[arg(long, num_args = 1, required = true)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Defaults to the worse of the two best losses, with 5% slack.
        #[arg(long)]
        target_loss: Option<f64>,
    },
    /// Certify the closed-form Huber prox against a golden-section oracle.
    ProxCheck {
        #[arg(long, default_value_t = DEFAULT_PROX_CASES)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PROX_TOL)]
        tol: f64,
    },
    /// Finite-difference check of the regularizer gradient (and a problem's, with --config).
    GradCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GRAD_TOL)]
        tol: f64,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn check_exit(passed: bool) -> u8 {
    if passed {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn dispatch(cli: Cli) -> huberdecay::Result<u8> {
    match cli.command {
        Command::Run { config, common } => {
            let out = output_root(common.out.as_deref());
            let art = cmd_run(&config, &common.set, common.seed, &out)?;
            println!("{}", art.dir.display());
            if let Some(a) = &art.output.abort {
                eprintln!("run aborted at step {}: {}", a.step, a.reason);
                return Ok(EXIT_ABORTED);
            }
            Ok(EXIT_OK)
        }
        Command::Sweep { config, common, jobs } => {
            let out = output_root(common.out.as_deref());
            let (index, cells) = cmd_sweep(&config, &common.set, common.seed, &out, jobs)?;
            println!("{}", index.display());
            let aborted = cells.iter().filter(|c| c.status == "aborted").count();
            if aborted > 0 {
                eprintln!("{aborted} of {} cells aborted", cells.len());
                return Ok(EXIT_ABORTED);
            }
            Ok(EXIT_OK)
        }
        Command::Compare {
            config,
            common,
            target_loss,
        } => {
            if config.len() != 2 {
                return Err(huberdecay::Error::config("config", "compare needs exactly two --config flags"));
            }
            let out = output_root(common.out.as_deref());
            let report = cmd_compare(&config[0], &config[1], &common.set, common.seed, target_loss, &out)?;
            print_json(&report);
            Ok(if report.a.aborted || report.b.aborted {
                EXIT_ABORTED
            } else {
                EXIT_OK
            })
        }
        Command::ProxCheck { cases, seed, tol } => {
            let report = cmd_prox_check(cases, seed, tol)?;
            print_json(&report);
            Ok(check_exit(report.passed))
        }
        Command::GradCheck {
            config,
            set,
            cases,
            seed,
            tol,
        } => {
            let report = cmd_grad_check(config.as_deref().map(|p| (p, set.as_slice())), cases, seed, tol)?;
            print_json(&report);
            Ok(check_exit(report.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
