//! Configuration-driven command-line front end.
//!
//! Every subcommand takes one JSON run configuration (see `configs/` for
//! examples) plus optional `--set key=value` overrides, writes one artifact
//! file, and prints a single summary line. Exit codes: 0 on success
//! (including "no critical points found"), 2 on configuration errors, 3 on
//! numerical failures.

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use multibubble_cli::{commands, config};

#[derive(Parser)]
#[command(
    name = "multibubble",
    version,
    about = "Reduced energies, critical points and residual sweeps for multi-bubble blow-up configurations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: String,
    /// Dotted-path overrides, e.g. --set reduce.count=64
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Cap the number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Grid of the Robin function over a 2D slice (CSV) with its minimum.
    RobinMap(CommonArgs),
    /// Point evaluations of G, H and tau (JSON).
    GreenProbe(CommonArgs),
    /// Multistart critical-point search of the reduced energy (JSON).
    Reduce(CommonArgs),
    /// Assemble a multi-bubble approximation and sample it (CSV).
    Assemble(CommonArgs),
    /// Residual norms across an eps sweep with a power-law fit (JSON).
    ResidualSweep(CommonArgs),
    /// Verify the linearisation kernels by finite differences (JSON).
    KernelCheck(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RobinMap(_) => "robin-map",
            Command::GreenProbe(_) => "green-probe",
            Command::Reduce(_) => "reduce",
            Command::Assemble(_) => "assemble",
            Command::ResidualSweep(_) => "residual-sweep",
            Command::KernelCheck(_) => "kernel-check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::RobinMap(a)
            | Command::GreenProbe(a)
            | Command::Reduce(a)
            | Command::Assemble(a)
            | Command::ResidualSweep(a)
            | Command::KernelCheck(a) => a,
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let args = cli.command.args();

    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail(2, &format!("thread pool: {e}"));
        }
    }

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(2, &format!("cannot read {}: {e}", args.config)),
    };
    let cfg = match config::RunConfig::from_json_str(&text, &args.set) {
        Ok(c) => c,
        Err(e) => return fail(2, &format!("{e:#}")),
    };
    match commands::run(cli.command.name(), &cfg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            // configuration-shaped problems exit 2, numerical failures 3
            let is_config = e
                .downcast_ref::<multibubble::Error>()
                .map(|err| {
                    matches!(
                        err,
                        multibubble::Error::InvalidInput(_)
                            | multibubble::Error::Json(_)
                            | multibubble::Error::Geometry(_)
                    )
                })
                .unwrap_or_else(|| {
                    let msg = format!("{e}");
                    msg.contains("config") || msg.contains("requires")
                });
            fail(if is_config { 2 } else { 3 }, &format!("{e:#}"))
        }
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    let obj = json!({"error": message, "exit_code": code});
    println!("{obj}");
    ExitCode::from(code)
}
