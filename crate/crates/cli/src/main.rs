//! `qubus-sim`: compile unitaries into c-path/merging element programs,
//! verify them by exact simulation, and print resource and detector tables.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{Failure, Outcome};
use config::{ConfigArgs, RunConfig, VERSION};

#[derive(Parser)]
#[command(name = "qubus-sim", version, about = "Weak cross-Kerr photonic logic compiler and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Lower a unitary (`{"n", "matrix"}`) or a gate spec to an element program.
    Compile { input: PathBuf },
    /// Simulate a program on the maximally entangled input and compare with a target unitary.
    Verify {
        program: PathBuf,
        target: PathBuf,
        #[arg(long)]
        node_budget: Option<usize>,
    },
    /// Closed-form resource table for general n-qubit unitaries.
    Resources {
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
        /// Comma-separated subset of cnot1, cnot2, cpm1, cpm2.
        #[arg(long, default_value = "cnot1,cnot2,cpm1,cpm2")]
        approach: String,
    },
    /// Photon-number peak statistics and detection error probabilities.
    DetectorStats {
        #[arg(long, default_value_t = 4)]
        k_max: u64,
        /// Recycling rounds at which to evaluate the error probability.
        #[arg(long, value_delimiter = ',', default_value = "0,10000")]
        recycle: Vec<u64>,
        /// Probe amplitude used for the error probability table.
        #[arg(long, default_value_t = 1e2)]
        pe_gamma: f64,
    },
    /// Seeded demo: compile, then follow one sampled detection trajectory
    /// from a computational basis state.
    Simulate {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        basis: usize,
        #[arg(long)]
        node_budget: Option<usize>,
    },
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    command: &'a str,
    config: RunConfig,
    #[serde(flatten)]
    body: T,
}

fn emit<T: Serialize>(command: &str, config: RunConfig, body: T, out: Option<&Path>) -> Outcome<()> {
    let env = Envelope {
        version: VERSION,
        command,
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Failure::Input(e.to_string()))?;
    text.push('\n');
    let io = |e: std::io::Error| Failure::Input(format!("writing output: {e}"));
    match out {
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
        Some(path) => {
            // write then rename so readers never see a partial file
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            fs::write(&tmp, text).map_err(io)?;
            fs::rename(&tmp, path).map_err(io)
        }
    }
}

fn cap_threads() -> Outcome<()> {
    let Ok(v) = std::env::var("QUBUS_SIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("QUBUS_SIM_THREADS must be a positive integer, got {v:?}")))?;
    qubus_core::parallel::cap_threads(n);
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    cap_threads()?;
    let out = cli.config.out.as_deref();
    match &cli.command {
        Command::Compile { input } => {
            let cfg = RunConfig::for_gates(&cli.config);
            emit("compile", cfg, commands::cmd_compile(input, &cfg)?, out)
        }
        Command::Verify {
            program,
            target,
            node_budget,
        } => {
            let cfg = RunConfig::for_gates(&cli.config);
            let (cfg, body) = commands::cmd_verify(program, target, &cfg, *node_budget)?;
            emit("verify", cfg, body, out)
        }
        Command::Resources { n_min, n_max, approach } => {
            let cfg = RunConfig::for_gates(&cli.config);
            emit("resources", cfg, commands::cmd_resources(*n_min, *n_max, approach)?, out)
        }
        Command::DetectorStats { k_max, recycle, pe_gamma } => {
            let cfg = RunConfig::for_analytics(&cli.config);
            let body = commands::cmd_detector_stats(&cfg, *k_max, recycle, *pe_gamma)?;
            emit("detector-stats", cfg, body, out)
        }
        Command::Simulate {
            input,
            basis,
            node_budget,
        } => {
            let cfg = RunConfig::for_gates(&cli.config);
            emit("simulate", cfg, commands::cmd_simulate(input, *basis, &cfg, *node_budget)?, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
