//! `talbot <command> --config <path> --out <dir> [--seed N] [--threads N]`
//!
//! Exit status: 0 success, 1 usage or i/o failure, 2 invalid config, 3 model error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Failure, COMMANDS};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "talbot",
    version,
    about = "Talbot-Lau interferometer simulations and scan reduction"
)]
struct Cli {
    /// pattern | sweep | beamline | synth | reduce | calibrate
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides [numerics] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn usage() -> String {
    format!(
        "usage: talbot <command> --config <path> --out <dir> [--seed <u64>] [--threads <n>]\ncommands: {}",
        COMMANDS.join(", ")
    )
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if !COMMANDS.contains(&cli.command.as_str()) {
        return Err(Failure::Usage(format!(
            "unknown command '{}'\n{}",
            cli.command,
            usage()
        )));
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let cfg = RunConfig::load(&cli.config, cli.seed).map_err(|e| {
        let place = match e.line {
            0 => cli.config.display().to_string(),
            n => format!("{}:{n}", cli.config.display()),
        };
        Failure::Config(config::ConfigError {
            line: 0,
            message: format!("{place}: {}", e.message),
        })
    })?;
    commands::run(&cli.command, &cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", usage());
            }
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("talbot: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
