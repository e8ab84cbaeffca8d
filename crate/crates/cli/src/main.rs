//! `dechist`: command-line driver for the decoherent-histories search model.

mod commands;
mod config;
mod output;
mod verify;

use std::fmt;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{RawArgs, Settings};
use output::CommandOutput;

/// Invalid configuration or an unsatisfiable request; exit code 2.
#[derive(Debug, Clone)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<dechist_core::Error> for UsageError {
    fn from(e: dechist_core::Error) -> Self {
        Self(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "dechist",
    version,
    about = "Decoherent histories of quantum search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the single-step quantities for (N, t)
    Params(RawArgs),
    /// Tabulate all 2^K branch amplitudes, exact and closed form
    Branches(RawArgs),
    /// Decoherence functional summary, optionally the full matrix
    Gram(RawArgs),
    /// Grover query count and success probability against K
    Grover(RawArgs),
    /// Success probability of the environment model over a (K, δ) grid
    DeltaSweep(RawArgs),
    /// Search time K*(N) and its fitted power law
    Scaling(RawArgs),
    /// Run the verification suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: RawArgs,
    /// Replace every upper-bound tolerance with this value
    #[arg(long)]
    inject_tolerance: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Params(_) => "params",
            Command::Branches(_) => "branches",
            Command::Gram(_) => "gram",
            Command::Grover(_) => "grover",
            Command::DeltaSweep(_) => "delta-sweep",
            Command::Scaling(_) => "scaling",
            Command::Verify(_) => "verify",
        }
    }

    fn raw(&self) -> &RawArgs {
        match self {
            Command::Params(a)
            | Command::Branches(a)
            | Command::Gram(a)
            | Command::Grover(a)
            | Command::DeltaSweep(a)
            | Command::Scaling(a) => a,
            Command::Verify(v) => &v.common,
        }
    }
}

fn dispatch(cmd: &Command, s: &Settings) -> Result<CommandOutput, UsageError> {
    let mut out = match cmd {
        Command::Params(_) => commands::params(s),
        Command::Branches(_) => commands::branches(s),
        Command::Gram(_) => commands::gram(s),
        Command::Grover(_) => commands::grover(s),
        Command::DeltaSweep(_) => commands::delta_sweep(s),
        Command::Scaling(_) => commands::scaling(s),
        Command::Verify(v) => verify::verify(s, v.inject_tolerance),
    }?;
    if out.config.is_object() {
        out.config["raw"] = serde_json::to_value(s.as_map()).expect("settings serialize");
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let name = cli.command.name();
    let result = Settings::resolve(cli.command.raw()).and_then(|s| {
        let out = dispatch(&cli.command, &s)?;
        Ok((s, out))
    });
    let (settings, out) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("dechist {name}: {e}");
            return ExitCode::from(2);
        }
    };
    let target = settings.out();
    if let Err(e) = output::emit(name, target.as_deref(), &out, start.elapsed().as_secs_f64()) {
        eprintln!("dechist {name}: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(out.exit_code as u8)
}
