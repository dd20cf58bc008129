//! `nhsense`: response, size scaling, phase diagrams and verification for
//! driven-dissipative squeezed SSH chains.

mod commands;
mod config;
mod format;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::Failure;
use config::{Command, Format, Overrides};
use nhsense_core::Error;

#[derive(Parser, Debug)]
#[command(name = "nhsense", version, about = "Sensing with driven-dissipative squeezed SSH chains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; `-` for standard output. Defaults to the config's path, else standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Drive placement m = ⌊αN⌋ for scaling runs; a number or "optimal".
    #[arg(long, global = true)]
    alpha: Option<String>,

    /// Worker threads for scans.
    #[arg(long, global = true, env = "NHSENSE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Signal, noise, photon number and SNR for one chain.
    Response,
    /// Reports over a range of chain sizes (CSV rows).
    Scaling,
    /// Regime, parity winner and skin-effect enhancement over a parameter grid.
    PhaseDiagram,
    /// Stability of the unperturbed chain.
    Stability,
    /// Closed forms against numerics around the configured chain.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_real_eigenvalue: Option<f64>,
}

fn report(kind: &str, code: u8, message: String, max_real_eigenvalue: Option<f64>) -> ExitCode {
    let record = ErrorRecord { error: kind, exit_code: code, message, max_real_eigenvalue };
    eprintln!("{}", format::to_json_line(&record));
    ExitCode::from(code)
}

fn failure_exit(f: Failure) -> ExitCode {
    match f {
        Failure::Config(msg) => report("config", 2, msg, None),
        Failure::Output(msg) => report("output", 1, msg, None),
        Failure::Core(e) => {
            let msg = e.to_string();
            match e {
                Error::Unstable { max_real_eigenvalue, .. } => report("unstable", 3, msg, max_real_eigenvalue),
                Error::Singular { .. } | Error::PoleEncountered { .. } => report("singular", 4, msg, None),
                Error::OracleDiverged { .. } | Error::OracleNotConverged { .. } => report("numerical", 4, msg, None),
                Error::InvalidSpec(_)
                | Error::NotTabulated { .. }
                | Error::ProtocolMismatch(_)
                | Error::NoEnhancement { .. }
                | Error::NoBreakdown { .. } => report("config", 2, msg, None),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("config", 2, e.to_string().trim_end().to_string(), None),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report("config", 2, "--threads must be positive".into(), None);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report("config", 2, e.to_string(), None);
        }
    }
    let command = match cli.command {
        Cmd::Response => Command::Response,
        Cmd::Scaling => Command::Scaling,
        Cmd::PhaseDiagram => Command::PhaseDiagram,
        Cmd::Stability => Command::Stability,
        Cmd::Verify => Command::Verify,
    };
    let over = Overrides {
        out: cli.out,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        alpha: cli.alpha,
    };
    let cfg = match config::load(cli.config.as_deref(), command, &over) {
        Ok(c) => c,
        Err(e) => return failure_exit(Failure::Config(e.0)),
    };
    let artifact = match commands::run(&cfg) {
        Ok(a) => a,
        Err(f) => return failure_exit(f),
    };
    let written = match &cfg.output {
        Some(path) if path.as_os_str() != "-" => {
            std::fs::write(path, &artifact.bytes).map_err(|e| format!("{}: {e}", path.display()))
        }
        _ => std::io::stdout().lock().write_all(&artifact.bytes).map_err(|e| e.to_string()),
    };
    match written {
        Err(msg) => failure_exit(Failure::Output(msg)),
        Ok(()) if !artifact.failed_suites.is_empty() => {
            report("verification", 1, format!("failing suites: {}", artifact.failed_suites.join(", ")), None)
        }
        Ok(()) => ExitCode::SUCCESS,
    }
}
