mod args;
mod commands;
mod config;
mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Command, RunConfig};
use commands::{CliError, CliResult};

fn parse_args() -> CliResult<RunConfig> {
    let mut argv: Vec<OsString> = std::env::args_os().collect();
    if let Some(path) = config::config_path(&argv) {
        let path = PathBuf::from(path);
        let text = banzhaf_core::io::read_to_string(&path)?;
        argv = config::splice(argv, config::parse_config(&path, &text)?);
    }
    RunConfig::try_parse_from(argv).map_err(|e| {
        // help and version print to stdout and succeed
        if !e.use_stderr() {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::Usage(e.render().to_string().trim_end().to_string())
    })
}

fn run() -> CliResult<()> {
    let cfg = parse_args()?;
    match &cfg.command {
        Command::Exact(a) => commands::cmd_exact(&cfg, a),
        Command::Estimate(a) => commands::cmd_estimate(&cfg, a),
        Command::Cluster(a) => commands::cmd_cluster(&cfg, a),
        Command::Pipeline(a) => commands::cmd_pipeline(&cfg, a),
        Command::Axioms(a) => commands::cmd_axioms(&cfg, a),
        Command::TrainSurrogate(a) => commands::cmd_train(&cfg, a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.message();
            if msg.starts_with("error:") {
                eprintln!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
