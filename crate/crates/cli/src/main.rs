//! `projconn` command-line tool.
//!
//! Exit codes: 0 success, 1 a check failed (gradient check, non-finite loss),
//! 2 bad input or arguments.

mod args;
mod commands;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};
use commands::{Status, Usage};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Contents of run.json: enough to re-run the command bit for bit.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    tool: String,
    version: String,
    command: Command,
}

fn execute(cmd: &Command) -> Result<Status> {
    match cmd {
        Command::Gengt(a) => commands::gengt(a),
        Command::Loss(a) => commands::loss(a),
        Command::Optimize(a) => commands::optimize_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Project(a) => commands::project(a),
        Command::Replay(a) => replay(&a.run),
    }
}

fn record(cmd: &Command) -> Result<()> {
    let Some(out) = cmd.primary_output() else {
        return Ok(());
    };
    let dir = out.parent().unwrap_or(Path::new("."));
    let rec = RunRecord {
        tool: "projconn".into(),
        version: VERSION.into(),
        command: cmd.clone(),
    };
    let path = dir.join("run.json");
    let mut text = serde_json::to_string_pretty(&rec)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(mut cmd: Command) -> Result<Status> {
    cmd.resolve().context("resolving paths")?;
    let status = execute(&cmd)?;
    record(&cmd)?;
    Ok(status)
}

fn replay(path: &Path) -> Result<Status> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Usage(format!("{e:#}")))?;
    let rec: RunRecord =
        serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    if rec.version != VERSION {
        eprintln!(
            "warning: {} was written by projconn {}, replaying with {VERSION}",
            path.display(),
            rec.version
        );
    }
    if matches!(rec.command, Command::Replay(_)) {
        return Err(Usage("a run record cannot contain a replay".into()).into());
    }
    run(rec.command)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(projconn::Error::NonFinite { .. }) = cause.downcast_ref::<projconn::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => {
            eprintln!("check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
