//! Command-line surface; every command maps its outcome to an [`ExitStatus`].

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::Result;
use crate::export::{export, import_json, ExportFormat};
use crate::report::status_name;
use crate::run::{run, ExitStatus};
use crate::sweep::{sweep, thread_count};
use crate::verify::verify;

#[derive(Debug, Parser)]
#[command(name = "caloron", version, about = "Heat-flow construction of periodic instantons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flow one config to convergence and write its reports.
    Run {
        config: PathBuf,
        /// Override a scalar config value, e.g. `--set grid.nu=33`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run or resume a config, then check invariants of the result.
    Verify {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Convert a checkpoint to csv, json, vtk or caloron.
    Export {
        checkpoint: PathBuf,
        /// One of csv, json, vtk, caloron.
        #[arg(long)]
        format: String,
        /// Destination directory (defaults to the checkpoint's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a `state.json` export back into a binary checkpoint.
    Import {
        state: PathBuf,
        /// Output directory receiving `checkpoint.bin`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every entry of a sweep file; `CALORON_THREADS` sets the worker count.
    Sweep { sweep: PathBuf },
}

/// Parses `args`; usage errors exit 1 like any other invalid input, help and version exit 0.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, ExitStatus>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitStatus::Invalid
        } else {
            ExitStatus::Success
        }
    })
}

pub fn execute(cli: Cli) -> ExitStatus {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::Invalid
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitStatus> {
    match cmd {
        Command::Run { config, set, resume } => {
            let cfg = RunConfig::load(&config, &set)?;
            let s = run(&cfg, resume)?;
            let f = &s.observables.flow;
            println!(
                "{}: t = {:.6}, steps = {}, sup|B| = {:.3e}, output {}",
                status_name(s.status),
                f.t_final,
                f.steps,
                f.sup_b_final.unwrap_or(f64::NAN),
                s.output.display()
            );
            Ok(s.exit())
        }
        Command::Verify { config, set } => {
            let cfg = RunConfig::load(&config, &set)?;
            let (_, report) = verify(&cfg)?;
            print!("{}", report.table());
            Ok(if report.passed() { ExitStatus::Success } else { ExitStatus::VerifyFailed })
        }
        Command::Export { checkpoint, format, out } => {
            let format: ExportFormat = format.parse()?;
            let ck = Checkpoint::load(&checkpoint)?;
            let dir = out.unwrap_or_else(|| checkpoint.parent().map(PathBuf::from).unwrap_or_default());
            for f in export(&ck, format, &dir)? {
                println!("{}", f.display());
            }
            Ok(ExitStatus::Success)
        }
        Command::Import { state, out } => {
            let ck = import_json(&state)?;
            std::fs::create_dir_all(&out).map_err(crate::error::io_err(&out))?;
            let path = Checkpoint::path_in(&out);
            ck.save(&path)?;
            println!("{}", path.display());
            Ok(ExitStatus::Success)
        }
        Command::Sweep { sweep: path } => {
            let outcomes = sweep(&path, thread_count())?;
            for o in &outcomes {
                println!(
                    "{:<24} exit {}{}",
                    o.name,
                    o.exit.code(),
                    o.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
                );
            }
            let invalid = outcomes.iter().any(|o| o.exit == ExitStatus::Invalid);
            Ok(if invalid { ExitStatus::Invalid } else { ExitStatus::Success })
        }
    }
}
