//! Parameter sweeps: many overrides of one base config, run on a thread pool.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};
use crate::run::{self, write, ExitStatus};

pub const THREADS_ENV: &str = "CALORON_THREADS";
pub const SUMMARY_FILE: &str = "sweep.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base run config, relative to the sweep file.
    pub base: PathBuf,
    /// Parent of the per-run output directories, relative to the sweep file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub runs: Vec<SweepRun>,
}

fn default_output() -> PathBuf {
    PathBuf::from("sweep-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub name: String,
    #[serde(default)]
    pub set: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub name: String,
    pub exit: ExitStatus,
    pub config_sha256: Option<String>,
    pub diagnostics_sha256: Option<String>,
    pub error: Option<String>,
}

/// Worker count from `CALORON_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every entry; a failing run is recorded and the rest continue.
pub fn sweep(path: &Path, threads: usize) -> Result<Vec<SweepOutcome>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let sc: SweepConfig = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let root = path.parent().unwrap_or(Path::new("."));
    let base = root.join(&sc.base);
    let out_root = root.join(&sc.output);
    let mut names: Vec<&str> = sc.runs.iter().map(|r| r.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
        return Err(CliError::Config("sweep run names must be unique plain file names".into()));
    }
    std::fs::create_dir_all(&out_root).map_err(io_err(&out_root))?;
    let next = AtomicUsize::new(0);
    let results = Mutex::new(vec![None; sc.runs.len()]);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, sc.runs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(r) = sc.runs.get(i) else { break };
                let outcome = run_one(&base, &out_root, r);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<SweepOutcome> =
        results.into_inner().expect("workers joined").into_iter().map(|o| o.expect("every run visited")).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "exit_code", "config_sha256", "diagnostics_sha256", "error"])?;
    for o in &outcomes {
        w.write_record([
            o.name.clone(),
            o.exit.code().to_string(),
            o.config_sha256.clone().unwrap_or_default(),
            o.diagnostics_sha256.clone().unwrap_or_default(),
            o.error.clone().unwrap_or_default(),
        ])?;
    }
    write(&out_root.join(SUMMARY_FILE), &w.into_inner().expect("in-memory writer flushes"))?;
    Ok(outcomes)
}

fn run_one(base: &Path, out_root: &Path, r: &SweepRun) -> SweepOutcome {
    let result = RunConfig::load(base, &r.set).and_then(|mut cfg| {
        cfg.output = out_root.join(&r.name);
        let hash = cfg.hash_hex();
        run::run(&cfg, true).map(|s| (hash, s))
    });
    match result {
        Ok((hash, s)) => SweepOutcome {
            name: r.name.clone(),
            exit: s.exit(),
            config_sha256: Some(hash),
            diagnostics_sha256: Some(s.diagnostics_sha256),
            error: None,
        },
        Err(e) => SweepOutcome {
            name: r.name.clone(),
            exit: ExitStatus::Invalid,
            config_sha256: None,
            diagnostics_sha256: None,
            error: Some(e.to_string()),
        },
    }
}
