//! One flow run: fresh or resumed, checkpointed, with its reports written to the output directory.

use std::path::{Path, PathBuf};

use caloron_core::hymflow::{initial_metric, FlowRunner, FlowStatus, HermitianMetricField};
use caloron_core::Error as CoreError;

use crate::checkpoint::{Checkpoint, RunStatus};
use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};
use crate::report::{self, FlowSummary, Observables};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    /// Converged run or successful command.
    Success = 0,
    /// Bad input, IO failure or corrupt checkpoint.
    Invalid = 1,
    /// Time limit reached or the divergence monitor fired.
    NotConverged = 2,
    /// `verify` found a failing check.
    VerifyFailed = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub status: RunStatus,
    pub field: HermitianMetricField,
    pub observables: Observables,
    pub diagnostics_sha256: String,
}

impl RunSummary {
    pub fn exit(&self) -> ExitStatus {
        if self.status == RunStatus::Converged {
            ExitStatus::Success
        } else {
            ExitStatus::NotConverged
        }
    }
}

/// Runs the flow to completion. With `resume`, an existing checkpoint in the output
/// directory is continued; its config hash must equal that of `cfg`.
pub fn run(cfg: &RunConfig, resume: bool) -> Result<RunSummary> {
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let ck_path = Checkpoint::path_in(out);
    let e = cfg.eta()?;
    let flow_cfg = cfg.flow.config();
    let saved = if resume && ck_path.exists() { Some(Checkpoint::load(&ck_path)?) } else { None };
    if let Some(ck) = &saved {
        if ck.config.hash() != cfg.hash() {
            return Err(CliError::Checkpoint { path: ck_path, reason: "written by a different configuration".into() });
        }
    }
    let (status, state, dt) = match saved {
        Some(ck) if ck.status.is_finished() => {
            let dt = flow_cfg.resolve_dt(ck.state.field.grid())?;
            (ck.status, ck.state, dt)
        }
        other => {
            let mut runner = match other {
                Some(ck) => FlowRunner::resume(&e, ck.state, flow_cfg)?,
                None => FlowRunner::new(&e, &initial_metric(&cfg.xi0()?, &report::grid_of(cfg)?)?, flow_cfg)?,
            };
            let status = drive(cfg, &mut runner, &ck_path)?;
            (status, runner.state(), runner.dt())
        }
    };
    if cfg.checkpoint.enabled {
        Checkpoint { config: cfg.clone(), status, state: state.clone() }.save(&ck_path)?;
    }
    let csv = report::diagnostics_csv(cfg, &state.diagnostics, status)?;
    write(&out.join(report::DIAGNOSTICS_FILE), csv.as_bytes())?;
    let diagnostics_sha256 = report::sha256_hex(csv.as_bytes());
    let d = &state.diagnostics;
    let flow = FlowSummary {
        status,
        dt,
        steps: state.step,
        t_final: state.field.t,
        sup_b_final: d.last().map(|r| r.sup_b),
        sup_b_max_increase: d.sup_b_max_increase(),
        sigma_max_increase: d.sigma_max_increase(),
        max_distance_ratio: d.max_distance_ratio(),
        diagnostics_sha256: diagnostics_sha256.clone(),
    };
    let observables = report::observables(cfg, &e, &state.field, flow)?;
    write(&out.join(report::OBSERVABLES_FILE), &serde_json::to_vec_pretty(&observables)?)?;
    Ok(RunSummary { output: out.clone(), status, field: state.field, observables, diagnostics_sha256 })
}

/// Advances to the end, checkpointing every `checkpoint.every` checks.
fn drive(cfg: &RunConfig, runner: &mut FlowRunner, ck_path: &Path) -> Result<RunStatus> {
    let mut checks = 0usize;
    loop {
        match runner.advance() {
            Ok(FlowStatus::Running) => {}
            Ok(s) => return Ok(s.into()),
            Err(CoreError::Divergence { .. }) => return Ok(RunStatus::Diverged),
            Err(err) => return Err(err.into()),
        }
        checks += 1;
        if cfg.checkpoint.enabled && checks.is_multiple_of(cfg.checkpoint.every) {
            Checkpoint { config: cfg.clone(), status: RunStatus::Running, state: runner.state() }.save(ck_path)?;
        }
    }
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}
