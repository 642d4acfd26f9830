//! Run outputs: `diagnostics.csv` and `observables.json`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use caloron_core::geometry::ProductGrid;
use caloron_core::holomap::EtaField;
use caloron_core::hymflow::{
    exhaust, hym_tensor, initial_bound_ratio, ExhaustionReport, FlowDiagnostics, HermitianMetricField,
};
use caloron_core::instanton::{
    asd_residual, caloron_fields, charge, connection_from_pair, curvature_of_pair, decay_report, energy_on_grid,
    initial_energy_identity, DecayFit,
};
use caloron_core::quad::Estimate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::RunStatus;
use crate::config::{GridConfig, RunConfig};
use crate::error::Result;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const OBSERVABLES_FILE: &str = "observables.json";

/// Header of the diagnostics table; empty `sigma_drift` means fewer than `tau` steps so far.
pub const DIAGNOSTICS_COLUMNS: [&str; 6] = ["step", "t", "sup_b", "energy", "sigma_drift", "distance_ratio"];

/// Diagnostics table: `#` metadata lines, a header, then one row per monitor check.
/// Floats use `{:.17e}` so equal runs give byte-equal files.
pub fn diagnostics_csv(cfg: &RunConfig, d: &FlowDiagnostics, status: RunStatus) -> Result<String> {
    let s = cfg.grid.spec();
    let mut out = String::new();
    writeln!(out, "# config_sha256={}", cfg.hash_hex()).expect("string write");
    writeln!(
        out,
        "# grid nx={} ny={} nu={} nphi={} r_w={:.17e} eps={:.17e} delta={:.17e}",
        s.nx, s.ny, s.nu, s.nphi, s.r_w, s.eps, s.delta
    )
    .expect("string write");
    writeln!(out, "# status={}", status_name(status)).expect("string write");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DIAGNOSTICS_COLUMNS)?;
    for r in &d.rows {
        w.write_record([
            r.step.to_string(),
            format!("{:.17e}", r.t),
            format!("{:.17e}", r.sup_b),
            format!("{:.17e}", r.energy),
            r.sigma_drift.map(|x| format!("{x:.17e}")).unwrap_or_default(),
            format!("{:.17e}", r.distance_ratio),
        ])?;
    }
    let body = w.into_inner().expect("in-memory writer flushes");
    out.push_str(std::str::from_utf8(&body).expect("csv of ascii"));
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Running => "running",
        RunStatus::Converged => "converged",
        RunStatus::TimeLimit => "time_limit",
        RunStatus::Diverged => "diverged",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub value: f64,
    pub error: f64,
}

impl From<Estimate> for EstimateJson {
    fn from(e: Estimate) -> Self {
        Self { value: e.value, error: e.error }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub status: RunStatus,
    pub dt: f64,
    pub steps: u64,
    pub t_final: f64,
    pub sup_b_final: Option<f64>,
    pub sup_b_max_increase: f64,
    pub sigma_max_increase: f64,
    pub max_distance_ratio: f64,
    pub diagnostics_sha256: String,
}

/// Whole-domain energy split of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialEnergyJson {
    pub full: EstimateJson,
    pub plus: EstimateJson,
    pub top: EstimateJson,
    pub charge: EstimateJson,
    /// `|full - (2 plus + 8 pi^2 charge)|` relative to `full`.
    pub relative_gap: f64,
}

/// Energy split of the final connection over the grid interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEnergyJson {
    pub full: f64,
    pub plus_curvature: f64,
    pub plus_tensor: f64,
    pub top: f64,
    pub relative_gap: f64,
    /// `full / (8 pi^2 k)` with `k` the contour charge; absent when `k = 0` or the charge is off.
    pub full_over_topological: Option<f64>,
    pub asd_sup: f64,
    pub asd_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageJson {
    pub ln_eps: f64,
    pub delta: f64,
    pub status: RunStatus,
    pub sup_sigma_to_xi: f64,
    pub ratio_to_xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    pub ln_eps_outer: f64,
    pub ln_eps_inner: f64,
    pub sup_sigma: f64,
    pub ring_sigma: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionJson {
    pub stages: Vec<StageJson>,
    pub pairs: Vec<PairJson>,
    pub pair_ratios_decrease: bool,
    pub xi_ratios_decrease: bool,
    pub max_distance_ratio: f64,
}

impl From<&ExhaustionReport> for ExhaustionJson {
    fn from(r: &ExhaustionReport) -> Self {
        Self {
            stages: r
                .stages
                .iter()
                .map(|s| StageJson {
                    ln_eps: s.eps.ln(),
                    delta: s.delta,
                    status: s.outcome.status.into(),
                    sup_sigma_to_xi: s.sup_sigma_to_xi,
                    ratio_to_xi: s.ratio_to_xi,
                })
                .collect(),
            pairs: r
                .pairs
                .iter()
                .map(|p| PairJson {
                    ln_eps_outer: p.eps_outer.ln(),
                    ln_eps_inner: p.eps_inner.ln(),
                    sup_sigma: p.sup_sigma,
                    ring_sigma: p.ring_sigma,
                    ratio: p.ratio,
                })
                .collect(),
            pair_ratios_decrease: r.pair_ratios_decrease(),
            xi_ratios_decrease: r.xi_ratios_decrease(),
            max_distance_ratio: r.max_distance_ratio(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFitJson {
    pub exponent: Option<f64>,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub max_value: f64,
    pub theta_spread: f64,
}

impl From<DecayFit> for DecayFitJson {
    fn from(f: DecayFit) -> Self {
        Self {
            exponent: f.exponent,
            std_error: f.std_error,
            ci95: f.ci95,
            max_value: f.max_value,
            theta_spread: f.theta_spread,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecayJson {
    Fitted {
        r_min: f64,
        r_max: f64,
        higgs_deviation: DecayFitJson,
        higgs_invariant: DecayFitJson,
        connection: DecayFitJson,
    },
    /// The sampled radii do not support a fit.
    Unavailable { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub config_sha256: String,
    pub grid: GridConfig,
    pub flow: FlowSummary,
    pub charge: Option<EstimateJson>,
    pub degree: Option<EstimateJson>,
    pub initial_energy: Option<InitialEnergyJson>,
    pub grid_energy: Option<GridEnergyJson>,
    pub initial_bound_ratio: Option<f64>,
    pub exhaustion: Option<ExhaustionJson>,
    pub decay: Option<DecayJson>,
}

/// Evaluates the observables switched on in `cfg` for the final metric `field`.
pub fn observables(
    cfg: &RunConfig,
    e: &EtaField,
    field: &HermitianMetricField,
    flow: FlowSummary,
) -> Result<Observables> {
    let obs = &cfg.observables;
    let grid = field.grid();
    let (charge_est, degree_est) =
        if obs.charge { (Some(charge(e, obs.quad.spec())?), Some(e.degree(obs.quad.spec())?)) } else { (None, None) };
    let initial_energy = if obs.initial_energy {
        let id = initial_energy_identity(e, obs.energy_quad.spec())?;
        Some(InitialEnergyJson {
            full: id.full.into(),
            plus: id.plus.into(),
            top: id.top.into(),
            charge: id.charge.into(),
            relative_gap: id.relative_gap(),
        })
    } else {
        None
    };
    let grid_energy = if obs.grid_energy {
        let f = curvature_of_pair(field, e)?;
        let (b, _) = hym_tensor(field, e)?;
        let en = energy_on_grid(&f, &b)?;
        let asd = asd_residual(&f);
        let full_over_topological =
            charge_est.filter(|k| k.value.abs() > 1e-12).map(|k| en.full / (8.0 * PI * PI * k.value));
        Some(GridEnergyJson {
            full: en.full,
            plus_curvature: en.plus_curvature,
            plus_tensor: en.plus_tensor,
            top: en.top,
            relative_gap: en.relative_gap(),
            full_over_topological,
            asd_sup: asd.sup,
            asd_l2: asd.l2,
        })
    } else {
        None
    };
    let initial_bound_ratio = if obs.initial_bound { Some(initial_bound_ratio(e, grid)?) } else { None };
    let exhaustion = if cfg.exhaustion.ln_eps.is_empty() {
        None
    } else {
        let schedule: Vec<(f64, f64)> = cfg.exhaustion.ln_eps.iter().map(|l| (l.exp(), cfg.grid.delta)).collect();
        Some(ExhaustionJson::from(&exhaust(e, &cfg.grid.spec(), &schedule, cfg.flow.config())?))
    };
    let decay = if obs.decay { Some(decay(cfg, e, field)?) } else { None };
    Ok(Observables {
        config_sha256: cfg.hash_hex(),
        grid: cfg.grid,
        flow,
        charge: charge_est.map(Into::into),
        degree: degree_est.map(Into::into),
        initial_energy,
        grid_energy,
        initial_bound_ratio,
        exhaustion,
        decay,
    })
}

fn decay(cfg: &RunConfig, e: &EtaField, field: &HermitianMetricField) -> Result<DecayJson> {
    let a = connection_from_pair(field, e)?;
    let xi0 = cfg.xi0()?.mode(0);
    let sample = caloron_fields(&a, &xi0, cfg.input.mu, None)?;
    Ok(match decay_report(&sample) {
        Ok(r) => DecayJson::Fitted {
            r_min: r.r_min,
            r_max: r.r_max,
            higgs_deviation: r.higgs_deviation.into(),
            higgs_invariant: r.higgs_invariant.into(),
            connection: r.connection.into(),
        },
        Err(err) => DecayJson::Unavailable { reason: err.to_string() },
    })
}

/// The grid a config describes.
pub fn grid_of(cfg: &RunConfig) -> Result<ProductGrid> {
    Ok(ProductGrid::new(cfg.grid.spec())?)
}
