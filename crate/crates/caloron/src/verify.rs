//! Invariant checks on a finished run; randomized checks draw from the config seed.

use std::f64::consts::PI;

use caloron_core::geometry::{laplacian_apply_scalar, ProductGrid};
use caloron_core::holomap::EtaField;
use caloron_core::hymflow::{hym_tensor, initial_metric, HermitianMetricField};
use caloron_core::instanton::curvature_of_pair;
use caloron_core::looporbit::{holonomy, holonomy_path};
use caloron_core::matrixcore::{c, expm, ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::run::{self, RunSummary};

pub const VERIFY_FILE: &str = "verify.json";

/// Random draws per randomized check.
const SAMPLES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_sha256: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One aligned line per check.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        self.checks
            .iter()
            .map(|c| {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                format!("{mark}  {:<width$}  {:>12.4e}  <= {:.1e}\n", c.name, c.value, c.tolerance)
            })
            .collect()
    }
}

/// Runs (or resumes) `cfg`, then checks the finished state.
pub fn verify(cfg: &RunConfig) -> Result<(RunSummary, VerifyReport)> {
    let summary = run::run(cfg, true)?;
    let report = check_run(cfg, &summary)?;
    run::write(&cfg.output.join(VERIFY_FILE), &serde_json::to_vec_pretty(&report)?)?;
    Ok((summary, report))
}

pub fn check_run(cfg: &RunConfig, summary: &RunSummary) -> Result<VerifyReport> {
    let e = cfg.eta()?;
    let h = &summary.field;
    let g = h.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h_xi = initial_metric(&cfg.xi0()?, g)?;
    let flow = &summary.observables.flow;
    let mut checks = vec![
        Check::at_most("stationary_reference", stationary_defect(&e, &h_xi)?, 1e-10),
        Check::at_most("dirichlet_boundary", boundary_defect(h, &h_xi), 0.0),
        Check::at_most("positive_hermitian", h.validate().map_or(1.0, |_| 0.0), 0.0),
        Check::at_most("sup_b_monotone", flow.sup_b_max_increase, 1e-8),
        Check::at_most("sigma_drift_monotone", flow.sigma_max_increase, 1e-8),
        Check::at_most("laplacian_nonnegative", laplacian_negativity(g, &mut rng)?, 1e-12),
        Check::at_most("holonomy_closed_form", holonomy_gap(cfg)?, 1e-10),
        Check::at_most("density_gauge_invariance", gauge_defect(h, &e, &mut rng)?, 1e-10),
    ];
    if let (Some(k), Some(d)) = (summary.observables.charge, summary.observables.degree) {
        checks.push(Check::at_most("charge_matches_degree", (k.value - d.value).abs(), 2e-2 + k.error + d.error));
    }
    if let Some(en) = &summary.observables.initial_energy {
        let tol =
            1e-6 + (en.full.error + 2.0 * en.plus.error + 8.0 * PI * PI * en.charge.error) / en.full.value.max(1e-300);
        checks.push(Check::at_most("initial_energy_identity", en.relative_gap, tol));
    }
    Ok(VerifyReport { config_sha256: cfg.hash_hex(), checks })
}

/// `sup |B(H_xi, 0)|`.
fn stationary_defect(e: &EtaField, h_xi: &HermitianMetricField) -> Result<f64> {
    let zero = EtaField::zero(e.dim(), e.phases().to_vec(), e.mu())?;
    let (_, stats) = hym_tensor(h_xi, &zero)?;
    Ok(stats.sup_b)
}

/// Largest entry change on the boundary; the flow keeps it fixed bit for bit.
fn boundary_defect(h: &HermitianMetricField, h_xi: &HermitianMetricField) -> f64 {
    let g = h.grid();
    (0..g.len())
        .filter(|&k| {
            let (ix, iy, iu, _) = g.unindex(k);
            g.is_boundary(ix, iy, iu)
        })
        .map(|k| (&h.values()[k] - &h_xi.values()[k]).max_abs())
        .fold(0.0, f64::max)
}

/// `max(0, -<f, L f>) / <f, f>` over random fields vanishing on the boundary.
fn laplacian_negativity(g: &ProductGrid, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let f: Vec<C64> = (0..g.len())
            .map(|k| {
                let (ix, iy, iu, _) = g.unindex(k);
                if g.is_boundary(ix, iy, iu) {
                    c(0.0, 0.0)
                } else {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                }
            })
            .collect();
        let lf = laplacian_apply_scalar(&f, g)?;
        let (mut q, mut n) = (0.0, 0.0);
        for k in 0..g.len() {
            let (ix, iy, iu, _) = g.unindex(k);
            let v = g.volume(ix, iy, iu);
            q += (f[k].conj() * lf[k]).re * v;
            n += f[k].norm_sqr() * v;
        }
        if n > 0.0 {
            worst = worst.max(-q / n);
        }
    }
    Ok(worst)
}

/// Integrated monodromy of `xi_0` against `exp(-2 pi xi_0 / mu)`.
fn holonomy_gap(cfg: &RunConfig) -> Result<f64> {
    let xi = cfg.xi0()?;
    let path = holonomy_path(&xi, 1)?;
    Ok((path.last().expect("nonempty path") - &holonomy(&xi)?.matrix).max_abs())
}

/// Densities at random nodes before and after a random unitary change of frame.
fn gauge_defect(h: &HermitianMetricField, e: &EtaField, rng: &mut ChaCha8Rng) -> Result<f64> {
    let f = curvature_of_pair(h, e)?;
    let g = f.grid();
    let interior: Vec<usize> = (0..g.len()).filter(|&k| f.samples()[k].is_some()).collect();
    if interior.is_empty() {
        return Ok(0.0);
    }
    let n = h.dim();
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let k = interior[rng.gen_range(0..interior.len())];
        let s = f.samples()[k].as_ref().expect("interior sample");
        let hk = f.metric_at(k).expect("pair curvature carries its metric");
        let a = ComplexMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let u = expm(&(&a - &a.adjoint()));
        let u_inv = u.adjoint();
        // H' = U^{-*} H U^{-1} = U H U^*
        let h2 = &(&u * hk) * &u_inv;
        let (ix, iy, iu, ip) = g.unindex(k);
        let (w, z) = (g.w(ix, iy), g.z(iu, ip));
        let d1 = s.densities(w, z, Some(hk));
        let d2 = s.conjugate(&u, &u_inv).densities(w, z, Some(&h2));
        let scale = d1.full.abs().max(1.0);
        worst = worst.max((d1.top - d2.top).abs() / scale).max((d1.full - d2.full).abs() / scale);
    }
    Ok(worst)
}
