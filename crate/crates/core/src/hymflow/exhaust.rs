//! Exhaustion `eps -> 0`, `delta -> 1` and the comparison of consecutive solutions.

use alloc::vec::Vec;

use super::{metric_from_phases, FlowConfig, FlowOutcome, FlowRunner, HermitianMetricField};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ProductGrid};
use crate::holomap::EtaField;
use crate::matrixcore::{sigma_raw, ComplexMatrix};

/// One member of the schedule.
#[derive(Clone, Debug)]
pub struct ExhaustionStage {
    pub eps: f64,
    pub delta: f64,
    pub spec: GridSpec,
    pub outcome: FlowOutcome,
    /// `sup sigma(H, H_xi)`.
    pub sup_sigma_to_xi: f64,
    /// `sup sigma(H, H_xi) / |ln eps|`.
    pub ratio_to_xi: f64,
}

/// Consecutive solutions compared on the smaller domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairComparison {
    pub eps_outer: f64,
    pub eps_inner: f64,
    /// `sup sigma` over the common domain.
    pub sup_sigma: f64,
    /// `sup_{|z| = eps_outer} sigma`, where the outer solution equals `H_xi`.
    pub ring_sigma: f64,
    /// `ring_sigma / |ln eps_outer|`.
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct ExhaustionReport {
    pub stages: Vec<ExhaustionStage>,
    pub pairs: Vec<PairComparison>,
}

impl ExhaustionReport {
    /// Pair ratios strictly decrease along the schedule.
    pub fn pair_ratios_decrease(&self) -> bool {
        self.pairs.windows(2).all(|w| w[1].ratio < w[0].ratio)
    }

    /// Per-run ratios to `H_xi` strictly decrease along the schedule.
    pub fn xi_ratios_decrease(&self) -> bool {
        self.stages.windows(2).all(|w| w[1].ratio_to_xi < w[0].ratio_to_xi)
    }

    /// Largest `d(H, H_xi) / ln(1 - ln|z|)` over all runs.
    pub fn max_distance_ratio(&self) -> f64 {
        self.stages.iter().map(|s| s.outcome.diagnostics.max_distance_ratio()).fold(0.0, f64::max)
    }
}

/// `base` with its `u` range set to `[ln eps, ln delta]` at about the same `h_u`.
pub fn stage_spec(base: &GridSpec, eps: f64, delta: f64) -> GridSpec {
    let hu = (libm::log(base.delta) - libm::log(base.eps)) / (base.nu - 1) as f64;
    let span = libm::log(delta) - libm::log(eps);
    let nu = (libm::round(span / hu) as usize + 1).max(4);
    GridSpec { nu, eps, delta, ..*base }
}

/// `D^{-1/2} H D^{-1/2}` with `D = H_xi` at `u`.
fn normalize(h: &ComplexMatrix, a: &[f64], u: f64, inverse: bool) -> ComplexMatrix {
    let sgn = if inverse { 1.0 } else { -1.0 };
    let d: Vec<f64> = a.iter().map(|&x| libm::exp(sgn * x * u)).collect();
    ComplexMatrix::from_fn(h.dim(), |i, j| h[(i, j)] * (d[i] * d[j]))
}

/// 4-point Lagrange interpolation in `u` of `f` at `(ix, iy, ., ip)`, taken on
/// the `H_xi`-normalized field so that `H_xi` itself is reproduced exactly.
fn interp_u(f: &HermitianMetricField, phases: &[f64], ix: usize, iy: usize, ip: usize, u: f64) -> ComplexMatrix {
    let g = f.grid();
    let nu = g.spec().nu;
    let (_, _, hu, _) = g.spacings();
    let x = (u - g.u(0)) / hu;
    let j0 = (libm::floor(x) as isize - 1).clamp(0, nu as isize - 4) as usize;
    let n = f.dim();
    let mut acc = ComplexMatrix::zeros(n);
    for p in 0..4 {
        let mut wgt = 1.0;
        for q in 0..4 {
            if p != q {
                wgt *= (u - g.u(j0 + q)) / (g.u(j0 + p) - g.u(j0 + q));
            }
        }
        let up = g.u(j0 + p);
        acc += &(&normalize(f.at(ix, iy, j0 + p, ip), phases, up, false) * wgt);
    }
    normalize(&acc.hermitian_part(), phases, u, true)
}

/// Compares `outer` (smaller domain) with `inner` at every node of `outer`.
pub fn compare_pair(outer: &HermitianMetricField, inner: &HermitianMetricField, phases: &[f64]) -> Result<(f64, f64)> {
    let (go, gi) = (outer.grid(), inner.grid());
    let (so, si) = (go.spec(), gi.spec());
    if so.nx != si.nx || so.ny != si.ny || so.nphi != si.nphi || so.r_w != si.r_w {
        return Err(Error::GridMismatch("exhaustion stages must share the w and phi grids".into()));
    }
    if !(si.eps <= so.eps && si.delta >= so.delta) {
        return Err(Error::GridMismatch("inner domain must contain the outer one".into()));
    }
    let mut sup: f64 = 0.0;
    let mut ring: f64 = 0.0;
    for ix in 0..so.nx {
        for iy in 0..so.ny {
            for iu in 0..so.nu {
                let u = go.u(iu);
                for ip in 0..so.nphi {
                    let h2 = interp_u(inner, phases, ix, iy, ip, u);
                    let s = sigma_raw(outer.at(ix, iy, iu, ip), &h2);
                    sup = sup.max(s);
                    if iu == 0 {
                        ring = ring.max(s);
                    }
                }
            }
        }
    }
    Ok((sup, ring))
}

/// Runs the flow for each `(eps_i, delta_i)` and compares consecutive solutions.
pub fn exhaust(e: &EtaField, base: &GridSpec, schedule: &[(f64, f64)], cfg: FlowConfig) -> Result<ExhaustionReport> {
    for w in schedule.windows(2) {
        if !(w[1].0 < w[0].0 && w[1].1 >= w[0].1) {
            return Err(Error::InvalidInput("schedule needs decreasing eps and nondecreasing delta".into()));
        }
    }
    let mut stages = Vec::with_capacity(schedule.len());
    for &(eps, delta) in schedule {
        let spec = stage_spec(base, eps, delta);
        let g = ProductGrid::new(spec)?;
        let initial = metric_from_phases(e.phases(), &g);
        let outcome = FlowRunner::new(e, &initial, cfg)?.run()?;
        let sup = super::sup_sigma(&outcome.field, &initial)?;
        stages.push(ExhaustionStage {
            eps,
            delta,
            spec,
            sup_sigma_to_xi: sup,
            ratio_to_xi: sup / libm::log(eps).abs(),
            outcome,
        });
    }
    let mut pairs = Vec::new();
    for w in stages.windows(2) {
        let (sup, ring) = compare_pair(&w[0].outcome.field, &w[1].outcome.field, e.phases())?;
        pairs.push(PairComparison {
            eps_outer: w[0].eps,
            eps_inner: w[1].eps,
            sup_sigma: sup,
            ring_sigma: ring,
            ratio: ring / libm::log(w[0].eps).abs(),
        });
    }
    Ok(ExhaustionReport { stages, pairs })
}
