//! Hermitian-Yang-Mills heat flow `H^{-1} dH/dt = B(H, eta)` on the product
//! grid with Dirichlet data `H_xi`, plus its monitors and the exhaustion.
//!
//! `B` follows the metric-consistent convention
//! `B = u^2 (d_u + i d_phi)(H^{-1}(d_u - i d_phi) H) + (1 + |w|^2)^2 { d_wbar(H^{-1} d_w H)
//! - d_wbar K - d_w eta + [eta, H^{-1} d_w H - K] }` with `K = H^{-1} eta^* H`.
//!
//! Supported fibre dimensions are `1..=4`.

pub mod exhaust;
mod kernel;

use alloc::collections::VecDeque;
use alloc::vec::Vec;

pub use exhaust::{compare_pair, exhaust, stage_spec, ExhaustionReport, ExhaustionStage, PairComparison};
pub use kernel::TensorStats;

use crate::error::{Error, Result};
use crate::fixed::Mat;
use crate::geometry::ProductGrid;
use crate::holomap::EtaField;
use crate::looporbit::LoopAlgebraElement;
use crate::matrixcore::{ComplexMatrix, HermitianPD};
use kernel::Kernel;

/// Slack allowed on the monotone monitors.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Consecutive `sup |B|` increases that abort a run.
pub const DIVERGENCE_CHECKS: u32 = 3;
/// Largest fibre dimension handled by the flow.
pub const MAX_DIM: usize = 4;

/// Diagonal of `i xi_0` for a constant diagonal loop.
pub fn phases_of(xi0: &LoopAlgebraElement) -> Result<Vec<f64>> {
    if !xi0.is_constant() {
        return Err(Error::InvalidInput("initial metric needs a constant loop; take its canonical form first".into()));
    }
    let m = xi0.mode(0);
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 0.0 {
                return Err(Error::InvalidInput("initial metric needs a diagonal loop".into()));
            }
        }
    }
    Ok((0..n).map(|i| -m[(i, i)].im).collect())
}

/// Metric values at every grid node and the flow time.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMetricField {
    grid: ProductGrid,
    dim: usize,
    pub t: f64,
    values: Vec<ComplexMatrix>,
}

impl HermitianMetricField {
    pub fn new(grid: ProductGrid, t: f64, values: Vec<ComplexMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!("{} values for {} nodes", values.len(), grid.len())));
        }
        let dim = values.first().map_or(1, ComplexMatrix::dim);
        for v in &values {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
        }
        Ok(Self { grid, dim, t, values })
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[ComplexMatrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.values
    }

    pub fn at(&self, ix: usize, iy: usize, iu: usize, ip: usize) -> &ComplexMatrix {
        &self.values[self.grid.index(ix, iy, iu, ip)]
    }

    /// Checks Hermiticity and the positivity floor at every node.
    pub fn validate(&self) -> Result<()> {
        for v in &self.values {
            HermitianPD::new(v.clone())?;
        }
        Ok(())
    }

    fn to_fixed<const N: usize>(&self) -> Vec<Mat<N>> {
        self.values.iter().map(Mat::from_matrix).collect()
    }

    fn from_fixed<const N: usize>(grid: ProductGrid, t: f64, v: &[Mat<N>]) -> Self {
        Self { grid, dim: N, t, values: v.iter().map(Mat::to_matrix).collect() }
    }
}

/// `H_xi = diag(|z|^{2 a_j}) = diag(e^{2 a_j u})` at every node.
pub fn initial_metric(xi0: &LoopAlgebraElement, g: &ProductGrid) -> Result<HermitianMetricField> {
    let a = phases_of(xi0)?;
    Ok(metric_from_phases(&a, g))
}

pub(crate) fn metric_from_phases(a: &[f64], g: &ProductGrid) -> HermitianMetricField {
    let s = *g.spec();
    let rows: Vec<ComplexMatrix> = (0..s.nu)
        .map(|iu| {
            let u = g.u(iu);
            let d: Vec<f64> = a.iter().map(|&x| libm::exp(2.0 * x * u)).collect();
            ComplexMatrix::from_real_diag(&d)
        })
        .collect();
    let values = (0..g.len()).map(|k| rows[g.unindex(k).2].clone()).collect();
    HermitianMetricField { grid: g.clone(), dim: a.len(), t: 0.0, values }
}

enum AnyKernel {
    D1(Kernel<1>),
    D2(Kernel<2>),
    D3(Kernel<3>),
    D4(Kernel<4>),
}

macro_rules! with_kernel {
    ($any:expr, $k:ident => $body:expr) => {
        match $any {
            AnyKernel::D1($k) => $body,
            AnyKernel::D2($k) => $body,
            AnyKernel::D3($k) => $body,
            AnyKernel::D4($k) => $body,
        }
    };
}

fn check_pair(h: &HermitianMetricField, e: &EtaField) -> Result<()> {
    if h.dim != e.dim() {
        return Err(Error::DimensionMismatch { expected: e.dim(), found: h.dim });
    }
    if h.dim == 0 || h.dim > MAX_DIM {
        return Err(Error::InvalidInput(alloc::format!("flow supports fibre dimension 1..={MAX_DIM}")));
    }
    Ok(())
}

impl AnyKernel {
    fn new(h: &HermitianMetricField, e: &EtaField) -> Result<Self> {
        check_pair(h, e)?;
        let g = h.grid.clone();
        let a = e.phases();
        Ok(match h.dim {
            1 => AnyKernel::D1(Kernel::new(g, a, e, h.to_fixed())?),
            2 => AnyKernel::D2(Kernel::new(g, a, e, h.to_fixed())?),
            3 => AnyKernel::D3(Kernel::new(g, a, e, h.to_fixed())?),
            _ => AnyKernel::D4(Kernel::new(g, a, e, h.to_fixed())?),
        })
    }

    fn field(&self, t: f64) -> HermitianMetricField {
        with_kernel!(self, k => HermitianMetricField::from_fixed(k.grid.clone(), t, &k.h))
    }
}

/// `B(H, eta)` at every node; Dirichlet nodes carry zero.
pub fn hym_tensor(h: &HermitianMetricField, e: &EtaField) -> Result<(Vec<ComplexMatrix>, TensorStats)> {
    let mut k = AnyKernel::new(h, e)?;
    with_kernel!(&mut k, k => {
        let (b, stats) = k.tensor()?;
        Ok((b.iter().map(Mat::to_matrix).collect(), stats))
    })
}

/// One explicit step of length `dt`; Dirichlet nodes are left at their values.
pub fn flow_step(h: &HermitianMetricField, e: &EtaField, dt: f64) -> Result<HermitianMetricField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let mut k = AnyKernel::new(h, e)?;
    with_kernel!(&mut k, k => { k.step(dt)?; });
    Ok(k.field(h.t + dt))
}

/// `f / max(4 u^2 (1/h_u^2 + 1/h_phi^2) + 4 (1 + |w|^2)^2 / h_w^2)` over interior nodes.
pub fn cfl_dt(g: &ProductGrid, factor: f64) -> f64 {
    let s = g.spec();
    let (hx, hy, hu, hp) = g.spacings();
    let hw = hx.min(hy);
    let mut wmax: f64 = 0.0;
    for ix in 1..s.nx - 1 {
        for iy in 1..s.ny - 1 {
            wmax = wmax.max(crate::sqr(1.0 + g.w(ix, iy).norm_sqr()));
        }
    }
    let umax = (1..s.nu - 1).map(|iu| crate::sqr(g.u(iu))).fold(0.0, f64::max);
    factor / (4.0 * umax * (1.0 / (hu * hu) + 1.0 / (hp * hp)) + 4.0 * wmax / (hw * hw))
}

/// Run parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    /// Fixed step; `None` selects [`cfl_dt`] with `cfl_factor`.
    pub dt: Option<f64>,
    pub cfl_factor: f64,
    pub t_max: f64,
    pub tol_b: f64,
    /// Steps between monitor evaluations.
    pub check_every: usize,
    /// Lag of the `sigma(H(t), H(t + tau))` monitor, in steps; a multiple of `check_every`.
    pub tau_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { dt: None, cfl_factor: 1.0, t_max: 40.0, tol_b: 1e-6, check_every: 50, tau_steps: 50 }
    }
}

impl FlowConfig {
    pub fn resolve_dt(&self, g: &ProductGrid) -> Result<f64> {
        let bound = cfl_dt(g, 1.0);
        let dt = self.dt.unwrap_or(self.cfl_factor * bound);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        if dt > bound {
            return Err(Error::InvalidInput(alloc::format!("dt {dt:e} exceeds the stability bound {bound:e}")));
        }
        if self.check_every == 0 || self.tau_steps == 0 || !self.tau_steps.is_multiple_of(self.check_every) {
            return Err(Error::InvalidInput("tau_steps must be a positive multiple of check_every".into()));
        }
        if !(self.tol_b > 0.0 && self.t_max >= 0.0) {
            return Err(Error::InvalidInput("tol_b must be positive and t_max nonnegative".into()));
        }
        Ok(dt)
    }
}

/// One monitor evaluation, taken at `H(t)` before the step from `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagRow {
    pub step: u64,
    pub t: f64,
    pub sup_b: f64,
    pub energy: f64,
    /// `sup sigma(H(t - tau), H(t))`, once a full lag is available.
    pub sigma_drift: Option<f64>,
    /// `max d(H, H_xi) / ln(1 - u)`.
    pub distance_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowDiagnostics {
    pub rows: Vec<DiagRow>,
}

impl FlowDiagnostics {
    /// Largest rise of `sup |B|` between consecutive rows.
    pub fn sup_b_max_increase(&self) -> f64 {
        self.rows.windows(2).map(|w| w[1].sup_b - w[0].sup_b).fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    /// Largest rise of the lagged `sigma` drift between consecutive values.
    pub fn sigma_max_increase(&self) -> f64 {
        let s: Vec<f64> = self.rows.iter().filter_map(|r| r.sigma_drift).collect();
        s.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    pub fn max_distance_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.distance_ratio).fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&DiagRow> {
        self.rows.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Running,
    Converged,
    /// `t_max` reached first.
    TimeLimit,
}

/// Everything needed to continue a run bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct RunnerState {
    pub field: HermitianMetricField,
    pub step: u64,
    /// Fields at the most recent checks, oldest first.
    pub snapshots: Vec<HermitianMetricField>,
    pub increases: u32,
    pub diagnostics: FlowDiagnostics,
}

/// Stepwise driver of the flow, stopping at every monitor check.
pub struct FlowRunner {
    kernel: AnyKernel,
    cfg: FlowConfig,
    dt: f64,
    step: u64,
    t: f64,
    snapshots: VecDeque<HermitianMetricField>,
    increases: u32,
    diagnostics: FlowDiagnostics,
    status: FlowStatus,
}

impl FlowRunner {
    pub fn new(e: &EtaField, initial: &HermitianMetricField, cfg: FlowConfig) -> Result<Self> {
        initial.validate()?;
        let dt = cfg.resolve_dt(initial.grid())?;
        Ok(Self {
            kernel: AnyKernel::new(initial, e)?,
            cfg,
            dt,
            step: 0,
            t: initial.t,
            snapshots: VecDeque::new(),
            increases: 0,
            diagnostics: FlowDiagnostics::default(),
            status: FlowStatus::Running,
        })
    }

    /// Continues from a saved state; `e` and `cfg` must match the original run.
    pub fn resume(e: &EtaField, state: RunnerState, cfg: FlowConfig) -> Result<Self> {
        let mut r = Self::new(e, &state.field, cfg)?;
        r.step = state.step;
        r.snapshots = state.snapshots.into_iter().collect();
        r.increases = state.increases;
        r.diagnostics = state.diagnostics;
        Ok(r)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn status(&self) -> FlowStatus {
        self.status
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn diagnostics(&self) -> &FlowDiagnostics {
        &self.diagnostics
    }

    pub fn field(&self) -> HermitianMetricField {
        self.kernel.field(self.t)
    }

    pub fn state(&self) -> RunnerState {
        RunnerState {
            field: self.field(),
            step: self.step,
            snapshots: self.snapshots.iter().cloned().collect(),
            increases: self.increases,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Evaluates the monitors at the current state and decides whether to stop.
    fn check(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let t = self.t;
        let (stats, dist, field) = with_kernel!(&mut self.kernel, k => {
            let (_, stats) = k.tensor()?;
            (stats, k.distance_ratio(), HermitianMetricField::from_fixed(k.grid.clone(), t, &k.h))
        });
        let lag = cfg.tau_steps / cfg.check_every;
        let sigma_drift = if self.snapshots.len() == lag {
            let old = self.snapshots.pop_front().expect("full lag");
            Some(sup_sigma_fields(&old, &field))
        } else {
            None
        };
        self.snapshots.push_back(field);
        if let Some(prev) = self.diagnostics.last() {
            if stats.sup_b > prev.sup_b + MONOTONE_SLACK {
                self.increases += 1;
            } else {
                self.increases = 0;
            }
        }
        self.diagnostics.rows.push(DiagRow {
            step: self.step,
            t,
            sup_b: stats.sup_b,
            energy: stats.energy,
            sigma_drift,
            distance_ratio: dist,
        });
        if self.increases >= DIVERGENCE_CHECKS {
            return Err(Error::Divergence { t, sup_b: stats.sup_b });
        }
        if stats.sup_b < cfg.tol_b {
            self.status = FlowStatus::Converged;
        } else if t >= cfg.t_max {
            self.status = FlowStatus::TimeLimit;
        }
        Ok(())
    }

    /// Runs to the next monitor check (or the end); returns the status there.
    pub fn advance(&mut self) -> Result<FlowStatus> {
        if self.status == FlowStatus::Running && self.diagnostics.last().is_none_or(|r| r.step != self.step) {
            self.check()?;
        }
        if self.status != FlowStatus::Running {
            return Ok(self.status);
        }
        for _ in 0..self.cfg.check_every {
            with_kernel!(&mut self.kernel, k => { k.step(self.dt)?; });
            self.step += 1;
            self.t += self.dt;
        }
        self.check()?;
        Ok(self.status)
    }

    /// Runs to completion.
    pub fn run(mut self) -> Result<FlowOutcome> {
        let status = loop {
            let s = self.advance()?;
            if s != FlowStatus::Running {
                break s;
            }
        };
        Ok(FlowOutcome { field: self.field(), diagnostics: self.diagnostics, status, dt: self.dt })
    }
}

fn sup_sigma_fields(a: &HermitianMetricField, b: &HermitianMetricField) -> f64 {
    match a.dim {
        1 => Kernel::<1>::sup_sigma(&a.to_fixed(), &b.to_fixed()),
        2 => Kernel::<2>::sup_sigma(&a.to_fixed(), &b.to_fixed()),
        3 => Kernel::<3>::sup_sigma(&a.to_fixed(), &b.to_fixed()),
        _ => Kernel::<4>::sup_sigma(&a.to_fixed(), &b.to_fixed()),
    }
}

/// `sup sigma(H_1, H_2)` over nodes of two fields on the same grid.
pub fn sup_sigma(a: &HermitianMetricField, b: &HermitianMetricField) -> Result<f64> {
    if a.grid != b.grid || a.dim != b.dim {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    Ok(sup_sigma_fields(a, b))
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub field: HermitianMetricField,
    pub diagnostics: FlowDiagnostics,
    pub status: FlowStatus,
    pub dt: f64,
}

impl FlowOutcome {
    pub fn converged(&self) -> bool {
        self.status == FlowStatus::Converged
    }
}

/// Flows from `H_xi` until `sup |B| < tol_b` or `t_max`.
pub fn run_flow(e: &EtaField, g: &ProductGrid, cfg: FlowConfig) -> Result<FlowOutcome> {
    let initial = metric_from_phases(e.phases(), g);
    FlowRunner::new(e, &initial, cfg)?.run()
}

/// `sup |B(H_xi, eta)| / (1 - |z|)` over interior nodes.
pub fn initial_bound_ratio(e: &EtaField, g: &ProductGrid) -> Result<f64> {
    let h = metric_from_phases(e.phases(), g);
    let (b, _) = hym_tensor(&h, e)?;
    let mut best: f64 = 0.0;
    for (k, bk) in b.iter().enumerate() {
        let (ix, iy, iu, ip) = g.unindex(k);
        if g.is_boundary(ix, iy, iu) {
            continue;
        }
        let hk = HermitianPD::new_unchecked(h.values[k].clone());
        let nb = crate::matrixcore::h_norm_sqr(&hk.inverse(), hk.matrix(), bk).max(0.0);
        let r = g.z(iu, ip).norm();
        best = best.max(libm::sqrt(nb) / (1.0 - r));
    }
    Ok(best)
}
