//! Dual-run comparison of an input with its lattice shift.

use super::curvature::{curvature_of_pair, CurvatureField};
use crate::error::Result;
use crate::geometry::ProductGrid;
use crate::holomap::EtaField;
use crate::hymflow::{run_flow, FlowConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftProbe {
    /// `sup |tr(F^F)_1 - tr(F^F)_2| / sup |tr(F^F)_1|`.
    pub top_discrepancy: f64,
    /// Same for `|F|^2`.
    pub energy_discrepancy: f64,
    pub converged: (bool, bool),
}

/// Relative sup discrepancies of two curvature fields' gauge-invariant densities.
pub fn density_discrepancy(f1: &CurvatureField, f2: &CurvatureField) -> (f64, f64) {
    let (mut dt, mut de, mut st, mut se) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..f1.grid().len() {
        if let (Some(a), Some(b)) = (f1.densities(k), f2.densities(k)) {
            dt = dt.max((a.top - b.top).abs());
            de = de.max((a.full - b.full).abs());
            st = st.max(a.top.abs());
            se = se.max(a.full.abs());
        }
    }
    let rel = |d: f64, s: f64| if d == 0.0 { 0.0 } else { d / s };
    (rel(dt, st), rel(de, se))
}

/// Flows `e` and `e` shifted by `k`, then compares `tr(F^F)` and `|F|^2` node by node.
pub fn shift_equivalence_probe(e: &EtaField, k: &[i64], g: &ProductGrid, cfg: FlowConfig) -> Result<ShiftProbe> {
    let shifted = e.lattice_shift(k)?;
    let r1 = run_flow(e, g, cfg)?;
    let r2 = run_flow(&shifted, g, cfg)?;
    let f1 = curvature_of_pair(&r1.field, e)?;
    let f2 = curvature_of_pair(&r2.field, &shifted)?;
    let (top, full) = density_discrepancy(&f1, &f2);
    Ok(ShiftProbe { top_discrepancy: top, energy_discrepancy: full, converged: (r1.converged(), r2.converged()) })
}
