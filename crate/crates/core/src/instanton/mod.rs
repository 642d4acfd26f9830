//! Connections built from `(H, eta)`, their curvature, the ASD residual, energy,
//! charge, and the fields on `S^1 x R^3`.
//!
//! Complex components use `d_w = (d_x - i d_y)/2` and `d_z = (d_u - i d_phi)/(2z)`.

mod caloron;
mod charge;
mod curvature;
mod jet;
mod probe;

use alloc::vec::Vec;

pub use caloron::{caloron_fields, decay_report, radial_transport, CaloronSample, DecayFit, DecayReport};
pub use charge::{charge, initial_energy_identity, EnergyIdentity};
pub use curvature::{
    asd_residual, curvature, curvature_of_pair, energy_on_grid, AsdResidual, CurvatureField, CurvatureSample,
    GridEnergy,
};
pub use probe::{density_discrepancy, shift_equivalence_probe, ShiftProbe};

use crate::error::{Error, Result};
use crate::geometry::ProductGrid;
use crate::holomap::EtaField;
use crate::hymflow::HermitianMetricField;
use crate::matrixcore::{ComplexMatrix, C64};
use jet::Jets;

/// Frame in which connection components are expressed.
#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    /// Holomorphic frame with the Hermitian metric per node; norms use it.
    Holomorphic(Vec<ComplexMatrix>),
    /// Unitary frame (metric `I`); components are anti-Hermitian up to `a_w = -a_wbar^*`.
    Unitary,
}

/// `(A_w, A_wbar, A_z, A_zbar)` at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSample {
    pub a_w: ComplexMatrix,
    pub a_wbar: ComplexMatrix,
    pub a_z: ComplexMatrix,
    pub a_zbar: ComplexMatrix,
}

impl ConnectionSample {
    pub fn zero(n: usize) -> Self {
        let z = ComplexMatrix::zeros(n);
        Self { a_w: z.clone(), a_wbar: z.clone(), a_z: z.clone(), a_zbar: z }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.a_w, &self.a_wbar, &self.a_z, &self.a_zbar].iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    /// `g A g^{-1} - dg g^{-1}` for a pointwise gauge `g` with complex derivatives `dg`.
    pub fn gauge(&self, g: &ComplexMatrix, g_inv: &ComplexMatrix, dg: &[ComplexMatrix; 4]) -> Self {
        let t = |a: &ComplexMatrix, d: &ComplexMatrix| &(&(g * a) * g_inv) - &(d * g_inv);
        Self {
            a_w: t(&self.a_w, &dg[0]),
            a_wbar: t(&self.a_wbar, &dg[1]),
            a_z: t(&self.a_z, &dg[2]),
            a_zbar: t(&self.a_zbar, &dg[3]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionField {
    grid: ProductGrid,
    dim: usize,
    frame: Frame,
    values: Vec<ConnectionSample>,
}

impl ConnectionField {
    pub fn new(grid: ProductGrid, frame: Frame, values: Vec<ConnectionSample>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!("{} samples for {} nodes", values.len(), grid.len())));
        }
        if let Frame::Holomorphic(h) = &frame {
            if h.len() != grid.len() {
                return Err(Error::GridMismatch("metric and grid sizes differ".into()));
            }
        }
        let dim = values.first().map_or(1, |v| v.a_w.dim());
        for v in &values {
            for m in [&v.a_w, &v.a_wbar, &v.a_z, &v.a_zbar] {
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
                }
                if !m.is_finite() {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(Self { grid, dim, frame, values })
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn values(&self) -> &[ConnectionSample] {
        &self.values
    }
}

/// `eta` and `d_w eta`, `d_z eta` at every node; all zero for `eta = 0`.
pub(crate) struct EtaOnGrid {
    pub eta: Vec<ComplexMatrix>,
    pub d_w: Vec<ComplexMatrix>,
    pub d_z: Vec<ComplexMatrix>,
}

impl EtaOnGrid {
    pub fn new(e: &EtaField, g: &ProductGrid) -> Result<Self> {
        let s = *g.spec();
        let n = e.dim();
        let zero = ComplexMatrix::zeros(n);
        let mut out = Self {
            eta: alloc::vec![zero.clone(); g.len()],
            d_w: alloc::vec![zero.clone(); g.len()],
            d_z: alloc::vec![zero; g.len()],
        };
        if e.is_zero() {
            return Ok(out);
        }
        for ix in 0..s.nx {
            for iy in 0..s.ny {
                let smp = e.sample(g.w(ix, iy))?;
                for iu in 0..s.nu {
                    for ip in 0..s.nphi {
                        let z = g.z(iu, ip);
                        let k = g.index(ix, iy, iu, ip);
                        out.eta[k] = smp.eval(z);
                        out.d_w[k] = smp.eval_d_w(z);
                        out.d_z[k] = smp.eval_d_z(z);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_pair(h: &HermitianMetricField, e: &EtaField) -> Result<()> {
    if h.dim() != e.dim() {
        return Err(Error::DimensionMismatch { expected: e.dim(), found: h.dim() });
    }
    Ok(())
}

/// `A = H^{-1} d_z H dz + eta dwbar + (H^{-1} d_w H - H^{-1} eta^* H) dw` in the holomorphic frame.
/// `H`-derivatives are second-order differences (one-sided on Dirichlet faces).
pub fn connection_from_pair(h: &HermitianMetricField, e: &EtaField) -> Result<ConnectionField> {
    check_pair(h, e)?;
    h.validate()?;
    let g = h.grid().clone();
    let eg = EtaOnGrid::new(e, &g)?;
    let jets = Jets::first_order(h)?;
    let n = h.dim();
    let mut values = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        let j = jets.at(k);
        let (_, _, iu, ip) = g.unindex(k);
        let z = g.z(iu, ip);
        let kk = &(&j.h_inv * &eg.eta[k].adjoint()) * &j.h;
        values.push(ConnectionSample {
            a_w: &(&j.h_inv * &j.d_w()) - &kk,
            a_wbar: eg.eta[k].clone(),
            a_z: &j.h_inv * &j.d_z(z),
            a_zbar: ComplexMatrix::zeros(n),
        });
    }
    ConnectionField::new(g, Frame::Holomorphic(h.values().to_vec()), values)
}

/// `A = eta dwbar - H_xi^{-1} eta^* H_xi dw + diag(a) dz/z` (with `i xi_0 = diag(a)`) in the holomorphic frame.
pub fn approx_connection(e: &EtaField, g: &ProductGrid) -> Result<ConnectionField> {
    let a = e.phases().to_vec();
    let eg = EtaOnGrid::new(e, g)?;
    let n = e.dim();
    let mut values = Vec::with_capacity(g.len());
    let mut metric = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        let (_, _, iu, ip) = g.unindex(k);
        let z = g.z(iu, ip);
        let s = approx_sample(&a, &eg.eta[k], z);
        metric
            .push(ComplexMatrix::from_real_diag(&a.iter().map(|&x| libm::exp(2.0 * x * g.u(iu))).collect::<Vec<_>>()));
        values.push(s);
    }
    debug_assert!(values.iter().all(|v| v.a_w.dim() == n));
    ConnectionField::new(g.clone(), Frame::Holomorphic(metric), values)
}

/// Approximate connection at one point from `eta(w, z)`.
pub(crate) fn approx_sample(a: &[f64], eta: &ComplexMatrix, z: C64) -> ConnectionSample {
    let n = a.len();
    let r2 = z.norm_sqr();
    // (H_xi^{-1} eta^* H_xi)_{ij} = |z|^{2(a_j - a_i)} conj(eta_{ji})
    let k = ComplexMatrix::from_fn(n, |i, j| eta[(j, i)].conj() * libm::pow(r2, a[j] - a[i]));
    let d: Vec<C64> = a.iter().map(|&x| C64::new(x, 0.0) / z).collect();
    ConnectionSample {
        a_w: k.scale_re(-1.0),
        a_wbar: eta.clone(),
        a_z: ComplexMatrix::from_diag(&d),
        a_zbar: ComplexMatrix::zeros(n),
    }
}

#[cfg(test)]
mod tests;
