//! Topological charge by the boundary contour and the energy identity of the
//! approximate connection over the whole of `S^2 x D`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::curvature::CurvatureSample;
use crate::error::Result;
use crate::holomap::{EtaField, EtaSample};
use crate::matrixcore::{ComplexMatrix, C64};
use crate::quad::{integrate_plane, integrate_plane_many, Estimate, GaussLegendre, QuadSpec};

/// Radial Gauss-Legendre nodes for the `z`-integral of [`initial_energy_identity`].
pub const RADIAL_NODES: usize = 48;

/// Innermost `u` evaluated; the densities are continuous in `v = -1/u` at `v = 0`,
/// so nodes with `v < 1/300` reuse the value at `u = -300` instead of underflowing `z`.
const U_FLOOR: f64 = -300.0;

/// `(1/2 pi i) oint_{|z|=1} tr(eta^* d_z eta) dz = sum_k k |eta_k|^2`, by the
/// trapezoid rule, exact for polynomial `eta`.
fn contour_density(smp: &EtaSample) -> f64 {
    let n = 2 * smp.coeffs.len() + 2;
    let mut acc = 0.0;
    for m in 0..n {
        let z = C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64);
        let t = (&smp.eval(z).adjoint() * &smp.eval_d_z(z)).trace() * z;
        acc += t.re;
    }
    acc / n as f64
}

/// `k = (1/pi) int_{R^2} (1/2 pi i) oint_{|z|=1} tr(eta^* d_z eta) dz dx dy`.
pub fn charge(e: &EtaField, quad: QuadSpec) -> Result<Estimate> {
    if e.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let est = integrate_plane(quad, |w| Ok(contour_density(&e.sample(w)?)))?;
    Ok(Estimate { value: est.value / PI, error: est.error / PI })
}

/// Curvature of the approximate connection at `(w, z)`, `0 < |z| < 1`.
pub(crate) fn approx_curvature(a: &[f64], smp: &EtaSample, z: C64) -> CurvatureSample {
    let n = a.len();
    let r2 = z.norm_sqr();
    let eta = smp.eval(z);
    let d_w = smp.eval_d_w(z);
    let d_z = smp.eval_d_z(z);
    let wt = |i: usize, j: usize| libm::pow(r2, a[j] - a[i]);
    let k = ComplexMatrix::from_fn(n, |i, j| eta[(j, i)].conj() * wt(i, j));
    let d_wbar_k = ComplexMatrix::from_fn(n, |i, j| d_w[(j, i)].conj() * wt(i, j));
    let d_zbar_k =
        ComplexMatrix::from_fn(n, |i, j| k[(i, j)] * ((a[j] - a[i]) / z.conj()) + d_z[(j, i)].conj() * wt(i, j));
    let d = ComplexMatrix::from_real_diag(a);
    let zero = ComplexMatrix::zeros(n);
    CurvatureSample {
        f_wbar_zbar: zero.clone(),
        f_wz: zero.clone(),
        f_wbar_w: &(&d_wbar_k.scale_re(-1.0) - &d_w) - &eta.commutator(&k),
        f_zbar_z: zero,
        f_w_zbar: d_zbar_k,
        f_wbar_z: &(&eta.commutator(&d) * (C64::new(1.0, 0.0) / z)) - &d_z,
    }
}

/// `||F||^2 = 2 ||F+||^2 + 8 pi^2 k` for the approximate connection, each term
/// integrated independently over `S^2 x D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyIdentity {
    /// `int |F|^2`.
    pub full: Estimate,
    /// `int |F+|^2`.
    pub plus: Estimate,
    /// `int tr(F ^ F)`.
    pub top: Estimate,
    /// Contour charge.
    pub charge: Estimate,
}

impl EnergyIdentity {
    pub fn lhs(&self) -> f64 {
        self.full.value
    }

    pub fn rhs(&self) -> f64 {
        2.0 * self.plus.value + 8.0 * PI * PI * self.charge.value
    }

    pub fn relative_gap(&self) -> f64 {
        let d = (self.lhs() - self.rhs()).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.lhs().abs().max(self.rhs().abs())
        }
    }
}

/// Energy split of the approximate connection; the `z`-integral uses `v = -1/u`
/// so that `du dphi / u^2 = dv dphi`.
pub fn initial_energy_identity(e: &EtaField, quad: QuadSpec) -> Result<EnergyIdentity> {
    let charge = charge(e, quad)?;
    if e.is_zero() {
        let z = Estimate { value: 0.0, error: 0.0 };
        return Ok(EnergyIdentity { full: z, plus: z, top: z, charge });
    }
    let a = e.phases().to_vec();
    let gl = GaussLegendre::new(RADIAL_NODES);
    let radial: Vec<(f64, f64)> = gl
        .mapped(0.0, 1.0)
        .map(|(s, ws)| {
            // v = s/(1-s), u = -1/v
            let u = (-(1.0 - s) / s).max(U_FLOOR);
            (u, ws / ((1.0 - s) * (1.0 - s)))
        })
        .collect();
    let n_phi = 4 * (e.degree_in_z() + 2);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let [full, plus, top] = integrate_plane_many(quad, |w| {
        let smp = e.sample(w)?;
        let lam = crate::geometry::lambda_w(w);
        let mut acc = [0.0; 3];
        for &(u, wu) in &radial {
            // H-norms are invariant under scaling H, so center the exponents
            let metric =
                ComplexMatrix::from_real_diag(&a.iter().map(|&x| libm::exp(2.0 * (x - mean) * u)).collect::<Vec<_>>());
            for m in 0..n_phi {
                let z = C64::from_polar(libm::exp(u), 2.0 * PI * m as f64 / n_phi as f64);
                let d = approx_curvature(&a, &smp, z).densities(w, z, Some(&metric));
                let wt = lam * wu * 2.0 * PI / n_phi as f64;
                acc[0] += d.full * wt;
                acc[1] += d.plus * wt;
                acc[2] += d.top * wt;
            }
        }
        Ok(acc)
    })?;
    Ok(EnergyIdentity { full, plus, top, charge })
}
