//! Curvature components, the self-dual part and the energy densities.
//!
//! With the unit coframe `theta_1 = sqrt(lambda_w) dw`, `theta_2 = dz / (|z| |u|)`
//! the self-dual forms are `omega` and the `(2,0) + (0,2)` forms, so
//! `|F+|^2 = 2|f_11 + f_22|^2 + 4|f_12|^2 + 4|f_1b2b|^2` and `B = -4 (f_11 + f_22)`.

use alloc::vec::Vec;

use super::jet::Jets;
use super::{check_pair, ConnectionField, ConnectionSample, EtaOnGrid, Frame};
use crate::error::{Error, Result};
use crate::geometry::{lambda_w, ProductGrid};
use crate::holomap::EtaField;
use crate::hymflow::HermitianMetricField;
use crate::matrixcore::{h_norm_sqr, ComplexMatrix, C64, I};
use crate::sqr;

/// Curvature in complex coordinates at one node; `F_ab = -F_ba`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureSample {
    pub f_wbar_zbar: ComplexMatrix,
    pub f_wz: ComplexMatrix,
    pub f_wbar_w: ComplexMatrix,
    pub f_zbar_z: ComplexMatrix,
    pub f_w_zbar: ComplexMatrix,
    pub f_wbar_z: ComplexMatrix,
}

/// Pointwise norms of a curvature sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Densities {
    /// `|F|^2`.
    pub full: f64,
    /// `|F+|^2`.
    pub plus: f64,
    /// `tr(F ^ F) / dvol`, equal to `|F-|^2 - |F+|^2`.
    pub top: f64,
}

impl CurvatureSample {
    fn each(&self) -> [&ComplexMatrix; 6] {
        [&self.f_wbar_zbar, &self.f_wz, &self.f_wbar_w, &self.f_zbar_z, &self.f_w_zbar, &self.f_wbar_z]
    }

    pub fn max_abs(&self) -> f64 {
        self.each().iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    /// `g F g^{-1}` componentwise.
    pub fn conjugate(&self, g: &ComplexMatrix, g_inv: &ComplexMatrix) -> Self {
        let t = |m: &ComplexMatrix| &(g * m) * g_inv;
        Self {
            f_wbar_zbar: t(&self.f_wbar_zbar),
            f_wz: t(&self.f_wz),
            f_wbar_w: t(&self.f_wbar_w),
            f_zbar_z: t(&self.f_zbar_z),
            f_w_zbar: t(&self.f_w_zbar),
            f_wbar_z: t(&self.f_wbar_z),
        }
    }

    /// Densities at `(w, z)`; norms are taken with `metric` (identity when `None`).
    pub fn densities(&self, w: C64, z: C64, metric: Option<&ComplexMatrix>) -> Densities {
        let lam = lambda_w(w);
        let u = libm::log(z.norm());
        let zeta2 = z.norm_sqr() * u * u;
        let hinv = metric.map(|h| h.inverse().unwrap_or_else(|_| ComplexMatrix::zeros(h.dim())));
        let norm = |m: &ComplexMatrix| match (metric, &hinv) {
            (Some(h), Some(hi)) => h_norm_sqr(hi, h, m).max(0.0),
            _ => sqr(m.frobenius_norm()),
        };
        let f11 = self.f_wbar_w.scale_re(-1.0 / lam);
        let f22 = self.f_zbar_z.scale_re(-zeta2);
        let c2 = zeta2 / lam;
        let mixed = |m: &ComplexMatrix| norm(m) * c2;
        let plus = 2.0 * norm(&(&f11 + &f22)) + 4.0 * mixed(&self.f_wz) + 4.0 * mixed(&self.f_wbar_zbar);
        let full = 4.0
            * (norm(&f11)
                + norm(&f22)
                + mixed(&self.f_wz)
                + mixed(&self.f_wbar_zbar)
                + mixed(&self.f_w_zbar)
                + mixed(&self.f_wbar_z));
        // tr(F^F) = 2[tr(F_wbw F_zbz) - tr(F_wz F_wbzb) + tr(F_wzb F_wbz)] dwb dw dzb dz, dwb dw dzb dz = -4 |z|^2 u^2 / lambda dvol
        let t = (&self.f_wbar_w * &self.f_zbar_z).trace() - (&self.f_wz * &self.f_wbar_zbar).trace()
            + (&self.f_w_zbar * &self.f_wbar_z).trace();
        Densities { full, plus, top: -8.0 * c2 * t.re }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    grid: ProductGrid,
    metric: Option<Vec<ComplexMatrix>>,
    /// `None` on Dirichlet nodes.
    samples: Vec<Option<CurvatureSample>>,
}

impl CurvatureField {
    #[cfg(test)]
    pub(crate) fn from_parts(
        grid: ProductGrid,
        metric: Option<Vec<ComplexMatrix>>,
        samples: Vec<Option<CurvatureSample>>,
    ) -> Self {
        Self { grid, metric, samples }
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Option<CurvatureSample>] {
        &self.samples
    }

    pub fn metric_at(&self, k: usize) -> Option<&ComplexMatrix> {
        self.metric.as_ref().map(|m| &m[k])
    }

    pub fn densities(&self, k: usize) -> Option<Densities> {
        let (ix, iy, iu, ip) = self.grid.unindex(k);
        let s = self.samples[k].as_ref()?;
        Some(s.densities(self.grid.w(ix, iy), self.grid.z(iu, ip), self.metric_at(k)))
    }

    /// `sup |F+|` over the nodes of `coarse` (a coarsening of this grid).
    pub fn sup_plus_on(&self, coarse: &ProductGrid) -> Result<f64> {
        let s = *coarse.spec();
        let mut sup: f64 = 0.0;
        for ix in 1..s.nx - 1 {
            for iy in 1..s.ny - 1 {
                for iu in 1..s.nu - 1 {
                    for ip in 0..s.nphi {
                        let k = self
                            .grid
                            .fine_index_of_coarse(coarse, ix, iy, iu, ip)
                            .ok_or_else(|| Error::GridMismatch("grid is not a refinement of the coarse grid".into()))?;
                        if let Some(d) = self.densities(k) {
                            sup = sup.max(libm::sqrt(d.plus));
                        }
                    }
                }
            }
        }
        Ok(sup)
    }
}

fn interior_map(
    g: &ProductGrid,
    mut f: impl FnMut(usize) -> Result<CurvatureSample>,
) -> Result<Vec<Option<CurvatureSample>>> {
    (0..g.len())
        .map(|k| {
            let (ix, iy, iu, _) = g.unindex(k);
            if g.is_boundary(ix, iy, iu) {
                Ok(None)
            } else {
                f(k).map(Some)
            }
        })
        .collect()
}

fn component(s: &ConnectionSample, c: usize) -> &ComplexMatrix {
    match c {
        0 => &s.a_w,
        1 => &s.a_wbar,
        2 => &s.a_z,
        _ => &s.a_zbar,
    }
}

/// `F_ab = d_a A_b - d_b A_a + [A_a, A_b]` by central differences at interior nodes.
pub fn curvature(a: &ConnectionField) -> Result<CurvatureField> {
    let g = a.grid();
    let s = *g.spec();
    if s.nx < 3 || s.ny < 3 || s.nu < 3 {
        return Err(Error::GridTooSmall { axis: "interior", nodes: 0 });
    }
    let (hx, hy, hu, hp) = g.spacings();
    let vals = a.values();
    let samples = interior_map(g, |k| {
        let (ix, iy, iu, ip) = g.unindex(k);
        let z = g.z(iu, ip);
        let pp = g.index(ix, iy, iu, (ip + 1) % s.nphi);
        let pm = g.index(ix, iy, iu, (ip + s.nphi - 1) % s.nphi);
        let nb = [
            (g.index(ix + 1, iy, iu, ip), g.index(ix - 1, iy, iu, ip), hx),
            (g.index(ix, iy + 1, iu, ip), g.index(ix, iy - 1, iu, ip), hy),
            (g.index(ix, iy, iu + 1, ip), g.index(ix, iy, iu - 1, ip), hu),
            (pp, pm, hp),
        ];
        // complex derivatives of one component
        let grad = |c: usize| -> [ComplexMatrix; 4] {
            let d: Vec<ComplexMatrix> = nb
                .iter()
                .map(|&(p, m, h)| (component(&vals[p], c) - component(&vals[m], c)).scale_re(0.5 / h))
                .collect();
            [
                (&d[0] - &d[1].scale(I)).scale_re(0.5),
                (&d[0] + &d[1].scale(I)).scale_re(0.5),
                (&d[2] - &d[3].scale(I)).scale(0.5 / z),
                (&d[2] + &d[3].scale(I)).scale(0.5 / z.conj()),
            ]
        };
        let (dw, dwb, dz, dzb) = (grad(0), grad(1), grad(2), grad(3));
        let v = &vals[k];
        let f = |da_b: &ComplexMatrix, db_a: &ComplexMatrix, x: &ComplexMatrix, y: &ComplexMatrix| {
            &(da_b - db_a) + &x.commutator(y)
        };
        // index order of grad: [d_w, d_wbar, d_z, d_zbar]
        Ok(CurvatureSample {
            f_wbar_zbar: f(&dzb[1], &dwb[3], &v.a_wbar, &v.a_zbar),
            f_wz: f(&dz[0], &dw[2], &v.a_w, &v.a_z),
            f_wbar_w: f(&dw[1], &dwb[0], &v.a_wbar, &v.a_w),
            f_zbar_z: f(&dz[3], &dzb[2], &v.a_zbar, &v.a_z),
            f_w_zbar: f(&dzb[0], &dw[3], &v.a_w, &v.a_zbar),
            f_wbar_z: f(&dz[1], &dwb[2], &v.a_wbar, &v.a_z),
        })
    })?;
    let metric = match a.frame() {
        Frame::Holomorphic(h) => Some(h.clone()),
        Frame::Unitary => None,
    };
    Ok(CurvatureField { grid: g.clone(), metric, samples })
}

/// Curvature of the connection of `(H, eta)` from `H`-jets and analytic `eta` derivatives.
pub fn curvature_of_pair(h: &HermitianMetricField, e: &EtaField) -> Result<CurvatureField> {
    check_pair(h, e)?;
    h.validate()?;
    let g = h.grid();
    let eg = EtaOnGrid::new(e, g)?;
    let jets = Jets::second_order(h)?;
    let samples = interior_map(g, |k| {
        let j = jets.at(k);
        let (_, _, iu, ip) = g.unindex(k);
        let z = g.z(iu, ip);
        let (hi, hm) = (&j.h_inv, &j.h);
        let (eta, eta_s) = (&eg.eta[k], eg.eta[k].adjoint());
        let (hw, hwb, hz, hzb) = (j.d_w(), j.d_wbar(), j.d_z(z), j.d_zbar(z));
        let cw = hi * &hw;
        let cz = hi * &hz;
        let kk = &(hi * &eta_s) * hm;
        let a_w = &cw - &kk;
        // d_a (H^{-1} d_b H) = -H^{-1} d_a H H^{-1} d_b H + H^{-1} d_a d_b H
        let dc = |da_h: &ComplexMatrix, cb: &ComplexMatrix, dab: &ComplexMatrix| &(hi * dab) - &(&(hi * da_h) * cb);
        // d_a K = -H^{-1} d_a H K + H^{-1} (d_a eta^*) H + H^{-1} eta^* d_a H
        let dk = |da_h: &ComplexMatrix, da_eta_s: &ComplexMatrix| {
            &(&(&(hi * da_eta_s) * hm) + &(&(hi * &eta_s) * da_h)) - &(&(hi * da_h) * &kk)
        };
        let zero = ComplexMatrix::zeros(eta.dim());
        let dz_eta_s = eg.d_z[k].adjoint();
        let dw_eta_s = eg.d_w[k].adjoint();

        let d_wbar_aw = &dc(&hwb, &cw, &j.d_wbar_w()) - &dk(&hwb, &dw_eta_s);
        let d_z_aw = &dc(&hz, &cw, &j.d_w_z(z)) - &dk(&hz, &zero);
        let d_zbar_aw = &dc(&hzb, &cw, &j.d_w_zbar(z)) - &dk(&hzb, &dz_eta_s);
        let d_w_az = dc(&hw, &cz, &j.d_w_z(z));
        let d_wbar_az = dc(&hwb, &cz, &j.d_wbar_z(z));
        let d_zbar_az = dc(&hzb, &cz, &j.d_zbar_z(z));

        Ok(CurvatureSample {
            // d_zbar eta = 0
            f_wbar_zbar: zero.clone(),
            f_wz: &(&d_w_az - &d_z_aw) + &a_w.commutator(&cz),
            f_wbar_w: &(&d_wbar_aw - &eg.d_w[k]) + &eta.commutator(&a_w),
            f_zbar_z: d_zbar_az,
            f_w_zbar: d_zbar_aw.scale_re(-1.0),
            f_wbar_z: &(&d_wbar_az - &eg.d_z[k]) + &eta.commutator(&cz),
        })
    })?;
    Ok(CurvatureField { grid: g.clone(), metric: Some(h.values().to_vec()), samples })
}

/// `sup |F+|` and `(int |F+|^2 dvol)^{1/2}` over interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsdResidual {
    pub sup: f64,
    pub l2: f64,
}

pub fn asd_residual(f: &CurvatureField) -> AsdResidual {
    let g = &f.grid;
    let mut sup: f64 = 0.0;
    let mut l2 = 0.0;
    for k in 0..g.len() {
        if let Some(d) = f.densities(k) {
            let (ix, iy, iu, _) = g.unindex(k);
            sup = sup.max(libm::sqrt(d.plus));
            l2 += d.plus * g.volume(ix, iy, iu);
        }
    }
    AsdResidual { sup, l2: libm::sqrt(l2) }
}

/// Both sides of `||F||^2 = 2 ||F+||^2 + int tr(F ^ F)` over the interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridEnergy {
    /// `int |F|^2`.
    pub full: f64,
    /// `2 int |F+|^2` from the curvature.
    pub plus_curvature: f64,
    /// `int |B|^2 / 4` from the tensor.
    pub plus_tensor: f64,
    /// `int tr(F ^ F)`.
    pub top: f64,
}

impl GridEnergy {
    pub fn lhs(&self) -> f64 {
        self.full
    }

    pub fn rhs(&self) -> f64 {
        self.plus_tensor + self.top
    }

    /// `|lhs - rhs| / lhs`, zero when both vanish.
    pub fn relative_gap(&self) -> f64 {
        let d = (self.lhs() - self.rhs()).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.lhs().abs().max(self.rhs().abs())
        }
    }
}

/// Energy split with `b` the tensor `B(H, eta)` on the same grid.
pub fn energy_on_grid(f: &CurvatureField, b: &[ComplexMatrix]) -> Result<GridEnergy> {
    let g = &f.grid;
    if b.len() != g.len() {
        return Err(Error::GridMismatch("tensor and curvature grids differ".into()));
    }
    let mut out = GridEnergy { full: 0.0, plus_curvature: 0.0, plus_tensor: 0.0, top: 0.0 };
    for (k, bk) in b.iter().enumerate() {
        let Some(d) = f.densities(k) else { continue };
        let (ix, iy, iu, _) = g.unindex(k);
        let vol = g.volume(ix, iy, iu);
        let nb = match f.metric_at(k) {
            Some(h) => h_norm_sqr(&h.inverse()?, h, bk).max(0.0),
            None => sqr(bk.frobenius_norm()),
        };
        out.full += d.full * vol;
        out.plus_curvature += 2.0 * d.plus * vol;
        out.plus_tensor += 0.25 * nb * vol;
        out.top += d.top * vol;
    }
    Ok(out)
}
