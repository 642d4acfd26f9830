//! Radially-free gauge and the fields `(A, Phi)` on `S^1 x R^3`.
//!
//! The gauge `G` solves `d_u G = G A_u` inward from `|z| = delta` with
//! `G(delta) = H^{1/2}`, so `G^* G = H` along every ray and `G A G^{-1} - dG G^{-1}`
//! has no `du` part. `Phi = -A_phi` in that gauge, which equals `xi_0` for the
//! approximate connection.

use alloc::vec::Vec;

use super::{ConnectionField, Frame};
use crate::error::{Error, Result};
use crate::geometry::{to_caloron_coords, CaloronPoint};
use crate::matrixcore::{expm, hermitian_eigen, ComplexMatrix, C64, I};
use crate::sqr;

/// `(A_x, A_y, A_u, A_phi)` from complex components.
fn real_components(a: &super::ConnectionSample, z: C64) -> [ComplexMatrix; 4] {
    let zc = z.conj();
    [
        &a.a_w + &a.a_wbar,
        (&a.a_w - &a.a_wbar).scale(I),
        &a.a_z.scale(z) + &a.a_zbar.scale(zc),
        (&a.a_z.scale(z) - &a.a_zbar.scale(zc)).scale(I),
    ]
}

/// 4-point Lagrange weights at `t` for nodes `0, 1, 2, 3`.
fn lagrange4(t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (p, wp) in w.iter_mut().enumerate() {
        for q in 0..4 {
            if p != q {
                *wp *= (t - q as f64) / (p as f64 - q as f64);
            }
        }
    }
    w
}

/// Radial gauge `G` at every node, by fourth-order Magnus steps with `A_u` at
/// the Gauss points taken from cubic interpolation in `u`.
pub fn radial_transport(a: &ConnectionField) -> Result<Vec<ComplexMatrix>> {
    let g = a.grid();
    let s = *g.spec();
    let n = a.dim();
    let (_, _, hu, _) = g.spacings();
    let mut out = alloc::vec![ComplexMatrix::identity(n); g.len()];
    let gauss = [0.5 - libm::sqrt(3.0) / 6.0, 0.5 + libm::sqrt(3.0) / 6.0];
    let c3 = libm::sqrt(3.0) / 12.0;
    for ix in 0..s.nx {
        for iy in 0..s.ny {
            for ip in 0..s.nphi {
                let au: Vec<ComplexMatrix> = (0..s.nu)
                    .map(|iu| {
                        let k = g.index(ix, iy, iu, ip);
                        real_components(&a.values()[k], g.z(iu, ip))[2].clone()
                    })
                    .collect();
                let top = g.index(ix, iy, s.nu - 1, ip);
                let mut gm = match a.frame() {
                    Frame::Holomorphic(h) => hermitian_eigen(&h[top]).map(|l| C64::new(libm::sqrt(l.max(0.0)), 0.0)),
                    Frame::Unitary => ComplexMatrix::identity(n),
                };
                out[top] = gm.clone();
                // step from u_j to u_{j-1}; h = -hu, Gauss points in integration order
                for j in (1..s.nu).rev() {
                    let base = (j as isize - 2).clamp(0, s.nu as isize - 4) as usize;
                    let at = |frac: f64| {
                        // position of u_j - frac hu relative to node `base`
                        let t = j as f64 - frac - base as f64;
                        let w = lagrange4(t);
                        let mut m = ComplexMatrix::zeros(n);
                        for (q, wq) in w.iter().enumerate() {
                            m += &au[base + q].scale_re(*wq);
                        }
                        m
                    };
                    let (a1, a2) = (at(gauss[0]), at(gauss[1]));
                    let h = -hu;
                    let omega = &(&a1 + &a2).scale_re(0.5 * h) + &a1.commutator(&a2).scale_re(c3 * h * h);
                    gm = &gm * &expm(&omega);
                    out[g.index(ix, iy, j - 1, ip)] = gm.clone();
                }
            }
        }
    }
    Ok(out)
}

/// Fields on `S^1 x R^3` at sampled nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CaloronSample {
    pub mu: f64,
    pub nodes: Vec<usize>,
    pub points: Vec<CaloronPoint>,
    /// Cartesian components of the spatial connection.
    pub a: Vec<[ComplexMatrix; 3]>,
    pub phi: Vec<ComplexMatrix>,
    pub xi0: ComplexMatrix,
}

impl CaloronSample {
    /// `|x|` at sample `i`.
    pub fn radius(&self, i: usize) -> f64 {
        libm::sqrt(self.points[i].x.iter().map(|v| v * v).sum())
    }

    /// Largest anti-Hermitian defect of `Phi`.
    pub fn phi_anti_hermitian_defect(&self) -> f64 {
        self.phi.iter().map(ComplexMatrix::anti_hermitian_defect).fold(0.0, f64::max)
    }
}

/// `X = r n(w)`; inverse Jacobian rows give `(dx, dy, dr)` in terms of `dX`.
fn inverse_jacobian(w: C64, r: f64) -> Result<[[f64; 3]; 3]> {
    let d = 1.0 + w.norm_sqr();
    let (x, y) = (w.re, w.im);
    let n = [2.0 * x / d, 2.0 * y / d, (w.norm_sqr() - 1.0) / d];
    // d n / dx, d n / dy
    let dnx = [
        2.0 / d - 4.0 * x * x / (d * d),
        -4.0 * x * y / (d * d),
        2.0 * x / d - 2.0 * x * (w.norm_sqr() - 1.0) / (d * d),
    ];
    let dny = [
        -4.0 * x * y / (d * d),
        2.0 / d - 4.0 * y * y / (d * d),
        2.0 * y / d - 2.0 * y * (w.norm_sqr() - 1.0) / (d * d),
    ];
    // columns: dX/dx, dX/dy, dX/dr
    let j = [[r * dnx[0], r * dny[0], n[0]], [r * dnx[1], r * dny[1], n[1]], [r * dnx[2], r * dny[2], n[2]]];
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::Singular);
    }
    let mut inv = [[0.0; 3]; 3];
    for (r_, row) in inv.iter_mut().enumerate() {
        for (c_, v) in row.iter_mut().enumerate() {
            let (r1, r2) = ((c_ + 1) % 3, (c_ + 2) % 3);
            let (c1, c2) = ((r_ + 1) % 3, (r_ + 2) % 3);
            *v = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
        }
    }
    Ok(inv)
}

/// `(A, Phi)` in the radially-free gauge at `nodes` (all nodes off the `w` faces when `None`).
pub fn caloron_fields(
    a: &ConnectionField,
    xi0: &ComplexMatrix,
    mu: f64,
    nodes: Option<&[usize]>,
) -> Result<CaloronSample> {
    if !(mu > 0.0) {
        return Err(Error::DomainError("mu must be positive".into()));
    }
    let g = a.grid();
    let s = *g.spec();
    let gauge = radial_transport(a)?;
    let (hx, hy, _, hp) = g.spacings();
    let all: Vec<usize>;
    let nodes = match nodes {
        Some(n) => n,
        None => {
            all = (0..g.len())
                .filter(|&k| {
                    let (ix, iy, _, _) = g.unindex(k);
                    ix > 0 && iy > 0 && ix + 1 < s.nx && iy + 1 < s.ny
                })
                .collect();
            &all
        }
    };
    let mut out = CaloronSample {
        mu,
        nodes: nodes.to_vec(),
        points: Vec::new(),
        a: Vec::new(),
        phi: Vec::new(),
        xi0: xi0.clone(),
    };
    for &k in nodes {
        if k >= g.len() {
            return Err(Error::DomainError(alloc::format!("node {k} outside the grid")));
        }
        let (ix, iy, iu, ip) = g.unindex(k);
        if ix == 0 || iy == 0 || ix + 1 == s.nx || iy + 1 == s.ny {
            return Err(Error::DomainError("sample nodes must avoid the w faces".into()));
        }
        let (w, z) = (g.w(ix, iy), g.z(iu, ip));
        let point = to_caloron_coords(w, z, mu)?;
        let gk = &gauge[k];
        let g_inv = gk.inverse()?;
        let rc = real_components(&a.values()[k], z);
        let d = |p: usize, m: usize, h: f64| (&gauge[p] - &gauge[m]).scale_re(0.5 / h);
        let dgx = d(g.index(ix + 1, iy, iu, ip), g.index(ix - 1, iy, iu, ip), hx);
        let dgy = d(g.index(ix, iy + 1, iu, ip), g.index(ix, iy - 1, iu, ip), hy);
        let dgp = d(g.index(ix, iy, iu, (ip + 1) % s.nphi), g.index(ix, iy, iu, (ip + s.nphi - 1) % s.nphi), hp);
        let t = |m: &ComplexMatrix, dg: &ComplexMatrix| &(&(gk * m) * &g_inv) - &(dg * &g_inv);
        let ax = t(&rc[0], &dgx);
        let ay = t(&rc[1], &dgy);
        let aphi = t(&rc[3], &dgp);
        let r = -g.u(iu) / mu;
        let jinv = inverse_jacobian(w, r)?;
        // A = A_x dx + A_y dy (no dr part); dx = sum_i Jinv[0][i] dX_i
        let cart = core::array::from_fn(|i| &ax.scale_re(jinv[0][i]) + &ay.scale_re(jinv[1][i]));
        out.points.push(point);
        out.a.push(cart);
        out.phi.push(aphi.scale_re(-1.0));
    }
    Ok(out)
}

/// Least-squares fit `log q = c - p log r` over radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// `p`; `None` when `q` vanishes identically.
    pub exponent: Option<f64>,
    pub std_error: f64,
    /// 95% interval for `p`.
    pub ci95: (f64, f64),
    pub max_value: f64,
    /// Largest spread over `theta` relative to the row maximum.
    pub theta_spread: f64,
}

/// Fitted decay exponents; reported only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayReport {
    /// `|Phi - xi_0|`.
    pub higgs_deviation: DecayFit,
    /// `|tr Phi^2 - tr xi_0^2|`.
    pub higgs_invariant: DecayFit,
    /// `|A|`.
    pub connection: DecayFit,
    pub r_min: f64,
    pub r_max: f64,
}

fn fit(rows: &[(f64, Vec<f64>)]) -> DecayFit {
    let max_value = rows.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max);
    let theta_spread = rows
        .iter()
        .map(|(_, v)| {
            let hi = v.iter().copied().fold(0.0, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            if hi > 0.0 {
                (hi - lo) / hi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|(r, v)| {
            let q = v.iter().copied().fold(0.0, f64::max);
            (q > 1e-300).then(|| (libm::log(*r), libm::log(q)))
        })
        .collect();
    if pts.len() < 3 {
        return DecayFit { exponent: None, std_error: 0.0, ci95: (0.0, 0.0), max_value, theta_spread };
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| sqr(p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts.iter().map(|p| sqr(p.1 - my - slope * (p.0 - mx))).sum();
    let se = libm::sqrt(resid / (m - 2.0) / sxx);
    let p = -slope;
    DecayFit { exponent: Some(p), std_error: se, ci95: (p - 1.96 * se, p + 1.96 * se), max_value, theta_spread }
}

/// Exponent fits against `r`; needs samples spanning a decade of `r`.
pub fn decay_report(c: &CaloronSample) -> Result<DecayReport> {
    if c.points.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let radii: Vec<f64> = (0..c.points.len()).map(|i| c.radius(i)).collect();
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    if !(r_max >= 10.0 * r_min) {
        return Err(Error::InvalidInput(alloc::format!("r spans [{r_min}, {r_max}], less than a decade")));
    }
    // group samples by radius (equal u rows share r exactly)
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&i, &j| radii[i].total_cmp(&radii[j]));
    let tr_xi = (&c.xi0 * &c.xi0).trace();
    let mut rows: [Vec<(f64, Vec<f64>)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut start = 0;
    while start < order.len() {
        let r = radii[order[start]];
        let mut end = start;
        let mut vals: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        while end < order.len() && (radii[order[end]] - r).abs() <= 1e-12 * r.max(1.0) {
            let i = order[end];
            vals[0].push((&c.phi[i] - &c.xi0).frobenius_norm());
            vals[1].push(((&c.phi[i] * &c.phi[i]).trace() - tr_xi).norm());
            vals[2].push(libm::sqrt(c.a[i].iter().map(|m| sqr(m.frobenius_norm())).sum()));
            end += 1;
        }
        for (row, v) in rows.iter_mut().zip(vals) {
            row.push((r, v));
        }
        start = end;
    }
    Ok(DecayReport {
        higgs_deviation: fit(&rows[0]),
        higgs_invariant: fit(&rows[1]),
        connection: fit(&rows[2]),
        r_min,
        r_max,
    })
}
