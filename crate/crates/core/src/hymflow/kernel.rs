//! Fixed-dimension kernel: the tensor `B(H, eta)` and one explicit flow step.
//!
//! Divergence terms `d_a (H^{-1} d_a H)` use half-link currents
//! `J = (2/h) (H_i + H_j)^{-1} (H_j - H_i)`, so `B` vanishes to roundoff on any
//! metric `diag(e^{2 a u})`. Commutator and `eta` terms use central differences.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixed::Mat;
use crate::geometry::ProductGrid;
use crate::holomap::EtaField;
use crate::matrixcore::{I, POSITIVITY_FLOOR};
use crate::sqr;

/// Per-pass reductions over interior nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TensorStats {
    /// `sup |B|_H`.
    pub sup_b: f64,
    /// `int |B|_H^2 dvol`.
    pub energy: f64,
}

pub(crate) struct Kernel<const N: usize> {
    pub grid: ProductGrid,
    /// `(1 + |w|^2)^2 / 4` per `w` node.
    aw: Vec<f64>,
    /// `u^2` per `u` node.
    u2: Vec<f64>,
    /// `H_xi` diagonal per `u` node.
    pub hxi: Vec<[f64; N]>,
    eta: Vec<Mat<N>>,
    deta: Vec<Mat<N>>,
    hinv: Vec<Mat<N>>,
    links: [Vec<Mat<N>>; 4],
    pub h: Vec<Mat<N>>,
    next: Vec<Mat<N>>,
}

impl<const N: usize> Kernel<N> {
    pub fn new(grid: ProductGrid, phases: &[f64], eta: &EtaField, h: Vec<Mat<N>>) -> Result<Self> {
        let s = *grid.spec();
        let mut aw = Vec::with_capacity(grid.w_len());
        for ix in 0..s.nx {
            for iy in 0..s.ny {
                aw.push(0.25 * sqr(1.0 + grid.w(ix, iy).norm_sqr()));
            }
        }
        let u2 = (0..s.nu).map(|iu| sqr(grid.u(iu))).collect();
        let hxi = (0..s.nu)
            .map(|iu| {
                let u = grid.u(iu);
                let mut d = [0.0; N];
                for (v, a) in d.iter_mut().zip(phases) {
                    *v = libm::exp(2.0 * a * u);
                }
                d
            })
            .collect();
        let (eta_v, deta_v) = if eta.is_zero() {
            (Vec::new(), Vec::new())
        } else {
            let mut ev = alloc::vec![Mat::zero(); grid.len()];
            let mut dv = alloc::vec![Mat::zero(); grid.len()];
            for ix in 0..s.nx {
                for iy in 0..s.ny {
                    let smp = eta.sample(grid.w(ix, iy))?;
                    for iu in 0..s.nu {
                        for ip in 0..s.nphi {
                            let z = grid.z(iu, ip);
                            let k = grid.index(ix, iy, iu, ip);
                            ev[k] = Mat::from_matrix(&smp.eval(z));
                            dv[k] = Mat::from_matrix(&smp.eval_d_w(z));
                        }
                    }
                }
            }
            (ev, dv)
        };
        let n = grid.len();
        if h.len() != n {
            return Err(Error::GridMismatch(alloc::format!("field has {} nodes, grid {n}", h.len())));
        }
        let next = h.clone();
        Ok(Self {
            grid,
            aw,
            u2,
            hxi,
            eta: eta_v,
            deta: deta_v,
            hinv: alloc::vec![Mat::zero(); n],
            links: [
                alloc::vec![Mat::zero(); n],
                alloc::vec![Mat::zero(); n],
                alloc::vec![Mat::zero(); n],
                alloc::vec![Mat::zero(); n],
            ],
            h,
            next,
        })
    }

    /// Inverses and forward half-link currents of the current field.
    fn prepare(&mut self) -> Result<()> {
        let s = *self.grid.spec();
        let (hx, hy, hu, hp) = self.grid.spacings();
        let strides = [s.ny * s.nu * s.nphi, s.nu * s.nphi, s.nphi];
        let scales = [2.0 / hx, 2.0 / hy, 2.0 / hu, 2.0 / hp];
        let h = &self.h;
        for (k, hk) in h.iter().enumerate() {
            self.hinv[k] = hk.inverse().ok_or(Error::Singular)?;
        }
        for ix in 0..s.nx {
            for iy in 0..s.ny {
                for iu in 0..s.nu {
                    let base = self.grid.index(ix, iy, iu, 0);
                    let fwd = [ix + 1 < s.nx, iy + 1 < s.ny, iu + 1 < s.nu];
                    for ip in 0..s.nphi {
                        let k = base + ip;
                        let hk = h[k];
                        for d in 0..3 {
                            if fwd[d] {
                                let hj = h[k + strides[d]];
                                let inv = (hk + hj).inverse().ok_or(Error::Singular)?;
                                self.links[d][k] = (inv * (hj - hk)).scale(scales[d]);
                            }
                        }
                        let j = base + (ip + 1) % s.nphi;
                        let hj = h[j];
                        let inv = (hk + hj).inverse().ok_or(Error::Singular)?;
                        self.links[3][k] = (inv * (hj - hk)).scale(scales[3]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Visits every interior node with its `B`; `prepare` must have run.
    #[inline(always)]
    fn for_each_b(&self, mut f: impl FnMut(usize, usize, usize, usize, Mat<N>) -> Result<()>) -> Result<()> {
        let s = *self.grid.spec();
        let (hx, hy, hu, hp) = self.grid.spacings();
        let (sx, sy, su) = (s.ny * s.nu * s.nphi, s.nu * s.nphi, s.nphi);
        let (ihx, ihy, ihu, ihp) = (1.0 / hx, 1.0 / hy, 1.0 / hu, 1.0 / hp);
        let (c_x, c_y, c_u, c_p) = (0.5 * ihx, 0.5 * ihy, 0.5 * ihu, 0.5 * ihp);
        let h = &self.h;
        let with_eta = !self.eta.is_empty();
        for ix in 1..s.nx - 1 {
            for iy in 1..s.ny - 1 {
                let aw = self.aw[ix * s.ny + iy];
                for iu in 1..s.nu - 1 {
                    let u2 = self.u2[iu];
                    let base = self.grid.index(ix, iy, iu, 0);
                    for ip in 0..s.nphi {
                        let k = base + ip;
                        let kp = base + (ip + 1) % s.nphi;
                        let km = base + (ip + s.nphi - 1) % s.nphi;
                        let hk = h[k];
                        let hinv = self.hinv[k];

                        let div_z = (self.links[2][k] - self.links[2][k - su]).scale(ihu)
                            + (self.links[3][k] - self.links[3][km]).scale(ihp);
                        let cu = hinv * (h[k + su] - h[k - su]).scale(c_u);
                        let cp = hinv * (h[kp] - h[km]).scale(c_p);
                        let z_term = (div_z + cu.commutator(&cp).scale_c(I)).scale(u2);

                        let d_x = (h[k + sx] - h[k - sx]).scale(c_x);
                        let d_y = (h[k + sy] - h[k - sy]).scale(c_y);
                        let div_w = (self.links[0][k] - self.links[0][k - sx]).scale(ihx)
                            + (self.links[1][k] - self.links[1][k - sy]).scale(ihy);
                        let cx = hinv * d_x;
                        let cy = hinv * d_y;
                        let mut w_term = div_w + cx.commutator(&cy).scale_c(I);

                        if with_eta {
                            let eta = self.eta[k];
                            let deta = self.deta[k];
                            // d_w H and d_wbar H
                            let dw_h = (d_x - d_y.scale_c(I)).scale(0.5);
                            let dwb_h = (d_x + d_y.scale_c(I)).scale(0.5);
                            let eta_star = eta.adjoint();
                            let kk = hinv * eta_star * hk;
                            let dwb_k = -(hinv * dwb_h * kk) + hinv * deta.adjoint() * hk + hinv * eta_star * dwb_h;
                            let c_w = hinv * dw_h;
                            let eta_part = -dwb_k - deta + eta.commutator(&(c_w - kk));
                            w_term += eta_part.scale(4.0);
                        }
                        let b = z_term + w_term.scale(aw);
                        f(ix, iy, iu, k, b)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// `B` at every node (zero on Dirichlet nodes) and its reductions.
    pub fn tensor(&mut self) -> Result<(Vec<Mat<N>>, TensorStats)> {
        self.prepare()?;
        let mut out = alloc::vec![Mat::zero(); self.grid.len()];
        let mut stats = TensorStats::default();
        let grid = self.grid.clone();
        let hinv = &self.hinv;
        let h = &self.h;
        let res = self.for_each_b(|ix, iy, iu, k, b| {
            let sym = (h[k] * b).hermitian_part();
            let m = hinv[k] * sym;
            let nb = m.trace_mul(&m).re.max(0.0);
            stats.sup_b = stats.sup_b.max(libm::sqrt(nb));
            stats.energy += nb * grid.volume(ix, iy, iu);
            out[k] = b;
            Ok(())
        });
        res?;
        Ok((out, stats))
    }

    /// One step `H <- H + dt S (I + dt/2 M (I + dt/3 M (I + dt/4 M)))` with
    /// `S = sym(H B)`, `M = H^{-1} S`; the even Taylor polynomial of `exp` keeps `H > 0`.
    /// Returns the reductions of `B` at the start of the step.
    pub fn step(&mut self, dt: f64) -> Result<TensorStats> {
        self.prepare()?;
        let mut stats = TensorStats::default();
        let grid = self.grid.clone();
        let hinv = &self.hinv;
        let mut next = core::mem::take(&mut self.next);
        let h = &self.h;
        let (q2, q3, q4) = (dt / 2.0, dt / 3.0, dt / 4.0);
        let id = Mat::<N>::identity();
        let res = self.for_each_b(|ix, iy, iu, k, b| {
            let hk = h[k];
            let s = (hk * b).hermitian_part();
            let m = hinv[k] * s;
            let nb = m.trace_mul(&m).re.max(0.0);
            stats.sup_b = stats.sup_b.max(libm::sqrt(nb));
            stats.energy += nb * grid.volume(ix, iy, iu);
            let poly = id + m.scale(q2) * (id + m.scale(q3) * (id + m.scale(q4)));
            let hn = (hk + (s * poly).scale(dt)).hermitian_part();
            let (lo, hi) = hn.hermitian_extremes();
            if !(lo > POSITIVITY_FLOOR * hi) || !hn.is_finite() {
                return Err(Error::PositivityLoss { node: k, min_eigenvalue: lo });
            }
            next[k] = hn;
            Ok(())
        });
        if let Err(e) = res {
            self.next = next;
            return Err(e);
        }
        core::mem::swap(&mut self.h, &mut next);
        self.next = next;
        Ok(stats)
    }

    /// `sup sigma(A, B)` over nodes.
    pub fn sup_sigma(a: &[Mat<N>], b: &[Mat<N>]) -> f64 {
        let n = N as f64;
        a.iter()
            .zip(b)
            .map(|(x, y)| match (x.inverse(), y.inverse()) {
                (Some(xi), Some(yi)) => (xi.trace_mul(y).re + x.trace_mul(&yi).re - 2.0 * n).max(0.0),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// `d(H, H_xi)` at node `k` in `u` row `iu`.
    pub fn distance_to_xi(&self, k: usize, iu: usize) -> f64 {
        let d = &self.hxi[iu];
        let mut m = self.h[k];
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] /= libm::sqrt(d[i] * d[j]);
            }
        }
        let vals = m.hermitian_values();
        libm::sqrt(vals.iter().map(|&l| sqr(libm::log(l.max(f64::MIN_POSITIVE)))).sum())
    }

    /// `max d(H, H_xi) / ln(1 - u)` over interior nodes.
    pub fn distance_ratio(&self) -> f64 {
        let s = *self.grid.spec();
        let mut best: f64 = 0.0;
        for ix in 1..s.nx - 1 {
            for iy in 1..s.ny - 1 {
                for iu in 1..s.nu - 1 {
                    let denom = libm::log(1.0 - self.grid.u(iu));
                    for ip in 0..s.nphi {
                        let k = self.grid.index(ix, iy, iu, ip);
                        best = best.max(self.distance_to_xi(k, iu) / denom);
                    }
                }
            }
        }
        best
    }
}
