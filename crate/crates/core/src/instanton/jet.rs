//! Finite-difference jets of a metric field at single nodes.

use crate::error::Result;
use crate::hymflow::HermitianMetricField;
use crate::matrixcore::{ComplexMatrix, C64, I};

/// Values, inverse, first derivatives `(x, y, u, phi)` and, at interior
/// nodes, the second derivatives `xx, yy, uu, pp, xu, xp, yu, yp`.
pub(crate) struct NodeJet {
    pub h: ComplexMatrix,
    pub h_inv: ComplexMatrix,
    pub d: [ComplexMatrix; 4],
    pub dd: Option<[ComplexMatrix; 8]>,
}

impl NodeJet {
    pub fn d_w(&self) -> ComplexMatrix {
        (&self.d[0] - &self.d[1].scale(I)).scale_re(0.5)
    }

    pub fn d_wbar(&self) -> ComplexMatrix {
        (&self.d[0] + &self.d[1].scale(I)).scale_re(0.5)
    }

    pub fn d_z(&self, z: C64) -> ComplexMatrix {
        (&self.d[2] - &self.d[3].scale(I)).scale(0.5 / z)
    }

    pub fn d_zbar(&self, z: C64) -> ComplexMatrix {
        (&self.d[2] + &self.d[3].scale(I)).scale(0.5 / z.conj())
    }

    fn second(&self) -> &[ComplexMatrix; 8] {
        self.dd.as_ref().expect("second derivatives exist at interior nodes only")
    }

    /// `d_wbar d_w H = (H_xx + H_yy)/4`.
    pub fn d_wbar_w(&self) -> ComplexMatrix {
        let s = self.second();
        (&s[0] + &s[1]).scale_re(0.25)
    }

    /// `d_zbar d_z H = (H_uu + H_pp)/(4|z|^2)`.
    pub fn d_zbar_z(&self, z: C64) -> ComplexMatrix {
        let s = self.second();
        (&s[2] + &s[3]).scale_re(0.25 / z.norm_sqr())
    }

    /// `(d_x + sx i d_y)(d_u + sp i d_phi) H`.
    fn mixed(&self, sx: f64, sp: f64) -> ComplexMatrix {
        let s = self.second();
        let (xu, xp, yu, yp) = (&s[4], &s[5], &s[6], &s[7]);
        let mut m = xu.clone();
        m += &xp.scale(C64::new(0.0, sp));
        m += &yu.scale(C64::new(0.0, sx));
        m += &yp.scale_re(-sx * sp);
        m
    }

    pub fn d_w_z(&self, z: C64) -> ComplexMatrix {
        self.mixed(-1.0, -1.0).scale(0.25 / z)
    }

    pub fn d_wbar_z(&self, z: C64) -> ComplexMatrix {
        self.mixed(1.0, -1.0).scale(0.25 / z)
    }

    pub fn d_w_zbar(&self, z: C64) -> ComplexMatrix {
        self.mixed(-1.0, 1.0).scale(0.25 / z.conj())
    }
}

pub(crate) struct Jets<'a> {
    field: &'a HermitianMetricField,
    second: bool,
}

impl<'a> Jets<'a> {
    pub fn first_order(field: &'a HermitianMetricField) -> Result<Self> {
        Ok(Self { field, second: false })
    }

    pub fn second_order(field: &'a HermitianMetricField) -> Result<Self> {
        Ok(Self { field, second: true })
    }

    pub fn at(&self, k: usize) -> NodeJet {
        let g = self.field.grid();
        let s = *g.spec();
        let (ix, iy, iu, ip) = g.unindex(k);
        let (hx, hy, hu, hp) = g.spacings();
        let v = |ix: usize, iy: usize, iu: usize, ip: usize| self.field.at(ix, iy, iu, ip % s.nphi);
        let pm = (ip + s.nphi - 1) % s.nphi;
        let h = v(ix, iy, iu, ip).clone();
        let h_inv = h.inverse().unwrap_or_else(|_| ComplexMatrix::zeros(h.dim()));

        // second-order first derivative along an axis with nodes 0..n
        let axis = |i: usize, n: usize, step: f64, at: &dyn Fn(usize) -> &'a ComplexMatrix| -> ComplexMatrix {
            if i == 0 {
                (&(&at(1).scale_re(4.0) - &at(0).scale_re(3.0)) - at(2)).scale_re(0.5 / step)
            } else if i == n - 1 {
                (&(&at(i).scale_re(3.0) - &at(i - 1).scale_re(4.0)) + at(i - 2)).scale_re(0.5 / step)
            } else {
                (at(i + 1) - at(i - 1)).scale_re(0.5 / step)
            }
        };
        let d = [
            axis(ix, s.nx, hx, &|j| v(j, iy, iu, ip)),
            axis(iy, s.ny, hy, &|j| v(ix, j, iu, ip)),
            axis(iu, s.nu, hu, &|j| v(ix, iy, j, ip)),
            (v(ix, iy, iu, ip + 1) - v(ix, iy, iu, pm)).scale_re(0.5 / hp),
        ];
        let dd = (self.second && !g.is_boundary(ix, iy, iu)).then(|| {
            let lap = |p: &ComplexMatrix, m: &ComplexMatrix, step: f64| {
                (&(p + m) - &h.scale_re(2.0)).scale_re(1.0 / (step * step))
            };
            let cross =
                |pp: &ComplexMatrix, pm_: &ComplexMatrix, mp: &ComplexMatrix, mm: &ComplexMatrix, s1: f64, s2: f64| {
                    (&(&(pp - pm_) - mp) + mm).scale_re(0.25 / (s1 * s2))
                };
            let ipp = ip + 1;
            [
                lap(v(ix + 1, iy, iu, ip), v(ix - 1, iy, iu, ip), hx),
                lap(v(ix, iy + 1, iu, ip), v(ix, iy - 1, iu, ip), hy),
                lap(v(ix, iy, iu + 1, ip), v(ix, iy, iu - 1, ip), hu),
                lap(v(ix, iy, iu, ipp), v(ix, iy, iu, pm), hp),
                cross(
                    v(ix + 1, iy, iu + 1, ip),
                    v(ix + 1, iy, iu - 1, ip),
                    v(ix - 1, iy, iu + 1, ip),
                    v(ix - 1, iy, iu - 1, ip),
                    hx,
                    hu,
                ),
                cross(
                    v(ix + 1, iy, iu, ipp),
                    v(ix + 1, iy, iu, pm),
                    v(ix - 1, iy, iu, ipp),
                    v(ix - 1, iy, iu, pm),
                    hx,
                    hp,
                ),
                cross(
                    v(ix, iy + 1, iu + 1, ip),
                    v(ix, iy + 1, iu - 1, ip),
                    v(ix, iy - 1, iu + 1, ip),
                    v(ix, iy - 1, iu - 1, ip),
                    hy,
                    hu,
                ),
                cross(
                    v(ix, iy + 1, iu, ipp),
                    v(ix, iy + 1, iu, pm),
                    v(ix, iy - 1, iu, ipp),
                    v(ix, iy - 1, iu, pm),
                    hy,
                    hp,
                ),
            ]
        });
        NodeJet { h, h_inv, d, dd }
    }
}
