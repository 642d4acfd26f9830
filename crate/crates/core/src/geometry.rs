//! Discretised `S^2 x Sigma_{eps,delta}` with the product metric.
//!
//! Coordinates: `w = x + i y` on the box `|x|, |y| <= R_w`, and
//! `z = e^{u + i phi}` with `u in [ln eps, ln delta]`, `phi` periodic. The
//! metric is `lambda_w (dx^2 + dy^2) + (du^2 + dphi^2) / u^2` with
//! `lambda_w = 4 / (1 + |w|^2)^2`, and its Laplacian is
//! `-(1 + |w|^2)^2 / 4 (d_x^2 + d_y^2) - u^2 (d_u^2 + d_phi^2)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrixcore::{ComplexMatrix, C64};
use crate::quad::GaussLegendre;
use crate::sqr;

const MIN_NODES: usize = 4;

/// Resolution and extent of a [`ProductGrid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nu: usize,
    pub nphi: usize,
    /// Half-width of the `w` box.
    pub r_w: f64,
    pub eps: f64,
    pub delta: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 13, ny: 13, nu: 17, nphi: 8, r_w: 2.0, eps: libm::exp(-6.0), delta: 1.0 - 1.0 / 64.0 }
    }
}

impl GridSpec {
    /// Same extent, every spacing halved.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx - 1, ny: 2 * self.ny - 1, nu: 2 * self.nu - 1, nphi: 2 * self.nphi, ..*self }
    }

    /// Same extent, every spacing doubled; `None` unless node counts allow it.
    pub fn coarsened(&self) -> Option<Self> {
        let ok = self.nx % 2 == 1 && self.ny % 2 == 1 && self.nu % 2 == 1 && self.nphi.is_multiple_of(2);
        ok.then(|| Self { nx: self.nx / 2 + 1, ny: self.ny / 2 + 1, nu: self.nu / 2 + 1, nphi: self.nphi / 2, ..*self })
    }
}

/// Node index layout `((ix * ny + iy) * nu + iu) * nphi + ip`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductGrid {
    spec: GridSpec,
    hx: f64,
    hy: f64,
    hu: f64,
    hphi: f64,
    u0: f64,
}

impl ProductGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        for (axis, n) in [("x", spec.nx), ("y", spec.ny), ("u", spec.nu), ("phi", spec.nphi)] {
            if n < MIN_NODES {
                return Err(Error::GridTooSmall { axis, nodes: n });
            }
        }
        if !(spec.eps > 0.0 && spec.eps < spec.delta && spec.delta < 1.0) {
            return Err(Error::DomainError("need 0 < eps < delta < 1".into()));
        }
        if !(spec.r_w > 0.0 && spec.r_w.is_finite()) {
            return Err(Error::DomainError("box half-width must be positive".into()));
        }
        let u0 = libm::log(spec.eps);
        let u1 = libm::log(spec.delta);
        Ok(Self {
            spec,
            hx: 2.0 * spec.r_w / (spec.nx - 1) as f64,
            hy: 2.0 * spec.r_w / (spec.ny - 1) as f64,
            hu: (u1 - u0) / (spec.nu - 1) as f64,
            hphi: 2.0 * PI / spec.nphi as f64,
            u0,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.nx * self.spec.ny * self.spec.nu * self.spec.nphi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of `w` nodes.
    pub fn w_len(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    /// Number of `z` nodes per `w` node.
    pub fn z_len(&self) -> usize {
        self.spec.nu * self.spec.nphi
    }

    /// `(h_x, h_y, h_u, h_phi)`.
    pub fn spacings(&self) -> (f64, f64, f64, f64) {
        (self.hx, self.hy, self.hu, self.hphi)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iu: usize, ip: usize) -> usize {
        ((ix * self.spec.ny + iy) * self.spec.nu + iu) * self.spec.nphi + ip
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize, usize) {
        let ip = idx % self.spec.nphi;
        let r = idx / self.spec.nphi;
        let iu = r % self.spec.nu;
        let r = r / self.spec.nu;
        (r / self.spec.ny, r % self.spec.ny, iu, ip)
    }

    pub fn x(&self, ix: usize) -> f64 {
        -self.spec.r_w + ix as f64 * self.hx
    }

    pub fn y(&self, iy: usize) -> f64 {
        -self.spec.r_w + iy as f64 * self.hy
    }

    pub fn w(&self, ix: usize, iy: usize) -> C64 {
        C64::new(self.x(ix), self.y(iy))
    }

    pub fn u(&self, iu: usize) -> f64 {
        if iu + 1 == self.spec.nu {
            libm::log(self.spec.delta)
        } else {
            self.u0 + iu as f64 * self.hu
        }
    }

    pub fn phi(&self, ip: usize) -> f64 {
        ip as f64 * self.hphi
    }

    pub fn z(&self, iu: usize, ip: usize) -> C64 {
        C64::from_polar(libm::exp(self.u(iu)), self.phi(ip))
    }

    /// Dirichlet nodes: the `w`-box edge and both `u` ends.
    pub fn is_boundary(&self, ix: usize, iy: usize, iu: usize) -> bool {
        ix == 0 || iy == 0 || iu == 0 || ix + 1 == self.spec.nx || iy + 1 == self.spec.ny || iu + 1 == self.spec.nu
    }

    /// At least `margin` nodes away from every Dirichlet face.
    pub fn is_deep_interior(&self, ix: usize, iy: usize, iu: usize, margin: usize) -> bool {
        let s = &self.spec;
        ix >= margin && iy >= margin && iu >= margin && ix + margin < s.nx && iy + margin < s.ny && iu + margin < s.nu
    }

    /// Node volume `lambda_w h_x h_y h_u h_phi / u^2`.
    pub fn volume(&self, ix: usize, iy: usize, iu: usize) -> f64 {
        let u = self.u(iu);
        lambda_w(self.w(ix, iy)) * self.hx * self.hy * self.hu * self.hphi / (u * u)
    }

    /// Index of the node of `self` coinciding with node `(ix, iy, iu, ip)` of `coarse`.
    pub fn fine_index_of_coarse(
        &self,
        coarse: &ProductGrid,
        ix: usize,
        iy: usize,
        iu: usize,
        ip: usize,
    ) -> Option<usize> {
        let sx = (self.spec.nx - 1) / (coarse.spec.nx - 1);
        let sy = (self.spec.ny - 1) / (coarse.spec.ny - 1);
        let su = (self.spec.nu - 1) / (coarse.spec.nu - 1);
        let sp = self.spec.nphi / coarse.spec.nphi;
        let exact = sx * (coarse.spec.nx - 1) == self.spec.nx - 1
            && sy * (coarse.spec.ny - 1) == self.spec.ny - 1
            && su * (coarse.spec.nu - 1) == self.spec.nu - 1
            && sp * coarse.spec.nphi == self.spec.nphi
            && self.spec.r_w == coarse.spec.r_w
            && self.spec.eps == coarse.spec.eps
            && self.spec.delta == coarse.spec.delta;
        exact.then(|| self.index(ix * sx, iy * sy, iu * su, ip * sp))
    }
}

/// `4 / (1 + |w|^2)^2`.
#[inline]
pub fn lambda_w(w: C64) -> f64 {
    let a = 1.0 + w.norm_sqr();
    4.0 / (a * a)
}

/// Conformal factors at a node: `(1 + |w|^2)^2`, `u^2` and their ratio `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricWeights {
    pub sphere: f64,
    pub cylinder: f64,
    pub rho: f64,
}

/// `rho = ((1 + |w|^2) / (|z| ln|z|))^2`.
pub fn metric_weights(w: C64, z: C64) -> Result<MetricWeights> {
    let r = z.norm();
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::DomainError("need 0 < |z| < 1".into()));
    }
    let sphere = sqr(1.0 + w.norm_sqr());
    let u = libm::log(r);
    let cylinder = u * u;
    Ok(MetricWeights { sphere, cylinder, rho: sphere / (r * r * cylinder) })
}

/// Product Laplacian of a complex scalar field. Dirichlet nodes map to zero.
pub fn laplacian_apply_scalar(field: &[C64], g: &ProductGrid) -> Result<Vec<C64>> {
    if field.len() != g.len() {
        return Err(Error::GridMismatch(alloc::format!("field has {} nodes, grid {}", field.len(), g.len())));
    }
    let s = g.spec;
    let (hx, hy, hu, hp) = g.spacings();
    let mut out = alloc::vec![C64::new(0.0, 0.0); field.len()];
    for ix in 1..s.nx - 1 {
        for iy in 1..s.ny - 1 {
            let aw = 0.25 * sqr(1.0 + g.w(ix, iy).norm_sqr());
            for iu in 1..s.nu - 1 {
                let u2 = sqr(g.u(iu));
                for ip in 0..s.nphi {
                    let at = |a, b, c, d| field[g.index(a, b, c, d)];
                    let f0 = at(ix, iy, iu, ip);
                    let ipp = (ip + 1) % s.nphi;
                    let ipm = (ip + s.nphi - 1) % s.nphi;
                    let dxx = (at(ix + 1, iy, iu, ip) + at(ix - 1, iy, iu, ip) - f0 * 2.0) / (hx * hx);
                    let dyy = (at(ix, iy + 1, iu, ip) + at(ix, iy - 1, iu, ip) - f0 * 2.0) / (hy * hy);
                    let duu = (at(ix, iy, iu + 1, ip) + at(ix, iy, iu - 1, ip) - f0 * 2.0) / (hu * hu);
                    let dpp = (at(ix, iy, iu, ipp) + at(ix, iy, iu, ipm) - f0 * 2.0) / (hp * hp);
                    out[g.index(ix, iy, iu, ip)] = -(dxx + dyy) * aw - (duu + dpp) * u2;
                }
            }
        }
    }
    Ok(out)
}

/// Entrywise product Laplacian of a matrix field.
pub fn laplacian_apply(field: &[ComplexMatrix], g: &ProductGrid) -> Result<Vec<ComplexMatrix>> {
    let n = field.first().map_or(1, ComplexMatrix::dim);
    let mut out: Vec<ComplexMatrix> = (0..field.len()).map(|_| ComplexMatrix::zeros(n)).collect();
    for e in 0..n * n {
        let comp: Vec<C64> = field.iter().map(|m| m.as_slice()[e]).collect();
        let lap = laplacian_apply_scalar(&comp, g)?;
        for (o, v) in out.iter_mut().zip(lap) {
            o.as_mut_slice()[e] = v;
        }
    }
    Ok(out)
}

/// `min(-ln|z|, -ln s) / (s ln^2 s)`.
pub fn green1d(absz: f64, s: f64) -> Result<f64> {
    if !(absz > 0.0 && absz < 1.0 && s > 0.0 && s < 1.0) {
        return Err(Error::DomainError("green1d needs arguments in (0, 1)".into()));
    }
    let ls = libm::log(s);
    Ok((-libm::log(absz)).min(-ls) / (s * ls * ls))
}

/// `int_0^1 (1 - s) G(|z|, s) ds` by Gauss-Legendre after `s = e^{-t}`.
pub fn green_integral(absz: f64) -> Result<f64> {
    green1d(absz, 0.5)?;
    let l = -libm::log(absz);
    let gl = GaussLegendre::new(64);
    // t in [0, L]: (1 - e^{-t}) / t
    let head = gl.integrate(0.0, l, |t| if t == 0.0 { 1.0 } else { -libm::expm1(-t) / t });
    // t = L / x in [L, inf): L (1 - e^{-t}) / t^2 dt = (1 - e^{-L/x}) dx
    let tail = gl.integrate(0.0, 1.0, |x| -libm::expm1(-l / x));
    Ok(head + tail)
}

/// A point of `S^1 x R^3`: circle angle and spatial position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaloronPoint {
    pub theta: f64,
    pub x: [f64; 3],
}

/// `r = -ln|z| / mu`, `theta = arg z / mu`, direction the inverse stereographic image of `w`.
pub fn to_caloron_coords(w: C64, z: C64, mu: f64) -> Result<CaloronPoint> {
    let r0 = z.norm();
    if !(r0 > 0.0 && r0 < 1.0) || !(mu > 0.0) {
        return Err(Error::DomainError("need 0 < |z| < 1 and mu > 0".into()));
    }
    let r = -libm::log(r0) / mu;
    let d = 1.0 + w.norm_sqr();
    let n = [2.0 * w.re / d, 2.0 * w.im / d, (w.norm_sqr() - 1.0) / d];
    Ok(CaloronPoint { theta: z.arg() / mu, x: [r * n[0], r * n[1], r * n[2]] })
}

/// Inverse of [`to_caloron_coords`] away from the north pole direction.
pub fn from_caloron_coords(p: &CaloronPoint, mu: f64) -> Result<(C64, C64)> {
    let r = libm::sqrt(p.x.iter().map(|v| v * v).sum());
    if !(r > 0.0) || !(mu > 0.0) {
        return Err(Error::DomainError("need r > 0 and mu > 0".into()));
    }
    let n = [p.x[0] / r, p.x[1] / r, p.x[2] / r];
    if n[2] >= 1.0 {
        return Err(Error::DomainError("north pole maps to w = infinity".into()));
    }
    let w = C64::new(n[0], n[1]) / (1.0 - n[2]);
    let z = C64::from_polar(libm::exp(-mu * r), mu * p.theta);
    Ok((w, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ProductGrid {
        ProductGrid::new(GridSpec { nx: 7, ny: 7, nu: 9, nphi: 8, r_w: 1.5, eps: libm::exp(-3.0), delta: 0.9 }).unwrap()
    }

    fn sample(g: &ProductGrid, f: impl Fn(f64, f64, f64, f64) -> f64) -> Vec<C64> {
        (0..g.len())
            .map(|i| {
                let (a, b, cc, d) = g.unindex(i);
                c(f(g.x(a), g.y(b), g.u(cc), g.phi(d)), 0.0)
            })
            .collect()
    }

    fn interior_max(g: &ProductGrid, v: &[C64], f: impl Fn(usize) -> C64) -> f64 {
        (0..g.len())
            .filter(|&i| {
                let (a, b, cc, _) = g.unindex(i);
                !g.is_boundary(a, b, cc)
            })
            .map(|i| (v[i] - f(i)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_grids() {
        let s = GridSpec { nphi: 3, ..GridSpec::default() };
        assert!(matches!(ProductGrid::new(s), Err(Error::GridTooSmall { axis: "phi", nodes: 3 })));
        let s = GridSpec { delta: 1.0, ..GridSpec::default() };
        assert!(ProductGrid::new(s).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = small();
        for i in [0, 17, 333, g.len() - 1] {
            let (a, b, cc, d) = g.unindex(i);
            assert_eq!(g.index(a, b, cc, d), i);
        }
    }

    #[test]
    fn constant_and_linear_u_are_harmonic() {
        let g = small();
        for f in [sample(&g, |_, _, _, _| 3.0), sample(&g, |_, _, u, _| u)] {
            let lap = laplacian_apply_scalar(&f, &g).unwrap();
            assert!(interior_max(&g, &lap, |_| c(0.0, 0.0)) < 1e-10);
        }
    }

    #[test]
    fn u_squared() {
        let g = small();
        let f = sample(&g, |_, _, u, _| u * u);
        let lap = laplacian_apply_scalar(&f, &g).unwrap();
        let err = interior_max(&g, &lap, |i| {
            let u = g.u(g.unindex(i).2);
            c(-2.0 * u * u, 0.0)
        });
        assert!(err < 1e-9, "{err}");
    }

    /// Max truncation error on a smooth field, over the interior nodes of `on`.
    fn smooth_error(g: &ProductGrid, on: &ProductGrid) -> f64 {
        let f = sample(g, |x, y, u, p| libm::sin(x) * libm::cos(0.5 * y) * u * u * u * libm::cos(p));
        let lap = laplacian_apply_scalar(&f, g).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..on.len() {
            let (a, b, cc, d) = on.unindex(i);
            if on.is_boundary(a, b, cc) {
                continue;
            }
            let j = g.fine_index_of_coarse(on, a, b, cc, d).unwrap();
            let (x, y, u, p) = (on.x(a), on.y(b), on.u(cc), on.phi(d));
            let aw = 0.25 * (1.0 + x * x + y * y).powi(2);
            let base = libm::sin(x) * libm::cos(0.5 * y);
            let lxy = -1.25 * base * u * u * u * libm::cos(p);
            let luu = base * 6.0 * u * libm::cos(p) - base * u * u * u * libm::cos(p);
            err = err.max((lap[j].re + aw * lxy + u * u * luu).abs());
        }
        err
    }

    #[test]
    fn second_order_convergence() {
        let g = small();
        let f = ProductGrid::new(g.spec().refined()).unwrap();
        let order = libm::log2(smooth_error(&g, &g) / smooth_error(&f, &g));
        assert!(order >= 1.8, "order {order}");
    }

    #[test]
    fn symmetric_positive_semidefinite() {
        let g = small();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rand_field = |rng: &mut ChaCha8Rng| -> Vec<C64> {
            (0..g.len())
                .map(|i| {
                    let (a, b, cc, _) = g.unindex(i);
                    if g.is_boundary(a, b, cc) {
                        c(0.0, 0.0)
                    } else {
                        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    }
                })
                .collect()
        };
        let inner = |f: &[C64], h: &[C64]| -> C64 {
            (0..g.len())
                .map(|i| {
                    let (a, b, cc, _) = g.unindex(i);
                    f[i].conj() * h[i] * g.volume(a, b, cc)
                })
                .sum()
        };
        for _ in 0..5 {
            let f = rand_field(&mut rng);
            let h = rand_field(&mut rng);
            let lf = laplacian_apply_scalar(&f, &g).unwrap();
            let lh = laplacian_apply_scalar(&h, &g).unwrap();
            let a = inner(&f, &lh);
            let b = inner(&lf, &h);
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
            assert!(inner(&f, &lf).re >= -1e-12);
        }
    }

    #[test]
    fn rho_is_ratio_of_factors() {
        let w = c(0.4, -1.2);
        let z = c(0.3, 0.2);
        let m = metric_weights(w, z).unwrap();
        let expect = ((1.0 + w.norm_sqr()) / (z.norm() * libm::log(z.norm()))).powi(2);
        assert!((m.rho - expect).abs() < 1e-12 * expect);
        assert!((m.rho - m.sphere / (z.norm_sqr() * m.cylinder)).abs() < 1e-12 * expect);
    }

    #[test]
    fn green_examples() {
        let e = core::f64::consts::E;
        assert!((green1d(1.0 / e, 1.0 / (e * e)).unwrap() - e * e / 4.0).abs() < 1e-12);
        assert!((green1d(1.0 / (e * e), 1.0 / e).unwrap() - e).abs() < 1e-12);
        assert!(green1d(1.0, 0.5).is_err());
    }

    fn e1(x: f64) -> f64 {
        // series for E1; adequate for x <= 20
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            sum -= term / k as f64;
        }
        -0.5772156649015329 - libm::log(x) + sum
    }

    #[test]
    fn green_integral_matches_closed_form() {
        for l in [1.0, 4.0, 16.0] {
            let ein = 0.5772156649015329 + libm::log(l) + e1(l);
            let closed = ein + 1.0 - libm::exp(-l) + l * e1(l);
            let num = green_integral(libm::exp(-l)).unwrap();
            assert!((num - closed).abs() < 1e-8 * closed, "L={l}: {num} vs {closed}");
        }
    }

    #[test]
    fn caloron_coords_round_trip_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let w = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let z = C64::from_polar(rng.gen_range(0.01..0.99), rng.gen_range(-3.0..3.0));
            let mu = rng.gen_range(0.5..2.0);
            let p = to_caloron_coords(w, z, mu).unwrap();
            let (w2, z2) = from_caloron_coords(&p, mu).unwrap();
            assert!((w - w2).norm() < 1e-12 * (1.0 + w.norm()) && (z - z2).norm() < 1e-12);
        }
        let near_one = to_caloron_coords(c(0.2, 0.0), c(1.0 - 1e-12, 0.0), 1.0).unwrap();
        assert!(near_one.x.iter().all(|v| v.abs() < 1e-11));
        let far = to_caloron_coords(c(0.2, 0.0), c(1e-300, 0.0), 1.0).unwrap();
        assert!(far.x.iter().map(|v| v * v).sum::<f64>() > 600.0 * 600.0);
        assert!(to_caloron_coords(c(0.0, 0.0), c(1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn pullback_is_conformal_to_product_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // 8th-order central first derivative
        let st = [(1.0, 4.0 / 5.0), (2.0, -1.0 / 5.0), (3.0, 4.0 / 105.0), (4.0, -1.0 / 280.0)];
        for _ in 0..100 {
            let q = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-4.0..-0.2),
                rng.gen_range(-3.0..3.0),
            ];
            let mu = rng.gen_range(0.5..2.0);
            let map = |q: [f64; 4]| {
                let p = to_caloron_coords(c(q[0], q[1]), C64::from_polar(libm::exp(q[2]), q[3]), mu).unwrap();
                [p.theta, p.x[0], p.x[1], p.x[2]]
            };
            let h = 1e-3;
            let mut jac = [[0.0; 4]; 4];
            for a in 0..4 {
                for &(k, wgt) in &st {
                    let mut qp = q;
                    let mut qm = q;
                    qp[a] += k * h;
                    qm[a] -= k * h;
                    let (fp, fm) = (map(qp), map(qm));
                    for b in 0..4 {
                        jac[b][a] += wgt * (fp[b] - fm[b]) / h;
                    }
                }
            }
            let r = -q[2] / mu;
            let lw = lambda_w(c(q[0], q[1]));
            let expect = [lw, lw, 1.0 / (q[2] * q[2]), 1.0 / (q[2] * q[2])];
            for a in 0..4 {
                for b in 0..4 {
                    let gab: f64 = (0..4).map(|k| jac[k][a] * jac[k][b]).sum();
                    let target = if a == b { r * r * expect[a] } else { 0.0 };
                    let scale = r * r * expect[a].max(expect[b]);
                    assert!((gab - target).abs() <= 1e-10 * scale, "({a},{b}) {gab} vs {target}");
                }
            }
        }
    }
}
