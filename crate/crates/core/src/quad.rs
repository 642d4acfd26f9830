//! Gauss-Legendre rules and a sphere quadrature in stereographic coordinates.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrixcore::C64;

/// Nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `int_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Resolution and acceptance tolerance of [`integrate_plane`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSpec {
    /// Gauss-Legendre nodes in the polar angle.
    pub n_polar: usize,
    /// Trapezoid nodes in the azimuth.
    pub n_azimuth: usize,
    /// Largest accepted difference between the rule and its doubled refinement.
    pub tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { n_polar: 96, n_azimuth: 64, tol: 1e-6 }
    }
}

/// Value and error estimate of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn plane_rule<const M: usize>(
    n_polar: usize,
    n_azimuth: usize,
    f: &mut impl FnMut(C64) -> Result<[f64; M]>,
) -> Result<[f64; M]> {
    let gl = GaussLegendre::new(n_polar);
    let mut acc = [0.0; M];
    for (t, wt) in gl.mapped(0.0, PI) {
        let r = libm::tan(0.5 * t);
        // dx dy = r dr dpsi, dr = (1 + r^2)/2 dt
        let jac = r * 0.5 * (1.0 + r * r);
        let mut ring = [0.0; M];
        for j in 0..n_azimuth {
            let psi = 2.0 * PI * (j as f64 + 0.5) / n_azimuth as f64;
            for (s, v) in ring.iter_mut().zip(f(C64::from_polar(r, psi))?) {
                *s += v;
            }
        }
        for (a, s) in acc.iter_mut().zip(ring) {
            *a += wt * jac * s * 2.0 * PI / n_azimuth as f64;
        }
    }
    Ok(acc)
}

/// `int_C f dx dy` over the whole plane via `w = tan(t/2) e^{i psi}`, with a
/// doubled-resolution error estimate.
pub fn integrate_plane(spec: QuadSpec, mut f: impl FnMut(C64) -> Result<f64>) -> Result<Estimate> {
    let [e] = integrate_plane_many(spec, |w| Ok([f(w)?]))?;
    Ok(e)
}

/// [`integrate_plane`] for several integrands sharing their evaluation points.
pub fn integrate_plane_many<const M: usize>(
    spec: QuadSpec,
    mut f: impl FnMut(C64) -> Result<[f64; M]>,
) -> Result<[Estimate; M]> {
    if spec.n_polar == 0 || spec.n_azimuth == 0 {
        return Err(Error::InvalidInput("quadrature needs nodes".into()));
    }
    let coarse = plane_rule(spec.n_polar, spec.n_azimuth, &mut f)?;
    let fine = plane_rule(2 * spec.n_polar, 2 * spec.n_azimuth, &mut f)?;
    let mut out = [Estimate { value: 0.0, error: 0.0 }; M];
    for i in 0..M {
        let est = Estimate { value: fine[i], error: (fine[i] - coarse[i]).abs() };
        if !(est.error <= spec.tol * fine[i].abs().max(1.0)) {
            return Err(Error::QuadratureNotConverged { estimate: est.value, error: est.error });
        }
        out[i] = est;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(5);
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-11);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_area() {
        // int 4/(1+|w|^2)^2 dx dy = 4 pi
        let e = integrate_plane(QuadSpec::default(), |w| Ok(4.0 / (1.0 + w.norm_sqr()).powi(2))).unwrap();
        assert!((e.value - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn non_integrable_is_reported() {
        let r = integrate_plane(QuadSpec { n_polar: 8, n_azimuth: 4, tol: 1e-8 }, |w| Ok(1.0 / (1.0 + w.norm_sqr())));
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }
}
