//! Stack-allocated `N x N` complex matrices for the per-node flow kernel.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::matrixcore::{hermitian_eigen, ComplexMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat<const N: usize>(pub [[C64; N]; N]);

impl<const N: usize> Default for Mat<N> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const N: usize> Mat<N> {
    #[inline]
    pub fn zero() -> Self {
        Self([[ZERO; N]; N])
    }

    #[inline]
    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.0[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zero();
        for (i, &x) in d.iter().take(N).enumerate() {
            m.0[i][i] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        debug_assert_eq!(m.dim(), N);
        let mut out = Self::zero();
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = m[(i, j)];
            }
        }
        out
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(N, |i, j| self.0[i][j])
    }

    #[inline]
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    #[inline]
    pub fn scale_c(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// `tr(self * other)` without forming the product.
    #[inline]
    pub fn trace_mul(&self, other: &Self) -> C64 {
        let mut acc = ZERO;
        for i in 0..N {
            for k in 0..N {
                acc += self.0[i][k] * other.0[k][i];
            }
        }
        acc
    }

    #[inline]
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// `(M + M^*) / 2`.
    #[inline]
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = (self.0[i][j] + self.0[j][i].conj()) * 0.5;
            }
        }
        out
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Inverse; closed form for `N <= 2`, Gauss-Jordan with pivoting otherwise.
    #[inline]
    pub fn inverse(&self) -> Option<Self> {
        let a = &self.0;
        match N {
            1 => {
                let d = a[0][0];
                (d.norm() > 0.0).then(|| {
                    let mut m = Self::zero();
                    m.0[0][0] = d.inv();
                    m
                })
            }
            2 => {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if det.norm() == 0.0 || !det.re.is_finite() {
                    return None;
                }
                let r = det.inv();
                let mut m = Self::zero();
                m.0[0][0] = a[1][1] * r;
                m.0[0][1] = -a[0][1] * r;
                m.0[1][0] = -a[1][0] * r;
                m.0[1][1] = a[0][0] * r;
                Some(m)
            }
            _ => self.gauss_jordan(),
        }
    }

    fn gauss_jordan(&self) -> Option<Self> {
        let mut a = self.0;
        let mut inv = Self::identity().0;
        for col in 0..N {
            let piv = (col..N).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))?;
            if a[piv][col].norm() == 0.0 {
                return None;
            }
            a.swap(col, piv);
            inv.swap(col, piv);
            let p = a[col][col].inv();
            for j in 0..N {
                a[col][j] *= p;
                inv[col][j] *= p;
            }
            for r in 0..N {
                if r != col {
                    let f = a[r][col];
                    if f != ZERO {
                        for j in 0..N {
                            let (ac, ic) = (a[col][j], inv[col][j]);
                            a[r][j] -= f * ac;
                            inv[r][j] -= f * ic;
                        }
                    }
                }
            }
        }
        Some(Self(inv))
    }

    /// Extreme eigenvalues `(min, max)` of a Hermitian matrix.
    #[inline]
    pub fn hermitian_extremes(&self) -> (f64, f64) {
        match N {
            1 => (self.0[0][0].re, self.0[0][0].re),
            2 => {
                let a = self.0[0][0].re;
                let d = self.0[1][1].re;
                let b = self.0[0][1].norm();
                let m = 0.5 * (a + d);
                let r = libm::hypot(0.5 * (a - d), b);
                (m - r, m + r)
            }
            _ => {
                let e = hermitian_eigen(&self.hermitian_part().to_matrix());
                (e.values[0], e.values[N - 1])
            }
        }
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_values(&self) -> [f64; N] {
        let mut out = [0.0; N];
        if N == 2 {
            let (lo, hi) = self.hermitian_extremes();
            out[0] = lo;
            out[N - 1] = hi;
        } else {
            let e = hermitian_eigen(&self.hermitian_part().to_matrix());
            out.copy_from_slice(&e.values);
        }
        out
    }
}

impl<const N: usize> Mul for Mat<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                for j in 0..N {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<const N: usize> Add for Mat<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> Sub for Mat<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> AddAssign for Mat<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> SubAssign for Mat<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> Neg for Mat<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::c;

    fn sample3() -> Mat<3> {
        Mat([
            [c(2.0, 0.0), c(0.3, 0.1), c(0.0, -0.4)],
            [c(0.3, -0.1), c(1.5, 0.0), c(0.2, 0.2)],
            [c(0.0, 0.4), c(0.2, -0.2), c(1.0, 0.0)],
        ])
    }

    #[test]
    fn inverse_matches_dynamic() {
        let a = sample3();
        let inv = a.inverse().unwrap();
        let id = a * inv;
        assert!((id - Mat::identity()).max_abs() < 1e-14);
        let dynamic = a.to_matrix().inverse().unwrap();
        assert!((&inv.to_matrix() - &dynamic).max_abs() < 1e-14);

        let b = Mat::<2>([[c(1.0, 1.0), c(2.0, 0.0)], [c(0.0, -1.0), c(3.0, 0.5)]]);
        assert!((b * b.inverse().unwrap() - Mat::identity()).max_abs() < 1e-15);
        assert!(Mat::<2>::zero().inverse().is_none());
    }

    #[test]
    fn extremes_match_eigen() {
        let a = sample3();
        let (lo, hi) = a.hermitian_extremes();
        let e = hermitian_eigen(&a.to_matrix());
        assert!((lo - e.values[0]).abs() < 1e-13 && (hi - e.values[2]).abs() < 1e-13);
        let b = Mat::<2>([[c(2.0, 0.0), c(0.5, 0.5)], [c(0.5, -0.5), c(-1.0, 0.0)]]);
        let e = hermitian_eigen(&b.to_matrix());
        let v = b.hermitian_values();
        assert!((v[0] - e.values[0]).abs() < 1e-14 && (v[1] - e.values[1]).abs() < 1e-14);
    }

    #[test]
    fn trace_mul_matches_product() {
        let a = sample3();
        let b = a.inverse().unwrap().scale_c(c(0.2, 1.0));
        assert!((a.trace_mul(&b) - (a * b).trace()).norm() < 1e-14);
    }
}
