//! Small dense complex matrices and the geometry of the space of Hermitian
//! metrics `GL(n,C)/U(n)`.
//!
//! Matrix functions of Hermitian arguments go through a Hermitian
//! eigendecomposition (closed form for `n = 2`, cyclic Jacobi otherwise).

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Relative tolerance used for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalue floor relative to the largest eigenvalue.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// Dense row-major complex `n x n` matrix. Storage is inline for `n <= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: SmallVec<[C64; 4]>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be positive");
        Self { n, data: smallvec::smallvec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        let n = (libm::sqrt(entries.len() as f64) + 0.5) as usize;
        if n == 0 || n * n != entries.len() {
            return Err(Error::InvalidInput("entry count is not a positive square".into()));
        }
        Ok(Self { n, data: SmallVec::from_slice(entries) })
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.data[i * d.len() + i] = x;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.data[i * d.len() + i] = C64::new(x, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x.norm_sqr()).sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// `max |M - M*|`, the deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        d
    }

    pub fn anti_hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.data[i * n + j] + self.data[j * n + i].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= rel_tol * self.max_abs().max(1.0)
    }

    /// `(M + M*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5)
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        if n == 1 {
            let a = self.data[0];
            if a.norm() == 0.0 {
                return Err(Error::Singular);
            }
            return Ok(Self::from_diag(&[a.inv()]));
        }
        if n == 2 {
            let [a, b, cc, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
            let det = a * d - b * cc;
            let scale = self.max_abs();
            if det.norm() <= 1e-300 || det.norm() <= f64::EPSILON * 1e-4 * scale * scale {
                return Err(Error::Singular);
            }
            let inv = det.inv();
            return Ok(Self { n, data: smallvec::smallvec![d * inv, -b * inv, -cc * inv, a * inv] });
        }
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        for col in 0..n {
            let (piv, pmax) =
                (col..n).map(|r| (r, a[(r, col)].norm())).fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * 1e-4 * scale {
                return Err(Error::Singular);
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].inv();
            for j in 0..n {
                a.data[col * n + j] *= p;
                inv.data[col * n + j] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f.norm() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let av = a.data[col * n + j];
                    let iv = inv.data[col * n + j];
                    a.data[r * n + j] -= f * av;
                    inv.data[r * n + j] -= f * iv;
                }
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    #[inline]
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        if n == 2 {
            let a = &self.data;
            let b = &rhs.data;
            return ComplexMatrix {
                n,
                data: smallvec::smallvec![
                    a[0] * b[0] + a[1] * b[2],
                    a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2],
                    a[2] * b[1] + a[3] * b[3],
                ],
            };
        }
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    #[inline]
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.n, rhs.n);
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    #[inline]
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.n, rhs.n);
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            #[inline]
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            #[inline]
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$f(rhs)
            }
        }
        impl<'a> $tr<ComplexMatrix> for &'a ComplexMatrix {
            type Output = ComplexMatrix;
            #[inline]
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                self.$f(&rhs)
            }
        }
    };
}
forward_owned!(Mul, mul);
forward_owned!(Add, add);
forward_owned!(Sub, sub);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    #[inline]
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    #[inline]
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(mut self) -> ComplexMatrix {
        for a in self.data.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, s: C64) -> ComplexMatrix {
        self.scale(s)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, s: f64) -> ComplexMatrix {
        self.scale_re(s)
    }
}

/// Eigendecomposition `M = U diag(values) U*` of a Hermitian matrix, values ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Reassembles `U diag(f(values)) U*`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.vectors.dim();
        let u = &self.vectors;
        let fv: SmallVec<[C64; 8]> = self.values.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| u[(i, k)] * fv[k] * u[(j, k)].conj()).sum())
    }
}

/// Hermitian eigendecomposition. The strictly Hermitian part of `m` is used;
/// callers validate Hermiticity beforehand when it matters.
pub fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    match m.dim() {
        1 => HermitianEigen { values: alloc::vec![m[(0, 0)].re], vectors: ComplexMatrix::identity(1) },
        2 => eigen2(m),
        _ => jacobi_eigen(m),
    }
}

fn eigen2(m: &ComplexMatrix) -> HermitianEigen {
    let a = m[(0, 0)].re;
    let b = m[(1, 1)].re;
    let off = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + b);
    let half = 0.5 * (a - b);
    let r = libm::hypot(half, off.norm());
    let lo = mean - r;
    let hi = mean + r;
    if off.norm() <= f64::EPSILON * (a.abs() + b.abs()) * 1e-3 || r == 0.0 {
        let (v, vec) = if a <= b {
            ([a, b], ComplexMatrix::identity(2))
        } else {
            ([b, a], ComplexMatrix::from_row_major(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap())
        };
        return HermitianEigen { values: alloc::vec![v[0], v[1]], vectors: vec };
    }
    // (M - lo) v = 0; pick the better conditioned of the two row-derived candidates.
    let cand1 = [off, C64::new(lo - a, 0.0)];
    let cand2 = [C64::new(lo - b, 0.0), off.conj()];
    let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
    let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
    let (v, nn) = if n1 >= n2 { (cand1, n1) } else { (cand2, n2) };
    let s = 1.0 / libm::sqrt(nn);
    let v0 = v[0] * s;
    let v1 = v[1] * s;
    // Second eigenvector orthogonal to the first.
    let w0 = -v1.conj();
    let w1 = v0.conj();
    HermitianEigen { values: alloc::vec![lo, hi], vectors: ComplexMatrix::from_row_major(&[v0, w0, v1, w1]).unwrap() }
}

fn jacobi_eigen(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if libm::sqrt(off) <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * libm::atan2(-2.0 * r, aqq - app);
                let (cs, sn) = (libm::cos(theta), libm::sin(theta));
                // Column rotation G on (p,q): G = D R with D = diag(1, conj(phase)).
                let g_pp = C64::new(cs, 0.0);
                let g_pq = C64::new(-sn, 0.0);
                let g_qp = phase.conj() * sn;
                let g_qq = phase.conj() * cs;
                // A <- A G
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                // A <- G* A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |r, k| v[(r, order[k])]);
    HermitianEigen { values, vectors }
}

/// Positive-definite Hermitian matrix: a point of `GL(n,C)/U(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianPD(ComplexMatrix);

impl HermitianPD {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        if !m.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian { asymmetry: m.hermitian_defect() });
        }
        let e = hermitian_eigen(&m);
        let lo = e.values[0];
        let hi = *e.values.last().unwrap();
        if hi <= 0.0 || lo <= POSITIVITY_FLOOR * hi {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo, max_eigenvalue: hi });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps a matrix known to be positive definite by construction.
    pub fn new_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn from_positive_diag(d: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(d))
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Lower-triangular Cholesky factor `L` with `H = L L*`.
    pub fn cholesky(&self) -> ComplexMatrix {
        cholesky(&self.0).expect("HermitianPD has a Cholesky factor")
    }

    pub fn inverse(&self) -> ComplexMatrix {
        self.0.inverse().expect("HermitianPD is invertible")
    }
}

/// Cholesky factorisation of a positive-definite Hermitian matrix.
pub fn cholesky(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = h.dim();
    let mut l = ComplexMatrix::zeros(n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: d, max_eigenvalue: h.max_abs() });
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.dim();
    let mut inv = ComplexMatrix::zeros(n);
    for j in 0..n {
        inv[(j, j)] = l[(j, j)].inv();
        for i in j + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Spectral exponential of a Hermitian matrix.
pub fn herm_exp(x: &ComplexMatrix) -> Result<HermitianPD> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if !x.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian { asymmetry: x.hermitian_defect() });
    }
    let e = hermitian_eigen(x);
    Ok(HermitianPD(e.map(|l| C64::new(libm::exp(l), 0.0)).hermitian_part()))
}

/// Spectral logarithm of a positive-definite Hermitian matrix.
pub fn herm_log(h: &HermitianPD) -> ComplexMatrix {
    hermitian_eigen(h.matrix()).map(|l| C64::new(libm::log(l), 0.0)).hermitian_part()
}

/// `exp(i S)` for Hermitian `S`; unitary.
pub fn unitary_exp(s: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !s.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian { asymmetry: s.hermitian_defect() });
    }
    Ok(hermitian_eigen(s).map(|l| C64::new(libm::cos(l), libm::sin(l))))
}

/// General matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim();
    let norm = a.frobenius_norm();
    let mut s = 0u32;
    let mut scaled = a.clone();
    if norm > 0.25 {
        s = libm::ceil(libm::log2(norm / 0.25)).max(0.0) as u32;
        scaled = a.scale_re(libm::pow(2.0, -(s as f64)));
    }
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..=18 {
        term = (&term * &scaled).scale_re(1.0 / k as f64);
        sum += &term;
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Eigenvalues of the pencil `H1^{-1} H2` (all real and positive).
pub fn relative_eigenvalues(h1: &HermitianPD, h2: &HermitianPD) -> Result<Vec<f64>> {
    h1.0.check_same_dim(&h2.0)?;
    let l = h1.cholesky();
    let li = lower_triangular_inverse(&l);
    let k = &(&li * h2.matrix()) * &li.adjoint();
    Ok(hermitian_eigen(&k).values)
}

/// Riemannian distance on `GL(n,C)/U(n)`: `sqrt(sum (ln lambda_i)^2)` with
/// `lambda_i` the eigenvalues of `H1^{-1} H2`.
pub fn dist_d(h1: &HermitianPD, h2: &HermitianPD) -> Result<f64> {
    let ev = relative_eigenvalues(h1, h2)?;
    Ok(libm::sqrt(
        ev.iter()
            .map(|&l| {
                let x = libm::log(l);
                x * x
            })
            .sum(),
    ))
}

/// `tr(H1^{-1} H2) + tr(H1 H2^{-1}) - 2n`.
pub fn sigma(h1: &HermitianPD, h2: &HermitianPD) -> Result<f64> {
    h1.0.check_same_dim(&h2.0)?;
    Ok(sigma_raw(h1.matrix(), h2.matrix()))
}

/// Unchecked `sigma` on raw matrices assumed positive definite.
pub fn sigma_raw(h1: &ComplexMatrix, h2: &ComplexMatrix) -> f64 {
    let n = h1.dim() as f64;
    let a = match h1.inverse() {
        Ok(i) => (&i * h2).trace().re,
        Err(_) => f64::INFINITY,
    };
    let b = match h2.inverse() {
        Ok(i) => (h1 * &i).trace().re,
        Err(_) => f64::INFINITY,
    };
    (a + b - 2.0 * n).max(0.0)
}

/// Adjoint with respect to the metric `H`: `M -> H^{-1} M* H`.
pub fn h_adjoint(h: &HermitianPD, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    h.0.check_same_dim(m)?;
    Ok(&(&h.inverse() * &m.adjoint()) * h.matrix())
}

/// Squared norm `tr(M^dagger M)` with the `H`-adjoint.
pub fn h_norm_sqr(h_inv: &ComplexMatrix, h: &ComplexMatrix, m: &ComplexMatrix) -> f64 {
    (&(&(h_inv * &m.adjoint()) * h) * m).trace().re
}

/// Eigenvalues of a normal (e.g. unitary) matrix, in no particular order.
///
/// Diagonalises a generic real combination of the two Hermitian parts, which
/// share the eigenvectors of a normal matrix, and reads eigenvalues off as
/// Rayleigh quotients.
pub fn normal_eigenvalues(m: &ComplexMatrix) -> Vec<C64> {
    let n = m.dim();
    let herm = m.hermitian_part();
    let skew = (m - &m.adjoint()).scale(C64::new(0.0, -0.5));
    let mut best: Option<(f64, Vec<C64>)> = None;
    for &w in &[0.618_033_988_749_894_9, 1.324_717_957_244_746, -0.754_877_666_246_692_7] {
        let k = &herm + &skew.scale_re(w);
        let e = hermitian_eigen(&k);
        let mut vals = Vec::with_capacity(n);
        let mut resid: f64 = 0.0;
        for j in 0..n {
            let v: Vec<C64> = (0..n).map(|i| e.vectors[(i, j)]).collect();
            let mv: Vec<C64> = (0..n).map(|i| (0..n).map(|k2| m[(i, k2)] * v[k2]).sum()).collect();
            let lam: C64 = (0..n).map(|i| v[i].conj() * mv[i]).sum();
            let r: f64 = (0..n).map(|i| (mv[i] - lam * v[i]).norm_sqr()).sum();
            resid = resid.max(libm::sqrt(r));
            vals.push(lam);
        }
        if best.as_ref().is_none_or(|b| resid < b.0) {
            best = Some((resid, vals));
        }
        if resid < 1e-12 * m.max_abs().max(1.0) {
            break;
        }
    }
    best.unwrap().1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ComplexMatrix {
        random_matrix(rng, n).hermitian_part().scale_re(scale)
    }

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> HermitianPD {
        herm_exp(&random_hermitian(rng, n, 1.0)).unwrap()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = herm_exp(&ComplexMatrix::zeros(3)).unwrap();
        assert!((e.matrix() - &ComplexMatrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let e = herm_exp(&ComplexMatrix::from_real_diag(&[libm::log(4.0), 0.0])).unwrap();
        assert!((e.matrix() - &ComplexMatrix::from_real_diag(&[4.0, 1.0])).max_abs() < 1e-14);
    }

    #[test]
    fn exp_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_major(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(herm_exp(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn exp_times_exp_of_negative_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=6 {
            let x = random_hermitian(&mut rng, n, 2.0);
            let p = herm_exp(&x).unwrap();
            let m = herm_exp(&x.scale_re(-1.0)).unwrap();
            let prod = p.matrix() * m.matrix();
            assert!((&prod - &ComplexMatrix::identity(n)).max_abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn eigen_reconstructs_and_vectors_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=8 {
            let x = random_hermitian(&mut rng, n, 3.0);
            let e = hermitian_eigen(&x);
            let back = e.map(|l| c(l, 0.0));
            assert!((&back - &x).max_abs() < 1e-12, "n = {n}");
            let u = &e.vectors;
            assert!((&(&u.adjoint() * u) - &ComplexMatrix::identity(n)).max_abs() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_handles_degenerate_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = unitary_exp(&random_hermitian(&mut rng, 4, 2.0)).unwrap();
        let d = ComplexMatrix::from_real_diag(&[1.0, 1.0, 2.0, 2.0]);
        let x = &(&u * &d) * &u.adjoint();
        let e = hermitian_eigen(&x);
        for (a, b) in e.values.iter().zip([1.0, 1.0, 2.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        let id = HermitianPD::identity(2);
        assert_eq!(dist_d(&id, &id).unwrap(), 0.0);
        let h = HermitianPD::from_positive_diag(&[4.0, 1.0]).unwrap();
        assert!((dist_d(&id, &h).unwrap() - libm::log(4.0)).abs() < 1e-14);
        assert!(matches!(dist_d(&id, &HermitianPD::identity(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distance_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=5 {
            let h1 = random_pd(&mut rng, n);
            let h2 = random_pd(&mut rng, n);
            let p = &random_matrix(&mut rng, n) + &ComplexMatrix::identity(n).scale_re(2.0);
            let t1 = HermitianPD::new(&(&p.adjoint() * h1.matrix()) * &p).unwrap();
            let t2 = HermitianPD::new(&(&p.adjoint() * h2.matrix()) * &p).unwrap();
            let d = dist_d(&h1, &h2).unwrap();
            assert!((d - dist_d(&t1, &t2).unwrap()).abs() < 1e-10 * d.max(1.0));
        }
    }

    #[test]
    fn sigma_examples() {
        let id = HermitianPD::identity(2);
        assert_eq!(sigma(&id, &id).unwrap(), 0.0);
        let h = HermitianPD::from_positive_diag(&[4.0, 1.0]).unwrap();
        assert!((sigma(&id, &h).unwrap() - 2.25).abs() < 1e-14);
    }

    #[test]
    fn h_adjoint_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 3);
        let a = h_adjoint(&HermitianPD::identity(3), &m).unwrap();
        assert!((&a - &m.adjoint()).max_abs() < 1e-15);

        let h = HermitianPD::from_positive_diag(&[4.0, 1.0]).unwrap();
        let m = ComplexMatrix::from_row_major(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let expect = ComplexMatrix::from_row_major(&[c(0.0, 0.0), c(0.0, 0.0), c(4.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((&h_adjoint(&h, &m).unwrap() - &expect).max_abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=8 {
            let m = &random_matrix(&mut rng, n) + &ComplexMatrix::identity(n).scale_re(3.0);
            let inv = m.inverse().unwrap();
            assert!((&(&m * &inv) - &ComplexMatrix::identity(n)).max_abs() < 1e-12);
        }
        assert_eq!(ComplexMatrix::zeros(3).inverse(), Err(Error::Singular));
    }

    #[test]
    fn positivity_floor_rejects_near_singular() {
        let m = ComplexMatrix::from_real_diag(&[1.0, 1e-15]);
        assert!(matches!(HermitianPD::new(m), Err(Error::NotPositiveDefinite { .. })));
        assert!(HermitianPD::new(ComplexMatrix::from_real_diag(&[1.0, 1e-13])).is_ok());
    }

    #[test]
    fn expm_matches_spectral_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=5 {
            let x = random_hermitian(&mut rng, n, 4.0);
            let a = expm(&x);
            let b = herm_exp(&x).unwrap();
            assert!((&a - b.matrix()).max_abs() < 1e-11 * b.matrix().max_abs());
        }
    }

    #[test]
    fn normal_eigenvalues_of_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = unitary_exp(&random_hermitian(&mut rng, 3, 2.0)).unwrap();
        let phases = [0.3, -1.2, 2.9];
        let d = ComplexMatrix::from_diag(&phases.map(|p| c(libm::cos(p), libm::sin(p))));
        let m = &(&v * &d) * &v.adjoint();
        let mut got: Vec<f64> = normal_eigenvalues(&m).iter().map(|z| z.arg()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = phases.to_vec();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
