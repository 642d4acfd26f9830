//! Holomorphic-map data: `eta(w, z) = sum_k eta_k(w) z^k`, blip families,
//! the parabolic condition at `z = 0`, the degree integral and lattice shifts.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::looporbit::LoopAlgebraElement;
use crate::matrixcore::{c, ComplexMatrix, C64};
use crate::quad::{integrate_plane, Estimate, QuadSpec};
use crate::rational::Rational;

/// Two phases count as equal below this gap.
pub const PHASE_TIE_TOL: f64 = 1e-12;
const BASING_RADII: [f64; 2] = [1e3, 1e4];
const BASING_GROWTH: f64 = 3.0;

/// Which subalgebra `eta(w, 0)` must lie in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParabolicMode {
    /// Centraliser of `xi_0`: entries only between equal phases.
    Strict,
    /// Parabolic: entry `(r, c)` allowed when `a_r >= a_c`.
    #[default]
    Permissive,
}

impl ParabolicMode {
    pub fn allows(self, a_row: f64, a_col: f64) -> bool {
        match self {
            ParabolicMode::Strict => (a_row - a_col).abs() <= PHASE_TIE_TOL,
            ParabolicMode::Permissive => a_row >= a_col - PHASE_TIE_TOL,
        }
    }
}

/// Whether `m` is supported on the entries allowed by `mode`.
pub fn in_subalgebra(m: &ComplexMatrix, phases: &[f64], mode: ParabolicMode, tol: f64) -> bool {
    let n = m.dim();
    (0..n).all(|r| (0..n).all(|col| mode.allows(phases[r], phases[col]) || m[(r, col)].norm() <= tol))
}

/// A point of the Riemann sphere in the `w` chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpherePoint {
    Finite(C64),
    Infinity,
}

impl From<C64> for SpherePoint {
    fn from(w: C64) -> Self {
        SpherePoint::Finite(w)
    }
}

/// Antiholomorphic vector `v(W)` generating `P = v v^* / |v|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlipMap {
    pub v: Vec<Rational>,
    /// Diagonal of `i xi_0`.
    pub phases: Vec<f64>,
    pub mu: f64,
}

/// Coefficients of `eta` and their `w`-derivatives at one `w`.
#[derive(Clone, Debug)]
pub struct EtaSample {
    pub coeffs: Vec<ComplexMatrix>,
    pub d_w: Vec<ComplexMatrix>,
}

impl EtaSample {
    /// `sum_k coeffs[k] z^k` by Horner.
    pub fn eval(&self, z: C64) -> ComplexMatrix {
        horner(&self.coeffs, z)
    }

    pub fn eval_d_w(&self, z: C64) -> ComplexMatrix {
        horner(&self.d_w, z)
    }

    /// `sum_k k coeffs[k] z^{k-1}`.
    pub fn eval_d_z(&self, z: C64) -> ComplexMatrix {
        let n = self.coeffs[0].dim();
        let mut acc = ComplexMatrix::zeros(n);
        for (k, m) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = &(&acc * z) + &(m * k as f64);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|m| m.max_abs() == 0.0)
    }
}

fn horner(coeffs: &[ComplexMatrix], z: C64) -> ComplexMatrix {
    let n = coeffs[0].dim();
    let mut acc = ComplexMatrix::zeros(n);
    for m in coeffs.iter().rev() {
        acc = &(&acc * z) + m;
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaField {
    dim: usize,
    phases: Vec<f64>,
    mu: f64,
    mode: ParabolicMode,
    /// `coeffs[k][r * dim + c]`.
    coeffs: Vec<Vec<Rational>>,
    d_w: Vec<Vec<Rational>>,
}

impl EtaField {
    /// Validates sizes, the subalgebra condition at `z = 0` and basing.
    pub fn new(dim: usize, phases: Vec<f64>, mu: f64, coeffs: Vec<Vec<Rational>>, mode: ParabolicMode) -> Result<Self> {
        let field = Self::assemble(dim, phases, mu, coeffs, mode)?;
        field.check_subalgebra()?;
        field.check_basing()?;
        Ok(field)
    }

    fn assemble(
        dim: usize,
        phases: Vec<f64>,
        mu: f64,
        mut coeffs: Vec<Vec<Rational>>,
        mode: ParabolicMode,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if phases.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: phases.len() });
        }
        if !(mu > 0.0 && mu.is_finite()) || phases.iter().any(|a| !a.is_finite()) {
            return Err(Error::DomainError("orbit data must be finite with mu > 0".into()));
        }
        if coeffs.is_empty() {
            coeffs.push(alloc::vec![Rational::zero(); dim * dim]);
        }
        for row in &coeffs {
            if row.len() != dim * dim {
                return Err(Error::DimensionMismatch { expected: dim * dim, found: row.len() });
            }
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(|r| r.iter().all(Rational::is_zero)) {
            coeffs.pop();
        }
        let d_w = coeffs.iter().map(|row| row.iter().map(Rational::d_w).collect()).collect();
        Ok(Self { dim, phases, mu, mode, coeffs, d_w })
    }

    pub fn zero(dim: usize, phases: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(dim, phases, mu, Vec::new(), ParabolicMode::Permissive)
    }

    fn check_subalgebra(&self) -> Result<()> {
        for r in 0..self.dim {
            for col in 0..self.dim {
                if !self.mode.allows(self.phases[r], self.phases[col]) && !self.coeffs[0][r * self.dim + col].is_zero()
                {
                    return Err(Error::InvalidInput(alloc::format!(
                        "eta(w, 0) has entry ({r}, {col}) outside the {:?} subalgebra",
                        self.mode
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_basing(&self) -> Result<()> {
        let mut growth = [0.0f64; 2];
        for (g, &r) in growth.iter_mut().zip(&BASING_RADII) {
            for j in 0..8 {
                let w = C64::from_polar(r, 2.0 * PI * (j as f64 + 0.37) / 8.0);
                for row in &self.coeffs {
                    for e in row {
                        *g = g.max(e.eval(w)?.norm() * r);
                    }
                }
            }
        }
        if growth[1] > BASING_GROWTH * growth[0] + 1e-9 {
            return Err(Error::InvalidInput("eta does not decay like 1/|w| at infinity".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest power of `z`.
    pub fn degree_in_z(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mode(&self) -> ParabolicMode {
        self.mode
    }

    pub fn coeffs(&self) -> &[Vec<Rational>] {
        &self.coeffs
    }

    /// `xi_0 = -i diag(a)`.
    pub fn xi0(&self) -> Result<LoopAlgebraElement> {
        LoopAlgebraElement::from_phases(&self.phases, self.mu)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|row| row.iter().all(Rational::is_zero))
    }

    /// Whether `eta(w, 0)` commutes with `xi_0` identically.
    pub fn is_strict(&self) -> bool {
        (0..self.dim).all(|r| {
            (0..self.dim).all(|col| {
                ParabolicMode::Strict.allows(self.phases[r], self.phases[col])
                    || self.coeffs[0][r * self.dim + col].is_zero()
            })
        })
    }

    fn matrix_at(&self, row: &[Rational], w: C64) -> Result<ComplexMatrix> {
        let mut m = ComplexMatrix::zeros(self.dim);
        for (dst, e) in m.as_mut_slice().iter_mut().zip(row) {
            if !e.is_zero() {
                *dst = e.eval(w)?;
            }
        }
        Ok(m)
    }

    /// All coefficients and their `d/dw` at `w`.
    pub fn sample(&self, w: C64) -> Result<EtaSample> {
        let coeffs = self.coeffs.iter().map(|r| self.matrix_at(r, w)).collect::<Result<Vec<_>>>()?;
        let d_w = self.d_w.iter().map(|r| self.matrix_at(r, w)).collect::<Result<Vec<_>>>()?;
        Ok(EtaSample { coeffs, d_w })
    }

    fn check_disk(z: C64) -> Result<()> {
        if !(z.norm() <= 1.0 + 1e-12) {
            return Err(Error::DomainError("eta is evaluated on the closed unit disk only".into()));
        }
        Ok(())
    }

    /// `eta(w, z)` for `|z| <= 1`; zero at `w = infinity`.
    pub fn eval(&self, w: SpherePoint, z: C64) -> Result<ComplexMatrix> {
        Self::check_disk(z)?;
        match w {
            SpherePoint::Infinity => Ok(ComplexMatrix::zeros(self.dim)),
            SpherePoint::Finite(w) => {
                let coeffs = self.coeffs.iter().map(|r| self.matrix_at(r, w)).collect::<Result<Vec<_>>>()?;
                Ok(horner(&coeffs, z))
            }
        }
    }

    /// Same as [`EtaField::eval`] by explicit powers of `z`.
    pub fn eval_direct(&self, w: SpherePoint, z: C64) -> Result<ComplexMatrix> {
        Self::check_disk(z)?;
        let mut acc = ComplexMatrix::zeros(self.dim);
        if let SpherePoint::Finite(w) = w {
            for (k, r) in self.coeffs.iter().enumerate() {
                acc += &(&self.matrix_at(r, w)? * z.powu(k as u32));
            }
        }
        Ok(acc)
    }

    /// `(1/2 pi) int sum_k |eta_k|^2 dx dy`, the loop-averaged norm of `eta` on `|z| = 1`.
    pub fn degree(&self, quad: QuadSpec) -> Result<Estimate> {
        if self.is_zero() {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        let e = integrate_plane(quad, |w| {
            let mut s = 0.0;
            for r in &self.coeffs {
                s += crate::sqr(self.matrix_at(r, w)?.frobenius_norm());
            }
            Ok(s)
        })?;
        Ok(Estimate { value: e.value / (2.0 * PI), error: e.error / (2.0 * PI) })
    }

    /// Conjugation by `diag(z^{k_j})`: entry `(i, j)` gains `z^{k_j - k_i}`, and `a' = a + k`.
    pub fn lattice_shift(&self, k: &[i64]) -> Result<EtaField> {
        if k.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: k.len() });
        }
        let n = self.dim;
        let mut max_pow = 0i64;
        let mut moves = Vec::new();
        for (p, row) in self.coeffs.iter().enumerate() {
            for (idx, e) in row.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let (i, j) = (idx / n, idx % n);
                let q = p as i64 + k[j] - k[i];
                if q < 0 {
                    return Err(Error::InvalidShift(alloc::format!(
                        "entry ({i}, {j}) of the z^{p} coefficient acquires a pole of order {}",
                        -q
                    )));
                }
                max_pow = max_pow.max(q);
                moves.push((q as usize, idx, e.clone()));
            }
        }
        let mut coeffs = alloc::vec![alloc::vec![Rational::zero(); n * n]; max_pow as usize + 1];
        for (q, idx, e) in moves {
            coeffs[q][idx] = e;
        }
        let phases = self.phases.iter().zip(k).map(|(&a, &s)| a + s as f64).collect();
        Self::assemble(n, phases, self.mu, coeffs, self.mode)
    }
}

/// `eta = (z - 1) dP/dW` with `P = v v^* / |v|^2`.
pub fn eta_from_blip(b: &BlipMap, mode: ParabolicMode) -> Result<EtaField> {
    let n = b.v.len();
    if n == 0 {
        return Err(Error::InvalidInput("blip vector is empty".into()));
    }
    if let Some(bad) = b.v.iter().position(|r| !r.is_antiholomorphic()) {
        return Err(Error::InvalidInput(alloc::format!("blip component {bad} depends on w")));
    }
    let conj: Vec<Rational> = b.v.iter().map(Rational::conj).collect();
    let norm = b.v.iter().zip(&conj).fold(Rational::zero(), |acc, (x, y)| acc.add(&x.mul(y)));
    let mut c0 = Vec::with_capacity(n * n);
    let mut c1 = Vec::with_capacity(n * n);
    for i in 0..n {
        for cj in conj.iter().take(n) {
            let p = b.v[i].mul(cj);
            let entry = Rational::new(p.num.mul(&norm.den), p.den.mul(&norm.num))?;
            let d = entry.d_wbar();
            c0.push(d.neg());
            c1.push(d);
        }
    }
    EtaField::new(n, b.phases.clone(), b.mu, alloc::vec![c0, c1], mode)
}

/// The map `f = (I - P) + z P` itself, used as an oracle for `f^{-1} df/dW`.
pub fn blip_map_value(b: &BlipMap, w: C64, z: C64) -> Result<ComplexMatrix> {
    let vals = b.v.iter().map(|r| r.eval(w)).collect::<Result<Vec<_>>>()?;
    let norm: f64 = vals.iter().map(|x| x.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::Pole);
    }
    let n = vals.len();
    Ok(ComplexMatrix::from_fn(n, |i, j| {
        let p = vals[i] * vals[j].conj() / norm;
        let id = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
        id - p + z * p
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn blip(v: &[&str]) -> BlipMap {
        BlipMap {
            v: v.iter().map(|s| parse_rational(s).unwrap()).collect(),
            phases: alloc::vec![0.0; v.len()],
            mu: 1.0,
        }
    }

    #[test]
    fn constant_vector_gives_zero_field() {
        let e = eta_from_blip(&blip(&["1", "2i"]), ParabolicMode::Strict).unwrap();
        assert!(e.is_zero());
        assert!(e.degree(QuadSpec::default()).unwrap().value == 0.0);
    }

    #[test]
    fn blip_at_origin() {
        let e = eta_from_blip(&blip(&["1", "W"]), ParabolicMode::Strict).unwrap();
        let z = c(0.3, -0.4);
        let m = e.eval(c(0.0, 0.0).into(), z).unwrap();
        let expect = ComplexMatrix::from_row_major(&[c(0.0, 0.0), c(0.0, 0.0), z - 1.0, c(0.0, 0.0)]).unwrap();
        assert!((&m - &expect).max_abs() < 1e-14);
    }

    #[test]
    fn infinity_and_zero_field() {
        let e = eta_from_blip(&blip(&["1", "W"]), ParabolicMode::Strict).unwrap();
        assert_eq!(e.eval(SpherePoint::Infinity, c(0.5, 0.0)).unwrap().max_abs(), 0.0);
        let z = EtaField::zero(2, alloc::vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(z.eval(c(0.7, 0.1).into(), c(0.2, 0.2)).unwrap().max_abs(), 0.0);
        assert!(matches!(e.eval(c(0.0, 0.0).into(), c(1.5, 0.0)), Err(Error::DomainError(_))));
    }

    #[test]
    fn parabolic_conditions() {
        let zero = Rational::zero();
        let lower = parse_rational("1 / (1 + w W)").unwrap();
        let c0 = alloc::vec![zero.clone(), zero.clone(), lower, zero];
        let make = |phases: [f64; 2], mode| EtaField::new(2, phases.to_vec(), 1.0, alloc::vec![c0.clone()], mode);
        // entry (1, 0) needs a_1 >= a_0
        assert!(make([-0.2, 0.1], ParabolicMode::Permissive).is_ok());
        assert!(make([-0.2, 0.1], ParabolicMode::Strict).is_err());
        assert!(make([0.1, -0.2], ParabolicMode::Permissive).is_err());
        assert!(make([0.1, 0.1], ParabolicMode::Strict).unwrap().is_strict());
        let f = make([-0.2, 0.1], ParabolicMode::Permissive).unwrap();
        assert!(!f.is_strict());
        let at0 = f.eval(c(0.4, 0.2).into(), c(0.0, 0.0)).unwrap();
        assert!(in_subalgebra(&at0, f.phases(), ParabolicMode::Permissive, 0.0));

        let mut b = blip(&["1", "W"]);
        b.phases = alloc::vec![-0.2, 0.1];
        assert!(eta_from_blip(&b, ParabolicMode::Permissive).is_err());
    }

    #[test]
    fn rejects_unbased_fields() {
        let one = parse_rational("1").unwrap();
        let zero = Rational::zero();
        let coeffs = alloc::vec![alloc::vec![zero.clone(), one, zero.clone(), zero]];
        let r = EtaField::new(2, alloc::vec![0.0, 0.0], 1.0, coeffs, ParabolicMode::Permissive);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn degrees_of_monomial_blips() {
        for (d, v) in [(1.0, "W"), (2.0, "W^2"), (3.0, "W^3")] {
            let e = eta_from_blip(&blip(&["1", v]), ParabolicMode::Strict).unwrap();
            let est = e.degree(QuadSpec::default()).unwrap();
            assert!((est.value - d).abs() < 1e-2, "{v}: {est:?}");
        }
    }

    #[test]
    fn lattice_shift_examples() {
        let e = eta_from_blip(&blip(&["1", "W"]), ParabolicMode::Permissive).unwrap();
        let same = e.lattice_shift(&[0, 0]).unwrap();
        assert_eq!(same.coeffs(), e.coeffs());
        assert!(matches!(e.lattice_shift(&[1, 0]), Err(Error::InvalidShift(_))));

        // strictly upper z-term: entry (0, 1) gains z^{k_1 - k_0}
        let zero = Rational::zero();
        let upper = parse_rational("1 / (1 + w W)").unwrap();
        let c1 = alloc::vec![zero.clone(), upper.clone(), zero.clone(), zero.clone()];
        let f =
            EtaField::new(2, alloc::vec![0.0, 0.0], 1.0, alloc::vec![alloc::vec![zero; 4], c1], ParabolicMode::Strict)
                .unwrap();
        let down = f.lattice_shift(&[1, 0]).unwrap();
        assert_eq!(down.degree_in_z(), 0);
        assert_eq!(down.coeffs()[0][1], upper);
        assert_eq!(down.phases(), &[1.0, 0.0]);
        assert_eq!(f.lattice_shift(&[0, 1]).unwrap().degree_in_z(), 2);
        assert!(matches!(f.lattice_shift(&[2, 0]), Err(Error::InvalidShift(_))));

        // diagonal fields are unchanged
        let d = parse_rational("W / (1 + w W)^2").unwrap();
        let diag = alloc::vec![d.clone(), Rational::zero(), Rational::zero(), d];
        let g = EtaField::new(2, alloc::vec![0.0, 0.0], 1.0, alloc::vec![diag], ParabolicMode::Strict).unwrap();
        let gs = g.lattice_shift(&[3, -1]).unwrap();
        assert_eq!(gs.coeffs(), g.coeffs());
        assert_eq!(gs.phases(), &[3.0, -1.0]);
    }
}
