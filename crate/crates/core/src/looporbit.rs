//! Loop-algebra orbit data: holonomy, canonical constant representatives,
//! isotropy membership and the twisted bracket.
//!
//! A loop is `xi(theta) = sum_k X_k e^{i k theta}` with `X_{-k} = -X_k^*`, so
//! that `xi(theta)` is anti-Hermitian. The holonomy solves
//! `h' = -xi h / mu`, `h(0) = I`, and `M = h(2 pi)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrixcore::{c, expm, normal_eigenvalues, ComplexMatrix, C64, I};

/// Steps per period of the fixed-step integrator.
pub const HOLONOMY_STEPS: usize = 2048;
/// Richardson tolerance of the holonomy.
pub const HOLONOMY_TOL: f64 = 1e-10;
/// Tolerance of both isotropy conditions.
pub const ISOTROPY_TOL: f64 = 1e-8;
const MAX_REFINEMENTS: u32 = 6;
const PAIRING_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopAlgebraElement {
    dim: usize,
    mu: f64,
    modes: BTreeMap<i32, ComplexMatrix>,
}

impl LoopAlgebraElement {
    /// Builds a loop from its Fourier modes, checking the reality pairing.
    pub fn new(dim: usize, mu: f64, modes: impl IntoIterator<Item = (i32, ComplexMatrix)>) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::DomainError("mu must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (k, m) in modes {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
            }
            if !m.is_finite() {
                return Err(Error::NonFinite);
            }
            if m.max_abs() > 0.0 {
                map.insert(k, m);
            }
        }
        let out = Self { dim, mu, modes: map };
        out.check_pairing()?;
        Ok(out)
    }

    pub fn constant(xi: ComplexMatrix, mu: f64) -> Result<Self> {
        let n = xi.dim();
        Self::new(n, mu, [(0, xi)])
    }

    pub fn zero(dim: usize, mu: f64) -> Result<Self> {
        Self::new(dim, mu, [])
    }

    /// `-i diag(a)`, whose `i xi` is `diag(a)`.
    pub fn from_phases(a: &[f64], mu: f64) -> Result<Self> {
        let d: Vec<C64> = a.iter().map(|&x| c(0.0, -x)).collect();
        Self::constant(ComplexMatrix::from_diag(&d), mu)
    }

    fn check_pairing(&self) -> Result<()> {
        let scale = self.modes.values().map(ComplexMatrix::max_abs).fold(1.0, f64::max);
        for (&k, m) in &self.modes {
            let partner = match self.modes.get(&-k) {
                Some(p) => p.clone(),
                None => ComplexMatrix::zeros(self.dim),
            };
            let defect = (m + &partner.adjoint()).max_abs();
            if defect > PAIRING_TOL * scale {
                return Err(Error::NotAntiHermitian { asymmetry: defect });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn modes(&self) -> impl Iterator<Item = (i32, &ComplexMatrix)> {
        self.modes.iter().map(|(&k, m)| (k, m))
    }

    pub fn mode(&self, k: i32) -> ComplexMatrix {
        self.modes.get(&k).cloned().unwrap_or_else(|| ComplexMatrix::zeros(self.dim))
    }

    pub fn is_constant(&self) -> bool {
        self.modes.keys().all(|&k| k == 0)
    }

    /// `xi(theta)`.
    pub fn eval(&self, theta: f64) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (&k, m) in &self.modes {
            let ph = C64::from_polar(1.0, k as f64 * theta);
            acc += &(m * ph);
        }
        acc
    }

    /// `d xi / d theta`, mode by mode.
    pub fn derivative(&self) -> Self {
        let modes = self.modes.iter().map(|(&k, m)| (k, m * c(0.0, k as f64))).collect();
        Self { dim: self.dim, mu: self.mu, modes }
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let mut modes = self.modes.clone();
        for (&k, m) in &other.modes {
            let e = modes.entry(k).or_insert_with(|| ComplexMatrix::zeros(self.dim));
            *e += &(m * sign);
        }
        modes.retain(|_, m| m.max_abs() > 0.0);
        Self { dim: self.dim, mu: self.mu, modes }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let modes = self.modes.iter().map(|(&k, m)| (k, m * s)).collect();
        Self { dim: self.dim, mu: self.mu, modes }
    }

    /// Pointwise commutator as a Fourier convolution.
    pub fn pointwise_commutator(&self, other: &Self) -> Self {
        let mut modes: BTreeMap<i32, ComplexMatrix> = BTreeMap::new();
        for (&k, a) in &self.modes {
            for (&l, b) in &other.modes {
                let e = modes.entry(k + l).or_insert_with(|| ComplexMatrix::zeros(self.dim));
                *e += &a.commutator(b);
            }
        }
        modes.retain(|_, m| m.max_abs() > 0.0);
        Self { dim: self.dim, mu: self.mu, modes }
    }

    /// Largest coefficient difference over all modes.
    pub fn max_mode_difference(&self, other: &Self) -> f64 {
        let keys: Vec<i32> = self.modes.keys().chain(other.modes.keys()).copied().collect();
        keys.into_iter().map(|k| (&self.mode(k) - &other.mode(k)).max_abs()).fold(0.0, f64::max)
    }
}

/// `[X + x d, Y + y d] = [X, Y] - y X' + x Y'`; the `d` component of the result is zero.
pub fn twisted_bracket(
    x_loop: &LoopAlgebraElement,
    x_d: f64,
    y_loop: &LoopAlgebraElement,
    y_d: f64,
) -> Result<LoopAlgebraElement> {
    if x_loop.dim != y_loop.dim {
        return Err(Error::DimensionMismatch { expected: x_loop.dim, found: y_loop.dim });
    }
    let comm = x_loop.pointwise_commutator(y_loop);
    let out = comm.sub(&x_loop.derivative().scale(y_d)).add(&y_loop.derivative().scale(x_d));
    Ok(out)
}

/// Unitary monodromy `M = h(2 pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Holonomy {
    pub matrix: ComplexMatrix,
}

impl Holonomy {
    /// Eigenvalue moduli minus one, worst case.
    pub fn unitarity_defect(&self) -> f64 {
        normal_eigenvalues(&self.matrix).iter().map(|l| (l.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn rk4_path(xi: &LoopAlgebraElement, steps: usize, record_every: usize) -> Vec<ComplexMatrix> {
    let n = xi.dim;
    let h = 2.0 * PI / steps as f64;
    let rhs_scale = -1.0 / xi.mu;
    let rhs = |theta: f64, m: &ComplexMatrix| &(&xi.eval(theta) * m) * rhs_scale;
    let mut y = ComplexMatrix::identity(n);
    let mut path = Vec::with_capacity(steps / record_every + 1);
    path.push(y.clone());
    for s in 0..steps {
        let t = s as f64 * h;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(&y + &(&k1 * (0.5 * h))));
        let k3 = rhs(t + 0.5 * h, &(&y + &(&k2 * (0.5 * h))));
        let k4 = rhs(t + h, &(&y + &(&k3 * h)));
        let mut incr = &k1 + &k4;
        incr += &(&(&k2 + &k3) * 2.0);
        y += &(&incr * (h / 6.0));
        if (s + 1) % record_every == 0 {
            path.push(y.clone());
        }
    }
    path
}

/// `h(theta_j)` at `theta_j = 2 pi j / samples`, `j = 0..=samples`.
///
/// Starts at [`HOLONOMY_STEPS`] and doubles the step count until the
/// Richardson estimate of the endpoint error is within [`HOLONOMY_TOL`].
pub fn holonomy_path(xi: &LoopAlgebraElement, samples: usize) -> Result<Vec<ComplexMatrix>> {
    if samples == 0 || !HOLONOMY_STEPS.is_multiple_of(samples) {
        return Err(Error::GridMismatch(alloc::format!(
            "{samples} samples do not divide the {HOLONOMY_STEPS}-step holonomy grid"
        )));
    }
    let mut steps = HOLONOMY_STEPS;
    let mut coarse = rk4_path(xi, steps / 2, steps / 2);
    let mut discrepancy = f64::INFINITY;
    for _ in 0..=MAX_REFINEMENTS {
        let fine = rk4_path(xi, steps, steps / samples);
        let end_c = coarse.last().expect("nonempty path");
        let end_f = fine.last().expect("nonempty path");
        // RK4: error of the fine run is about |fine - coarse| / 15
        discrepancy = (end_f - end_c).max_abs() / 15.0;
        if discrepancy <= HOLONOMY_TOL {
            return Ok(fine);
        }
        coarse = fine;
        steps *= 2;
    }
    Err(Error::StepSizeFailure { discrepancy })
}

/// Monodromy of `xi`. Constant loops use the closed form `exp(-2 pi xi / mu)`.
pub fn holonomy(xi: &LoopAlgebraElement) -> Result<Holonomy> {
    if xi.is_constant() {
        let a = &xi.mode(0) * (-2.0 * PI / xi.mu);
        return Ok(Holonomy { matrix: expm(&a) });
    }
    let path = holonomy_path(xi, 1)?;
    Ok(Holonomy { matrix: path.last().expect("nonempty path").clone() })
}

/// Canonical phases `a` in `(-mu/2, mu/2]`, non-increasing, with `M ~ diag(e^{2 pi i a / mu})`.
pub fn canonical_phases(m: &Holonomy, mu: f64) -> Vec<f64> {
    let mut a: Vec<f64> = normal_eigenvalues(&m.matrix)
        .iter()
        .map(|l| {
            let x = mu * l.arg() / (2.0 * PI);
            // arg near -pi belongs to the closed end of the window
            if x <= -0.5 * mu * (1.0 - 1e-12) {
                0.5 * mu
            } else {
                x
            }
        })
        .collect();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    a
}

/// Constant diagonal representative `xi_0 = -i diag(a)` of the orbit of `xi`.
pub fn orbit_canonical(xi: &LoopAlgebraElement) -> Result<LoopAlgebraElement> {
    let m = holonomy(xi)?;
    let a = canonical_phases(&m, xi.mu);
    LoopAlgebraElement::from_phases(&a, xi.mu)
}

/// `i xi_0` diagonal of the canonical representative.
pub fn canonical_diagonal(xi: &LoopAlgebraElement) -> Result<Vec<f64>> {
    let m = holonomy(xi)?;
    Ok(canonical_phases(&m, xi.mu))
}

/// Action of `gamma(theta) = V diag(e^{i k_j theta}) V^*`:
/// `gamma xi gamma^{-1} - mu gamma' gamma^{-1}`, computed mode-exactly.
pub fn gauge_by_windings(xi: &LoopAlgebraElement, v: &ComplexMatrix, windings: &[i32]) -> Result<LoopAlgebraElement> {
    let n = xi.dim;
    if v.dim() != n || windings.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: windings.len().min(v.dim()) });
    }
    let vh = v.adjoint();
    let mut modes: BTreeMap<i32, ComplexMatrix> = BTreeMap::new();
    for (&k, m) in &xi.modes {
        let rotated = &(&vh * m) * v;
        for a in 0..n {
            for b in 0..n {
                let shift = k + windings[a] - windings[b];
                let e = modes.entry(shift).or_insert_with(|| ComplexMatrix::zeros(n));
                e[(a, b)] += rotated[(a, b)];
            }
        }
    }
    let drift: Vec<C64> = windings.iter().map(|&k| I * (k as f64) * (-xi.mu)).collect();
    let e = modes.entry(0).or_insert_with(|| ComplexMatrix::zeros(n));
    *e += &ComplexMatrix::from_diag(&drift);
    let modes = modes.into_iter().map(|(k, m)| (k, &(v * &m) * &vh));
    LoopAlgebraElement::new(n, xi.mu, modes)
}

/// Whether the sampled loop `gamma(theta_j)`, `theta_j = 2 pi j / N`, lies in
/// the isotropy group of `xi`: `gamma = h gamma(0) h^{-1}` and `[gamma(0), M] = 0`.
pub fn isotropy_check(gamma: &[ComplexMatrix], xi: &LoopAlgebraElement) -> Result<bool> {
    let samples = gamma.len();
    for g in gamma {
        if g.dim() != xi.dim {
            return Err(Error::DimensionMismatch { expected: xi.dim, found: g.dim() });
        }
    }
    let path = holonomy_path(xi, samples)?;
    let g0 = &gamma[0];
    let m = path.last().expect("nonempty path");
    if g0.commutator(m).max_abs() > ISOTROPY_TOL {
        return Ok(false);
    }
    for (g, h) in gamma.iter().zip(&path) {
        let predicted = &(h * g0) * &h.inverse()?;
        if (g - &predicted).max_abs() > ISOTROPY_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}
