//! Rational functions of `(w, W)` where `W` stands for `conj(w)`.
//!
//! Coefficients of `eta` fields are stored symbolically so that the
//! `w`-derivatives entering the Hermitian-Yang-Mills tensor are exact.
//!
//! String grammar (whitespace ignored):
//!
//! ```text
//! rational := expr [ '/' expr ]
//! expr     := ['-'|'+'] term { ('+'|'-') term }
//! term     := factor { ['*'] factor }
//! factor   := atom [ '^' uint ]
//! atom     := number ['i'] | 'i' | 'w' | 'W' | '(' expr ')'
//! ```

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matrixcore::C64;

/// Polynomial `sum c_{ij} w^i W^j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), C64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn monomial(c: C64, w_pow: u32, wbar_pow: u32) -> Self {
        let mut p = Self::zero();
        p.add_term((w_pow, wbar_pow), c);
        p
    }

    /// The variable `w`.
    pub fn w() -> Self {
        Self::monomial(C64::new(1.0, 0.0), 1, 0)
    }

    /// The variable `W = conj(w)`.
    pub fn wbar() -> Self {
        Self::monomial(C64::new(1.0, 0.0), 0, 1)
    }

    fn add_term(&mut self, key: (u32, u32), c: C64) {
        if c.re == 0.0 && c.im == 0.0 {
            return;
        }
        let e = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if e.norm() == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }

    /// Largest `(deg_w, deg_W)`.
    pub fn degrees(&self) -> (u32, u32) {
        self.terms.keys().fold((0, 0), |acc, &(i, j)| (acc.0.max(i), acc.1.max(j)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &v) in &other.terms {
            out.add_term(k, v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &v) in &other.terms {
            out.add_term(k, -v);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(i1, j1), &a) in &self.terms {
            for (&(i2, j2), &b) in &other.terms {
                out.add_term((i1 + i2, j1 + j2), a * b);
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero();
        for (&k, &v) in &self.terms {
            out.add_term(k, v * s);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// `d/dw` treating `W` as independent.
    pub fn d_w(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            if i > 0 {
                out.add_term((i - 1, j), v * i as f64);
            }
        }
        out
    }

    /// `d/dW` treating `w` as independent.
    pub fn d_wbar(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            if j > 0 {
                out.add_term((i, j - 1), v * j as f64);
            }
        }
        out
    }

    /// The polynomial `q` with `q(w, conj w) = conj(p(w, conj w))`.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            out.add_term((j, i), v.conj());
        }
        out
    }

    /// Evaluates at `(w, conj w)`.
    pub fn eval(&self, w: C64) -> C64 {
        let wb = w.conj();
        let mut acc = C64::new(0.0, 0.0);
        for (&(i, j), &v) in &self.terms {
            acc += v * w.powu(i) * wb.powu(j);
        }
        acc
    }

    /// The polynomial `q(w) = p(e^{i alpha} w)`.
    pub fn rotate(&self, alpha: f64) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            out.add_term((i, j), v * C64::from_polar(1.0, alpha * (i as f64 - j as f64)));
        }
        out
    }

    /// Sum of coefficient magnitudes times `|w|^{i+j}`; a scale for pole detection.
    pub fn magnitude_bound(&self, w: C64) -> f64 {
        let r = w.norm();
        self.terms.iter().map(|(&(i, j), v)| v.norm() * libm::pow(r, (i + j) as f64)).sum()
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(i, j), v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?}{:+?}i)", v.re, v.im)?;
            if i > 0 {
                write!(f, "*w^{i}")?;
            }
            if j > 0 {
                write!(f, "*W^{j}")?;
            }
        }
        Ok(())
    }
}

/// `num / den` in `(w, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rational {
    pub num: Poly2,
    pub den: Poly2,
}

impl Rational {
    pub fn new(num: Poly2, den: Poly2) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        Ok(Self { num, den })
    }

    pub fn zero() -> Self {
        Self { num: Poly2::zero(), den: Poly2::one() }
    }

    pub fn from_poly(p: Poly2) -> Self {
        Self { num: p, den: Poly2::one() }
    }

    pub fn constant(c: C64) -> Self {
        Self::from_poly(Poly2::constant(c))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn same_den(&self, other: &Self) -> bool {
        self.den == other.den
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.same_den(other) {
            return Self { num: self.num.add(&other.num), den: self.den.clone() };
        }
        Self { num: self.num.mul(&other.den).add(&other.num.mul(&self.den)), den: self.den.mul(&other.den) }
    }

    pub fn neg(&self) -> Self {
        Self { num: self.num.scale(C64::new(-1.0, 0.0)), den: self.den.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self { num: self.num.mul(&other.num), den: self.den.mul(&other.den) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { num: self.num.scale(s), den: self.den.clone() }
    }

    fn derivative(&self, d: impl Fn(&Poly2) -> Poly2) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let dd = d(&self.den);
        if dd.is_zero() {
            return Self { num: d(&self.num), den: self.den.clone() };
        }
        Self { num: d(&self.num).mul(&self.den).sub(&self.num.mul(&dd)), den: self.den.mul(&self.den) }
    }

    pub fn d_w(&self) -> Self {
        self.derivative(Poly2::d_w)
    }

    pub fn d_wbar(&self) -> Self {
        self.derivative(Poly2::d_wbar)
    }

    pub fn conj(&self) -> Self {
        Self { num: self.num.conj(), den: self.den.conj() }
    }

    /// `r(e^{i alpha} w)`.
    pub fn rotate(&self, alpha: f64) -> Self {
        Self { num: self.num.rotate(alpha), den: self.den.rotate(alpha) }
    }

    /// True when the function depends on `W` only.
    pub fn is_antiholomorphic(&self) -> bool {
        self.num.terms().all(|((i, _), _)| i == 0) && self.den.terms().all(|((i, _), _)| i == 0)
    }

    pub fn eval(&self, w: C64) -> Result<C64> {
        let d = self.den.eval(w);
        let scale = self.den.magnitude_bound(w).max(f64::MIN_POSITIVE);
        if d.norm() <= 1e-13 * scale {
            return Err(Error::Pole);
        }
        Ok(self.num.eval(w) / d)
    }

    /// Total degree of decay at infinity: `deg(den) - deg(num)` in `|w|`.
    pub fn decay_order(&self) -> i64 {
        let tot = |p: &Poly2| p.terms().map(|((i, j), _)| (i + j) as i64).max().unwrap_or(i64::MIN / 4);
        tot(&self.den) - tot(&self.num)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

impl core::str::FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s)
    }
}

/// Parses a rational-function string.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let mut p = Parser::new(s);
    let num = p.expr()?;
    let den = if p.eat('/') { p.expr()? } else { Poly2::one() };
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Rational::new(num, den)
}

/// Parses a polynomial string (no `/`).
pub fn parse_poly(s: &str) -> Result<Poly2> {
    let mut p = Parser::new(s);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Self { src: s.as_bytes(), pos: 0 }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: char) -> bool {
        if self.peek() == Some(ch as u8) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Poly2> {
        let mut sign = 1.0;
        if self.eat('-') {
            sign = -1.0;
        } else {
            self.eat('+');
        }
        let mut acc = self.term()?.scale(C64::new(sign, 0.0));
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn starts_atom(&mut self) -> bool {
        matches!(self.peek(), Some(b'0'..=b'9' | b'.' | b'i' | b'w' | b'W' | b'('))
    }

    fn term(&mut self) -> Result<Poly2> {
        let mut acc = self.factor()?;
        loop {
            // juxtaposition multiplies like an explicit `*`
            if self.eat('*') || self.starts_atom() {
                acc = acc.mul(&self.factor()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Poly2> {
        let a = self.atom()?;
        if self.eat('^') {
            let e = self.uint()?;
            return Ok(a.pow(e));
        }
        Ok(a)
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected exponent"));
        }
        core::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&e: &u32| e <= 64)
            .ok_or_else(|| self.err("exponent out of range"))
    }

    fn atom(&mut self) -> Result<Poly2> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(b'w') => {
                self.pos += 1;
                Ok(Poly2::w())
            }
            Some(b'W') => {
                self.pos += 1;
                Ok(Poly2::wbar())
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(Poly2::constant(C64::new(0.0, 1.0)))
            }
            Some(b'0'..=b'9' | b'.') => {
                let x = self.number()?;
                // an immediately following `i` makes the literal imaginary
                if self.src.get(self.pos) == Some(&b'i') {
                    self.pos += 1;
                    Ok(Poly2::constant(C64::new(0.0, x)))
                } else {
                    Ok(Poly2::constant(C64::new(x, 0.0)))
                }
            }
            _ => Err(self.err("expected a number, 'i', 'w', 'W' or '('")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text: String = core::str::from_utf8(&s[start..self.pos]).unwrap_or("").into();
        text.parse::<f64>().map_err(|_| Error::Parse { pos: start, msg: "bad number".into() })
    }
}

/// Collects `[(w_pow, W_pow, re, im)]`, a flat form handy for serialisation.
pub fn poly_terms(p: &Poly2) -> Vec<(u32, u32, f64, f64)> {
    p.terms().map(|((i, j), v)| (i, j, v.re, v.im)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::c;

    #[test]
    fn parses_and_evaluates() {
        let r = parse_rational("1 + 2i*w*W^2 - (1-i)w").unwrap();
        let w = c(0.3, -0.7);
        let expect = c(1.0, 0.0) + c(0.0, 2.0) * w * w.conj() * w.conj() - c(1.0, -1.0) * w;
        assert!((r.eval(w).unwrap() - expect).norm() < 1e-14);

        let q = parse_rational("W / (1 + w W)").unwrap();
        let expect = w.conj() / (1.0 + w.norm_sqr());
        assert!((q.eval(w).unwrap() - expect).norm() < 1e-14);

        let e = parse_rational("2.5e-1W^2").unwrap();
        assert!((e.eval(w).unwrap() - 0.25 * w.conj() * w.conj()).norm() < 1e-14);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_rational("1 + "), Err(Error::Parse { .. })));
        assert!(matches!(parse_rational("(w"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rational("z"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rational("1/0"), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let r = parse_rational("(W + 2w^2 W) / (1 + w W + 0.5 W^2)").unwrap();
        let w = c(0.4, 0.9);
        let h = 1e-5;
        // d/dw = (d/dx - i d/dy)/2, d/dW = (d/dx + i d/dy)/2
        let fx = (r.eval(w + c(h, 0.0)).unwrap() - r.eval(w - c(h, 0.0)).unwrap()) / (2.0 * h);
        let fy = (r.eval(w + c(0.0, h)).unwrap() - r.eval(w - c(0.0, h)).unwrap()) / (2.0 * h);
        let dw = (fx - c(0.0, 1.0) * fy) * 0.5;
        let dwb = (fx + c(0.0, 1.0) * fy) * 0.5;
        assert!((r.d_w().eval(w).unwrap() - dw).norm() < 1e-8);
        assert!((r.d_wbar().eval(w).unwrap() - dwb).norm() < 1e-8);
    }

    #[test]
    fn conj_is_pointwise_conjugate() {
        let r = parse_rational("(1+i) W^2 / (2 + w)").unwrap();
        let w = c(-0.2, 0.6);
        assert!((r.conj().eval(w).unwrap() - r.eval(w).unwrap().conj()).norm() < 1e-14);
        assert!(!r.is_antiholomorphic());
        assert!(parse_rational("W^3").unwrap().is_antiholomorphic());
    }

    #[test]
    fn rotation_substitutes_argument() {
        let r = parse_rational("(w + 2W^2) / (3 + w W)").unwrap();
        let w = c(0.5, 0.25);
        let a = 0.8;
        let rotated = r.eval(w * C64::from_polar(1.0, a)).unwrap();
        assert!((r.rotate(a).eval(w).unwrap() - rotated).norm() < 1e-14);
    }

    #[test]
    fn pole_detected() {
        let r = parse_rational("1 / (w - 1)").unwrap();
        assert_eq!(r.eval(c(1.0, 0.0)), Err(Error::Pole));
    }

    #[test]
    fn decay_order_counts_total_degree() {
        assert_eq!(parse_rational("W / (1 + w W)").unwrap().decay_order(), 1);
        assert_eq!(parse_rational("w^2").unwrap().decay_order(), -2);
    }
}
