use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Real polynomial in the coupling coefficient eta, dense by power.
#[derive(Clone, Default, PartialEq)]
pub struct EtaPoly {
    coeffs: Vec<f64>,
}

impl fmt::Debug for EtaPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EtaPoly{:?}", self.coeffs)
    }
}

/// Which powers of eta can be nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl EtaPoly {
    pub fn zero() -> Self {
        EtaPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// `c * eta^deg`.
    pub fn monomial(c: f64, deg: usize) -> Self {
        let mut v = vec![0.0; deg + 1];
        v[deg] = c;
        Self::from_coeffs(v)
    }

    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Self {
        trim(&mut coeffs);
        EtaPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, eta: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * eta + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> EtaPoly {
        EtaPoly::from_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Multiply by eta.
    pub fn shift_up(&self) -> EtaPoly {
        if self.is_zero() {
            return EtaPoly::zero();
        }
        let mut v = Vec::with_capacity(self.coeffs.len() + 1);
        v.push(0.0);
        v.extend_from_slice(&self.coeffs);
        EtaPoly { coeffs: v }
    }

    /// Divide by eta, discarding the constant term; returns the discarded value.
    pub fn shift_down(&self) -> (EtaPoly, f64) {
        match self.coeffs.split_first() {
            None => (EtaPoly::zero(), 0.0),
            Some((c0, rest)) => (EtaPoly::from_coeffs(rest.to_vec()), *c0),
        }
    }

    /// Drop powers above `max_deg`.
    pub fn truncate(&self, max_deg: usize) -> EtaPoly {
        let n = self.coeffs.len().min(max_deg + 1);
        EtaPoly::from_coeffs(self.coeffs[..n].to_vec())
    }

    /// Zero coefficients with magnitude below `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        for c in self.coeffs.iter_mut() {
            if c.abs() < threshold {
                *c = 0.0;
            }
        }
        trim(&mut self.coeffs);
    }

    pub fn parity(&self) -> Parity {
        parity_of(&self.coeffs)
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &EtaPoly, s: f64) {
        add_scaled_raw(&mut self.coeffs, &other.coeffs, s);
        trim(&mut self.coeffs);
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

pub(crate) fn trim(v: &mut Vec<f64>) {
    while let Some(&last) = v.last() {
        if last == 0.0 {
            v.pop();
        } else {
            break;
        }
    }
}

pub(crate) fn parity_of(v: &[f64]) -> Parity {
    let even = v.iter().step_by(2).any(|&c| c != 0.0);
    let odd = v.iter().skip(1).step_by(2).any(|&c| c != 0.0);
    match (even, odd) {
        (_, false) => Parity::Even,
        (false, true) => Parity::Odd,
        (true, true) => Parity::Mixed,
    }
}

pub(crate) fn add_scaled_raw(out: &mut Vec<f64>, a: &[f64], s: f64) {
    if out.len() < a.len() {
        out.resize(a.len(), 0.0);
    }
    for (o, &x) in out.iter_mut().zip(a) {
        *o += s * x;
    }
}

fn stride(p: Parity) -> (usize, usize) {
    match p {
        Parity::Even => (0, 2),
        Parity::Odd => (1, 2),
        Parity::Mixed => (0, 1),
    }
}

/// `out = a * b` truncated to powers `<= max_deg`; `pa`, `pb` are the parities of a and b.
pub(crate) fn mul_raw(out: &mut Vec<f64>, a: &[f64], pa: Parity, b: &[f64], pb: Parity, max_deg: usize) {
    out.clear();
    if a.is_empty() || b.is_empty() {
        return;
    }
    let len = (a.len() + b.len() - 1).min(max_deg + 1);
    out.resize(len, 0.0);
    let (sa, da) = stride(pa);
    let (sb, db) = stride(pb);
    let mut i = sa;
    while i < a.len() && i < len {
        let ai = a[i];
        if ai != 0.0 {
            let mut j = sb;
            while j < b.len() && i + j < len {
                out[i + j] += ai * b[j];
                j += db;
            }
        }
        i += da;
    }
}

impl Add for &EtaPoly {
    type Output = EtaPoly;
    fn add(self, rhs: &EtaPoly) -> EtaPoly {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &EtaPoly {
    type Output = EtaPoly;
    fn sub(self, rhs: &EtaPoly) -> EtaPoly {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul for &EtaPoly {
    type Output = EtaPoly;
    fn mul(self, rhs: &EtaPoly) -> EtaPoly {
        let mut v = Vec::new();
        mul_raw(&mut v, &self.coeffs, self.parity(), &rhs.coeffs, rhs.parity(), usize::MAX - 1);
        EtaPoly::from_coeffs(v)
    }
}

impl Neg for &EtaPoly {
    type Output = EtaPoly;
    fn neg(self) -> EtaPoly {
        self.scale(-1.0)
    }
}

impl AddAssign<&EtaPoly> for EtaPoly {
    fn add_assign(&mut self, rhs: &EtaPoly) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&EtaPoly> for EtaPoly {
    fn sub_assign(&mut self, rhs: &EtaPoly) {
        self.add_scaled(rhs, -1.0);
    }
}
