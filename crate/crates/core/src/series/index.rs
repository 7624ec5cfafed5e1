use std::fmt;

/// Exponents (i, j, k, m) of alpha1..alpha4 and harmonic multipliers (p, q).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub i: u8,
    pub j: u8,
    pub k: u8,
    pub m: u8,
    pub p: i16,
    pub q: i16,
}

impl MultiIndex {
    pub const fn new(i: u8, j: u8, k: u8, m: u8, p: i16, q: i16) -> Self {
        MultiIndex { i, j, k, m, p, q }
    }

    pub fn order(&self) -> usize {
        self.i as usize + self.j as usize + self.k as usize + self.m as usize
    }

    /// Exponent multiplier k - m of the hyperbolic angle.
    pub fn e(&self) -> i32 {
        self.k as i32 - self.m as i32
    }

    pub fn amp(&self) -> AmpIndex {
        AmpIndex { i: self.i, j: self.j, k: self.k, m: self.m }
    }

    pub fn is_canonical(&self) -> bool {
        self.p > 0 || (self.p == 0 && self.q >= 0)
    }

    /// True when (p, q) must be flipped to reach canonical form.
    pub(crate) fn needs_flip(p: i16, q: i16) -> bool {
        p < 0 || (p == 0 && q < 0)
    }

    pub fn with_amp(self, a: AmpIndex) -> Self {
        MultiIndex { i: a.i, j: a.j, k: a.k, m: a.m, ..self }
    }

    /// p = i and q = j modulo 2, with |p| <= i and |q| <= j.
    pub fn classical_parity(&self) -> bool {
        (self.p as i32 - self.i as i32) % 2 == 0
            && (self.q as i32 - self.j as i32) % 2 == 0
            && self.p.unsigned_abs() as u32 <= self.i as u32
            && self.q.unsigned_abs() as u32 <= self.j as u32
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{};{},{})", self.i, self.j, self.k, self.m, self.p, self.q)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Exponents of alpha1..alpha4 for the frequency and delta series.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AmpIndex {
    pub i: u8,
    pub j: u8,
    pub k: u8,
    pub m: u8,
}

impl AmpIndex {
    pub const ZERO: AmpIndex = AmpIndex { i: 0, j: 0, k: 0, m: 0 };

    pub const fn new(i: u8, j: u8, k: u8, m: u8) -> Self {
        AmpIndex { i, j, k, m }
    }

    pub fn order(&self) -> usize {
        self.i as usize + self.j as usize + self.k as usize + self.m as usize
    }

    pub fn add(self, o: AmpIndex) -> AmpIndex {
        AmpIndex { i: self.i + o.i, j: self.j + o.j, k: self.k + o.k, m: self.m + o.m }
    }

    /// alpha1^i alpha2^j alpha3^k alpha4^m.
    pub fn monomial(&self, alpha: &[f64; 4]) -> f64 {
        alpha[0].powi(self.i as i32)
            * alpha[1].powi(self.j as i32)
            * alpha[2].powi(self.k as i32)
            * alpha[3].powi(self.m as i32)
    }
}

impl fmt::Debug for AmpIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.i, self.j, self.k, self.m)
    }
}

impl fmt::Display for AmpIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
