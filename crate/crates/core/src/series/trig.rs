use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use super::eta::{add_scaled_raw, mul_raw, parity_of, trim, EtaPoly, Parity};
use super::index::{AmpIndex, MultiIndex};

/// Cosine and sine coefficients of one harmonic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CosSin {
    pub cos: EtaPoly,
    pub sin: EtaPoly,
}

impl CosSin {
    pub fn new(cos: EtaPoly, sin: EtaPoly) -> Self {
        CosSin { cos, sin }
    }

    pub fn cos_only(cos: EtaPoly) -> Self {
        CosSin { cos, sin: EtaPoly::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.cos.is_zero() && self.sin.is_zero()
    }

    pub fn max_abs(&self) -> f64 {
        self.cos.max_abs().max(self.sin.max_abs())
    }
}

pub type Term = (MultiIndex, CosSin);

/// Bring (p, q) to canonical form using cos(-u) = cos(u), sin(-u) = -sin(u).
pub fn canonicalize(index: MultiIndex, cos: EtaPoly, sin: EtaPoly) -> (MultiIndex, EtaPoly, EtaPoly) {
    let mut idx = index;
    let mut sin = sin;
    if MultiIndex::needs_flip(idx.p, idx.q) {
        idx.p = -idx.p;
        idx.q = -idx.q;
        sin = -&sin;
    }
    if idx.p == 0 && idx.q == 0 {
        sin = EtaPoly::zero();
    }
    (idx, cos, sin)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Angle {
    Theta1,
    Theta2,
    Theta3,
}

/// Sparse series sum over (i,j,k,m,p,q) of
/// [C cos(p th1 + q th2) + S sin(p th1 + q th2)] exp((k-m) th3) a1^i a2^j a3^k a4^m.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigExpSeries {
    terms: BTreeMap<MultiIndex, CosSin>,
}

impl TrigExpSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects terms, merging duplicates after canonicalization.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut acc = Accumulator::new(usize::MAX - 1);
        for (idx, cs) in terms {
            acc.add_raw(idx, cs.cos.coeffs(), cs.sin.coeffs(), 1.0);
        }
        Self::from_sorted(acc.finish())
    }

    /// Terms must be canonical, sorted, unique and nonzero.
    pub(crate) fn from_sorted(terms: Vec<Term>) -> Self {
        TrigExpSeries { terms: terms.into_iter().collect() }
    }

    pub fn insert(&mut self, index: MultiIndex, cos: EtaPoly, sin: EtaPoly) {
        let (idx, cos, sin) = canonicalize(index, cos, sin);
        let entry = self.terms.entry(idx).or_default();
        entry.cos += &cos;
        entry.sin += &sin;
        if entry.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn get(&self, index: &MultiIndex) -> Option<&CosSin> {
        self.terms.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CosSin)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(|k| k.order()).max().unwrap_or(0)
    }

    pub fn truncate(&self, max_order: usize) -> TrigExpSeries {
        TrigExpSeries {
            terms: self.terms.iter().filter(|(k, _)| k.order() <= max_order).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }

    /// Terms of exactly the given amplitude order.
    pub fn slice(&self, order: usize) -> TrigExpSeries {
        TrigExpSeries {
            terms: self.terms.iter().filter(|(k, _)| k.order() == order).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }

    /// Terms grouped by amplitude order, index `n` holding order `n`.
    pub fn by_order(&self, max_order: usize) -> Vec<Vec<Term>> {
        let mut out = vec![Vec::new(); max_order + 1];
        for (k, v) in &self.terms {
            if k.order() <= max_order {
                out[k.order()].push((*k, v.clone()));
            }
        }
        out
    }

    pub fn add(&self, other: &TrigExpSeries) -> TrigExpSeries {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &TrigExpSeries) -> TrigExpSeries {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &TrigExpSeries, s: f64) -> TrigExpSeries {
        let mut acc = Accumulator::new(usize::MAX - 1);
        for (k, v) in &self.terms {
            acc.add_raw(*k, v.cos.coeffs(), v.sin.coeffs(), 1.0);
        }
        for (k, v) in &other.terms {
            acc.add_raw(*k, v.cos.coeffs(), v.sin.coeffs(), s);
        }
        Self::from_sorted(acc.finish())
    }

    pub fn scale(&self, s: f64) -> TrigExpSeries {
        TrigExpSeries::from_terms(
            self.terms.iter().map(|(k, v)| (*k, CosSin::new(v.cos.scale(s), v.sin.scale(s)))),
        )
    }

    /// Numeric value at amplitudes `alpha`, coupling `eta` and angles `theta`.
    pub fn eval_at(&self, alpha: &[f64; 4], eta: f64, theta: &[f64; 3]) -> f64 {
        let mut sum = 0.0;
        for (k, v) in &self.terms {
            let u = k.p as f64 * theta[0] + k.q as f64 * theta[1];
            let amp = k.amp().monomial(alpha) * (k.e() as f64 * theta[2]).exp();
            sum += amp * (v.cos.eval(eta) * u.cos() + v.sin.eval(eta) * u.sin());
        }
        sum
    }

    pub fn is_finite(&self) -> bool {
        self.terms.values().all(|v| v.cos.is_finite() && v.sin.is_finite())
    }
}

/// Product truncated at amplitude order `max_order`.
pub fn multiply(a: &TrigExpSeries, b: &TrigExpSeries, max_order: usize) -> TrigExpSeries {
    let sa = a.by_order(max_order);
    let sb = b.by_order(max_order);
    let pa: Vec<Vec<Prepared>> = sa.iter().map(|s| prepare(s)).collect();
    let pb: Vec<Vec<Prepared>> = sb.iter().map(|s| prepare(s)).collect();
    let mut acc = Accumulator::new(usize::MAX - 1);
    for (na, ta) in pa.iter().enumerate() {
        for tb in pb.iter().take(max_order - na + 1) {
            acc.add_convolution(ta, tb, 1.0);
        }
    }
    TrigExpSeries::from_sorted(acc.finish())
}

pub fn differentiate(series: &TrigExpSeries, which: Angle) -> TrigExpSeries {
    let mut out = Vec::with_capacity(series.len());
    for (k, v) in series.iter() {
        let cs = match which {
            Angle::Theta1 | Angle::Theta2 => {
                let f = if which == Angle::Theta1 { k.p } else { k.q } as f64;
                if f == 0.0 {
                    continue;
                }
                CosSin::new(v.sin.scale(f), v.cos.scale(-f))
            }
            Angle::Theta3 => {
                let e = k.e() as f64;
                if e == 0.0 {
                    continue;
                }
                CosSin::new(v.cos.scale(e), v.sin.scale(e))
            }
        };
        if !cs.is_zero() {
            out.push((*k, cs));
        }
    }
    TrigExpSeries::from_sorted(out)
}

/// A term borrowed for repeated multiplication, with cached parities.
#[derive(Clone, Copy)]
pub(crate) struct Prepared<'a> {
    pub idx: MultiIndex,
    pub c: &'a [f64],
    pub s: &'a [f64],
    pub pc: Parity,
    pub ps: Parity,
}

pub(crate) fn prepare(terms: &[Term]) -> Vec<Prepared<'_>> {
    terms
        .iter()
        .map(|(idx, cs)| Prepared {
            idx: *idx,
            c: cs.cos.coeffs(),
            s: cs.sin.coeffs(),
            pc: parity_of(cs.cos.coeffs()),
            ps: parity_of(cs.sin.coeffs()),
        })
        .collect()
}

/// Deterministic sparse accumulator: slots are created in insertion order and
/// the result is sorted by index.
pub(crate) struct Accumulator {
    slots: FxHashMap<MultiIndex, usize>,
    terms: Vec<(MultiIndex, Vec<f64>, Vec<f64>)>,
    max_deg: usize,
    buf: [Vec<f64>; 4],
}

impl Accumulator {
    pub fn new(max_deg: usize) -> Self {
        Accumulator { slots: FxHashMap::default(), terms: Vec::new(), max_deg, buf: Default::default() }
    }

    fn slot(&mut self, idx: MultiIndex) -> usize {
        let next = self.terms.len();
        let terms = &mut self.terms;
        *self.slots.entry(idx).or_insert_with(|| {
            terms.push((idx, Vec::new(), Vec::new()));
            next
        })
    }

    fn add_cos(&mut self, slot: usize, v: &[f64], s: f64) {
        let n = v.len().min(self.max_deg + 1);
        add_scaled_raw(&mut self.terms[slot].1, &v[..n], s);
    }

    fn add_sin(&mut self, slot: usize, v: &[f64], s: f64) {
        let n = v.len().min(self.max_deg + 1);
        add_scaled_raw(&mut self.terms[slot].2, &v[..n], s);
    }

    /// Add `s * (cos, sin)` at `idx`, canonicalizing first.
    pub fn add_raw(&mut self, idx: MultiIndex, cos: &[f64], sin: &[f64], s: f64) {
        if cos.is_empty() && sin.is_empty() {
            return;
        }
        let mut idx = idx;
        let mut ss = s;
        if MultiIndex::needs_flip(idx.p, idx.q) {
            idx.p = -idx.p;
            idx.q = -idx.q;
            ss = -s;
        }
        let harmonic = idx.p != 0 || idx.q != 0;
        if !harmonic && cos.is_empty() {
            return;
        }
        let slot = self.slot(idx);
        if !cos.is_empty() {
            self.add_cos(slot, cos, s);
        }
        if harmonic && !sin.is_empty() {
            self.add_sin(slot, sin, ss);
        }
    }

    /// Add `s * a * b` expanded with product-to-sum identities.
    pub fn add_product(&mut self, a: &Prepared, b: &Prepared, s: f64) {
        let amp = a.idx.amp().add(b.idx.amp());
        let a_flat = a.idx.p == 0 && a.idx.q == 0;
        let b_flat = b.idx.p == 0 && b.idx.q == 0;
        let md = self.max_deg;
        let mut buf = std::mem::take(&mut self.buf);
        if a_flat || b_flat {
            let (f, h) = if a_flat { (a, b) } else { (b, a) };
            if f.c.is_empty() {
                self.buf = buf;
                return;
            }
            let idx = h.idx.with_amp(amp);
            mul_raw(&mut buf[0], f.c, f.pc, h.c, h.pc, md);
            mul_raw(&mut buf[1], f.c, f.pc, h.s, h.ps, md);
            trim(&mut buf[0]);
            trim(&mut buf[1]);
            self.add_raw(idx, &buf[0], &buf[1], s);
            self.buf = buf;
            return;
        }
        let half = 0.5 * s;
        mul_raw(&mut buf[0], a.c, a.pc, b.c, b.pc, md); // AA
        mul_raw(&mut buf[1], a.s, a.ps, b.s, b.ps, md); // BB
        mul_raw(&mut buf[2], a.c, a.pc, b.s, b.ps, md); // AB
        mul_raw(&mut buf[3], a.s, a.ps, b.c, b.pc, md); // BA
        // sum harmonic (never needs a flip, never zero)
        let sum = MultiIndex { p: a.idx.p + b.idx.p, q: a.idx.q + b.idx.q, ..a.idx.with_amp(amp) };
        let slot = self.slot(sum);
        self.add_cos(slot, &buf[0], half);
        self.add_cos(slot, &buf[1], -half);
        self.add_sin(slot, &buf[2], half);
        self.add_sin(slot, &buf[3], half);
        // difference harmonic
        let mut diff = MultiIndex { p: a.idx.p - b.idx.p, q: a.idx.q - b.idx.q, ..a.idx.with_amp(amp) };
        let mut sin_sign = 1.0;
        if MultiIndex::needs_flip(diff.p, diff.q) {
            diff.p = -diff.p;
            diff.q = -diff.q;
            sin_sign = -1.0;
        }
        let has_sin = diff.p != 0 || diff.q != 0;
        if !(buf[0].is_empty() && buf[1].is_empty() && (!has_sin || (buf[2].is_empty() && buf[3].is_empty()))) {
            let slot = self.slot(diff);
            self.add_cos(slot, &buf[0], half);
            self.add_cos(slot, &buf[1], half);
            if has_sin {
                self.add_sin(slot, &buf[3], half * sin_sign);
                self.add_sin(slot, &buf[2], -half * sin_sign);
            }
        }
        self.buf = buf;
    }

    /// Add `s * sum over pairs a_t * b_u`.
    pub fn add_convolution(&mut self, a: &[Prepared], b: &[Prepared], s: f64) {
        for ta in a {
            for tb in b {
                self.add_product(ta, tb, s);
            }
        }
    }

    pub fn add_prepared(&mut self, t: &Prepared, s: f64) {
        self.add_raw(t.idx, t.c, t.s, s);
    }

    /// Sorted nonzero terms.
    pub fn finish(self) -> Vec<Term> {
        let mut out: Vec<Term> = self
            .terms
            .into_iter()
            .filter_map(|(idx, c, s)| {
                let cs = CosSin::new(EtaPoly::from_coeffs(c), EtaPoly::from_coeffs(s));
                (!cs.is_zero()).then_some((idx, cs))
            })
            .collect();
        out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Amplitude-index shift helper used when multiplying by amplitude series.
pub(crate) fn shift_amp(idx: MultiIndex, b: AmpIndex) -> MultiIndex {
    idx.with_amp(idx.amp().add(b))
}
