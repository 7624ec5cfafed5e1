use std::collections::BTreeMap;

use super::eta::EtaPoly;
use super::index::AmpIndex;

/// Sparse power series in the amplitudes with eta-polynomial coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AmplitudeSeries {
    terms: BTreeMap<AmpIndex, EtaPoly>,
}

impl AmplitudeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::new();
        s.add_at(AmpIndex::ZERO, &EtaPoly::constant(c));
        s
    }

    pub fn add_at(&mut self, idx: AmpIndex, v: &EtaPoly) {
        if v.is_zero() {
            return;
        }
        let e = self.terms.entry(idx).or_default();
        *e += v;
        if e.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn set(&mut self, idx: AmpIndex, v: EtaPoly) {
        if v.is_zero() {
            self.terms.remove(&idx);
        } else {
            self.terms.insert(idx, v);
        }
    }

    pub fn get(&self, idx: &AmpIndex) -> Option<&EtaPoly> {
        self.terms.get(idx)
    }

    pub fn contains(&self, idx: &AmpIndex) -> bool {
        self.terms.contains_key(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AmpIndex, &EtaPoly)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &AmpIndex> {
        self.terms.keys()
    }

    pub fn truncate(&self, max_order: usize) -> AmplitudeSeries {
        AmplitudeSeries {
            terms: self.terms.iter().filter(|(k, _)| k.order() <= max_order).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }

    /// Terms of exactly order `n`.
    pub fn slice(&self, n: usize) -> Vec<(AmpIndex, &EtaPoly)> {
        self.terms.iter().filter(|(k, _)| k.order() == n).map(|(k, v)| (*k, v)).collect()
    }

    /// Coefficients summed at fixed amplitudes, leaving a polynomial in eta.
    pub fn at_amplitudes(&self, alpha: &[f64; 4]) -> EtaPoly {
        let mut out = EtaPoly::zero();
        for (k, v) in &self.terms {
            let w = k.monomial(alpha);
            if w != 0.0 {
                out.add_scaled(v, w);
            }
        }
        out
    }

    pub fn eval(&self, alpha: &[f64; 4], eta: f64) -> f64 {
        self.terms.iter().map(|(k, v)| k.monomial(alpha) * v.eval(eta)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.values().all(|v| v.is_finite())
    }

    pub fn multiply(&self, other: &AmplitudeSeries, max_order: usize) -> AmplitudeSeries {
        let mut out = AmplitudeSeries::new();
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                if ka.order() + kb.order() <= max_order {
                    out.add_at(ka.add(*kb), &(va * vb));
                }
            }
        }
        out
    }
}
