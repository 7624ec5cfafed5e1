//! Coupling equation eta * Delta(eta; alpha) = 0.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::construct::SolutionSet;
use crate::error::{Error, Result};
use crate::series::{AmpIndex, AmplitudeSeries, EtaPoly};

/// Third-order truncation a eta^4 + b eta^2 + c of Delta.
#[derive(Clone, Debug)]
pub struct BifurcationSlice {
    /// l1..l8 stored at index 0..7.
    pub l: [f64; 8],
    /// Constant term nu0^2 - omega0^2.
    pub d0000: f64,
    pub delta: AmplitudeSeries,
    pub order: usize,
}

impl BifurcationSlice {
    pub fn abc(&self, alpha: &[f64; 4]) -> (f64, f64, f64) {
        let l = &self.l;
        let (a1, a2, p34) = (alpha[0] * alpha[0], alpha[1] * alpha[1], alpha[2] * alpha[3]);
        (
            l[0] * a1 + l[1] * p34,
            l[2] * a1 + l[3] * a2 + l[4] * p34,
            l[5] * a1 + l[6] * a2 + l[7] * p34 + self.d0000,
        )
    }

    pub fn discriminant(&self, alpha: &[f64; 4]) -> f64 {
        let (a, b, c) = self.abc(alpha);
        b * b - 4.0 * a * c
    }

    /// Magnitudes used to decide when a, b, c and D count as zero.
    fn scales(&self, alpha: &[f64; 4]) -> (f64, f64, f64) {
        let l = &self.l;
        let (a1, a2, p34) = (alpha[0] * alpha[0], alpha[1] * alpha[1], (alpha[2] * alpha[3]).abs());
        (
            l[0].abs() * a1 + l[1].abs() * p34,
            l[2].abs() * a1 + l[3].abs() * a2 + l[4].abs() * p34,
            l[5].abs() * a1 + l[6].abs() * a2 + l[7].abs() * p34 + self.d0000.abs(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RootCase {
    NoRoot,
    TrivialOnly,
    HyperboloidC0,
    ParaboloidA0,
    DiscriminantD0,
    Generic,
}

impl RootCase {
    pub fn name(self) -> &'static str {
        match self {
            RootCase::NoRoot => "no_root",
            RootCase::TrivialOnly => "trivial_only",
            RootCase::HyperboloidC0 => "hyperboloid_c0",
            RootCase::ParaboloidA0 => "paraboloid_a0",
            RootCase::DiscriminantD0 => "discriminant_D0",
            RootCase::Generic => "generic",
        }
    }
}

impl fmt::Display for RootCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct EtaSolutionReport {
    pub alpha: [f64; 4],
    /// Nonzero real roots, ascending.
    pub roots: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub case: RootCase,
    /// b^2 - 4ac of the third-order truncation.
    pub discriminant: f64,
    /// Delta(eta) at these amplitudes.
    pub delta: EtaPoly,
    /// Roots in u = eta^2 that are complex or negative, as (re, im).
    pub rejected: Vec<(f64, f64)>,
}

impl EtaSolutionReport {
    /// eta = 0 always satisfies eta * Delta = 0.
    pub fn zero_admissible(&self) -> bool {
        true
    }

    pub fn positive_roots(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots.iter().copied().filter(|r| *r > 0.0)
    }

    /// Root closest to `target`.
    pub fn nearest(&self, target: f64) -> Option<f64> {
        self.roots.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
    }
}

fn require_delta(sol: &SolutionSet) -> Result<()> {
    if !sol.coupling {
        return Err(Error::MissingDelta("solution was built without the eta coupling"));
    }
    if sol.order < 3 {
        return Err(Error::Incomplete { have: sol.order, need: 3 });
    }
    Ok(())
}

pub fn third_order_constants(sol: &SolutionSet) -> Result<BifurcationSlice> {
    require_delta(sol)?;
    let get = |i, j, k, m, name| {
        sol.delta.get(&AmpIndex::new(i, j, k, m)).cloned().ok_or(Error::MissingDelta(name))
    };
    let d0 = get(0, 0, 0, 0, "d0000")?;
    let d20 = get(2, 0, 0, 0, "d2000")?;
    let d02 = get(0, 2, 0, 0, "d0200")?;
    let d11 = get(0, 0, 1, 1, "d0011")?;
    let l = [
        d20.coeff(4),
        d11.coeff(4),
        d20.coeff(2),
        d02.coeff(2),
        d11.coeff(2),
        d20.coeff(0),
        d02.coeff(0),
        d11.coeff(0),
    ];
    Ok(BifurcationSlice {
        l,
        d0000: d0.coeff(0),
        delta: sol.delta.truncate(2),
        order: sol.order,
    })
}

pub fn classify_critical(slice: &BifurcationSlice, alpha: &[f64; 4]) -> RootCase {
    if alpha.iter().all(|a| *a == 0.0) {
        return RootCase::NoRoot;
    }
    let (a, b, c) = slice.abc(alpha);
    let (sa, sb, sc) = slice.scales(alpha);
    let tol = 1e-12;
    if c.abs() <= tol * sc {
        return RootCase::HyperboloidC0;
    }
    if a.abs() <= tol * sa.max(f64::MIN_POSITIVE) {
        return RootCase::ParaboloidA0;
    }
    let d = b * b - 4.0 * a * c;
    if d.abs() <= tol * (sb * sb + 4.0 * sa * sc) {
        return RootCase::DiscriminantD0;
    }
    RootCase::Generic
}

/// Delta(eta) at fixed amplitudes.
pub fn delta_polynomial(sol: &SolutionSet, alpha: &[f64; 4]) -> EtaPoly {
    sol.delta.at_amplitudes(alpha)
}

pub fn solve_eta(sol: &SolutionSet, alpha: &[f64; 4]) -> Result<EtaSolutionReport> {
    require_delta(sol)?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidParameter("amplitudes must be finite".into()));
    }
    let slice = third_order_constants(sol)?;
    let delta = delta_polynomial(sol, alpha);
    let (roots, multiplicities, rejected) = even_real_roots(&delta);
    let mut case = classify_critical(&slice, alpha);
    if case == RootCase::Generic && roots.is_empty() {
        case = RootCase::TrivialOnly;
    }
    Ok(EtaSolutionReport { alpha: *alpha, roots, multiplicities, case, discriminant: slice.discriminant(alpha), delta, rejected })
}

/// Sum of |c_k| |eta|^k, the natural scale of Delta(eta).
pub fn evaluation_scale(p: &EtaPoly, eta: f64) -> f64 {
    p.coeffs().iter().rev().fold(0.0, |acc, c| acc * eta.abs() + c.abs())
}

/// Nonzero real roots of an even polynomial, found in u = eta^2.
fn even_real_roots(p: &EtaPoly) -> (Vec<f64>, Vec<usize>, Vec<(f64, f64)>) {
    let u: Vec<f64> = p.coeffs().iter().step_by(2).copied().collect();
    let upoly = EtaPoly::from_coeffs(u);
    let mut rejected = Vec::new();
    let mut pos: Vec<(f64, usize)> = Vec::new();
    for (re, im) in poly_roots(&upoly) {
        let mag = re.hypot(im);
        if im.abs() > 1e-7 * mag.max(1e-300) {
            rejected.push((re, im));
            continue;
        }
        let r = newton_polish(&upoly, re);
        if r < -1e-14 {
            rejected.push((r, 0.0));
            continue;
        }
        let r = r.max(0.0);
        if r == 0.0 {
            continue;
        }
        match pos.iter_mut().find(|(v, _)| (v - r).abs() <= 1e-6 * r) {
            Some(e) => e.1 += 1,
            None => pos.push((r, 1)),
        }
    }
    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut roots = Vec::new();
    let mut mult = Vec::new();
    for &(u, m) in pos.iter().rev() {
        roots.push(-u.sqrt());
        mult.push(m);
    }
    for &(u, m) in &pos {
        roots.push(u.sqrt());
        mult.push(m);
    }
    (roots, mult, rejected)
}

fn newton_polish(p: &EtaPoly, mut x: f64) -> f64 {
    let c = p.coeffs();
    for _ in 0..50 {
        let (mut v, mut d) = (0.0, 0.0);
        for &ck in c.iter().rev() {
            d = d * x + v;
            v = v * x + ck;
        }
        if d == 0.0 {
            break;
        }
        let step = v / d;
        let next = x - step;
        if !next.is_finite() {
            break;
        }
        let done = step.abs() <= 4.0 * f64::EPSILON * next.abs();
        x = next;
        if done {
            break;
        }
    }
    x
}

/// All complex roots via eigenvalues of the companion matrix.
pub fn poly_roots(p: &EtaPoly) -> Vec<(f64, f64)> {
    let c = p.coeffs();
    // leading zeros are already trimmed; strip roots at zero first
    let lead_zero = c.iter().take_while(|v| **v == 0.0).count();
    let c = &c[lead_zero.min(c.len())..];
    let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0); lead_zero];
    if c.len() < 2 {
        return out;
    }
    let n = c.len() - 1;
    if n == 1 {
        out.push((-c[0] / c[1], 0.0));
        return out;
    }
    if n == 2 {
        let (a, b, cc) = (c[2], c[1], c[0]);
        let d = b * b - 4.0 * a * cc;
        if d >= 0.0 {
            let sign = if b >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (b + sign * d.sqrt());
            out.push((q / a, 0.0));
            out.push(if q != 0.0 { (cc / q, 0.0) } else { (0.0, 0.0) });
        } else {
            let re = -b / (2.0 * a);
            let im = (-d).sqrt() / (2.0 * a.abs());
            out.push((re, im));
            out.push((re, -im));
        }
        return out;
    }
    // scale the variable so the coefficients are balanced: x = s y
    let s = {
        let lead = c[n].abs();
        let mut best: f64 = 0.0;
        for (k, v) in c.iter().enumerate().take(n) {
            if *v != 0.0 {
                best = best.max((v.abs() / lead).powf(1.0 / (n - k) as f64));
            }
        }
        if best > 0.0 && best.is_finite() { best } else { 1.0 }
    };
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        m[(0, k)] = -c[n - 1 - k] / (c[n] * s.powi(k as i32 + 1));
    }
    for k in 1..n {
        m[(k, k - 1)] = 1.0;
    }
    for z in m.complex_eigenvalues().iter() {
        out.push((z.re * s, z.im * s));
    }
    out
}

/// Axes of a root-count map: alpha1, alpha2 and the product alpha3 * alpha4.
#[derive(Clone, Debug)]
pub struct CountGrid {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha34: Vec<f64>,
    /// Only roots with |eta| <= eta_max are counted.
    pub eta_max: f64,
}

impl CountGrid {
    /// n points per axis over the ranges alpha1 in [0, 0.5], alpha2 in
    /// [0, 1], alpha3 alpha4 in [-0.5, 0.5].
    pub fn standard(n: usize) -> Self {
        CountGrid {
            alpha1: linspace(0.0, 0.5, n),
            alpha2: linspace(0.0, 1.0, n),
            alpha34: linspace(-0.5, 0.5, n),
            eta_max: 100.0,
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Amplitudes realizing a given product alpha3 * alpha4.
pub fn split_product(p: f64) -> (f64, f64) {
    let r = p.abs().sqrt();
    (r, if p < 0.0 { -r } else { r })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountCell {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha34: f64,
    pub count: usize,
    pub case: RootCase,
}

/// Number of nonzero real eta roots per grid cell, row-major in
/// (alpha1, alpha2, alpha34).
pub fn solution_count_map(sol: &SolutionSet, grid: &CountGrid) -> Result<Vec<CountCell>> {
    require_delta(sol)?;
    let slice = third_order_constants(sol)?;
    let mut cells = Vec::with_capacity(grid.alpha1.len() * grid.alpha2.len() * grid.alpha34.len());
    for &a1 in &grid.alpha1 {
        for &a2 in &grid.alpha2 {
            for &p in &grid.alpha34 {
                cells.push((a1, a2, p));
            }
        }
    }
    let out = cells
        .par_iter()
        .map(|&(a1, a2, p)| {
            let (a3, a4) = split_product(p);
            let alpha = [a1, a2, a3, a4];
            let delta = delta_polynomial(sol, &alpha);
            let (roots, _, _) = even_real_roots(&delta);
            let count = roots.iter().filter(|r| r.abs() <= grid.eta_max).count();
            let mut case = classify_critical(&slice, &alpha);
            if case == RootCase::Generic && count == 0 {
                case = RootCase::TrivialOnly;
            }
            CountCell { alpha1: a1, alpha2: a2, alpha34: p, count, case }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::build;
    use crate::model::{make_params, LibrationPoint};
    use crate::SUN_EARTH_MU;

    fn order3() -> SolutionSet {
        build(&make_params(SUN_EARTH_MU, LibrationPoint::L1, 4).unwrap(), 3).unwrap()
    }

    #[test]
    fn constants_follow_delta_entries() {
        let sol = order3();
        let s = third_order_constants(&sol).unwrap();
        assert!((s.d0000 - (sol.lin.nu0.powi(2) - sol.lin.omega0.powi(2))).abs() < 1e-15);
        assert!(s.l[5] > 0.0 && s.l[6] < 0.0 && s.l[7] < 0.0);
        // no alpha2^2 eta^4 term
        assert_eq!(sol.delta.get(&AmpIndex::new(0, 2, 0, 0)).unwrap().coeff(4), 0.0);
        let alpha = [0.1, 0.05, 0.02, -0.03];
        let (a, b, c) = s.abc(&alpha);
        let p = delta_polynomial(&sol, &alpha);
        for eta in [0.0, 0.7, 3.0] {
            let e2 = eta * eta;
            assert!((a * e2 * e2 + b * e2 + c - p.eval(eta)).abs() < 1e-14 * (1.0 + a.abs() * e2 * e2));
        }
    }

    #[test]
    fn roots_back_substitute_and_pair() {
        let sol = order3();
        for alpha in [[0.16, 0.0, 0.0, 0.0], [0.16, 0.02, 0.0, 0.0], [0.01, 0.0, 0.0, 0.0], [0.3, 0.1, 0.01, 0.02]] {
            let r = solve_eta(&sol, &alpha).unwrap();
            assert!(!r.roots.is_empty());
            assert_eq!(r.roots.len() % 2, 0);
            for (x, y) in r.roots.iter().zip(r.roots.iter().rev()) {
                assert_eq!(*x, -*y);
            }
            for &eta in &r.roots {
                assert!(r.delta.eval(eta).abs() < 1e-10 * evaluation_scale(&r.delta, eta), "{eta}");
            }
        }
    }

    #[test]
    fn zero_amplitudes_have_only_the_trivial_root() {
        let sol = order3();
        let r = solve_eta(&sol, &[0.0; 4]).unwrap();
        assert!(r.roots.is_empty());
        assert_eq!(r.case, RootCase::NoRoot);
        assert!(r.zero_admissible());
        assert_eq!(r.delta.coeffs(), &[sol.lin.d0000()]);
    }

    #[test]
    fn critical_surfaces() {
        let s = third_order_constants(&order3()).unwrap();
        // classical halo bifurcation on the planar family
        let a1 = (-s.d0000 / s.l[5]).sqrt();
        assert_eq!(classify_critical(&s, &[a1, 0.0, 0.0, 0.0]), RootCase::HyperboloidC0);
        // a = 0 with alpha3 alpha4 != 0
        let p34 = -s.l[0] * 0.04 / s.l[1];
        let (a3, a4) = split_product(p34);
        assert_eq!(classify_critical(&s, &[0.2, 0.3, a3, a4]), RootCase::ParaboloidA0);
        assert_eq!(classify_critical(&s, &[0.2, 0.3, 0.01, 0.01]), RootCase::Generic);
    }

    #[test]
    fn companion_roots_of_known_polynomial() {
        // (x - 1)(x - 2)(x + 3)(x - 1e3)
        let want = {
            let mut c = vec![1.0];
            for r in [1.0, 2.0, -3.0, 1e3] {
                let mut n = vec![0.0; c.len() + 1];
                for (k, v) in c.iter().enumerate() {
                    n[k + 1] += v;
                    n[k] -= r * v;
                }
                c = n;
            }
            EtaPoly::from_coeffs(c)
        };
        let mut roots: Vec<f64> = poly_roots(&want).into_iter().map(|(re, _)| newton_polish(&want, re)).collect();
        roots.sort_by(f64::total_cmp);
        for (r, w) in roots.iter().zip([-3.0, 1.0, 2.0, 1e3]) {
            assert!((r - w).abs() < 1e-9 * w.abs());
        }
    }
}
