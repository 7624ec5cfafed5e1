//! Order-by-order Lindstedt-Poincare construction.
//!
//! At order n the unknowns are the order-n coefficients of x, y, z and the
//! order n-1 corrections of omega, nu, lambda and delta. Everything else is
//! collected into the right-hand side of
//!
//! ```text
//! x'' - 2y' - (1 + 2c2) x = dV/dx
//! y'' + 2x' + (c2 - 1) y  = dV/dy
//! z'' + c2 z              = dV/dz + eta * delta * x
//! ```
//!
//! where ' is the derivative along the flow, written with the operator
//! D = omega d/dth1 + nu d/dth2 + lambda d/dth3 acting on the series.
//!
//! The nonlinear part of the potential is generated with power recurrences
//! for |r - a|^-3 about each primary instead of composing Legendre
//! polynomials; `series::potential_gradient` gives the same slices and is used
//! as a cross-check in the tests.

mod linear;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{frequencies, LinearFrequencies, SystemParams};
use crate::series::{
    prepare, shift_amp, Accumulator, AmpIndex, AmplitudeSeries, CosSin, EtaPoly, MultiIndex, Term,
    TrigExpSeries,
};

use linear::{LinearOperator, SolveTolerance};

/// Construction settings.
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Abort once x, y and z together hold more terms than this.
    pub max_terms: usize,
    /// Drop right-hand-side terms whose (p, q) parity differs from (i, j).
    pub prune_parity: bool,
    /// Carry the eta coupling; `false` builds the classical Lissajous series.
    pub coupling: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_terms: 20_000_000, prune_parity: false, coupling: true }
    }
}

/// Series solution through a given amplitude order.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    pub params: SystemParams,
    pub lin: LinearFrequencies,
    pub x: TrigExpSeries,
    pub y: TrigExpSeries,
    pub z: TrigExpSeries,
    pub omega: AmplitudeSeries,
    pub nu: AmplitudeSeries,
    pub lambda: AmplitudeSeries,
    pub delta: AmplitudeSeries,
    pub order: usize,
    pub coupling: bool,
}

impl SolutionSet {
    pub fn term_count(&self) -> usize {
        self.x.len() + self.y.len() + self.z.len()
    }

    /// Same solution without the terms above `order`.
    pub fn truncate(&self, order: usize) -> SolutionSet {
        let order = order.min(self.order);
        SolutionSet {
            params: self.params.clone(),
            lin: self.lin,
            x: self.x.truncate(order),
            y: self.y.truncate(order),
            z: self.z.truncate(order),
            omega: self.omega.truncate(order.saturating_sub(1)),
            nu: self.nu.truncate(order.saturating_sub(1)),
            lambda: self.lambda.truncate(order.saturating_sub(1)),
            delta: self.delta.truncate(order.saturating_sub(1)),
            order,
            coupling: self.coupling,
        }
    }
}

/// Known part of the order-n equations, already moved to the right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderRHS {
    pub order: usize,
    pub x: TrigExpSeries,
    pub y: TrigExpSeries,
    pub z: TrigExpSeries,
}

pub fn initialize_linear(params: &SystemParams) -> Result<SolutionSet> {
    initialize_linear_with(params, BuildOptions::default())
}

pub fn initialize_linear_with(params: &SystemParams, opts: BuildOptions) -> Result<SolutionSet> {
    Ok(Builder::new(params, opts)?.to_solution())
}

pub fn assemble_rhs(solution: &SolutionSet, n: usize) -> Result<OrderRHS> {
    if n < 2 || solution.order + 1 < n {
        return Err(Error::Incomplete { have: solution.order, need: n.saturating_sub(1).max(1) });
    }
    let mut b = Builder::from_solution(&solution.truncate(n - 1), BuildOptions { coupling: solution.coupling, ..Default::default() })?;
    b.assemble(n)
}

pub fn solve_order(solution: &SolutionSet, n: usize, rhs: &OrderRHS) -> Result<SolutionSet> {
    if n < 2 || solution.order + 1 != n || rhs.order != n {
        return Err(Error::Incomplete { have: solution.order, need: n.saturating_sub(1) });
    }
    let mut b = Builder::from_solution(solution, BuildOptions { coupling: solution.coupling, ..Default::default() })?;
    b.advance_caches(n);
    b.solve(n, rhs)?;
    Ok(b.to_solution())
}

pub fn build(params: &SystemParams, order: usize) -> Result<SolutionSet> {
    build_with(params, order, BuildOptions::default(), |_, _| {})
}

/// Build through `order`, calling `progress(n, terms)` after each order.
pub fn build_with<F: FnMut(usize, usize)>(
    params: &SystemParams,
    order: usize,
    opts: BuildOptions,
    mut progress: F,
) -> Result<SolutionSet> {
    if order < 1 {
        return Err(Error::InvalidParameter("series order must be at least 1".into()));
    }
    if params.n_max < order + 1 {
        return Err(Error::InvalidParameter(format!(
            "c_n table holds n <= {}, order {order} needs n <= {}",
            params.n_max,
            order + 1
        )));
    }
    let mut b = Builder::new(params, opts)?;
    progress(1, b.term_count());
    for n in 2..=order {
        let rhs = b.assemble(n)?;
        b.solve(n, &rhs)?;
        progress(n, b.term_count());
    }
    Ok(b.to_solution())
}

/// Which frequency a correction belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Freq {
    Omega,
    Nu,
    Lambda,
}

struct Primary {
    a: f64,
    w: f64,
    /// |a|^-5 = g0 / u0
    g0_over_u0: f64,
    u: Vec<Vec<Term>>,
    g: Vec<Vec<Term>>,
}

struct Builder {
    params: SystemParams,
    lin: LinearFrequencies,
    opts: BuildOptions,
    op: LinearOperator,
    x: Vec<Vec<Term>>,
    y: Vec<Vec<Term>>,
    z: Vec<Vec<Term>>,
    rho2: Vec<Vec<Term>>,
    big_g: Vec<Vec<Term>>,
    prim: [Primary; 2],
    omega: AmplitudeSeries,
    nu: AmplitudeSeries,
    lambda: AmplitudeSeries,
    delta: AmplitudeSeries,
    order: usize,
}

const UNIT_OMEGA: MultiIndex = MultiIndex::new(1, 0, 0, 0, 1, 0);
const UNIT_NU: MultiIndex = MultiIndex::new(0, 1, 0, 0, 0, 1);
const UNIT_PLUS: MultiIndex = MultiIndex::new(0, 0, 1, 0, 0, 0);
const UNIT_MINUS: MultiIndex = MultiIndex::new(0, 0, 0, 1, 0, 0);

fn constant_slice(c: f64) -> Vec<Term> {
    vec![(MultiIndex::default(), CosSin::cos_only(EtaPoly::constant(c)))]
}

fn slice_get<'a>(slice: &'a [Term], idx: &MultiIndex) -> Option<&'a CosSin> {
    slice.binary_search_by(|t| t.0.cmp(idx)).ok().map(|i| &slice[i].1)
}

fn sorted(mut v: Vec<Term>) -> Vec<Term> {
    v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    v
}

fn mul_pair(f: &EtaPoly, cs: &CosSin) -> (EtaPoly, EtaPoly) {
    (f * &cs.cos, f * &cs.sin)
}

impl Builder {
    fn new(params: &SystemParams, opts: BuildOptions) -> Result<Self> {
        let lin = frequencies(params)?;
        let prim = params.local_primaries().map(|p| Primary {
            a: p.a,
            w: p.w,
            g0_over_u0: p.a.abs().powi(-5),
            u: vec![constant_slice(p.a * p.a)],
            g: vec![constant_slice(p.a.abs().powi(-3))],
        });
        let g0: f64 = prim.iter().map(|p| p.w * p.a.abs().powi(-3)).sum();
        let mut b = Builder {
            params: params.clone(),
            lin,
            opts,
            op: LinearOperator::new(params.c2(), &lin),
            x: vec![Vec::new()],
            y: vec![Vec::new()],
            z: vec![Vec::new()],
            rho2: vec![Vec::new()],
            big_g: vec![constant_slice(g0)],
            prim,
            omega: AmplitudeSeries::constant(lin.omega0),
            nu: AmplitudeSeries::constant(lin.nu0),
            lambda: AmplitudeSeries::constant(lin.lambda0),
            delta: AmplitudeSeries::constant(lin.d0000()),
            order: 0,
        };
        let c = EtaPoly::constant;
        let eta = |v: f64| EtaPoly::monomial(v, 1);
        let z0 = EtaPoly::zero;
        let (k1, k2, k3) = (lin.kappa1, lin.kappa2, lin.kappa3);
        b.x.push(sorted(vec![
            (UNIT_OMEGA, CosSin::cos_only(c(1.0))),
            (UNIT_PLUS, CosSin::cos_only(c(1.0))),
            (UNIT_MINUS, CosSin::cos_only(c(1.0))),
        ]));
        b.y.push(sorted(vec![
            (UNIT_OMEGA, CosSin::new(z0(), c(k1))),
            (UNIT_PLUS, CosSin::cos_only(c(k2))),
            (UNIT_MINUS, CosSin::cos_only(c(-k2))),
        ]));
        let mut z1 = vec![(UNIT_NU, CosSin::cos_only(c(1.0)))];
        if opts.coupling {
            z1.push((UNIT_OMEGA, CosSin::cos_only(eta(1.0))));
            z1.push((UNIT_PLUS, CosSin::cos_only(eta(k3))));
            z1.push((UNIT_MINUS, CosSin::cos_only(eta(k3))));
        }
        b.z.push(sorted(z1));
        b.advance_caches(1);
        b.commit_caches(1);
        b.order = 1;
        Ok(b)
    }

    fn from_solution(sol: &SolutionSet, opts: BuildOptions) -> Result<Self> {
        let mut b = Builder::new(&sol.params, opts)?;
        let xs = sol.x.by_order(sol.order);
        let ys = sol.y.by_order(sol.order);
        let zs = sol.z.by_order(sol.order);
        b.omega = sol.omega.clone();
        b.nu = sol.nu.clone();
        b.lambda = sol.lambda.clone();
        b.delta = sol.delta.clone();
        b.x[1] = xs.get(1).cloned().unwrap_or_default();
        b.y[1] = ys.get(1).cloned().unwrap_or_default();
        b.z[1] = zs.get(1).cloned().unwrap_or_default();
        // Rebuild the caches exactly as the forward construction does.
        b.rho2.truncate(1);
        b.big_g.truncate(1);
        for p in b.prim.iter_mut() {
            p.u.truncate(1);
            p.g.truncate(1);
        }
        b.advance_caches(1);
        b.commit_caches(1);
        for n in 2..=sol.order {
            b.x.push(xs[n].clone());
            b.y.push(ys[n].clone());
            b.z.push(zs[n].clone());
            b.advance_caches(n);
            b.commit_caches(n);
        }
        b.order = sol.order;
        Ok(b)
    }

    fn term_count(&self) -> usize {
        self.x.iter().chain(&self.y).chain(&self.z).map(|s| s.len()).sum()
    }

    fn max_eta_degree(&self, n: usize) -> usize {
        2 * n
    }

    /// Provisional order-n caches, computed with x_n = 0.
    fn advance_caches(&mut self, n: usize) {
        if self.rho2.len() > n {
            return;
        }
        let md = self.max_eta_degree(n);
        let mut acc = Accumulator::new(md);
        for var in [&self.x, &self.y, &self.z] {
            for s in 1..n {
                let t = n - s;
                if s > t {
                    break;
                }
                let pa = prepare(&var[s]);
                let pb = prepare(&var[t]);
                acc.add_convolution(&pa, &pb, if s == t { 1.0 } else { 2.0 });
            }
        }
        let rho2_n = acc.finish();
        let nf = n as f64;
        for p in self.prim.iter_mut() {
            p.u.push(rho2_n.clone());
            let u0 = p.a * p.a;
            let mut acc = Accumulator::new(md);
            for k in 1..=n {
                let coef = -(nf + 0.5 * k as f64) / (nf * u0);
                let pu = prepare(&p.u[k]);
                let pg = prepare(&p.g[n - k]);
                acc.add_convolution(&pu, &pg, coef);
            }
            p.g.push(acc.finish());
        }
        self.rho2.push(rho2_n);
    }

    /// Fold the solved x_n into the order-n caches.
    fn commit_caches(&mut self, n: usize) {
        let md = self.max_eta_degree(n);
        let xn = prepare(&self.x[n]);
        let mut gacc = Accumulator::new(md);
        for p in self.prim.iter_mut() {
            let mut acc = Accumulator::new(md);
            for t in prepare(&p.u[n]) {
                acc.add_prepared(&t, 1.0);
            }
            for t in &xn {
                acc.add_prepared(t, -2.0 * p.a);
            }
            p.u[n] = acc.finish();
            let mut acc = Accumulator::new(md);
            for t in prepare(&p.g[n]) {
                acc.add_prepared(&t, 1.0);
            }
            for t in &xn {
                acc.add_prepared(t, 3.0 * p.a * p.g0_over_u0);
            }
            p.g[n] = acc.finish();
            for t in prepare(&p.g[n]) {
                gacc.add_prepared(&t, p.w);
            }
        }
        let gn = gacc.finish();
        if self.big_g.len() > n {
            self.big_g[n] = gn;
        } else {
            self.big_g.push(gn);
        }
    }

    fn assemble(&mut self, n: usize) -> Result<OrderRHS> {
        if self.order + 1 < n || n < 2 {
            return Err(Error::Incomplete { have: self.order, need: n.saturating_sub(1) });
        }
        self.advance_caches(n);
        let md = self.max_eta_degree(n);
        let mut rx = Accumulator::new(md);
        let mut ry = Accumulator::new(md);
        let mut rz = Accumulator::new(md);

        // Nonlinear potential: dV/dx = -x G + sum w a g_A, dV/dy = -y G, dV/dz = -z G.
        for s in 1..n {
            let pg = prepare(&self.big_g[n - s]);
            rx.add_convolution(&prepare(&self.x[s]), &pg, -1.0);
            ry.add_convolution(&prepare(&self.y[s]), &pg, -1.0);
            rz.add_convolution(&prepare(&self.z[s]), &pg, -1.0);
        }
        for p in &self.prim {
            for t in prepare(&p.g[n]) {
                rx.add_prepared(&t, p.w * p.a);
            }
        }

        // Frequency products with the unknown order n-1 entries still zero.
        let fp = FreqProducts::new(&self.omega, &self.nu, &self.lambda, &self.delta, n - 1);
        for s in 1..n {
            let a = n - s;
            let coefs = fp.slice(a);
            if coefs.is_empty() {
                continue;
            }
            for (idx, cs) in &self.x[s] {
                for (b, f) in &coefs {
                    let t = shift_amp(*idx, *b);
                    let (c1, c2) = f.second(idx);
                    let (c3, c4) = f.first(idx);
                    // x-row: -D2X ; y-row: -2 DX
                    add_rotated(&mut rx, t, &c1, &c2, cs, -1.0);
                    add_rotated(&mut ry, t, &c4, &c3, cs, -2.0);
                    if self.opts.coupling && !f.d.is_zero() {
                        let (a_, b_) = mul_pair(&f.d.shift_up(), cs);
                        rz.add_raw(t, a_.coeffs(), b_.coeffs(), 1.0);
                    }
                }
            }
            for (idx, cs) in &self.y[s] {
                for (b, f) in &coefs {
                    let t = shift_amp(*idx, *b);
                    let (c1, c2) = f.second(idx);
                    let (c3, c4) = f.first(idx);
                    // x-row: +2 DY ; y-row: -D2Y
                    add_rotated(&mut rx, t, &c4, &c3, cs, 2.0);
                    add_rotated(&mut ry, t, &c1, &c2, cs, -1.0);
                }
            }
            for (idx, cs) in &self.z[s] {
                for (b, f) in &coefs {
                    let t = shift_amp(*idx, *b);
                    let (c1, c2) = f.second(idx);
                    add_rotated(&mut rz, t, &c1, &c2, cs, -1.0);
                }
            }
        }

        let finish = |acc: Accumulator| -> TrigExpSeries {
            let mut terms = acc.finish();
            if self.opts.prune_parity {
                terms.retain(|(k, _)| k.classical_parity());
            }
            TrigExpSeries::from_sorted(terms)
        };
        Ok(OrderRHS { order: n, x: finish(rx), y: finish(ry), z: finish(rz) })
    }

    /// Order-1 coefficients (A, B) of x, y, z at `unit`.
    fn order1(&self, unit: &MultiIndex) -> [(EtaPoly, EtaPoly); 3] {
        let get = |s: &[Term]| {
            slice_get(s, unit).map(|c| (c.cos.clone(), c.sin.clone())).unwrap_or_default()
        };
        [get(&self.x[1]), get(&self.y[1]), get(&self.z[1])]
    }

    /// Column of the order-n system multiplying a frequency correction,
    /// rows (x cos, x sin, y cos, y sin, z cos, z sin).
    fn sensitivity(&self, f: Freq, idx: &MultiIndex, unit: &MultiIndex) -> [EtaPoly; 6] {
        let [vx, vy, vz] = self.order1(unit);
        let (p, q, e) = (idx.p as f64, idx.q as f64, idx.e() as f64);
        // D_f applied to a pair
        let dfun = |v: &(EtaPoly, EtaPoly)| -> (EtaPoly, EtaPoly) {
            match f {
                Freq::Omega => (v.1.scale(p), v.0.scale(-p)),
                Freq::Nu => (v.1.scale(q), v.0.scale(-q)),
                Freq::Lambda => (v.0.scale(e), v.1.scale(e)),
            }
        };
        let m = self.op.m(idx);
        let mapply = |v: &(EtaPoly, EtaPoly)| -> (EtaPoly, EtaPoly) {
            let mut a = v.0.scale(m[0][0]);
            a.add_scaled(&v.1, m[0][1]);
            let mut b = v.0.scale(m[1][0]);
            b.add_scaled(&v.1, m[1][1]);
            (a, b)
        };
        let (dx, dy, dz) = (dfun(&vx), dfun(&vy), dfun(&vz));
        let (mdx, mdy, mdz) = (mapply(&dx), mapply(&dy), mapply(&dz));
        let lin = |a: &EtaPoly, sa: f64, b: &EtaPoly, sb: f64| {
            let mut r = a.scale(sa);
            r.add_scaled(b, sb);
            r
        };
        [
            lin(&mdx.0, 2.0, &dy.0, -2.0),
            lin(&mdx.1, 2.0, &dy.1, -2.0),
            lin(&mdy.0, 2.0, &dx.0, 2.0),
            lin(&mdy.1, 2.0, &dx.1, 2.0),
            mdz.0.scale(2.0),
            mdz.1.scale(2.0),
        ]
    }

    fn solve(&mut self, n: usize, rhs: &OrderRHS) -> Result<()> {
        if rhs.order != n || self.order + 1 != n {
            return Err(Error::Incomplete { have: self.order, need: n.saturating_sub(1) });
        }
        let mut keys: Vec<MultiIndex> =
            rhs.x.iter().chain(rhs.y.iter()).chain(rhs.z.iter()).map(|(k, _)| *k).collect();
        keys.sort_unstable();
        keys.dedup();

        let get = |s: &TrigExpSeries, k: &MultiIndex| s.get(k).cloned().unwrap_or_default();
        let mut out_x: Vec<Term> = Vec::new();
        let mut out_y: Vec<Term> = Vec::new();
        let mut out_z: Vec<Term> = Vec::new();
        let push = |out: &mut Vec<Term>, k: MultiIndex, a: EtaPoly, b: EtaPoly| {
            let cs = CosSin::new(a, if k.p == 0 && k.q == 0 { EtaPoly::zero() } else { b });
            if !cs.is_zero() {
                out.push((k, cs));
            }
        };

        let tol = SolveTolerance::default();
        let case_of = |k: &MultiIndex| -> u8 {
            match (k.p, k.q, k.e()) {
                (1, 0, 0) => 1,
                (0, 1, 0) => 2,
                (0, 0, 1) => 3,
                (0, 0, -1) => 4,
                _ => 5,
            }
        };
        let mut lambda_case3: Vec<(AmpIndex, EtaPoly)> = Vec::new();
        let coupling = self.opts.coupling;

        for case in 1..=5u8 {
            for k in keys.iter().filter(|k| case_of(k) == case) {
                let (rx, ry, rz) = (get(&rhs.x, k), get(&rhs.y, k), get(&rhs.z, k));
                let flat = k.p == 0 && k.q == 0;
                let r: [EtaPoly; 6] = [rx.cos, rx.sin, ry.cos, ry.sin, rz.cos, rz.sin];
                match case {
                    1 => {
                        // x = 0; unknowns (y cos, y sin, omega correction).
                        let s_w = self.sensitivity(Freq::Omega, k, &UNIT_OMEGA);
                        let xy = self.op.xy_block(k);
                        let mut a = DMatrix::zeros(4, 3);
                        for row in 0..4 {
                            a[(row, 0)] = xy[(row, 2)];
                            a[(row, 1)] = xy[(row, 3)];
                            a[(row, 2)] = constant_of(&s_w[row], "omega sensitivity", n, k)?;
                        }
                        let sol = linear::solve(&a, &r[..4], true, tol)
                            .map_err(|res| inconsistent("omega correction", n, k, res))?;
                        let wc = sol[2].clone();
                        let b = AmpIndex::new(k.i - 1, k.j, k.k, k.m);
                        set_once(&mut self.omega, b, wc.clone(), "omega", n, k)?;
                        push(&mut out_y, *k, sol[0].clone(), sol[1].clone());
                        // z rows with the omega correction moved to the right.
                        let zc = &r[4] - &(&s_w[4] * &wc);
                        let zs = &r[5] - &(&s_w[5] * &wc);
                        let zb = self.op.z_block(k);
                        if coupling {
                            // z cos = 0; the delta correction absorbs the cos row.
                            let z_sin = zs.scale(1.0 / zb[(1, 1)]);
                            let mut rest = zc.clone();
                            rest.add_scaled(&z_sin, -zb[(0, 1)]);
                            let [vx, _, _] = self.order1(&UNIT_OMEGA);
                            let (quot, rem) = rest.shift_down();
                            if rem.abs() > tol.rel * rest.max_abs().max(tol.floor) {
                                return Err(inconsistent("delta correction", n, k, rem.abs()));
                            }
                            let d = quot.scale(-1.0 / vx.0.coeff(0));
                            set_once(&mut self.delta, b, d, "delta", n, k)?;
                            push(&mut out_z, *k, EtaPoly::zero(), z_sin);
                        } else {
                            let sol = linear::solve(&zb, &[zc, zs], false, tol)
                                .map_err(|res| inconsistent("z block", n, k, res))?;
                            push(&mut out_z, *k, sol[0].clone(), sol[1].clone());
                        }
                    }
                    2 => {
                        let xy = self.op.xy_block(k);
                        self.op.check_det(&xy, n, k)?;
                        let sol = linear::solve(&xy, &r[..4], false, tol)
                            .map_err(|res| inconsistent("xy block", n, k, res))?;
                        let s_n = self.sensitivity(Freq::Nu, k, &UNIT_NU);
                        if s_n[..4].iter().any(|p| !p.is_zero()) {
                            return Err(inconsistent("nu sensitivity", n, k, 1.0));
                        }
                        let zc = self.z_rhs(&r[4], &sol[0]);
                        let zs = self.z_rhs(&r[5], &sol[1]);
                        let mut a = DMatrix::zeros(2, 1);
                        a[(0, 0)] = constant_of(&s_n[4], "nu sensitivity", n, k)?;
                        a[(1, 0)] = constant_of(&s_n[5], "nu sensitivity", n, k)?;
                        let nc = linear::solve(&a, &[zc, zs], true, tol)
                            .map_err(|res| inconsistent("nu correction", n, k, res))?;
                        let b = AmpIndex::new(k.i, k.j - 1, k.k, k.m);
                        set_once(&mut self.nu, b, nc[0].clone(), "nu", n, k)?;
                        push(&mut out_x, *k, sol[0].clone(), sol[1].clone());
                        push(&mut out_y, *k, sol[2].clone(), sol[3].clone());
                    }
                    3 | 4 => {
                        // x = 0; unknowns (y, lambda correction) from the flat x/y rows.
                        let unit = if case == 3 { UNIT_PLUS } else { UNIT_MINUS };
                        let s_l = self.sensitivity(Freq::Lambda, k, &unit);
                        let xy = self.op.xy_block(k);
                        let mut a = DMatrix::zeros(2, 2);
                        for row in 0..2 {
                            a[(row, 0)] = xy[(row, 1)];
                            a[(row, 1)] = constant_of(&s_l[2 * row], "lambda sensitivity", n, k)?;
                        }
                        let sol = linear::solve(&a, &[r[0].clone(), r[2].clone()], false, tol)
                            .map_err(|res| inconsistent("lambda correction", n, k, res))?;
                        let b = if case == 3 {
                            AmpIndex::new(k.i, k.j, k.k - 1, k.m)
                        } else {
                            AmpIndex::new(k.i, k.j, k.k, k.m - 1)
                        };
                        let lam = if case == 3 {
                            lambda_case3.push((b, sol[1].clone()));
                            set_once(&mut self.lambda, b, sol[1].clone(), "lambda", n, k)?;
                            sol[1].clone()
                        } else {
                            let fixed = self.lambda.get(&b).cloned().unwrap_or_default();
                            let diff = (&fixed - &sol[1]).max_abs();
                            let scale = fixed.max_abs().max(sol[1].max_abs());
                            let rhs_scale = r[0].max_abs().max(r[2].max_abs());
                            if diff > tol.rel * scale.max(tol.rel * rhs_scale).max(tol.floor) {
                                return Err(inconsistent("lambda (stable vs unstable)", n, k, diff));
                            }
                            fixed
                        };
                        push(&mut out_y, *k, sol[0].clone(), EtaPoly::zero());
                        let mut zr = &r[4] - &(&s_l[4] * &lam);
                        if coupling {
                            let d = self.delta.get(&b).cloned().unwrap_or_default();
                            let [vx, _, _] = self.order1(&unit);
                            // -eta * d * x1 moved to the right.
                            zr.add_scaled(&d.shift_up(), vx.0.coeff(0));
                        }
                        let zb = self.op.z_block(k);
                        push(&mut out_z, *k, zr.scale(1.0 / zb[(0, 0)]), EtaPoly::zero());
                    }
                    _ => {
                        let xy = self.op.xy_block(k);
                        self.op.check_det(&xy, n, k)?;
                        let dim = if flat { 2 } else { 4 };
                        let rows: Vec<EtaPoly> =
                            if flat { vec![r[0].clone(), r[2].clone()] } else { r[..4].to_vec() };
                        let sol = linear::solve(&xy, &rows, false, tol)
                            .map_err(|res| inconsistent("xy block", n, k, res))?;
                        let (xa, xb) = if flat {
                            (sol[0].clone(), EtaPoly::zero())
                        } else {
                            (sol[0].clone(), sol[1].clone())
                        };
                        let zb = self.op.z_block(k);
                        self.op.check_det(&zb, n, k)?;
                        let zrows: Vec<EtaPoly> = if flat {
                            vec![self.z_rhs(&r[4], &xa)]
                        } else {
                            vec![self.z_rhs(&r[4], &xa), self.z_rhs(&r[5], &xb)]
                        };
                        let zsol = linear::solve(&zb, &zrows, false, tol)
                            .map_err(|res| inconsistent("z block", n, k, res))?;
                        push(&mut out_x, *k, xa, xb);
                        if dim == 2 {
                            push(&mut out_y, *k, sol[1].clone(), EtaPoly::zero());
                            push(&mut out_z, *k, zsol[0].clone(), EtaPoly::zero());
                        } else {
                            push(&mut out_y, *k, sol[2].clone(), sol[3].clone());
                            push(&mut out_z, *k, zsol[0].clone(), zsol[1].clone());
                        }
                    }
                }
            }
        }
        drop(lambda_case3);

        let finish = |mut v: Vec<Term>| -> Vec<Term> {
            v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            let mx = v.iter().fold(0.0_f64, |m, (_, cs)| m.max(cs.max_abs()));
            let thr = 1e-16 * mx;
            for (_, cs) in v.iter_mut() {
                cs.cos.prune(thr);
                cs.sin.prune(thr);
            }
            v.retain(|(_, cs)| !cs.is_zero());
            v
        };
        self.x.push(finish(out_x));
        self.y.push(finish(out_y));
        self.z.push(finish(out_z));
        self.commit_caches(n);
        self.order = n;
        let count = self.term_count();
        if count > self.opts.max_terms {
            return Err(Error::TermLimit { count, limit: self.opts.max_terms, order: n });
        }
        Ok(())
    }

    /// z-row right-hand side with the known eta * d0000 * x coupling moved over.
    fn z_rhs(&self, r: &EtaPoly, x: &EtaPoly) -> EtaPoly {
        let mut out = r.clone();
        if self.opts.coupling {
            out.add_scaled(&x.shift_up(), self.lin.d0000());
        }
        out
    }

    fn to_solution(&self) -> SolutionSet {
        let collect = |v: &Vec<Vec<Term>>| TrigExpSeries::from_sorted(v.iter().flatten().cloned().collect());
        SolutionSet {
            params: self.params.clone(),
            lin: self.lin,
            x: collect(&self.x),
            y: collect(&self.y),
            z: collect(&self.z),
            omega: self.omega.clone(),
            nu: self.nu.clone(),
            lambda: self.lambda.clone(),
            delta: self.delta.clone(),
            order: self.order,
            coupling: self.opts.coupling,
        }
    }
}

fn constant_of(p: &EtaPoly, what: &'static str, n: usize, k: &MultiIndex) -> Result<f64> {
    if p.len() > 1 {
        return Err(inconsistent(what, n, k, p.max_abs()));
    }
    Ok(p.coeff(0))
}

fn inconsistent(what: &'static str, order: usize, index: &MultiIndex, residual: f64) -> Error {
    Error::Inconsistent { what, order, index: *index, residual }
}

fn set_once(
    series: &mut AmplitudeSeries,
    b: AmpIndex,
    v: EtaPoly,
    what: &'static str,
    n: usize,
    k: &MultiIndex,
) -> Result<()> {
    if series.contains(&b) {
        return Err(inconsistent(what, n, k, f64::NAN));
    }
    series.set(b, v);
    Ok(())
}

/// acc[t] += s * (c1 (A, B) + c2 (B, -A)).
fn add_rotated(acc: &mut Accumulator, t: MultiIndex, c1: &EtaPoly, c2: &EtaPoly, cs: &CosSin, s: f64) {
    if !c1.is_zero() {
        let (a, b) = mul_pair(c1, cs);
        acc.add_raw(t, a.coeffs(), b.coeffs(), s);
    }
    if !c2.is_zero() {
        let (a, b) = mul_pair(c2, cs);
        acc.add_raw(t, b.coeffs(), (-&a).coeffs(), s);
    }
}

/// Frequency products needed by D and D^2 at one amplitude index.
#[derive(Default)]
struct FreqCoefs {
    w: EtaPoly,
    v: EtaPoly,
    l: EtaPoly,
    w2: EtaPoly,
    wv: EtaPoly,
    v2: EtaPoly,
    l2: EtaPoly,
    wl: EtaPoly,
    vl: EtaPoly,
    d: EtaPoly,
}

impl FreqCoefs {
    /// D^2 v = c1 v + c2 J v for the harmonic of `idx`.
    fn second(&self, idx: &MultiIndex) -> (EtaPoly, EtaPoly) {
        let (p, q, e) = (idx.p as f64, idx.q as f64, idx.e() as f64);
        let mut c1 = self.l2.scale(e * e);
        c1.add_scaled(&self.w2, -p * p);
        c1.add_scaled(&self.wv, -2.0 * p * q);
        c1.add_scaled(&self.v2, -q * q);
        let mut c2 = self.wl.scale(2.0 * e * p);
        c2.add_scaled(&self.vl, 2.0 * e * q);
        (c1, c2)
    }

    /// D v = c4 v + c3 J v, returned as (c3, c4).
    fn first(&self, idx: &MultiIndex) -> (EtaPoly, EtaPoly) {
        let (p, q, e) = (idx.p as f64, idx.q as f64, idx.e() as f64);
        let mut c3 = self.w.scale(p);
        c3.add_scaled(&self.v, q);
        (c3, self.l.scale(e))
    }
}

struct FreqProducts {
    w: AmplitudeSeries,
    v: AmplitudeSeries,
    l: AmplitudeSeries,
    w2: AmplitudeSeries,
    wv: AmplitudeSeries,
    v2: AmplitudeSeries,
    l2: AmplitudeSeries,
    wl: AmplitudeSeries,
    vl: AmplitudeSeries,
    d: AmplitudeSeries,
}

impl FreqProducts {
    fn new(w: &AmplitudeSeries, v: &AmplitudeSeries, l: &AmplitudeSeries, d: &AmplitudeSeries, max: usize) -> Self {
        FreqProducts {
            w2: w.multiply(w, max),
            wv: w.multiply(v, max),
            v2: v.multiply(v, max),
            l2: l.multiply(l, max),
            wl: w.multiply(l, max),
            vl: v.multiply(l, max),
            w: w.truncate(max),
            v: v.truncate(max),
            l: l.truncate(max),
            d: d.truncate(max),
        }
    }

    /// Union of order-`a` entries.
    fn slice(&self, a: usize) -> Vec<(AmpIndex, FreqCoefs)> {
        let mut keys: Vec<AmpIndex> = Vec::new();
        for s in [&self.w, &self.v, &self.l, &self.w2, &self.wv, &self.v2, &self.l2, &self.wl, &self.vl, &self.d] {
            keys.extend(s.keys().filter(|k| k.order() == a));
        }
        keys.sort_unstable();
        keys.dedup();
        let g = |s: &AmplitudeSeries, k: &AmpIndex| s.get(k).cloned().unwrap_or_default();
        keys.into_iter()
            .map(|k| {
                let f = FreqCoefs {
                    w: g(&self.w, &k),
                    v: g(&self.v, &k),
                    l: g(&self.l, &k),
                    w2: g(&self.w2, &k),
                    wv: g(&self.wv, &k),
                    v2: g(&self.v2, &k),
                    l2: g(&self.l2, &k),
                    wl: g(&self.wl, &k),
                    vl: g(&self.vl, &k),
                    d: g(&self.d, &k),
                };
                (k, f)
            })
            .collect()
    }
}
