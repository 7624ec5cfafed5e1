//! Concrete orbits from a solution set: classification, trajectories and
//! manifold branches.

use std::collections::BTreeMap;
use std::fmt;

use crate::bifurcation::{evaluation_scale, solve_eta, third_order_constants};
use crate::construct::SolutionSet;
use crate::error::{Error, Result};
use crate::model::{synodic_from_local, Frame, State6};
use crate::series::TrigExpSeries;

/// Amplitudes, phases, coupling and truncation order of one orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitSpec {
    pub alpha: [f64; 4],
    pub phi: [f64; 2],
    pub eta: f64,
    pub order: usize,
}

impl OrbitSpec {
    pub fn new(alpha: [f64; 4], eta: f64, order: usize) -> Self {
        OrbitSpec { alpha, phi: [0.0; 2], eta, order }
    }

    pub fn with_phase(self, phi1: f64, phi2: f64) -> Self {
        OrbitSpec { phi: [phi1, phi2], ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarFrequencies {
    pub omega: f64,
    pub nu: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterClass {
    LibrationPoint,
    PlanarLyapunov,
    VerticalLyapunov,
    Lissajous,
    Halo { northern: bool },
    SecondTypeHalo { northern: bool },
    Quasihalo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyperbolicPart {
    Center,
    Unstable,
    Stable,
    /// Crosses the neck; ends on the +x (local) side when `toward_positive_x`.
    Transit { toward_positive_x: bool },
    NonTransit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitClass {
    pub center: CenterClass,
    pub part: HyperbolicPart,
}

impl fmt::Display for CenterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CenterClass::LibrationPoint => "libration point",
            CenterClass::PlanarLyapunov => "planar Lyapunov",
            CenterClass::VerticalLyapunov => "vertical Lyapunov",
            CenterClass::Lissajous => "Lissajous",
            CenterClass::Halo { northern: true } => "northern halo",
            CenterClass::Halo { northern: false } => "southern halo",
            CenterClass::SecondTypeHalo { northern: true } => "northern second-type halo",
            CenterClass::SecondTypeHalo { northern: false } => "southern second-type halo",
            CenterClass::Quasihalo => "quasihalo",
        };
        f.write_str(s)
    }
}

impl fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.part {
            HyperbolicPart::Center => write!(f, "{}", self.center),
            HyperbolicPart::Unstable => write!(f, "unstable manifold of {}", self.center),
            HyperbolicPart::Stable => write!(f, "stable manifold of {}", self.center),
            HyperbolicPart::Transit { toward_positive_x } => {
                write!(f, "transit ({}) near {}", if toward_positive_x { "-x to +x" } else { "+x to -x" }, self.center)
            }
            HyperbolicPart::NonTransit => write!(f, "non-transit near {}", self.center),
        }
    }
}

fn check_order(sol: &SolutionSet, spec: &OrbitSpec) -> Result<()> {
    if spec.order == 0 || spec.order > sol.order {
        return Err(Error::InvalidParameter(format!(
            "orbit order {} outside 1..={} of the solution",
            spec.order, sol.order
        )));
    }
    if spec.alpha.iter().chain(&spec.phi).any(|v| !v.is_finite()) || !spec.eta.is_finite() {
        return Err(Error::InvalidParameter("orbit parameters must be finite".into()));
    }
    Ok(())
}

/// Delta(eta; alpha) with the frequency-order truncation of `spec`, and its
/// evaluation scale.
pub fn delta_value(sol: &SolutionSet, spec: &OrbitSpec) -> (f64, f64) {
    let p = sol.delta.truncate(spec.order.saturating_sub(1)).at_amplitudes(&spec.alpha);
    (p.eval(spec.eta), evaluation_scale(&p, spec.eta))
}

pub fn check_admissible(sol: &SolutionSet, spec: &OrbitSpec) -> Result<()> {
    check_order(sol, spec)?;
    if spec.eta == 0.0 {
        return Ok(());
    }
    if !sol.coupling {
        return Err(Error::MissingDelta("nonzero eta needs a coupled solution"));
    }
    let (d, scale) = delta_value(sol, spec);
    let tol = 1e-8 * scale;
    if d.abs() < tol {
        Ok(())
    } else {
        Err(Error::Inadmissible { delta: d, tol })
    }
}

pub fn classify(sol: &SolutionSet, spec: &OrbitSpec) -> Result<OrbitClass> {
    check_admissible(sol, spec)?;
    let [a1, a2, a3, a4] = spec.alpha;
    let eta = spec.eta;
    let center = if a1 == 0.0 && a2 == 0.0 {
        CenterClass::LibrationPoint
    } else if eta == 0.0 {
        match (a1 != 0.0, a2 != 0.0) {
            (true, true) => CenterClass::Lissajous,
            (true, false) => CenterClass::PlanarLyapunov,
            _ => CenterClass::VerticalLyapunov,
        }
    } else if a2 != 0.0 {
        CenterClass::Quasihalo
    } else {
        let northern = eta > 0.0;
        if second_type(sol, spec)? {
            CenterClass::SecondTypeHalo { northern }
        } else {
            CenterClass::Halo { northern }
        }
    };
    let part = match (a3 != 0.0, a4 != 0.0) {
        (false, false) => HyperbolicPart::Center,
        (true, false) => HyperbolicPart::Unstable,
        (false, true) => HyperbolicPart::Stable,
        (true, true) if a3 * a4 < 0.0 => HyperbolicPart::Transit { toward_positive_x: a3 > 0.0 },
        _ => HyperbolicPart::NonTransit,
    };
    Ok(OrbitClass { center, part })
}

/// True when the positive root of the third-order equation
/// a u^2 + b u + c = 0 (u = eta^2) nearest to eta^2 is the larger one.
fn second_type(sol: &SolutionSet, spec: &OrbitSpec) -> Result<bool> {
    let slice = third_order_constants(sol)?;
    let (a, b, c) = slice.abc(&spec.alpha);
    let d = b * b - 4.0 * a * c;
    if a == 0.0 || d < 0.0 {
        return Ok(false);
    }
    let mut u = [(-b - d.sqrt()) / (2.0 * a), (-b + d.sqrt()) / (2.0 * a)];
    u.sort_by(f64::total_cmp);
    let e = spec.eta.abs();
    let nearest = u
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .min_by(|x, y| (x.1.sqrt() - e).abs().total_cmp(&(y.1.sqrt() - e).abs()));
    Ok(matches!(nearest, Some((1, _))))
}

pub fn scalar_frequencies(sol: &SolutionSet, spec: &OrbitSpec) -> Result<ScalarFrequencies> {
    check_order(sol, spec)?;
    let n = spec.order.saturating_sub(1);
    let f = ScalarFrequencies {
        omega: sol.omega.truncate(n).eval(&spec.alpha, spec.eta),
        nu: sol.nu.truncate(n).eval(&spec.alpha, spec.eta),
        lambda: sol.lambda.truncate(n).eval(&spec.alpha, spec.eta),
    };
    if !(f.omega.is_finite() && f.nu.is_finite() && f.lambda.is_finite()) {
        return Err(Error::InvalidParameter("frequencies are not finite at these amplitudes".into()));
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug)]
struct Harmonic {
    p: usize,
    q: i32,
    e: i32,
    c: f64,
    s: f64,
}

/// Series collapsed at fixed amplitudes and eta: a short sum of harmonics
/// that is cheap to evaluate repeatedly.
#[derive(Clone, Debug)]
pub struct CompiledOrbit {
    pub spec: OrbitSpec,
    pub freqs: ScalarFrequencies,
    comps: [Vec<Harmonic>; 3],
    pmax: usize,
    qmax: i32,
    elo: i32,
    ehi: i32,
}

fn collapse(s: &TrigExpSeries, spec: &OrbitSpec) -> Vec<Harmonic> {
    let mut acc: BTreeMap<(i16, i16, i32), (f64, f64)> = BTreeMap::new();
    for (k, cs) in s.iter() {
        if k.order() > spec.order {
            continue;
        }
        let w = k.amp().monomial(&spec.alpha);
        if w == 0.0 {
            continue;
        }
        let e = acc.entry((k.p, k.q, k.e())).or_default();
        e.0 += w * cs.cos.eval(spec.eta);
        e.1 += w * cs.sin.eval(spec.eta);
    }
    acc.into_iter()
        .filter(|(_, v)| v.0 != 0.0 || v.1 != 0.0)
        .map(|((p, q, e), (c, s))| Harmonic { p: p as usize, q: q as i32, e, c, s })
        .collect()
}

/// (cos, sin) of k*theta for k = 0..=n by repeated rotation.
fn cis_table(theta: f64, n: usize) -> Vec<(f64, f64)> {
    let (s1, c1) = theta.sin_cos();
    let mut out = Vec::with_capacity(n + 1);
    out.push((1.0, 0.0));
    for k in 1..=n {
        // re-anchor periodically to keep the recurrence error small
        if k % 16 == 0 {
            let (s, c) = (k as f64 * theta).sin_cos();
            out.push((c, s));
            continue;
        }
        let (c, s) = out[k - 1];
        out.push((c * c1 - s * s1, s * c1 + c * s1));
    }
    out
}

impl CompiledOrbit {
    /// Compile without the admissibility check; evaluates the modified
    /// system's solution for any eta.
    pub fn new_unchecked(sol: &SolutionSet, spec: &OrbitSpec) -> Result<Self> {
        let freqs = scalar_frequencies(sol, spec)?;
        let comps = [collapse(&sol.x, spec), collapse(&sol.y, spec), collapse(&sol.z, spec)];
        let all = comps.iter().flatten();
        let pmax = all.clone().map(|h| h.p).max().unwrap_or(0);
        let qmax = all.clone().map(|h| h.q.abs()).max().unwrap_or(0);
        let elo = all.clone().map(|h| h.e).min().unwrap_or(0).min(0);
        let ehi = all.map(|h| h.e).max().unwrap_or(0).max(0);
        Ok(CompiledOrbit { spec: *spec, freqs, comps, pmax, qmax, elo, ehi })
    }

    pub fn new(sol: &SolutionSet, spec: &OrbitSpec) -> Result<Self> {
        check_admissible(sol, spec)?;
        Self::new_unchecked(sol, spec)
    }

    /// Period of theta1.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.freqs.omega
    }

    /// Number of distinct harmonics over the three components.
    pub fn harmonic_count(&self) -> usize {
        self.comps.iter().map(Vec::len).sum()
    }

    /// Position and its first `deriv` time derivatives (deriv <= 2), local frame.
    pub fn eval(&self, t: f64, deriv: usize) -> Result<[[f64; 3]; 3]> {
        let f = &self.freqs;
        let lt = f.lambda * t;
        let top = (self.ehi as f64 * lt).max(self.elo as f64 * lt);
        if top > 700.0 {
            return Err(Error::ExpOverflow(top));
        }
        let c1 = cis_table(f.omega * t + self.spec.phi[0], self.pmax);
        let c2 = cis_table(f.nu * t + self.spec.phi[1], self.qmax as usize);
        let ex: Vec<f64> = (self.elo..=self.ehi).map(|e| (e as f64 * lt).exp()).collect();
        let deriv = deriv.min(2);
        let mut out = [[0.0; 3]; 3];
        for (axis, comp) in self.comps.iter().enumerate() {
            for h in comp {
                let (ca, sa) = c1[h.p];
                let (cb, sb) = c2[h.q.unsigned_abs() as usize];
                let sb = if h.q < 0 { -sb } else { sb };
                let cs = ca * cb - sa * sb;
                let sn = sa * cb + ca * sb;
                let x = ex[(h.e - self.elo) as usize];
                let (mut c, mut s) = (h.c, h.s);
                out[0][axis] += (c * cs + s * sn) * x;
                if deriv > 0 {
                    let phi = h.p as f64 * f.omega + h.q as f64 * f.nu;
                    let el = h.e as f64 * f.lambda;
                    for row in out.iter_mut().take(deriv + 1).skip(1) {
                        (c, s) = (s * phi + el * c, el * s - c * phi);
                        row[axis] += (c * cs + s * sn) * x;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn state(&self, t: f64) -> Result<State6> {
        let [p, v, _] = self.eval(t, 1)?;
        Ok(State6::new(p, v, Frame::Local))
    }
}

pub fn sample_trajectory(sol: &SolutionSet, spec: &OrbitSpec, t_grid: &[f64], frame: Frame) -> Result<Vec<State6>> {
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be finite".into()));
    }
    let orbit = CompiledOrbit::new(sol, spec)?;
    t_grid
        .iter()
        .map(|&t| {
            let s = orbit.state(t)?;
            match frame {
                Frame::Local => Ok(s),
                Frame::Synodic => synodic_from_local(&sol.params, &s),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    UnstablePlus,
    UnstableMinus,
    StablePlus,
    StableMinus,
}

impl Branch {
    pub fn parse(s: &str) -> Option<Branch> {
        match s {
            "unstable+" => Some(Branch::UnstablePlus),
            "unstable-" => Some(Branch::UnstableMinus),
            "stable+" => Some(Branch::StablePlus),
            "stable-" => Some(Branch::StableMinus),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::UnstablePlus => "unstable+",
            Branch::UnstableMinus => "unstable-",
            Branch::StablePlus => "stable+",
            Branch::StableMinus => "stable-",
        }
    }

    /// +1 for forward-time (unstable) branches, -1 for stable ones.
    pub fn time_sign(self) -> f64 {
        match self {
            Branch::UnstablePlus | Branch::UnstableMinus => 1.0,
            _ => -1.0,
        }
    }
}

pub fn manifold_branch(sol: &SolutionSet, center: &OrbitSpec, branch: Branch, epsilon: f64) -> Result<OrbitSpec> {
    check_order(sol, center)?;
    if center.alpha[2] != 0.0 || center.alpha[3] != 0.0 {
        return Err(Error::InvalidParameter("center spec must have alpha3 = alpha4 = 0".into()));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter("branch epsilon must be finite and >= 0".into()));
    }
    if epsilon == 0.0 {
        return Ok(*center);
    }
    let mut spec = *center;
    match branch {
        Branch::UnstablePlus => spec.alpha[2] = epsilon,
        Branch::UnstableMinus => spec.alpha[2] = -epsilon,
        Branch::StablePlus => spec.alpha[3] = epsilon,
        Branch::StableMinus => spec.alpha[3] = -epsilon,
    }
    if center.eta != 0.0 {
        spec.eta = resolve_eta(sol, &spec, center.eta)?;
    }
    Ok(spec)
}

/// Root of Delta(eta; alpha) at the spec's order nearest `near`.
pub fn resolve_eta(sol: &SolutionSet, spec: &OrbitSpec, near: f64) -> Result<f64> {
    let trunc = sol.truncate(spec.order);
    let report = solve_eta(&trunc, &spec.alpha)?;
    let eta = report
        .nearest(near)
        .filter(|r| r.signum() == near.signum())
        .ok_or_else(|| Error::NoEtaRoot(format!("no root near {near} at alpha {:?}", spec.alpha)))?;
    check_admissible(sol, &OrbitSpec { eta, ..*spec })?;
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::build;
    use crate::model::{local_from_synodic, make_params, LibrationPoint};
    use crate::{EARTH_MOON_MU, SUN_EARTH_MU};

    fn sol(order: usize) -> SolutionSet {
        build(&make_params(SUN_EARTH_MU, LibrationPoint::L1, order + 1).unwrap(), order).unwrap()
    }

    #[test]
    fn classification_table() {
        let s = sol(5);
        let c = |alpha: [f64; 4], eta: f64| classify(&s, &OrbitSpec::new(alpha, eta, 5)).unwrap();
        assert_eq!(c([0.16, 0.02, 0.001, 0.0], 0.0).to_string(), "unstable manifold of Lissajous");
        assert_eq!(c([0.0, 0.0, -0.01, 0.01], 0.0).to_string(), "transit (+x to -x) near libration point");
        assert_eq!(c([0.0, 0.0, 0.01, 0.01], 0.0).part, HyperbolicPart::NonTransit);
        assert_eq!(c([0.1, 0.0, 0.0, 0.0], 0.0).center, CenterClass::PlanarLyapunov);
        assert_eq!(c([0.0, 0.1, 0.0, 0.0], 0.0).center, CenterClass::VerticalLyapunov);
        assert_eq!(c([0.0, 0.0, 0.0, 0.003], 0.0).part, HyperbolicPart::Stable);
        let halo = OrbitSpec::new([0.16, 0.0, 0.0, 0.0], 1.0, 5);
        let eta = resolve_eta(&s, &halo, 1.0).unwrap();
        let k = classify(&s, &OrbitSpec { eta, ..halo }).unwrap();
        assert_eq!(k.center, CenterClass::Halo { northern: true });
        let k = classify(&s, &OrbitSpec { eta: -eta, ..halo }).unwrap();
        assert_eq!(k.center, CenterClass::Halo { northern: false });
        // at order 5 the large root is complex; the third-order one is real
        let s3 = sol(3);
        let big = resolve_eta(&s3, &OrbitSpec::new([0.01, 0.0, 0.0, 0.0], 1.0, 3), 20.0).unwrap();
        let k = classify(&s3, &OrbitSpec::new([0.01, 0.0, 0.0, 0.0], big, 3)).unwrap();
        assert_eq!(k.center, CenterClass::SecondTypeHalo { northern: true });
        let q = resolve_eta(&s, &OrbitSpec::new([0.16, 0.02, 0.0, 0.0], 1.0, 5), 1.4).unwrap();
        assert_eq!(classify(&s, &OrbitSpec::new([0.16, 0.02, 0.0, 0.0], q, 5)).unwrap().center, CenterClass::Quasihalo);
        assert!(matches!(
            classify(&s, &OrbitSpec::new([0.16, 0.0, 0.0, 0.0], 0.5, 5)),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn zero_amplitudes_sit_at_the_point() {
        let s = sol(4);
        let spec = OrbitSpec::new([0.0; 4], 0.0, 4);
        let f = scalar_frequencies(&s, &spec).unwrap();
        assert_eq!((f.omega, f.nu, f.lambda), (s.lin.omega0, s.lin.nu0, s.lin.lambda0));
        let tr = sample_trajectory(&s, &spec, &[0.0, 1.0, 5.0], Frame::Synodic).unwrap();
        for st in tr {
            assert!((st.pos[0] - s.params.point_x()).abs() < 1e-15);
            assert_eq!(st.vel, [0.0; 3]);
        }
    }

    #[test]
    fn planar_orbits_stay_planar() {
        let s = sol(7);
        let spec = OrbitSpec::new([0.2, 0.0, 0.0, 0.0], 0.0, 7);
        let o = CompiledOrbit::new(&s, &spec).unwrap();
        for i in 0..50 {
            let [p, v, a] = o.eval(i as f64 * 0.1, 2).unwrap();
            assert!(p[2].abs() < 1e-14 && v[2].abs() < 1e-14 && a[2].abs() < 1e-14);
        }
    }

    #[test]
    fn eta_reversal_mirrors_z() {
        let s = sol(7);
        let halo = OrbitSpec::new([0.16, 0.0, 0.0, 0.0], 1.2, 7);
        let eta = resolve_eta(&s, &halo, 1.2).unwrap();
        let a = CompiledOrbit::new(&s, &OrbitSpec { eta, ..halo }).unwrap();
        let b = CompiledOrbit::new(&s, &OrbitSpec { eta: -eta, ..halo }).unwrap();
        for i in 0..40 {
            let t = i as f64 * 0.17;
            let (pa, pb) = (a.eval(t, 1).unwrap(), b.eval(t, 1).unwrap());
            for d in 0..2 {
                assert!((pa[d][0] - pb[d][0]).abs() < 1e-12);
                assert!((pa[d][1] - pb[d][1]).abs() < 1e-12);
                assert!((pa[d][2] + pb[d][2]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn velocities_match_finite_differences() {
        let s = sol(6);
        let spec = OrbitSpec::new([0.1, 0.05, 0.001, -0.002], 0.0, 6).with_phase(0.3, -1.0);
        let o = CompiledOrbit::new(&s, &spec).unwrap();
        let h = 1e-5;
        for t in [0.0, 0.7, 2.5] {
            let [_, v, a] = o.eval(t, 2).unwrap();
            let [pp, vp, _] = o.eval(t + h, 1).unwrap();
            let [pm, vm, _] = o.eval(t - h, 1).unwrap();
            for i in 0..3 {
                assert!(((pp[i] - pm[i]) / (2.0 * h) - v[i]).abs() < 1e-7 * v[i].abs().max(1.0));
                assert!(((vp[i] - vm[i]) / (2.0 * h) - a[i]).abs() < 1e-7 * a[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn frequencies_follow_the_series_and_swap_symmetry() {
        let s = sol(3);
        let spec = OrbitSpec::new([0.05, 0.0, 0.0, 0.0], 0.0, 3);
        let f = scalar_frequencies(&s, &spec).unwrap();
        let w2 = s.omega.get(&crate::series::AmpIndex::new(2, 0, 0, 0)).unwrap().eval(0.0);
        assert!((f.omega - (s.lin.omega0 + w2 * 0.0025)).abs() < 1e-15);
        let a = scalar_frequencies(&s, &OrbitSpec::new([0.05, 0.02, 0.003, -0.001], 0.4, 3)).unwrap();
        let b = scalar_frequencies(&s, &OrbitSpec::new([0.05, 0.02, -0.001, 0.003], 0.4, 3)).unwrap();
        assert!((a.omega - b.omega).abs() < 1e-15 && (a.lambda - b.lambda).abs() < 1e-15);
    }

    #[test]
    fn manifold_branches() {
        let s = sol(5);
        let liss = OrbitSpec::new([0.16, 0.02, 0.0, 0.0], 0.0, 5);
        let u = manifold_branch(&s, &liss, Branch::UnstablePlus, 0.001).unwrap();
        assert_eq!((u.alpha[2], u.alpha[3], u.eta), (0.001, 0.0, 0.0));
        assert_eq!(manifold_branch(&s, &liss, Branch::StableMinus, 0.0).unwrap(), liss);
        let eta = resolve_eta(&s, &liss, 1.4).unwrap();
        let qh = OrbitSpec { eta, ..liss };
        let st = manifold_branch(&s, &qh, Branch::StableMinus, 1e-3).unwrap();
        assert_eq!(st.alpha[3], -1e-3);
        let (d, scale) = delta_value(&s, &st);
        assert!(d.abs() < 1e-8 * scale);
        assert!(matches!(manifold_branch(&s, &u, Branch::StablePlus, 1e-3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn overflow_and_frames() {
        let s = build(&make_params(EARTH_MOON_MU, LibrationPoint::L2, 4).unwrap(), 3).unwrap();
        let spec = OrbitSpec::new([0.0, 0.0, 1e-3, 0.0], 0.0, 3);
        let o = CompiledOrbit::new(&s, &spec).unwrap();
        assert!(matches!(o.eval(1e3, 0), Err(Error::ExpOverflow(_))));
        let tr = sample_trajectory(&s, &spec, &[0.5], Frame::Synodic).unwrap();
        let back = local_from_synodic(&s.params, &tr[0]).unwrap();
        let direct = o.state(0.5).unwrap();
        for i in 0..3 {
            assert!((back.pos[i] - direct.pos[i]).abs() < 1e-12);
        }
    }
}
