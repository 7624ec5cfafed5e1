//! Circular restricted three-body model around a collinear libration point.
//!
//! Synodic frame: the larger primary (mass 1 - mu) sits at (mu, 0, 0) and the
//! smaller one (mass mu) at (mu - 1, 0, 0). The local frame is centred at the
//! libration point and scaled by gamma, with the x axis pointing away from the
//! nearest primary for L1/L2 and towards the larger primary for L3.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LibrationPoint {
    L1,
    L2,
    L3,
}

impl LibrationPoint {
    pub fn name(self) -> &'static str {
        match self {
            LibrationPoint::L1 => "L1",
            LibrationPoint::L2 => "L2",
            LibrationPoint::L3 => "L3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" => Some(LibrationPoint::L1),
            "L2" => Some(LibrationPoint::L2),
            "L3" => Some(LibrationPoint::L3),
            _ => None,
        }
    }

    pub const ALL: [LibrationPoint; 3] = [LibrationPoint::L1, LibrationPoint::L2, LibrationPoint::L3];
}

impl fmt::Display for LibrationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A primary seen from the local frame: it sits at (a, 0, 0) and enters the
/// local potential with weight `w = mass / gamma^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalPrimary {
    pub mass: f64,
    pub a: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub mu: f64,
    pub point: LibrationPoint,
    pub gamma: f64,
    /// `c[n]` for n = 0..=n_max; entries 0 and 1 are unused and zero.
    pub c: Vec<f64>,
    pub n_max: usize,
}

/// Euler quintic for the distance gamma between the point and its nearest primary.
pub fn quintic(mu: f64, point: LibrationPoint, g: f64) -> f64 {
    let g2 = g * g;
    let g3 = g2 * g;
    let g4 = g3 * g;
    let g5 = g4 * g;
    match point {
        LibrationPoint::L1 => g5 - (3.0 - mu) * g4 + (3.0 - 2.0 * mu) * g3 - mu * g2 + 2.0 * mu * g - mu,
        LibrationPoint::L2 => g5 + (3.0 - mu) * g4 + (3.0 - 2.0 * mu) * g3 - mu * g2 - 2.0 * mu * g - mu,
        LibrationPoint::L3 => {
            g5 + (2.0 + mu) * g4 + (1.0 + 2.0 * mu) * g3
                - (1.0 - mu) * g2
                - 2.0 * (1.0 - mu) * g
                - (1.0 - mu)
        }
    }
}

fn quintic_derivative(mu: f64, point: LibrationPoint, g: f64) -> f64 {
    let g2 = g * g;
    let g3 = g2 * g;
    let g4 = g3 * g;
    match point {
        LibrationPoint::L1 => 5.0 * g4 - 4.0 * (3.0 - mu) * g3 + 3.0 * (3.0 - 2.0 * mu) * g2 - 2.0 * mu * g + 2.0 * mu,
        LibrationPoint::L2 => 5.0 * g4 + 4.0 * (3.0 - mu) * g3 + 3.0 * (3.0 - 2.0 * mu) * g2 - 2.0 * mu * g - 2.0 * mu,
        LibrationPoint::L3 => {
            5.0 * g4 + 4.0 * (2.0 + mu) * g3 + 3.0 * (1.0 + 2.0 * mu) * g2
                - 2.0 * (1.0 - mu) * g
                - 2.0 * (1.0 - mu)
        }
    }
}

fn solve_gamma(mu: f64, point: LibrationPoint) -> Result<f64> {
    // f(0) < 0 < f(1) for every point and every mu in (0, 1/2].
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let flo = quintic(mu, point, lo);
    let fhi = quintic(mu, point, hi);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::RootBracket { mu, point: point.name() });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if quintic(mu, point, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut g = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d = quintic_derivative(mu, point, g);
        if d == 0.0 {
            break;
        }
        let next = g - quintic(mu, point, g) / d;
        if !(next > 0.0 && next < 1.0) {
            break;
        }
        g = next;
    }
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::RootBracket { mu, point: point.name() });
    }
    Ok(g)
}

/// Legendre coefficient c_n of the local expansion of the potential.
pub fn legendre_coefficient(mu: f64, point: LibrationPoint, gamma: f64, n: usize) -> f64 {
    let nf = n as i32;
    let g3 = gamma.powi(3);
    match point {
        LibrationPoint::L1 => {
            (mu + (-1f64).powi(nf) * (1.0 - mu) * (gamma / (1.0 - gamma)).powi(nf + 1)) / g3
        }
        LibrationPoint::L2 => {
            (-1f64).powi(nf) * (mu + (1.0 - mu) * (gamma / (1.0 + gamma)).powi(nf + 1)) / g3
        }
        LibrationPoint::L3 => {
            (-1f64).powi(nf) * (1.0 - mu + mu * (gamma / (1.0 + gamma)).powi(nf + 1)) / g3
        }
    }
}

pub fn make_params(mu: f64, point: LibrationPoint, n_max: usize) -> Result<SystemParams> {
    if !(mu > 0.0 && mu <= 0.5) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu = {mu} outside (0, 0.5]")));
    }
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} must be at least 2")));
    }
    let gamma = solve_gamma(mu, point)?;
    let mut c = vec![0.0; n_max + 1];
    for (n, cn) in c.iter_mut().enumerate().skip(2) {
        *cn = legendre_coefficient(mu, point, gamma, n);
    }
    let params = SystemParams { mu, point, gamma, c, n_max };
    if params.c2() <= 1.0 {
        return Err(Error::DegenerateLinear { c2: params.c2() });
    }
    Ok(params)
}

impl SystemParams {
    pub fn c2(&self) -> f64 {
        self.c[2]
    }

    /// c_n from the table, or from the closed form beyond `n_max`.
    pub fn cn(&self, n: usize) -> f64 {
        if n < 2 {
            0.0
        } else if n <= self.n_max {
            self.c[n]
        } else {
            legendre_coefficient(self.mu, self.point, self.gamma, n)
        }
    }

    /// Same parameters with a longer (or shorter) c_n table.
    pub fn with_n_max(&self, n_max: usize) -> SystemParams {
        let mut c = vec![0.0; n_max.max(2) + 1];
        for (n, cn) in c.iter_mut().enumerate().skip(2) {
            *cn = self.cn(n);
        }
        SystemParams { c, n_max: n_max.max(2), ..self.clone() }
    }

    /// Sign of the local x axis relative to the synodic X axis.
    pub fn axis_sign(&self) -> f64 {
        match self.point {
            LibrationPoint::L3 => 1.0,
            _ => -1.0,
        }
    }

    /// Synodic X coordinate of the libration point.
    pub fn point_x(&self) -> f64 {
        let (mu, g) = (self.mu, self.gamma);
        match self.point {
            LibrationPoint::L1 => mu - 1.0 + g,
            LibrationPoint::L2 => mu - 1.0 - g,
            LibrationPoint::L3 => mu + g,
        }
    }

    /// The two primaries in local coordinates, larger one first.
    pub fn local_primaries(&self) -> [LocalPrimary; 2] {
        let (mu, g) = (self.mu, self.gamma);
        let g3 = g * g * g;
        let (a_big, a_small) = match self.point {
            LibrationPoint::L1 => (1.0 - 1.0 / g, 1.0),
            LibrationPoint::L2 => (-(1.0 + g) / g, -1.0),
            LibrationPoint::L3 => (-1.0, -(1.0 + g) / g),
        };
        [
            LocalPrimary { mass: 1.0 - mu, a: a_big, w: (1.0 - mu) / g3 },
            LocalPrimary { mass: mu, a: a_small, w: mu / g3 },
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFrequencies {
    pub omega0: f64,
    pub nu0: f64,
    pub lambda0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl LinearFrequencies {
    /// Constant term of the delta series, nu0^2 - omega0^2.
    pub fn d0000(&self) -> f64 {
        self.nu0 * self.nu0 - self.omega0 * self.omega0
    }
}

pub fn frequencies(params: &SystemParams) -> Result<LinearFrequencies> {
    let c2 = params.c2();
    if c2 <= 1.0 {
        return Err(Error::DegenerateLinear { c2 });
    }
    let disc = (9.0 * c2 * c2 - 8.0 * c2).sqrt();
    let omega0 = ((2.0 - c2 + disc) / 2.0).sqrt();
    let lambda0 = ((c2 - 2.0 + disc) / 2.0).sqrt();
    let nu0 = c2.sqrt();
    let kappa1 = -(omega0 * omega0 + 1.0 + 2.0 * c2) / (2.0 * omega0);
    let kappa2 = (lambda0 * lambda0 - 1.0 - 2.0 * c2) / (2.0 * lambda0);
    let kappa3 = (nu0 * nu0 - omega0 * omega0) / (nu0 * nu0 + lambda0 * lambda0);
    Ok(LinearFrequencies { omega0, nu0, lambda0, kappa1, kappa2, kappa3 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Synodic,
    Local,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Synodic => "synodic",
            Frame::Local => "local",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State6 {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub frame: Frame,
}

impl State6 {
    pub fn new(pos: [f64; 3], vel: [f64; 3], frame: Frame) -> Self {
        State6 { pos, vel, frame }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.pos[0], self.pos[1], self.pos[2], self.vel[0], self.vel[1], self.vel[2]]
    }

    pub fn from_array(v: [f64; 6], frame: Frame) -> Self {
        State6 { pos: [v[0], v[1], v[2]], vel: [v[3], v[4], v[5]], frame }
    }
}

fn expect_frame(state: &State6, frame: Frame) -> Result<()> {
    if state.frame != frame {
        return Err(Error::WrongFrame { expected: frame.name(), found: state.frame.name() });
    }
    Ok(())
}

pub fn local_from_synodic(params: &SystemParams, state: &State6) -> Result<State6> {
    expect_frame(state, Frame::Synodic)?;
    let s = params.axis_sign() * params.gamma;
    let g = params.gamma;
    let p = state.pos;
    let v = state.vel;
    Ok(State6 {
        pos: [(p[0] - params.point_x()) / s, p[1] / s, p[2] / g],
        vel: [v[0] / s, v[1] / s, v[2] / g],
        frame: Frame::Local,
    })
}

pub fn synodic_from_local(params: &SystemParams, state: &State6) -> Result<State6> {
    expect_frame(state, Frame::Local)?;
    let s = params.axis_sign() * params.gamma;
    let g = params.gamma;
    let p = state.pos;
    let v = state.vel;
    Ok(State6 {
        pos: [s * p[0] + params.point_x(), s * p[1], g * p[2]],
        vel: [s * v[0], s * v[1], g * v[2]],
        frame: Frame::Synodic,
    })
}

fn primary_distances(mu: f64, p: [f64; 3]) -> (f64, f64) {
    let yz = p[1] * p[1] + p[2] * p[2];
    let r1 = ((p[0] - mu).powi(2) + yz).sqrt();
    let r2 = ((p[0] - mu + 1.0).powi(2) + yz).sqrt();
    (r1, r2)
}

fn synodic_acceleration(mu: f64, p: [f64; 3], v: [f64; 3]) -> Result<[f64; 3]> {
    let (r1, r2) = primary_distances(mu, p);
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Collision { r1, r2 });
    }
    let k1 = (1.0 - mu) / (r1 * r1 * r1);
    let k2 = mu / (r2 * r2 * r2);
    let ox = p[0] - k1 * (p[0] - mu) - k2 * (p[0] - mu + 1.0);
    let oy = p[1] - (k1 + k2) * p[1];
    let oz = -(k1 + k2) * p[2];
    Ok([2.0 * v[1] + ox, -2.0 * v[0] + oy, oz])
}

/// Acceleration of the full model in the frame of `state`.
pub fn eom_rhs(params: &SystemParams, state: &State6) -> Result<[f64; 3]> {
    match state.frame {
        Frame::Synodic => synodic_acceleration(params.mu, state.pos, state.vel),
        Frame::Local => {
            let syn = synodic_from_local(params, state)?;
            let acc = synodic_acceleration(params.mu, syn.pos, syn.vel)?;
            let s = params.axis_sign() * params.gamma;
            Ok([acc[0] / s, acc[1] / s, acc[2] / params.gamma])
        }
    }
}

/// Effective potential of the synodic frame.
pub fn potential(mu: f64, p: [f64; 3]) -> Result<f64> {
    let (r1, r2) = primary_distances(mu, p);
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Collision { r1, r2 });
    }
    Ok(0.5 * (p[0] * p[0] + p[1] * p[1]) + (1.0 - mu) / r1 + mu / r2 + 0.5 * mu * (1.0 - mu))
}

pub fn jacobi_constant(params: &SystemParams, state: &State6) -> Result<f64> {
    expect_frame(state, Frame::Synodic)?;
    let v = state.vel;
    Ok(2.0 * potential(params.mu, state.pos)? - (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
}

/// Gradient of sum_{n=3}^{n_last} c_n rho^n P_n(x/rho) at a numeric point of the local frame.
pub fn legendre_gradient(params: &SystemParams, r: [f64; 3], n_last: usize) -> [f64; 3] {
    let [x, y, z] = r;
    let rho2 = x * x + y * y + z * z;
    let mut t_prev = 1.0; // T_{n-2}
    let mut t_cur = x; // T_{n-1}
    let mut r_prev = 0.0; // R_{n-4}
    let mut r_cur = -1.0; // R_{n-3}
    let mut g = [0.0; 3];
    // T_n and R_{n-2}, for n = 2, 3, ...
    for n in 2..=n_last {
        let nf = n as f64;
        let t_next = ((2.0 * nf - 1.0) / nf) * x * t_cur - ((nf - 1.0) / nf) * rho2 * t_prev;
        let r_n2 = if n == 2 {
            -1.0
        } else if n == 3 {
            -3.0 * x
        } else {
            let m = nf - 2.0;
            ((2.0 * m + 3.0) / (m + 2.0)) * x * r_cur
                - ((2.0 * m + 2.0) / (m + 2.0)) * t_prev
                - ((m + 1.0) / (m + 2.0)) * rho2 * r_prev
        };
        if n >= 3 {
            let cn = params.cn(n);
            g[0] += cn * nf * t_cur;
            g[1] += cn * y * r_n2;
            g[2] += cn * z * r_n2;
        }
        r_prev = r_cur;
        r_cur = r_n2;
        t_prev = t_cur;
        t_cur = t_next;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUN_EARTH: f64 = 3.040423398444176e-6;
    const EARTH_MOON: f64 = 1.215058191870689e-2;

    fn bisect_oracle(mu: f64, point: LibrationPoint) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if quintic(mu, point, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gamma_matches_bisection_and_hill_estimate() {
        let p = make_params(SUN_EARTH, LibrationPoint::L1, 10).unwrap();
        assert!(quintic(SUN_EARTH, LibrationPoint::L1, p.gamma).abs() < 1e-13);
        assert!((p.gamma - bisect_oracle(SUN_EARTH, LibrationPoint::L1)).abs() < 1e-14);
        let hill = (SUN_EARTH / 3.0).cbrt();
        assert!((p.gamma - hill).abs() / hill < 0.05);
    }

    #[test]
    fn gamma_vanishes_with_mu() {
        let p = make_params(1e-15, LibrationPoint::L1, 4).unwrap();
        assert!(p.gamma < 1e-4);
        assert!(quintic(1e-15, LibrationPoint::L1, p.gamma).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_mu() {
        assert!(matches!(make_params(0.0, LibrationPoint::L1, 4), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_params(0.6, LibrationPoint::L2, 4), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_params(0.1, LibrationPoint::L2, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn closed_form_cn_matches_primary_sum() {
        for &mu in &[SUN_EARTH, EARTH_MOON, 0.3] {
            for point in LibrationPoint::ALL {
                let p = make_params(mu, point, 12).unwrap();
                for n in 2..=12 {
                    let direct: f64 = p
                        .local_primaries()
                        .iter()
                        .map(|pr| pr.w * pr.a.powi(n as i32) / pr.a.abs().powi(2 * n as i32 + 1))
                        .sum();
                    let rel = (direct - p.c[n]).abs() / p.c[n].abs();
                    assert!(rel < 1e-12, "{point} n={n} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn local_primaries_map_to_synodic_positions() {
        for point in LibrationPoint::ALL {
            let p = make_params(EARTH_MOON, point, 4).unwrap();
            let [big, small] = p.local_primaries();
            let to_syn = |a: f64| synodic_from_local(&p, &State6::new([a, 0.0, 0.0], [0.0; 3], Frame::Local)).unwrap().pos[0];
            assert!((to_syn(big.a) - EARTH_MOON).abs() < 1e-14);
            assert!((to_syn(small.a) - (EARTH_MOON - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn frequencies_reject_degenerate_c2() {
        let mut p = make_params(SUN_EARTH, LibrationPoint::L1, 4).unwrap();
        p.c[2] = 1.0;
        assert!(matches!(frequencies(&p), Err(Error::DegenerateLinear { .. })));
    }

    #[test]
    fn frequencies_solve_the_linear_system() {
        let p = make_params(EARTH_MOON, LibrationPoint::L2, 4).unwrap();
        let f = frequencies(&p).unwrap();
        let c2 = p.c2();
        assert!((f.nu0 * f.nu0 - c2).abs() < 1e-15 * c2);
        // x = cos(w t), y = k1 sin(w t)
        let (w, k1) = (f.omega0, f.kappa1);
        assert!((-w * w - 2.0 * w * k1 - (1.0 + 2.0 * c2)).abs() < 1e-12);
        assert!((-w * w * k1 - 2.0 * w + (c2 - 1.0) * k1).abs() < 1e-12);
        // x = exp(l t), y = k2 exp(l t)
        let (l, k2) = (f.lambda0, f.kappa2);
        assert!((l * l - 2.0 * l * k2 - (1.0 + 2.0 * c2)).abs() < 1e-12);
        assert!((l * l * k2 + 2.0 * l + (c2 - 1.0) * k2).abs() < 1e-12);
    }

    #[test]
    fn transforms_hit_documented_points() {
        let p = make_params(SUN_EARTH, LibrationPoint::L1, 4).unwrap();
        let s = synodic_from_local(&p, &State6::new([0.0; 3], [0.0; 3], Frame::Local)).unwrap();
        assert_eq!(s.pos, [SUN_EARTH - 1.0 + p.gamma, 0.0, 0.0]);
        let p3 = make_params(SUN_EARTH, LibrationPoint::L3, 4).unwrap();
        let s3 = synodic_from_local(&p3, &State6::new([1.0, 0.0, 0.0], [0.0; 3], Frame::Local)).unwrap();
        assert!((s3.pos[0] - (SUN_EARTH + 2.0 * p3.gamma)).abs() < 1e-15);
    }

    #[test]
    fn transforms_reject_wrong_frame() {
        let p = make_params(SUN_EARTH, LibrationPoint::L1, 4).unwrap();
        let st = State6::new([0.0; 3], [0.0; 3], Frame::Local);
        assert!(matches!(local_from_synodic(&p, &st), Err(Error::WrongFrame { .. })));
        assert!(matches!(jacobi_constant(&p, &st), Err(Error::WrongFrame { .. })));
    }

    #[test]
    fn libration_points_are_equilibria() {
        for &mu in &[SUN_EARTH, EARTH_MOON] {
            for point in LibrationPoint::ALL {
                let p = make_params(mu, point, 4).unwrap();
                let st = State6::new([p.point_x(), 0.0, 0.0], [0.0; 3], Frame::Synodic);
                let a = eom_rhs(&p, &st).unwrap();
                assert!(a.iter().all(|v| v.abs() < 1e-13), "{point}: {a:?}");
                let c = jacobi_constant(&p, &st).unwrap();
                assert!((c - 2.0 * potential(mu, st.pos).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn collision_is_an_error() {
        let p = make_params(EARTH_MOON, LibrationPoint::L1, 4).unwrap();
        let st = State6::new([EARTH_MOON, 0.0, 0.0], [0.0; 3], Frame::Synodic);
        assert!(matches!(eom_rhs(&p, &st), Err(Error::Collision { .. })));
    }

    #[test]
    fn local_jacobian_reproduces_linear_coefficients() {
        for &mu in &[SUN_EARTH, EARTH_MOON] {
            for point in LibrationPoint::ALL {
                let p = make_params(mu, point, 4).unwrap();
                let c2 = p.c2();
                let h = 1e-6;
                let acc = |x: [f64; 6]| eom_rhs(&p, &State6::from_array(x, Frame::Local)).unwrap();
                let mut jac = [[0.0; 6]; 3];
                for col in 0..6 {
                    let mut a = [0.0; 6];
                    let mut b = [0.0; 6];
                    a[col] = h;
                    b[col] = -h;
                    let (fa, fb) = (acc(a), acc(b));
                    for row in 0..3 {
                        jac[row][col] = (fa[row] - fb[row]) / (2.0 * h);
                    }
                }
                let want = [
                    [1.0 + 2.0 * c2, 0.0, 0.0, 0.0, 2.0, 0.0],
                    [0.0, 1.0 - c2, 0.0, -2.0, 0.0, 0.0],
                    [0.0, 0.0, -c2, 0.0, 0.0, 0.0],
                ];
                // Central differences of local accelerations lose ~1e-16 / (gamma h) to cancellation.
                let tol = 1e-12_f64.max(1e-15 / (p.gamma * h)) * c2;
                for row in 0..3 {
                    for col in 0..6 {
                        let d = (jac[row][col] - want[row][col]).abs();
                        assert!(d < tol, "{point} mu={mu} J[{row}][{col}] off by {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn mirror_and_planar_symmetry() {
        let p = make_params(EARTH_MOON, LibrationPoint::L2, 4).unwrap();
        let st = State6::new([-1.1, 0.02, 0.03], [0.01, -0.02, 0.05], Frame::Synodic);
        let mut mirrored = st;
        mirrored.pos[2] = -st.pos[2];
        mirrored.vel[2] = -st.vel[2];
        let (a, b) = (eom_rhs(&p, &st).unwrap(), eom_rhs(&p, &mirrored).unwrap());
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        assert_eq!(a[2], -b[2]);
        let planar = State6::new([-1.1, 0.02, 0.0], [0.01, -0.02, 0.3], Frame::Synodic);
        assert_eq!(eom_rhs(&p, &planar).unwrap()[2], 0.0);
        let mut back = st;
        back.vel = [-st.vel[0], -st.vel[1], -st.vel[2]];
        assert_eq!(jacobi_constant(&p, &st).unwrap(), jacobi_constant(&p, &back).unwrap());
    }

    #[test]
    fn legendre_gradient_matches_truncated_full_model() {
        // Earth-Moon keeps the synodic round trip well conditioned.
        let p = make_params(EARTH_MOON, LibrationPoint::L1, 4).unwrap();
        let c2 = p.c2();
        for &scale in &[0.05, 0.02] {
            let r = [0.7 * scale, -0.5 * scale, 0.4 * scale];
            let acc = eom_rhs(&p, &State6::new(r, [0.0; 3], Frame::Local)).unwrap();
            let lin = [(1.0 + 2.0 * c2) * r[0], (1.0 - c2) * r[1], -c2 * r[2]];
            let g = legendre_gradient(&p, r, 10);
            for i in 0..3 {
                let d = (acc[i] - lin[i] - g[i]).abs();
                assert!(d < 1e-12 + 10.0 * (2.0 * scale / p.gamma.min(1.0 - p.gamma)).powi(10), "{i}: {d}");
            }
        }
    }
}
