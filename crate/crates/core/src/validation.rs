//! Numerical integration of the full model and series-versus-truth checks.

use rayon::prelude::*;

use crate::bifurcation::solve_eta;
use crate::construct::SolutionSet;
use crate::error::{Error, Result};
use crate::model::{eom_rhs, jacobi_constant, synodic_from_local, Frame, State6, SystemParams};
use crate::orbit::{delta_value, CompiledOrbit, OrbitSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Dormand-Prince 5(4) with fourth-order dense output.
    Dopri5,
}

impl Method {
    pub fn order(self) -> &'static str {
        match self {
            Method::Dopri5 => "5(4)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rtol: 1e-12, atol: 1e-12, max_step: 0.5, max_steps: 2_000_000, method: Method::Dopri5 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegratorConfig { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(1e-14..=1e-6).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v:e} outside [1e-14, 1e-6]")));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max step must be positive".into()));
        }
        Ok(())
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

type Vec6 = [f64; 6];

fn rhs(params: &SystemParams, y: &Vec6) -> Result<Vec6> {
    let a = eom_rhs(params, &State6::from_array(*y, Frame::Synodic))?;
    Ok([y[3], y[4], y[5], a[0], a[1], a[2]])
}

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rc: [Vec6; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec6 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rc;
        std::array::from_fn(|i| r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i]))))
    }

    pub fn end(&self) -> Vec6 {
        std::array::from_fn(|i| self.rc[0][i] + self.rc[1][i])
    }
}

/// Adaptive Dormand-Prince stepper for the synodic equations of motion.
pub struct Stepper<'a> {
    params: &'a SystemParams,
    cfg: IntegratorConfig,
    t: f64,
    t_end: f64,
    y: Vec6,
    k1: Vec6,
    h: f64,
    steps: usize,
}

fn scaled_norm(v: &Vec6, y0: &Vec6, y1: &Vec6, cfg: &IntegratorConfig) -> f64 {
    let mut sum = 0.0;
    for i in 0..6 {
        let sk = cfg.atol + cfg.rtol * y0[i].abs().max(y1[i].abs());
        sum += (v[i] / sk).powi(2);
    }
    (sum / 6.0).sqrt()
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a SystemParams, state0: &State6, t_end: f64, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if state0.frame != Frame::Synodic {
            return Err(Error::WrongFrame { expected: "synodic", found: state0.frame.name() });
        }
        let y = state0.as_array();
        if !t_end.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("initial state and time span must be finite".into()));
        }
        let k1 = rhs(params, &y)?;
        let mut s = Stepper { params, cfg, t: 0.0, t_end, y, k1, h: 0.0, steps: 0 };
        s.h = s.initial_step()?;
        Ok(s)
    }

    fn initial_step(&self) -> Result<f64> {
        let dir = self.t_end.signum();
        let sk = |i: usize| self.cfg.atol + self.cfg.rtol * self.y[i].abs();
        let norm = |v: &Vec6| ((0..6).map(|i| (v[i] / sk(i)).powi(2)).sum::<f64>() / 6.0).sqrt();
        let (d0, d1) = (norm(&self.y), norm(&self.k1));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: Vec6 = std::array::from_fn(|i| self.y[i] + dir * h0 * self.k1[i]);
        let f1 = rhs(self.params, &y1)?;
        let d2 = norm(&std::array::from_fn(|i| f1[i] - self.k1[i])) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok(dir * (100.0 * h0).min(h1).min(self.cfg.max_step))
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> Vec6 {
        self.y
    }

    /// Advance one accepted step; None once the end of the span is reached.
    pub fn step(&mut self) -> Result<Option<DenseStep>> {
        let remaining = self.t_end - self.t;
        if remaining == 0.0 {
            return Ok(None);
        }
        let mut facmax = 10.0;
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::StepLimit { t: self.t, steps: self.steps });
            }
            let mut h = self.h.abs().min(self.cfg.max_step).copysign(remaining);
            let last = h.abs() >= remaining.abs();
            if last {
                h = remaining;
            }
            if h.abs() <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let mut k = [[0.0; 6]; 7];
            k[0] = self.k1;
            for s in 1..7 {
                let ys: Vec6 = std::array::from_fn(|i| {
                    self.y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()
                });
                k[s] = rhs(self.params, &ys)?;
            }
            // stage 7 was evaluated at the new solution (FSAL)
            let y1: Vec6 = std::array::from_fn(|i| self.y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>());
            let err: Vec6 = std::array::from_fn(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>());
            let en = scaled_norm(&err, &self.y, &y1, &self.cfg);
            self.steps += 1;
            if !en.is_finite() {
                self.h = h * 0.2;
                facmax = 1.0;
                continue;
            }
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, facmax);
            if en <= 1.0 {
                let mut rc = [[0.0; 6]; 5];
                for i in 0..6 {
                    let dy = y1[i] - self.y[i];
                    let bspl = h * k[0][i] - dy;
                    rc[0][i] = self.y[i];
                    rc[1][i] = dy;
                    rc[2][i] = bspl;
                    rc[3][i] = dy - h * k[6][i] - bspl;
                    rc[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
                }
                let step = DenseStep { t0: self.t, h, rc };
                self.t = if last { self.t_end } else { self.t + h };
                self.y = y1;
                self.k1 = k[6];
                self.h = h * fac;
                return Ok(Some(step));
            }
            self.h = h * fac;
            facmax = 1.0;
        }
    }
}

/// Accepted steps of one integration, queryable anywhere in the span.
#[derive(Clone, Debug)]
pub struct DenseTrajectory {
    pub t_end: f64,
    steps: Vec<DenseStep>,
    y0: Vec6,
}

impl DenseTrajectory {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    pub fn eval(&self, t: f64) -> Result<State6> {
        let (lo, hi) = if self.t_end >= 0.0 { (0.0, self.t_end) } else { (self.t_end, 0.0) };
        if !(t >= lo && t <= hi) {
            return Err(Error::InvalidParameter(format!("t = {t} outside the integrated span")));
        }
        if self.steps.is_empty() {
            return Ok(State6::from_array(self.y0, Frame::Synodic));
        }
        let fwd = self.t_end >= 0.0;
        let i = self.steps.partition_point(|s| if fwd { s.t1() < t } else { s.t1() > t });
        let step = &self.steps[i.min(self.steps.len() - 1)];
        let y = if t == step.t1() { step.end() } else { step.eval(t) };
        Ok(State6::from_array(y, Frame::Synodic))
    }

    pub fn final_state(&self) -> State6 {
        State6::from_array(self.steps.last().map_or(self.y0, DenseStep::end), Frame::Synodic)
    }
}

/// Integrate the synodic equations from t = 0 to `t_end` (negative runs backward).
pub fn integrate(params: &SystemParams, state0: &State6, t_end: f64, cfg: &IntegratorConfig) -> Result<DenseTrajectory> {
    let mut st = Stepper::new(params, state0, t_end, *cfg)?;
    let mut steps = Vec::new();
    while let Some(s) = st.step()? {
        steps.push(s);
    }
    Ok(DenseTrajectory { t_end, steps, y0: state0.as_array() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceRecord {
    pub alpha1: f64,
    pub alpha2: f64,
    pub eta: f64,
    pub order: usize,
    /// Time until the synodic position error reaches the threshold.
    pub span: f64,
    /// Same with the error measured in local-frame units.
    pub span_local: f64,
    pub threshold: f64,
    pub horizon: f64,
    /// Largest Jacobi-constant change seen along the integration, relative
    /// to max(1, |C(0)|).
    pub jacobi_drift: f64,
}

/// Time-span resolution of the crossing search.
const BISECT_TOL: f64 = 1e-9;

fn position_error(orbit: &CompiledOrbit, params: &SystemParams, t: f64, y: &Vec6) -> Result<f64> {
    let s = synodic_from_local(params, &orbit.state(t)?)?;
    Ok((0..3).map(|i| (s.pos[i] - y[i]).powi(2)).sum::<f64>().sqrt())
}

/// First time in (step.t0, t] where err(t) >= level, given it holds at `t`.
fn bisect(
    orbit: &CompiledOrbit,
    params: &SystemParams,
    step: &DenseStep,
    mut lo: f64,
    mut hi: f64,
    level: f64,
) -> Result<f64> {
    while (hi - lo).abs() > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if position_error(orbit, params, mid, &step.eval(mid))? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Integrate from the series state at t = 0 and find when the position
/// error first reaches `threshold`. An infinite threshold returns the horizon.
pub fn divergence_time(
    sol: &SolutionSet,
    spec: &OrbitSpec,
    threshold: f64,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<DivergenceRecord> {
    if !(threshold > 0.0) || !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter("threshold and horizon must be positive".into()));
    }
    let orbit = CompiledOrbit::new(sol, spec)?;
    let params = &sol.params;
    let s0 = synodic_from_local(params, &orbit.state(0.0)?)?;
    let c0 = jacobi_constant(params, &s0)?;
    let local_level = threshold * params.gamma;
    let mut rec = DivergenceRecord {
        alpha1: spec.alpha[0],
        alpha2: spec.alpha[1],
        eta: spec.eta,
        order: spec.order,
        span: horizon,
        span_local: horizon,
        threshold,
        horizon,
        jacobi_drift: 0.0,
    };
    let mut st = Stepper::new(params, &s0, horizon, *cfg)?;
    let mut local_found = false;
    while let Some(step) = st.step()? {
        let y1 = step.end();
        let c = jacobi_constant(params, &State6::from_array(y1, Frame::Synodic))?;
        rec.jacobi_drift = rec.jacobi_drift.max((c - c0).abs() / c0.abs().max(1.0));
        let mut prev = step.t0;
        for frac in [0.5, 1.0] {
            let t = step.t0 + frac * step.h;
            let y = if frac == 1.0 { y1 } else { step.eval(t) };
            let e = position_error(&orbit, params, t, &y)?;
            if !local_found && e >= local_level {
                rec.span_local = bisect(&orbit, params, &step, prev, t, local_level)?;
                local_found = true;
            }
            if e >= threshold {
                rec.span = bisect(&orbit, params, &step, prev, t, threshold)?;
                return Ok(rec);
            }
            prev = t;
        }
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldFamily {
    /// eta = 0
    Lissajous,
    /// eta = smallest positive root of the bifurcation equation
    Quasihalo,
}

impl ManifoldFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lissajous" => Some(ManifoldFamily::Lissajous),
            "quasihalo" => Some(ManifoldFamily::Quasihalo),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldFamily::Lissajous => "lissajous",
            ManifoldFamily::Quasihalo => "quasihalo",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceGrid {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha3: f64,
    pub threshold: f64,
    pub horizon: f64,
}

impl DivergenceGrid {
    /// Centers of an n x n partition of [0, 0.2]^2, alpha3 = 0.001,
    /// threshold 1e-6, horizon 2 pi.
    pub fn standard(n: usize) -> Self {
        let centers: Vec<f64> = (0..n).map(|i| 0.2 * (i as f64 + 0.5) / n as f64).collect();
        DivergenceGrid {
            alpha1: centers.clone(),
            alpha2: centers,
            alpha3: 1e-3,
            threshold: 1e-6,
            horizon: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub alpha1: f64,
    pub alpha2: f64,
    pub record: Option<DivergenceRecord>,
    /// Why there is no record (no orbit of the family, or a failed run).
    pub note: Option<String>,
}

impl GridCell {
    /// Divergence span, or 0 when the cell has no record.
    pub fn span(&self) -> f64 {
        self.record.map_or(0.0, |r| r.span)
    }
}

/// `trunc` is the solution truncated at `order`.
fn family_spec(trunc: &SolutionSet, family: ManifoldFamily, alpha: [f64; 4], order: usize) -> Result<OrbitSpec> {
    let eta = match family {
        ManifoldFamily::Lissajous => 0.0,
        ManifoldFamily::Quasihalo => {
            let report = solve_eta(trunc, &alpha)?;
            let first = report.positive_roots().next();
            first.ok_or_else(|| Error::NoEtaRoot(format!("no positive root at alpha {alpha:?}")))?
        }
    };
    Ok(OrbitSpec::new(alpha, eta, order))
}

/// Divergence time on every (alpha1, alpha2) cell of the unstable manifold
/// (alpha4 = 0, zero phases). Cells are returned alpha1-major.
pub fn divergence_grid(
    sol: &SolutionSet,
    order: usize,
    family: ManifoldFamily,
    grid: &DivergenceGrid,
    cfg: &IntegratorConfig,
) -> Result<Vec<GridCell>> {
    cfg.validate()?;
    if order == 0 || order > sol.order {
        return Err(Error::Incomplete { have: sol.order, need: order });
    }
    let trunc = sol.truncate(order);
    let cells: Vec<(f64, f64)> =
        grid.alpha1.iter().flat_map(|&a1| grid.alpha2.iter().map(move |&a2| (a1, a2))).collect();
    Ok(cells
        .par_iter()
        .map(|&(a1, a2)| {
            let alpha = [a1, a2, grid.alpha3, 0.0];
            let run = family_spec(&trunc, family, alpha, order)
                .and_then(|spec| divergence_time(&trunc, &spec, grid.threshold, grid.horizon, cfg));
            match run {
                Ok(r) => GridCell { alpha1: a1, alpha2: a2, record: Some(r), note: None },
                Err(e) => GridCell { alpha1: a1, alpha2: a2, record: None, note: Some(e.to_string()) },
            }
        })
        .collect())
}

/// Fraction of cells where `high` lasts at least as long as `low`.
pub fn improvement_fraction(low: &[GridCell], high: &[GridCell]) -> f64 {
    assert_eq!(low.len(), high.len());
    if low.is_empty() {
        return 0.0;
    }
    let better = low.iter().zip(high).filter(|(l, h)| h.span() >= l.span() - BISECT_TOL).count();
    better as f64 / low.len() as f64
}

/// Cells whose span reaches `t_conv`.
pub fn convergence_cells(cells: &[GridCell], t_conv: f64) -> usize {
    cells.iter().filter(|c| c.span() >= t_conv).count()
}

/// Default time span that marks a cell as converged.
pub const CONVERGED_SPAN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualScaling {
    pub epsilons: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

/// Terms of the numeric Legendre sum used for the truth side of the residual.
const RESIDUAL_LEGENDRE_TERMS: usize = 60;

/// Largest local equation-of-motion residual over one theta1 period,
/// coupling term eta * Delta * x included.
pub fn max_residual(sol: &SolutionSet, spec: &OrbitSpec, samples: usize) -> Result<f64> {
    let params = sol.params.with_n_max(RESIDUAL_LEGENDRE_TERMS);
    let orbit = CompiledOrbit::new_unchecked(sol, spec)?;
    let c2 = params.c2();
    let ed = if spec.eta != 0.0 { spec.eta * delta_value(sol, spec).0 } else { 0.0 };
    let period = orbit.period();
    let mut worst: f64 = 0.0;
    for i in 0..samples.max(1) {
        let t = period * i as f64 / samples.max(1) as f64;
        let [p, v, a] = orbit.eval(t, 2)?;
        let g = crate::model::legendre_gradient(&params, p, RESIDUAL_LEGENDRE_TERMS);
        let r = [
            a[0] - 2.0 * v[1] - (1.0 + 2.0 * c2) * p[0] - g[0],
            a[1] + 2.0 * v[0] + (c2 - 1.0) * p[1] - g[1],
            a[2] + c2 * p[2] - g[2] - ed * p[0],
        ];
        worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    Ok(worst)
}

/// Least-squares slope of log(residual) against log(epsilon) along
/// epsilon * direction with eta held fixed.
pub fn residual_scaling(
    sol: &SolutionSet,
    direction: [f64; 4],
    eta: f64,
    epsilons: &[f64],
    order: usize,
) -> Result<ResidualScaling> {
    if direction.iter().all(|d| *d == 0.0) || direction.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("direction must be finite and nonzero".into()));
    }
    if epsilons.len() < 2 || epsilons.windows(2).any(|w| !(w[1] < w[0])) || epsilons.iter().any(|e| !(*e >= 1e-4)) {
        return Err(Error::InvalidParameter("epsilons must be decreasing, >= 1e-4, at least two".into()));
    }
    let residuals = epsilons
        .iter()
        .map(|&e| {
            let spec = OrbitSpec::new(direction.map(|d| e * d), eta, order);
            max_residual(sol, &spec, 64)
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(ResidualScaling { epsilons: epsilons.to_vec(), residuals, slope: sxy / sxx })
}
