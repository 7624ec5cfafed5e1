//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bifurcation::{solution_count_map, solve_eta, CountGrid, EtaSolutionReport};
use crate::construct::{build_with, BuildOptions, SolutionSet};
use crate::error::{Error, Result};
use crate::io::{load_coefficients, num, save_coefficients, CsvTable};
use crate::model::{make_params, Frame, LibrationPoint};
use crate::orbit::{classify, manifold_branch, resolve_eta, sample_trajectory, Branch, OrbitSpec};
use crate::validation::{
    convergence_cells, divergence_grid, improvement_fraction, residual_scaling, DivergenceGrid,
    DivergenceRecord, GridCell, IntegratorConfig, ManifoldFamily, CONVERGED_SPAN,
};
use crate::{EARTH_MOON_MU, SUN_EARTH_MU};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LPSERIES_THREADS";

#[derive(Parser, Debug)]
#[command(name = "lpseries", version, about = "Lindstedt-Poincare series near the collinear libration points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the series and write a coefficient file.
    Build(BuildArgs),
    /// Solve the bifurcation equation, or map root counts over a grid.
    Eta(EtaArgs),
    /// Sample an orbit (or a pair of manifold branches) as CSV.
    Orbit(OrbitArgs),
    /// Compare series orbits with numerical integration.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum System {
    SunEarth,
    EarthMoon,
}

impl System {
    pub fn mu(self) -> f64 {
        match self {
            System::SunEarth => SUN_EARTH_MU,
            System::EarthMoon => EARTH_MOON_MU,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Point {
    #[value(name = "L1", alias = "l1")]
    L1,
    #[value(name = "L2", alias = "l2")]
    L2,
    #[value(name = "L3", alias = "l3")]
    L3,
}

impl From<Point> for LibrationPoint {
    fn from(p: Point) -> Self {
        match p {
            Point::L1 => LibrationPoint::L1,
            Point::L2 => LibrationPoint::L2,
            Point::L3 => LibrationPoint::L3,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FrameArg {
    Synodic,
    Local,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FamilyArg {
    Lissajous,
    Quasihalo,
}

impl From<FamilyArg> for ManifoldFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lissajous => ManifoldFamily::Lissajous,
            FamilyArg::Quasihalo => ManifoldFamily::Quasihalo,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ManifoldArg {
    Unstable,
    Stable,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long, value_enum, conflicts_with = "mu", required_unless_present = "mu")]
    pub system: Option<System>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_enum)]
    pub point: Point,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=25))]
    pub order: u32,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = BuildOptions::default().max_terms)]
    pub max_terms: usize,
    /// Print the term count after each order.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Args, Debug)]
pub struct EtaArgs {
    #[arg(long)]
    pub coef: PathBuf,
    #[arg(long, num_args = 4, value_names = ["A1", "A2", "A3", "A4"], allow_negative_numbers = true, conflicts_with = "grid")]
    pub alpha: Option<Vec<f64>>,
    /// Root-count map with N points per axis.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid: Option<u32>,
    /// Truncation order (defaults to the file's order; 3 for grid mode).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub order: Option<u32>,
    #[arg(long, default_value_t = 100.0)]
    pub eta_max: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[arg(long)]
    pub coef: PathBuf,
    #[arg(long, num_args = 4, value_names = ["A1", "A2", "A3", "A4"], allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Coupling coefficient used as given.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "eta_near")]
    pub eta: Option<f64>,
    /// Solve for the root of the bifurcation equation nearest this value.
    #[arg(long, allow_negative_numbers = true)]
    pub eta_near: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["PHI1", "PHI2"], allow_negative_numbers = true)]
    pub phi: Option<Vec<f64>>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub order: Option<u32>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t0: f64,
    /// End time (defaults to one theta1 period).
    #[arg(long, allow_negative_numbers = true)]
    pub t1: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "synodic")]
    pub frame: FrameArg,
    /// Emit both branches of this manifold; alpha3 = alpha4 = 0 in --alpha.
    #[arg(long, value_enum, requires = "epsilon")]
    pub manifold: Option<ManifoldArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(subcommand)]
    pub mode: ValidateMode,
}

#[derive(Args, Debug, Clone)]
pub struct IntegratorArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

impl IntegratorArgs {
    fn config(&self) -> IntegratorConfig {
        IntegratorConfig { rtol: self.rtol, atol: self.atol, ..IntegratorConfig::default() }
    }
}

#[derive(Subcommand, Debug)]
pub enum ValidateMode {
    /// Divergence time of one unstable-manifold orbit.
    Cell {
        #[arg(long)]
        coef: PathBuf,
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        alpha2: f64,
        #[arg(long, default_value_t = 1e-3)]
        alpha3: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        order: Option<u32>,
        #[arg(long, value_enum, default_value = "lissajous")]
        family: FamilyArg,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
        horizon: f64,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Divergence-time maps over (alpha1, alpha2) for several orders.
    Grid {
        #[arg(long)]
        coef: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [9u32, 15])]
        orders: Vec<u32>,
        #[arg(long, value_enum, default_value = "lissajous")]
        family: FamilyArg,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        /// Output prefix; one CSV per order.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Log-log slope of the equation residual against amplitude.
    Residual {
        #[arg(long)]
        coef: PathBuf,
        #[arg(long, value_delimiter = ',')]
        orders: Vec<u32>,
        #[arg(long, num_args = 4, value_names = ["D1", "D2", "D3", "D4"], allow_negative_numbers = true)]
        direction: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 5e-3, 2.5e-3])]
        epsilons: Vec<f64>,
    },
}

/// Apply the thread-count environment variable to the global pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn sol_order(sol: &SolutionSet, order: Option<u32>) -> Result<usize> {
    let n = order.map_or(sol.order, |o| o as usize);
    if n > sol.order {
        return Err(Error::Incomplete { have: sol.order, need: n });
    }
    Ok(n)
}

fn alpha4(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => crate::io::write_atomic(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

pub fn format_report(r: &EtaSolutionReport) -> String {
    let mut s = format!("alpha = [{}, {}, {}, {}]\n", r.alpha[0], r.alpha[1], r.alpha[2], r.alpha[3]);
    s += &format!("case: {}\n", r.case);
    s += &format!("discriminant (third order): {}\n", num(r.discriminant));
    if r.roots.is_empty() {
        s += "no nonzero roots; η = 0 admissible\n";
    } else {
        for (root, m) in r.roots.iter().zip(&r.multiplicities) {
            s += &format!("root: {}{}\n", num(*root), if *m > 1 { format!(" (multiplicity {m})") } else { String::new() });
        }
        s += "η = 0 admissible\n";
    }
    for (re, im) in &r.rejected {
        s += &format!("rejected u = {} {:+}i\n", num(*re), im);
    }
    s
}

fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let mu = a.system.map(System::mu).or(a.mu).ok_or_else(|| Error::InvalidParameter("need --system or --mu".into()))?;
    let order = a.order as usize;
    let params = make_params(mu, a.point.into(), order + 1)?;
    let opts = BuildOptions { max_terms: a.max_terms, ..BuildOptions::default() };
    let mut log = Vec::new();
    let sol = build_with(&params, order, opts, |n, terms| {
        if a.progress {
            log.push(format!("order {n}: {terms} terms"));
        }
    })?;
    for l in log {
        writeln!(out, "{l}")?;
    }
    save_coefficients(&sol, &a.output)?;
    writeln!(out, "wrote {} ({} terms, order {})", a.output.display(), sol.term_count(), sol.order)?;
    Ok(())
}

fn cmd_eta(a: &EtaArgs, out: &mut dyn Write) -> Result<()> {
    let sol = load_coefficients(&a.coef)?;
    if let Some(n) = a.grid {
        let order = sol_order(&sol, a.order.or(Some(3)))?;
        let grid = CountGrid { eta_max: a.eta_max, ..CountGrid::standard(n as usize) };
        let cells = solution_count_map(&sol.truncate(order), &grid)?;
        let mut t = CsvTable::new(&["alpha1", "alpha2", "alpha3alpha4", "root_count", "case"]);
        t.comment(format!("order={order} eta_max={}", num(a.eta_max)));
        for c in cells {
            t.push(vec![num(c.alpha1), num(c.alpha2), num(c.alpha34), c.count.to_string(), c.case.to_string()]);
        }
        return emit(out, a.output.as_deref(), &t.render());
    }
    let alpha = a.alpha.as_deref().map(alpha4).ok_or_else(|| Error::InvalidParameter("need --alpha or --grid".into()))?;
    let order = sol_order(&sol, a.order)?;
    let report = solve_eta(&sol.truncate(order), &alpha)?;
    emit(out, a.output.as_deref(), &format_report(&report))
}

fn trajectory_table(sol: &SolutionSet, spec: &OrbitSpec, a: &OrbitArgs, label: &str) -> Result<CsvTable> {
    let frame = match a.frame {
        FrameArg::Synodic => Frame::Synodic,
        FrameArg::Local => Frame::Local,
    };
    let class = classify(sol, spec)?;
    let times: Vec<f64> = if spec.alpha.iter().all(|v| *v == 0.0) {
        vec![a.t0]
    } else {
        let t1 = match a.t1 {
            Some(t) => t,
            None => a.t0 + crate::orbit::CompiledOrbit::new(sol, spec)?.period(),
        };
        let n = a.samples.max(2);
        (0..n).map(|i| a.t0 + (t1 - a.t0) * i as f64 / (n - 1) as f64).collect()
    };
    let states = sample_trajectory(sol, spec, &times, frame)?;
    let mut t = CsvTable::new(&["t", "x", "y", "z", "vx", "vy", "vz"]);
    let al = spec.alpha;
    t.comment(format!(
        "alpha=[{}, {}, {}, {}] phi=[{}, {}] eta={} order={} frame={}",
        num(al[0]),
        num(al[1]),
        num(al[2]),
        num(al[3]),
        num(spec.phi[0]),
        num(spec.phi[1]),
        num(spec.eta),
        spec.order,
        frame.name()
    ));
    t.comment(format!("class={class}{label}"));
    for (time, s) in times.iter().zip(states) {
        let v = s.as_array();
        t.push_nums(&[*time, v[0], v[1], v[2], v[3], v[4], v[5]]);
    }
    Ok(t)
}

fn branch_path(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    base.with_file_name(format!("{stem}.{tag}{ext}"))
}

fn cmd_orbit(a: &OrbitArgs, out: &mut dyn Write) -> Result<()> {
    let sol = load_coefficients(&a.coef)?;
    let order = sol_order(&sol, a.order)?;
    let phi = a.phi.as_deref().map_or([0.0, 0.0], |p| [p[0], p[1]]);
    let mut spec = OrbitSpec::new(alpha4(&a.alpha), a.eta.unwrap_or(0.0), order).with_phase(phi[0], phi[1]);
    if let Some(near) = a.eta_near {
        spec.eta = resolve_eta(&sol, &spec, near)?;
    }
    let Some(kind) = a.manifold else {
        let t = trajectory_table(&sol, &spec, a, "")?;
        return emit(out, a.output.as_deref(), &t.render());
    };
    let eps = a.epsilon.unwrap_or(0.0);
    let branches = match kind {
        ManifoldArg::Unstable => [Branch::UnstablePlus, Branch::UnstableMinus],
        ManifoldArg::Stable => [Branch::StablePlus, Branch::StableMinus],
    };
    let base = a.output.clone().ok_or_else(|| Error::InvalidParameter("--manifold needs --output".into()))?;
    for (b, tag) in branches.into_iter().zip(["plus", "minus"]) {
        let bspec = manifold_branch(&sol, &spec, b, eps)?;
        let t = trajectory_table(&sol, &bspec, a, &format!(" branch={}", b.name()))?;
        let path = branch_path(&base, tag);
        t.save(&path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn record_row(r: &DivergenceRecord) -> Vec<String> {
    vec![
        num(r.alpha1),
        num(r.alpha2),
        num(r.eta),
        r.order.to_string(),
        num(r.span),
        num(r.span_local),
        num(r.threshold),
        num(r.jacobi_drift),
    ]
}

const RECORD_HEADER: [&str; 8] = ["alpha1", "alpha2", "eta", "order", "span", "span_local", "threshold", "jacobi_drift"];

fn grid_table(cells: &[GridCell], order: usize, family: ManifoldFamily) -> CsvTable {
    let mut h = RECORD_HEADER.to_vec();
    h.push("note");
    let mut t = CsvTable::new(&h);
    t.comment(format!("family={} order={order}", family.name()));
    for c in cells {
        match &c.record {
            Some(r) => {
                let mut row = record_row(r);
                row.push(String::new());
                t.push(row);
            }
            None => {
                let note = c.note.clone().unwrap_or_default().replace(',', ";");
                let nan = num(f64::NAN);
                t.push(vec![num(c.alpha1), num(c.alpha2), nan.clone(), order.to_string(), num(0.0), num(0.0), nan.clone(), nan, note]);
            }
        }
    }
    t
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<()> {
    match &a.mode {
        ValidateMode::Cell { coef, alpha1, alpha2, alpha3, order, family, threshold, horizon, integ } => {
            let sol = load_coefficients(coef)?;
            let order = sol_order(&sol, *order)?;
            let grid = DivergenceGrid {
                alpha1: vec![*alpha1],
                alpha2: vec![*alpha2],
                alpha3: *alpha3,
                threshold: *threshold,
                horizon: *horizon,
            };
            let cells = divergence_grid(&sol, order, (*family).into(), &grid, &integ.config())?;
            let t = grid_table(&cells, order, (*family).into());
            out.write_all(t.render().as_bytes())?;
            if let Some(note) = &cells[0].note {
                return Err(Error::NoEtaRoot(note.clone()));
            }
            Ok(())
        }
        ValidateMode::Grid { coef, orders, family, n, threshold, output, integ } => {
            let sol = load_coefficients(coef)?;
            let fam: ManifoldFamily = (*family).into();
            let grid = DivergenceGrid { threshold: *threshold, ..DivergenceGrid::standard(*n) };
            let mut runs = Vec::new();
            for &o in orders {
                let order = sol_order(&sol, Some(o))?;
                let cells = divergence_grid(&sol, order, fam, &grid, &integ.config())?;
                let path = branch_path(output, &format!("{}.n{order}", fam.name()));
                grid_table(&cells, order, fam).save(&path)?;
                writeln!(
                    out,
                    "order {order}: {} cells with span >= {CONVERGED_SPAN}; wrote {}",
                    convergence_cells(&cells, CONVERGED_SPAN),
                    path.display()
                )?;
                runs.push((order, cells));
            }
            for w in runs.windows(2) {
                let f = improvement_fraction(&w[0].1, &w[1].1);
                writeln!(out, "improvement fraction order {} vs {}: {f:.4}", w[1].0, w[0].0)?;
            }
            Ok(())
        }
        ValidateMode::Residual { coef, orders, direction, eta, epsilons } => {
            let sol = load_coefficients(coef)?;
            let mut t = CsvTable::new(&["order", "slope", "target", "residuals"]);
            for &o in orders {
                let order = sol_order(&sol, Some(o))?;
                let r = residual_scaling(&sol, alpha4(direction), *eta, epsilons, order)?;
                let res: Vec<String> = r.residuals.iter().map(|v| num(*v)).collect();
                t.push(vec![order.to_string(), num(r.slope), num(order as f64 + 0.5), res.join(" ")]);
            }
            out.write_all(t.render().as_bytes())?;
            Ok(())
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Build(a) => cmd_build(a, out),
        Command::Eta(a) => cmd_eta(a, out),
        Command::Orbit(a) => cmd_orbit(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("lpseries").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let (code, _, err) = call(&["build", "--system", "sun-earth", "--point", "L1", "--order", "0", "-o", "x.coef"]);
        assert_eq!(code, 2, "{err}");
        assert_eq!(call(&["build", "--point", "L1", "--order", "3", "-o", "x"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
    }

    #[test]
    fn missing_file_exits_with_four() {
        let (code, _, err) = call(&["eta", "--coef", "/nonexistent/l1.coef", "--alpha", "0", "0", "0", "0"]);
        assert_eq!(code, 4);
        assert!(err.contains("error"));
    }

    #[test]
    fn build_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.coef");
        let p2 = dir.path().join("b.coef");
        for p in [&p1, &p2] {
            let (code, out, _) =
                call(&["build", "--system", "earth-moon", "--point", "L2", "--order", "4", "-o", p.to_str().unwrap()]);
            assert_eq!(code, 0);
            assert!(out.contains("order 4"));
        }
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert!(text.lines().any(|l| l == "order=4"));
    }

    #[test]
    fn eta_report_for_zero_amplitudes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l1.coef");
        let ps = p.to_str().unwrap();
        assert_eq!(call(&["build", "--system", "sun-earth", "--point", "L1", "--order", "3", "-o", ps]).0, 0);
        let (code, out, _) = call(&["eta", "--coef", ps, "--alpha", "0", "0", "0", "0"]);
        assert_eq!(code, 0);
        assert!(out.contains("no nonzero roots; η = 0 admissible"), "{out}");
        let (code, out, _) = call(&["eta", "--coef", ps, "--alpha", "0.16", "0", "0", "0"]);
        assert_eq!(code, 0);
        // order 3: both u roots positive, so two +- pairs
        assert!(out.lines().filter(|l| l.starts_with("root:")).count() == 4, "{out}");
        let (code, out, _) = call(&["eta", "--coef", ps, "--grid", "3"]);
        assert_eq!(code, 0);
        let t = CsvTable::parse(&out).unwrap();
        assert_eq!(t.header, ["alpha1", "alpha2", "alpha3alpha4", "root_count", "case"]);
        assert_eq!(t.rows.len(), 27);
    }
}
