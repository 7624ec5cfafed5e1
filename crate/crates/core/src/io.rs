//! Coefficient files and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::construct::SolutionSet;
use crate::error::{Error, Result};
use crate::model::{frequencies, make_params, LibrationPoint};
use crate::series::{AmpIndex, AmplitudeSeries, EtaPoly, MultiIndex, TrigExpSeries};

pub const MAGIC: &str = "#crtbp-series v1";

/// Highest eta degree accepted when reading.
const MAX_ETA_DEGREE: usize = 4096;

/// Round-trip decimal with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_poly(out: &mut String, var: &str, i: &MultiIndex, part: &str, poly: &EtaPoly) {
    for (d, &c) in poly.coeffs().iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(out, "{var} {} {} {} {} {} {} {part} {d} {}", i.i, i.j, i.k, i.m, i.p, i.q, num(c));
        }
    }
}

pub fn coefficients_to_string(sol: &SolutionSet) -> Result<String> {
    if !sol.coupling {
        return Err(Error::InvalidParameter("coefficient files hold coupled solutions only".into()));
    }
    let p = &sol.params;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "mu={}", num(p.mu));
    let _ = writeln!(out, "point={}", p.point.name());
    let _ = writeln!(out, "order={}", sol.order);
    let _ = writeln!(out, "nmax={}", p.n_max);
    for (var, s) in [("x", &sol.x), ("y", &sol.y), ("z", &sol.z)] {
        for (k, cs) in s.iter() {
            push_poly(&mut out, var, k, "c", &cs.cos);
            push_poly(&mut out, var, k, "s", &cs.sin);
        }
    }
    for (var, s) in [("omega", &sol.omega), ("nu", &sol.nu), ("lambda", &sol.lambda), ("delta", &sol.delta)] {
        for (a, poly) in s.iter() {
            push_poly(&mut out, var, &MultiIndex::new(a.i, a.j, a.k, a.m, 0, 0), "-", poly);
        }
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, &'a str)> {
    let (n, l) = lines.next().ok_or_else(|| parse_err(0, format!("missing header {key}=")))?;
    let v = l
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(n, format!("expected {key}=")))?;
    Ok((n, v))
}

fn field<T: std::str::FromStr>(n: usize, v: &str, what: &str) -> Result<T> {
    v.parse().map_err(|_| parse_err(n, format!("bad {what} '{v}'")))
}

#[derive(Default)]
struct Coeffs(Vec<f64>);

impl Coeffs {
    fn set(&mut self, n: usize, deg: usize, v: f64) -> Result<()> {
        if self.0.len() <= deg {
            self.0.resize(deg + 1, 0.0);
        }
        if self.0[deg] != 0.0 {
            return Err(parse_err(n, "duplicate entry"));
        }
        self.0[deg] = v;
        Ok(())
    }
}

pub fn parse_coefficients(text: &str) -> Result<SolutionSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(parse_err(1, format!("expected '{MAGIC}'"))),
    }
    let (n, v) = header(&mut lines, "mu")?;
    let mu: f64 = field(n, v, "mu")?;
    let (n, v) = header(&mut lines, "point")?;
    let point = LibrationPoint::parse(v).ok_or_else(|| parse_err(n, format!("bad point '{v}'")))?;
    let (n, v) = header(&mut lines, "order")?;
    let order: usize = field(n, v, "order")?;
    if order == 0 {
        return Err(parse_err(n, "order must be >= 1"));
    }
    let (n, v) = header(&mut lines, "nmax")?;
    let n_max: usize = field(n, v, "nmax")?;
    let params = make_params(mu, point, n_max).map_err(|e| parse_err(n, e.to_string()))?;
    let lin = frequencies(&params).map_err(|e| parse_err(n, e.to_string()))?;

    let mut trig: [BTreeMap<MultiIndex, (Coeffs, Coeffs)>; 3] = Default::default();
    let mut amp: [BTreeMap<AmpIndex, Coeffs>; 4] = Default::default();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(' ').collect();
        if f.len() != 10 {
            return Err(parse_err(n, format!("expected 10 fields, found {}", f.len())));
        }
        let idx = MultiIndex::new(
            field(n, f[1], "i")?,
            field(n, f[2], "j")?,
            field(n, f[3], "k")?,
            field(n, f[4], "m")?,
            field(n, f[5], "p")?,
            field(n, f[6], "q")?,
        );
        if idx.order() > order {
            return Err(parse_err(n, format!("index {idx} above order {order}")));
        }
        let deg: usize = field(n, f[8], "eta degree")?;
        if deg > MAX_ETA_DEGREE {
            return Err(parse_err(n, "eta degree too large"));
        }
        let value: f64 = field(n, f[9], "value")?;
        if !value.is_finite() || value == 0.0 {
            return Err(parse_err(n, "values must be finite and nonzero"));
        }
        let slot = match f[0] {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if let Some(s) = slot {
            if !idx.is_canonical() {
                return Err(parse_err(n, format!("harmonic {idx} not in canonical form")));
            }
            let e = trig[s].entry(idx).or_default();
            match f[7] {
                "c" => e.0.set(n, deg, value)?,
                "s" if idx.p != 0 || idx.q != 0 => e.1.set(n, deg, value)?,
                _ => return Err(parse_err(n, format!("bad part '{}'", f[7]))),
            }
            continue;
        }
        let s = match f[0] {
            "omega" => 0,
            "nu" => 1,
            "lambda" => 2,
            "delta" => 3,
            other => return Err(parse_err(n, format!("unknown variable '{other}'"))),
        };
        if idx.p != 0 || idx.q != 0 || f[7] != "-" {
            return Err(parse_err(n, "frequency and delta lines need p = q = 0 and part '-'"));
        }
        if idx.order() >= order {
            return Err(parse_err(n, format!("{} entry above order {}", f[0], order - 1)));
        }
        amp[s].entry(idx.amp()).or_default().set(n, deg, value)?;
    }

    let [tx, ty, tz] = trig.map(|m| {
        let mut s = TrigExpSeries::new();
        for (k, (c, si)) in m {
            s.insert(k, EtaPoly::from_coeffs(c.0), EtaPoly::from_coeffs(si.0));
        }
        s
    });
    let [omega, nu, lambda, delta] = amp.map(|m| {
        let mut s = AmplitudeSeries::new();
        for (k, c) in m {
            s.set(k, EtaPoly::from_coeffs(c.0));
        }
        s
    });
    Ok(SolutionSet { params, lin, x: tx, y: ty, z: tz, omega, nu, lambda, delta, order, coupling: true })
}

/// Write through a temporary file in the same directory and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn save_coefficients(sol: &SolutionSet, path: &Path) -> Result<()> {
    write_atomic(path, coefficients_to_string(sol)?.as_bytes())
}

pub fn load_coefficients(path: &Path) -> Result<SolutionSet> {
    parse_coefficients(&fs::read_to_string(path)?)
}

/// Plain CSV: optional '#' comment lines, one header row, then data rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn comment(&mut self, c: impl Into<String>) {
        self.comments.push(c.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    /// Strict reader for tables produced by `render`.
    pub fn parse(text: &str) -> Result<CsvTable> {
        let mut t = CsvTable::default();
        for (i, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix("# ") {
                if !t.header.is_empty() {
                    return Err(parse_err(i + 1, "comment after header"));
                }
                t.comments.push(c.to_string());
            } else if t.header.is_empty() {
                t.header = line.split(',').map(str::to_string).collect();
            } else {
                let row: Vec<String> = line.split(',').map(str::to_string).collect();
                if row.len() != t.header.len() {
                    return Err(parse_err(i + 1, "row width differs from header"));
                }
                t.rows.push(row);
            }
        }
        if t.header.is_empty() {
            return Err(parse_err(0, "missing header"));
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}
