use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::LinearFrequencies;
use crate::series::{EtaPoly, MultiIndex};

/// Relative tolerance for consistency checks and the absolute floor below
/// which residuals are treated as zero.
#[derive(Clone, Copy, Debug)]
pub(super) struct SolveTolerance {
    pub rel: f64,
    pub floor: f64,
}

impl Default for SolveTolerance {
    fn default() -> Self {
        SolveTolerance { rel: 1e-8, floor: 1e-280 }
    }
}

/// Linear part of the order-n equations for one harmonic (p, q, e).
pub(super) struct LinearOperator {
    c2: f64,
    omega0: f64,
    nu0: f64,
    lambda0: f64,
}

impl LinearOperator {
    pub fn new(c2: f64, lin: &LinearFrequencies) -> Self {
        LinearOperator { c2, omega0: lin.omega0, nu0: lin.nu0, lambda0: lin.lambda0 }
    }

    /// D on (cos, sin) coefficients at zeroth order.
    pub fn m(&self, idx: &MultiIndex) -> [[f64; 2]; 2] {
        let el = idx.e() as f64 * self.lambda0;
        let w = idx.p as f64 * self.omega0 + idx.q as f64 * self.nu0;
        [[el, w], [-w, el]]
    }

    fn m2(&self, idx: &MultiIndex) -> [[f64; 2]; 2] {
        let m = self.m(idx);
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = m[r][0] * m[0][c] + m[r][1] * m[1][c];
            }
        }
        out
    }

    /// Rows (x cos, x sin, y cos, y sin), columns (xA, xB, yA, yB); 2x2 on
    /// the cos parts when p = q = 0.
    pub fn xy_block(&self, idx: &MultiIndex) -> DMatrix<f64> {
        let m = self.m(idx);
        let m2 = self.m2(idx);
        let c2 = self.c2;
        if idx.p == 0 && idx.q == 0 {
            return DMatrix::from_row_slice(
                2,
                2,
                &[m2[0][0] - 1.0 - 2.0 * c2, -2.0 * m[0][0], 2.0 * m[0][0], m2[0][0] + c2 - 1.0],
            );
        }
        let mut a = DMatrix::zeros(4, 4);
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 1.0 } else { 0.0 };
                a[(r, c)] = m2[r][c] - (1.0 + 2.0 * c2) * id;
                a[(r, c + 2)] = -2.0 * m[r][c];
                a[(r + 2, c)] = 2.0 * m[r][c];
                a[(r + 2, c + 2)] = m2[r][c] + (c2 - 1.0) * id;
            }
        }
        a
    }

    pub fn z_block(&self, idx: &MultiIndex) -> DMatrix<f64> {
        let m2 = self.m2(idx);
        if idx.p == 0 && idx.q == 0 {
            return DMatrix::from_element(1, 1, m2[0][0] + self.c2);
        }
        DMatrix::from_row_slice(2, 2, &[m2[0][0] + self.c2, m2[0][1], m2[1][0], m2[1][1] + self.c2])
    }

    pub fn check_det(&self, a: &DMatrix<f64>, order: usize, index: &MultiIndex) -> Result<()> {
        let det = a.determinant();
        let scale = a.amax().max(1.0).powi(a.nrows() as i32);
        if det.abs() < 1e-10 * scale || !det.is_finite() {
            return Err(Error::Resonance { order, index: *index, det });
        }
        Ok(())
    }
}

/// Solve `a X = rows` column by column in eta degree. Least squares when
/// `lsq`; the error value is the residual that failed the consistency check.
pub(super) fn solve(
    a: &DMatrix<f64>,
    rows: &[EtaPoly],
    lsq: bool,
    tol: SolveTolerance,
) -> std::result::Result<Vec<EtaPoly>, f64> {
    assert_eq!(a.nrows(), rows.len());
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0).max(1);
    let mut b = DMatrix::zeros(rows.len(), width);
    for (i, r) in rows.iter().enumerate() {
        for (d, &v) in r.coeffs().iter().enumerate() {
            b[(i, d)] = v;
        }
    }
    let x = if lsq || a.nrows() != a.ncols() {
        a.clone().svd(true, true).solve(&b, 1e-14 * a.amax()).map_err(|_| f64::NAN)?
    } else {
        a.clone().lu().solve(&b).ok_or(f64::NAN)?
    };
    let res = (a * &x - &b).amax();
    let scale = b.amax().max(a.amax() * x.amax());
    if !(res <= tol.rel * scale + tol.floor) {
        return Err(res);
    }
    Ok((0..a.ncols())
        .map(|c| EtaPoly::from_coeffs(x.row(c).iter().copied().collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{frequencies, make_params, LibrationPoint};

    fn op() -> (LinearOperator, LinearFrequencies) {
        let p = make_params(0.01215058191870689, LibrationPoint::L2, 4).unwrap();
        let lin = frequencies(&p).unwrap();
        (LinearOperator::new(p.c2(), &lin), lin)
    }

    #[test]
    fn linear_modes_are_in_the_kernel() {
        let (op, lin) = op();
        let a = op.xy_block(&MultiIndex::new(1, 0, 0, 0, 1, 0));
        let v = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0, lin.kappa1]);
        assert!((a * v).amax() < 1e-12);
        let a = op.xy_block(&MultiIndex::new(0, 0, 1, 0, 0, 0));
        let v = nalgebra::DVector::from_vec(vec![1.0, lin.kappa2]);
        assert!((a * v).amax() < 1e-12);
        let z = op.z_block(&MultiIndex::new(0, 1, 0, 0, 0, 1));
        assert!(z.amax() < 1e-12);
    }

    #[test]
    fn resonant_block_is_rejected() {
        let (op, _) = op();
        let k = MultiIndex::new(1, 0, 0, 0, 1, 0);
        assert!(matches!(op.check_det(&op.xy_block(&k), 2, &k), Err(Error::Resonance { .. })));
        let k = MultiIndex::new(2, 0, 0, 0, 2, 0);
        assert!(op.check_det(&op.xy_block(&k), 2, &k).is_ok());
    }

    #[test]
    fn inconsistent_least_squares_reports_residual() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let rows = [EtaPoly::constant(1.0), EtaPoly::constant(2.0)];
        assert!(solve(&a, &rows, true, SolveTolerance::default()).is_err());
        let rows = [EtaPoly::from_coeffs(vec![1.0, 3.0]), EtaPoly::from_coeffs(vec![1.0, 3.0])];
        let x = solve(&a, &rows, true, SolveTolerance::default()).unwrap();
        assert!((x[0].coeff(1) - 3.0).abs() < 1e-14);
    }
}
