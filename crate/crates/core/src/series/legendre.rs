use super::trig::{multiply, TrigExpSeries};
use crate::model::SystemParams;

/// Gradient of sum_{n>=3} c_n rho^n P_n(x/rho) composed with the series
/// (x, y, z), truncated at amplitude order `max_order`.
///
/// Inputs are assumed to start at order 1, so T_n starts at order n.
pub fn potential_gradient(
    x: &TrigExpSeries,
    y: &TrigExpSeries,
    z: &TrigExpSeries,
    params: &SystemParams,
    max_order: usize,
) -> (TrigExpSeries, TrigExpSeries, TrigExpSeries) {
    let x = x.truncate(max_order);
    let y = y.truncate(max_order);
    let z = z.truncate(max_order);
    if max_order < 2 {
        return (TrigExpSeries::new(), TrigExpSeries::new(), TrigExpSeries::new());
    }
    let rho2 = multiply(&x, &x, max_order)
        .add(&multiply(&y, &y, max_order))
        .add(&multiply(&z, &z, max_order));

    let mut one = TrigExpSeries::new();
    one.insert(Default::default(), crate::series::EtaPoly::constant(1.0), Default::default());

    // T_0 .. T_{max_order}; only T_{n-1} with n - 1 <= max_order matter.
    let mut t = vec![one.clone(), x.clone()];
    for n in 2..=max_order {
        let nf = n as f64;
        let a = multiply(&x, &t[n - 1], max_order).scale((2.0 * nf - 1.0) / nf);
        let b = multiply(&rho2, &t[n - 2], max_order).scale((nf - 1.0) / nf);
        t.push(a.sub(&b));
    }
    // R_0 .. R_{max_order - 1}, dT_{n+2}/dy = y R_n.
    let mut r: Vec<TrigExpSeries> = vec![one.scale(-1.0), x.scale(-3.0)];
    for n in 2..max_order {
        let nf = n as f64;
        let a = multiply(&x, &r[n - 1], max_order).scale((2.0 * nf + 3.0) / (nf + 2.0));
        let b = t[n].scale((2.0 * nf + 2.0) / (nf + 2.0));
        let c = multiply(&rho2, &r[n - 2], max_order).scale((nf + 1.0) / (nf + 2.0));
        r.push(a.sub(&b).sub(&c));
    }

    let mut px = TrigExpSeries::new();
    let mut sum_r = TrigExpSeries::new();
    for n in 3..=max_order + 1 {
        let cn = params.cn(n);
        px = px.add(&t[n - 1].scale(cn * n as f64));
        sum_r = sum_r.add(&r[n - 2].scale(cn));
    }
    let py = multiply(&y, &sum_r, max_order);
    let pz = multiply(&z, &sum_r, max_order);
    (px, py, pz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{legendre_gradient, make_params, LibrationPoint};
    use crate::series::{EtaPoly, MultiIndex};

    fn linear_xyz() -> (TrigExpSeries, TrigExpSeries, TrigExpSeries) {
        let c = EtaPoly::constant;
        let mut x = TrigExpSeries::new();
        x.insert(MultiIndex::new(1, 0, 0, 0, 0, 0), c(1.0), EtaPoly::zero());
        let mut y = TrigExpSeries::new();
        y.insert(MultiIndex::new(0, 1, 0, 0, 0, 0), c(1.0), EtaPoly::zero());
        let mut z = TrigExpSeries::new();
        z.insert(MultiIndex::new(0, 0, 1, 0, 0, 0), c(1.0), EtaPoly::zero());
        (x, y, z)
    }

    #[test]
    fn lowest_order_x_component() {
        // x = a1, y = a2, z = a3 (amplitudes used as plain coordinates at th3 = 0)
        let p = make_params(3.040423398444176e-6, LibrationPoint::L1, 6).unwrap();
        let (x, y, z) = linear_xyz();
        let (px, _, _) = potential_gradient(&x, &y, &z, &p, 2);
        let c3 = p.c[3];
        assert_eq!(px.len(), 3);
        assert!((px.get(&MultiIndex::new(2, 0, 0, 0, 0, 0)).unwrap().cos.coeff(0) - 3.0 * c3).abs() < 1e-12 * c3);
        assert!((px.get(&MultiIndex::new(0, 2, 0, 0, 0, 0)).unwrap().cos.coeff(0) + 1.5 * c3).abs() < 1e-12 * c3);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let p = make_params(0.01, LibrationPoint::L2, 6).unwrap();
        let e = TrigExpSeries::new();
        let (a, b, c) = potential_gradient(&e, &e, &e, &p, 5);
        assert!(a.is_empty() && b.is_empty() && c.is_empty());
    }

    #[test]
    fn agrees_with_numeric_legendre_sum() {
        let p = make_params(0.01215058191870689, LibrationPoint::L1, 10).unwrap();
        let (x, y, z) = linear_xyz();
        let order = 8;
        let (px, py, pz) = potential_gradient(&x, &y, &z, &p, order);
        for &(a1, a2, a3) in &[(0.01, -0.02, 0.015), (0.03, 0.01, -0.02)] {
            let alpha = [a1, a2, a3, 0.0];
            let r = [a1, a2, a3];
            let num = legendre_gradient(&p, r, order + 1);
            let th = [0.0; 3];
            let got = [px.eval_at(&alpha, 0.0, &th), py.eval_at(&alpha, 0.0, &th), pz.eval_at(&alpha, 0.0, &th)];
            for i in 0..3 {
                assert!((got[i] - num[i]).abs() <= 1e-12 * num[i].abs().max(1e-10), "{i}: {} vs {}", got[i], num[i]);
            }
        }
    }
}
