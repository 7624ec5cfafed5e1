use std::sync::OnceLock;

use proptest::prelude::*;

use lpseries::construct::{build, SolutionSet};
use lpseries::io::{num, CsvTable};
use lpseries::model::{make_params, LibrationPoint};
use lpseries::orbit::{scalar_frequencies, CompiledOrbit, OrbitSpec};
use lpseries::series::{eval_series, AmpIndex, AmplitudeSeries, EtaPoly};
use lpseries::SUN_EARTH_MU;

fn order5() -> &'static SolutionSet {
    static SOL: OnceLock<SolutionSet> = OnceLock::new();
    SOL.get_or_init(|| build(&make_params(SUN_EARTH_MU, LibrationPoint::L1, 6).unwrap(), 5).unwrap())
}

fn poly() -> impl Strategy<Value = EtaPoly> {
    prop::collection::vec(-2.0..2.0f64, 0..6).prop_map(EtaPoly::from_coeffs)
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

fn amp_series() -> impl Strategy<Value = AmplitudeSeries> {
    prop::collection::vec(((0u8..3, 0u8..3, 0u8..2, 0u8..2), poly()), 0..6).prop_map(|terms| {
        let mut s = AmplitudeSeries::new();
        for ((i, j, k, m), p) in terms {
            s.add_at(AmpIndex::new(i, j, k, m), &p);
        }
        s
    })
}

proptest! {
    #[test]
    fn eta_poly_ring_ops(a in poly(), b in poly(), x in -1.5..1.5f64) {
        let (va, vb) = (a.eval(x), b.eval(x));
        let scale = a.max_abs().max(1.0) * b.max_abs().max(1.0) * 100.0;
        prop_assert!(close((&a * &b).eval(x), va * vb, scale));
        prop_assert!(close((&a + &b).eval(x), va + vb, scale));
        prop_assert!(close((&a - &b).eval(x), va - vb, scale));
        prop_assert!(close((-&a).eval(x), -va, scale));
        prop_assert!(close(a.shift_up().eval(x), x * va, scale));
        let (q, r) = a.shift_down();
        prop_assert!(close(x * q.eval(x) + r, va, scale));
    }

    #[test]
    fn amplitude_product_is_pointwise(a in amp_series(), b in amp_series(),
                                      alpha in prop::array::uniform4(-0.5..0.5f64), eta in -2.0..2.0f64) {
        let prod = a.multiply(&b, 12);
        let want = a.eval(&alpha, eta) * b.eval(&alpha, eta);
        prop_assert!((prod.eval(&alpha, eta) - want).abs() <= 1e-11 * (1.0 + want.abs()));
    }

    #[test]
    fn numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::array::uniform3(-1e6..1e6f64), 0..8),
                      note in "[a-z ]{0,12}") {
        let mut t = CsvTable::new(&["a", "b", "c"]);
        t.comment(note.clone());
        for r in &rows {
            t.push_nums(r);
        }
        let back = CsvTable::parse(&t.render()).unwrap();
        prop_assert_eq!(back.render(), t.render());
        prop_assert_eq!(back.rows.len(), rows.len());
        for (r, b) in rows.iter().zip(&back.rows) {
            for k in 0..3 {
                prop_assert_eq!(b[k].parse::<f64>().unwrap(), r[k]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compiled_orbit_matches_term_sum(alpha in prop::array::uniform4(-0.05..0.05f64), eta in -1.0..1.0f64,
                                       phi in prop::array::uniform2(0.0..6.3f64), t in -1.0..1.0f64) {
        let sol = order5();
        let spec = OrbitSpec::new(alpha, eta, 5).with_phase(phi[0], phi[1]);
        let freqs = scalar_frequencies(sol, &spec).unwrap();
        let fast = CompiledOrbit::new_unchecked(sol, &spec).unwrap().eval(t, 0).unwrap()[0];
        for (k, s) in [&sol.x, &sol.y, &sol.z].into_iter().enumerate() {
            let slow = eval_series(s, &spec, &freqs, t);
            prop_assert!((fast[k] - slow).abs() <= 1e-13, "component {}: {} vs {}", k, fast[k], slow);
        }
    }
}
