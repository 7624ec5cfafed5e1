use lpseries::bifurcation::solve_eta;
use lpseries::construct::{build, SolutionSet};
use lpseries::model::{jacobi_constant, make_params, Frame, LibrationPoint};
use lpseries::orbit::{resolve_eta, sample_trajectory, CompiledOrbit, OrbitSpec};
use lpseries::validation::{integrate, IntegratorConfig};
use lpseries::{EARTH_MOON_MU, SUN_EARTH_MU};

fn sun_earth_l1(order: usize) -> SolutionSet {
    build(&make_params(SUN_EARTH_MU, LibrationPoint::L1, order + 1).unwrap(), order).unwrap()
}

/// Distance after one period between the series and a numerically integrated
/// orbit started on the series, plus the spread of the Jacobi constant along
/// the series orbit.
fn closure(sol: &SolutionSet, spec: &OrbitSpec) -> (f64, f64) {
    let period = CompiledOrbit::new(sol, spec).unwrap().period();
    let times: Vec<f64> = (0..=20).map(|i| period * i as f64 / 20.0).collect();
    let states = sample_trajectory(sol, spec, &times, Frame::Synodic).unwrap();
    let end = integrate(&sol.params, &states[0], period, &IntegratorConfig::default()).unwrap().final_state();
    let err = (0..3).map(|i| (end.pos[i] - states[20].pos[i]).powi(2)).sum::<f64>().sqrt();
    let c: Vec<f64> = states.iter().map(|s| jacobi_constant(&sol.params, s).unwrap()).collect();
    let spread = c.iter().fold(0.0_f64, |m, v| m.max((v - c[0]).abs()));
    (err, spread)
}

#[test]
fn planar_lyapunov_closes_better_with_order() {
    let sol = sun_earth_l1(9);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for n in [3, 5, 7, 9] {
        let (err, spread) = closure(&sol, &OrbitSpec::new([0.1, 0.0, 0.0, 0.0], 0.0, n));
        assert!(err < last.0 / 4.0 && spread < last.1 / 4.0, "order {n}: {err:e} {spread:e} after {last:?}");
        last = (err, spread);
    }
    assert!(last.0 < 1e-6 && last.1 < 1e-10, "{last:?}");
}

#[test]
fn halo_from_eta_root_is_nearly_periodic() {
    let sol = sun_earth_l1(9);
    let alpha = [0.16, 0.0, 0.0, 0.0];
    let mut spreads = Vec::new();
    for n in [5, 9] {
        let eta = resolve_eta(&sol, &OrbitSpec::new(alpha, 1.45, n), 1.45).unwrap();
        let (err, spread) = closure(&sol, &OrbitSpec::new(alpha, eta, n));
        assert!(err < 2e-3, "order {n}: return error {err:e}");
        spreads.push(spread);
    }
    assert!(spreads[1] < spreads[0] / 4.0, "{spreads:?}");
}

/// Nonzero roots of Delta by sign scan over (0, eta_max], mirrored.
fn scan_roots(p: &lpseries::series::EtaPoly, eta_max: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = p.eval(step);
    let n = (eta_max / step) as usize;
    for i in 2..=n {
        let x = step * i as f64;
        let v = p.eval(x);
        if prev * v < 0.0 {
            out.push(x - 0.5 * step);
        }
        prev = v;
    }
    out
}

#[test]
fn eta_roots_match_sign_scan_at_higher_order() {
    for (mu, point) in [(SUN_EARTH_MU, LibrationPoint::L1), (EARTH_MOON_MU, LibrationPoint::L2)] {
        let sol = build(&make_params(mu, point, 8).unwrap(), 7).unwrap();
        for alpha in [[0.16, 0.0, 0.0, 0.0], [0.16, 0.03, 0.0, 0.0], [0.05, 0.05, 0.01, -0.01], [0.2, 0.0, 0.02, 0.02]] {
            let report = solve_eta(&sol, &alpha).unwrap();
            let positive: Vec<f64> = report.positive_roots().filter(|r| *r <= 50.0).collect();
            let scanned = scan_roots(&report.delta, 50.0, 1e-3);
            assert_eq!(positive.len(), scanned.len(), "{point} {alpha:?}: {positive:?} vs {scanned:?}");
            for (r, s) in positive.iter().zip(&scanned) {
                assert!((r - s).abs() <= 1e-3, "{r} vs {s}");
            }
            let negative: Vec<f64> = report.roots.iter().copied().filter(|r| *r < 0.0 && *r >= -50.0).collect();
            assert_eq!(negative.len(), positive.len());
        }
    }
}
