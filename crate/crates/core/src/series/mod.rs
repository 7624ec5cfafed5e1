//! Sparse trigonometric-exponential series with eta-polynomial coefficients.

mod amplitude;
mod eta;
mod index;
mod legendre;
mod trig;

pub use amplitude::AmplitudeSeries;
pub use eta::{EtaPoly, Parity};
pub use index::{AmpIndex, MultiIndex};
pub use legendre::potential_gradient;
pub use trig::{canonicalize, differentiate, multiply, Angle, CosSin, Term, TrigExpSeries};

pub(crate) use trig::{prepare, shift_amp, Accumulator};

use crate::orbit::{OrbitSpec, ScalarFrequencies};

/// Value of `series` along the orbit `spec` at time `t`.
pub fn eval_series(series: &TrigExpSeries, spec: &OrbitSpec, freqs: &ScalarFrequencies, t: f64) -> f64 {
    let theta = [
        freqs.omega * t + spec.phi[0],
        freqs.nu * t + spec.phi[1],
        freqs.lambda * t,
    ];
    series.eval_at(&spec.alpha, spec.eta, &theta)
}
