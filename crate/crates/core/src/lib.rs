//! Lindstedt-Poincare series for the phase space around the collinear
//! libration points of the circular restricted three-body problem.
//!
//! The series carries the coupling coefficient eta symbolically, so one build
//! serves Lissajous, halo, quasihalo and second-type halo orbits together with
//! their invariant manifolds and transit orbits.

pub mod bifurcation;
pub mod cli;
pub mod construct;
pub mod error;
pub mod io;
pub mod model;
pub mod orbit;
pub mod series;
pub mod validation;

pub use error::{Error, Result};

/// Mass ratio of the Sun-Earth(+Moon) system.
pub const SUN_EARTH_MU: f64 = 3.040423398444176e-6;
/// Mass ratio of the Earth-Moon system.
pub const EARTH_MOON_MU: f64 = 1.215058191870689e-2;
