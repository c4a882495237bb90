//! Boundary-integral solver for time-harmonic electromagnetic scattering
//! from open, axisymmetric cavities recessed into a perfectly conducting
//! half-space.
//!
//! The scattered field is represented with layer potentials on the cavity
//! wall, an annular buffer strip in the conductor plane, and a hemispherical
//! interface, with mirror-image sources enforcing the conducting-plane
//! condition. Rotational symmetry reduces every operator to a sequence of
//! decoupled one-dimensional modal integral equations along the generating
//! curves, discretized with a high-order Nyström method: 10-point
//! Gauss-Legendre panels, generalized Gaussian quadrature for logarithmically
//! singular self-interactions, and adaptive quadrature for the modal kernels
//! and near interactions.
//!
//! Modules follow the pipeline:
//!
//! * [`geometry`] — generating curves, panelization, local frames, reflection
//! * [`quadrature`] — panel rules, log-singular rules, adaptive integration
//! * [`kernels`] — modal Green's function kernels and their derivatives
//! * [`operators`] — dense modal operator matrices between surfaces
//! * [`solver`] — per-mode linear systems (three formulations) and mode loop
//! * [`fields`] — electric/magnetic field evaluation and current recovery
//! * [`harness`] — manufactured-solution tests, plane-wave scattering, sweeps

pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
