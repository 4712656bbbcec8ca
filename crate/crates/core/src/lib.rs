//! Sensitivity engine for squeezed-light interferometers.
//!
//! Lossless Gaussian networks acting on vacuum are represented as affine
//! Bogoliubov maps ([`gaussian`]). Photon-number moments extracted from those
//! maps feed the quantum Fisher information and Cramér–Rao bounds
//! ([`qcrb`]), which are compared against the realized errors of concrete
//! readout schemes ([`detection`]). Every analytic formula can be checked
//! against brute-force states in a truncated Fock space ([`fock`]).
//!
//! Conventions used throughout:
//!
//! * arm 1 is mode 0, arm 2 is mode 1;
//! * a phase shift acts as `a -> a e^{-i phi}`;
//! * common/differential phases are normalized as `phi± = (phi1 ± phi2)/2`
//!   with `N± = N1 ± N2`, which fixes every factor of 4 in the bounds;
//! * quadrature variances use the vacuum value `1/2`.

// `!(x >= 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod par;
pub mod qcrb;

pub use error::{Error, Result};
pub use gaussian::{BogoliubovMap, Element, MomentSet, Program, SqueezeParams};
pub use nalgebra::Complex;

/// Complex field amplitude.
pub type ComplexScalar = Complex<f64>;
