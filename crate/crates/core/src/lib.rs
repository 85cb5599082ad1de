//! Link-level simulator for pilot-based channel estimation in backscatter
//! (ambient IoT) networks.
//!
//! An RF source transmits a pilot sequence while every passive tag reflects
//! its own spreading sequence over the whole training interval. Because the
//! source behaves like a hidden tag carrying the all-ones sequence, tag
//! sequences must be orthogonal both to each other and to the all-ones row.
//! Under that condition the reader separates the direct channel and all
//! cascaded (source-tag-reader) channels in one shot.
//!
//! Modules:
//! - [`pilots`]: Hadamard / modified Zadoff-Chu / DFT pilot matrices and the
//!   orthogonality validator.
//! - [`fading`]: Nakagami-m channel synthesis, UMi path loss, noise floor,
//!   and second-order moments for the Bayesian estimators.
//! - [`sysmodel`]: received-signal synthesis for the time-spread protocol,
//!   the silent baseline, and the multi-user extension.
//! - [`estimators`]: LS/MVU, scaled LS, MMSE, LMMSE, silent-protocol
//!   estimators, and the CRLB reference.
//! - [`metrics`]: normalized MSE, Monte-Carlo aggregation, and the
//!   performance-gap model fit.
//! - [`scenario`]: seeded experiment runner with CSV output.
//!
//! Core math is generic over the scalar type (`f32`/`f64`) through the
//! [`scalar::Real`] trait; the aliases below fix the default `f64` build.

pub mod error;
pub mod estimators;
pub mod fading;
pub mod linalg;
pub mod metrics;
pub mod pilots;
pub mod scalar;
pub mod scenario;
pub mod sysmodel;

pub use error::{Error, Result};
pub use scalar::Real;

use num_complex::Complex;

/// Complex scalar over an arbitrary real type.
pub type Cplx<T> = Complex<T>;
/// Complex column vector.
pub type CVec<T> = ndarray::Array1<Complex<T>>;
/// Complex matrix.
pub type CMat<T> = ndarray::Array2<Complex<T>>;

/// Default complex scalar.
pub type C64 = Complex<f64>;
/// Single-precision complex scalar.
pub type C32 = Complex<f32>;
/// Default complex vector.
pub type CVec64 = CVec<f64>;
/// Default complex matrix.
pub type CMat64 = CMat<f64>;
