//! Numerical analysis toolkit for weakly stable hyperbolic boundary problems
//! with large oscillatory coefficients.
//!
//! The crate covers four layers of machinery:
//!
//! * [`spectral`] — constant-coefficient system algebra: symbols, labeled
//!   eigenmode frames, phase classification, projectors, assumption checks.
//! * [`lopatinski`] — Lopatinski determinants, location of the weak-stability
//!   failure set, first-order vanishing and the boundary-characteristic speed.
//! * [`amplification`] / [`cascade`] — amplification-factor classification,
//!   resonance detection, exponent formulas, and the cascade calculus with its
//!   series thresholds.
//! * [`profiles`] / [`solver`] — the geometric-optics construction for the
//!   3×3 double-amplification example and a direct stiff solver for the
//!   singular system, used to verify the predicted amplification scalings.

pub mod amplification;
pub mod cascade;
pub mod error;
pub mod experiments;
pub mod field;
pub mod linalg;
pub mod lopatinski;
pub mod presets;
pub mod profiles;
pub mod solver;
pub mod spectral;

pub use error::CoreError;
pub use spectral::{Frequency, ModeFrame, PhaseSet, ProjectorSet, SystemSpec};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Dense dynamic complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense dynamic complex vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense dynamic real matrix.
pub type RMat = nalgebra::DMatrix<f64>;
/// Dense dynamic real vector.
pub type RVec = nalgebra::DVector<f64>;
