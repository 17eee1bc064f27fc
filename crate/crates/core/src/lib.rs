//! Desk-scale numerical laboratory for fiberwise Kähler-Einstein metrics,
//! harmonic Kodaira-Spencer forms, Weil-Petersson geometry, curvature of
//! twisted Hodge bundles, negatively curved Finsler metrics and the
//! Ahlfors-Schwarz comparison on the unit disk.
//!
//! The geometric backend works on triangulated Riemann surfaces of genus
//! at least two; the spectral backend evaluates the same curvature
//! formulas on finite-dimensional surrogate models of any dimension.

pub mod error;
pub mod family;
pub mod finsler;
pub mod fixtures;
pub mod hodge;
pub mod ke;
pub mod linalg;
pub mod scalar;
pub mod schwarz;
pub mod surface;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use scalar::Real;

/// Finsler profile over `f64`.
pub type FinslerProfile64 = finsler::FinslerProfile<f64>;
/// Finsler profile over `f32`.
pub type FinslerProfile32 = finsler::FinslerProfile<f32>;
/// Disk metric samples over `f64`.
pub type DiskMetric64 = schwarz::DiskMetric<f64>;
/// Disk metric samples over `f32`.
pub type DiskMetric32 = schwarz::DiskMetric<f32>;
