//! Scalar abstraction for the arithmetic-only parts of the crate.
//!
//! The Finsler certificate and the disk comparison are pure real
//! arithmetic and run over any [`Real`]; the mesh and operator code is
//! fixed to `f64`/`Complex64` because it leans on `nalgebra` solvers.

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};

pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn half<T: Real>() -> T {
        T::lit(0.5)
    }

    #[test]
    fn literals_roundtrip() {
        assert_eq!(half::<f32>(), 0.5f32);
        assert_eq!(half::<f64>().to_f64_lossy(), 0.5);
    }
}
