//! Discrete (p,q)-forms with values in powers of the canonical bundle.

use crate::{Error, Result, C64};

/// Coefficient bundle of a form. On a curve every bundle the crate needs
/// is a power of the canonical bundle K: scalars are K⁰, vector fields
/// K⁻¹, and Ω^p(K)-valued coefficients K^{1+p}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bundle(pub i32);

impl Bundle {
    pub const SCALAR: Bundle = Bundle(0);
    pub const TANGENT: Bundle = Bundle(-1);
    pub const CANONICAL: Bundle = Bundle(1);

    pub fn power(self) -> i32 {
        self.0
    }
}

/// Which cells carry the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cells {
    Vertex,
    Face,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    pub p: u8,
    pub q: u8,
    pub bundle: Bundle,
    /// Marks fields living in the conjugate bundle. Inner products
    /// require matching flags.
    pub conjugate: bool,
    pub coeffs: Vec<C64>,
}

impl FormField {
    pub fn new(p: u8, q: u8, bundle: Bundle, coeffs: Vec<C64>) -> Result<FormField> {
        check_bidegree(p, q)?;
        Ok(FormField { p, q, bundle, conjugate: false, coeffs })
    }

    pub fn zeros(p: u8, q: u8, bundle: Bundle, cells: usize) -> Result<FormField> {
        FormField::new(p, q, bundle, vec![C64::new(0.0, 0.0); cells])
    }

    pub fn cells(&self) -> Cells {
        cells_of(self.p, self.q)
    }

    /// Power of K by which the coefficient transforms holomorphically:
    /// a (p,q)-form with values in K^m has coefficients in K^{m+p} ⊗ K̄^q.
    pub fn holomorphic_weight(&self) -> i32 {
        self.bundle.0 + self.p as i32
    }

    pub fn same_kind(&self, other: &FormField) -> Result<()> {
        if (self.p, self.q, self.bundle, self.conjugate) != (other.p, other.q, other.bundle, other.conjugate) {
            return Err(Error::Mismatch(format!(
                "({},{}) {:?}{} vs ({},{}) {:?}{}",
                self.p,
                self.q,
                self.bundle,
                if self.conjugate { " conj" } else { "" },
                other.p,
                other.q,
                other.bundle,
                if other.conjugate { " conj" } else { "" }
            )));
        }
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::Mismatch(format!("{} vs {} coefficients", self.coeffs.len(), other.coeffs.len())));
        }
        Ok(())
    }
}

pub fn check_bidegree(p: u8, q: u8) -> Result<()> {
    if p > 1 || q > 1 {
        return Err(Error::Bidegree(format!("({p},{q}) on a curve")));
    }
    Ok(())
}

pub fn cells_of(p: u8, q: u8) -> Cells {
    if p + q == 0 {
        Cells::Vertex
    } else {
        Cells::Face
    }
}
