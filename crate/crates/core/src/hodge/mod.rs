//! Curvature of twisted Hodge bundles and of `R^p f_* Λ^p T`.
//!
//! Both curvature formulas have the same shape: a positive term coupling
//! pointwise norms through `(□+1)⁻¹` on functions, a `(□+1)⁻¹` term on
//! the image of the lowering product and a `(□−1)⁻¹` term on the image of
//! the raising product. [`spectral`] evaluates them on finite models of
//! any dimension, [`geometric`] on triangulated curves.

pub mod geometric;
pub mod spectral;

use serde::Serialize;

/// Which evaluator produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Geometric,
    Spectral,
}

/// Which curvature formula was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// Twisted Hodge bundle `R^{n-p} f_* Ω^p(K)`.
    TwistedHodge,
    /// `R^p f_* Λ^p T`.
    LambdaT,
}

/// Individual terms of a curvature evaluation and the derived estimates.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub backend: Backend,
    pub formula: Formula,
    pub n: usize,
    pub p: usize,
    /// `∫ (□+1)⁻¹(|A|²) |ψ|²`.
    pub term1: f64,
    /// `⟨(□+1)⁻¹ Dψ, Dψ⟩` for the lowering product `D`.
    pub term2: f64,
    /// `⟨(□−1)⁻¹ Uψ, Uψ⟩` for the raising product `U`.
    pub term3: f64,
    /// Signed total: `term1 + term2 + term3` for twisted Hodge bundles,
    /// its negative for `Λ^p T`.
    pub total: f64,
    /// `‖H(Dψ)‖²`.
    pub harmonic_lowered: f64,
    /// `‖H(Uψ)‖²`.
    pub harmonic_raised: f64,
    /// `term3 + ‖H(Uψ)‖²`, nonnegative when the spectral gap holds.
    pub term3_remainder: f64,
    /// Bound implied by dropping the positive parts: a lower bound for
    /// twisted Hodge bundles, an upper bound for `Λ^p T`.
    pub estimate: f64,
    /// Distance from the total to the estimate in the direction of the
    /// inequality (nonnegative when it holds).
    pub estimate_slack: f64,
    /// Smallest nonzero eigenvalue on the space where `(□−1)⁻¹` acts.
    pub gap_eigenvalue: Option<f64>,
}

impl CurvatureReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        backend: Backend,
        formula: Formula,
        n: usize,
        p: usize,
        t: [f64; 3],
        harmonic_lowered: f64,
        harmonic_raised: f64,
        gap_eigenvalue: Option<f64>,
    ) -> Self {
        let sum = t[0] + t[1] + t[2];
        let (total, estimate, slack) = match formula {
            Formula::TwistedHodge => {
                let est = harmonic_lowered - harmonic_raised;
                (sum, est, sum - est)
            }
            Formula::LambdaT => {
                let est = -harmonic_lowered + harmonic_raised;
                (-sum, est, est + sum)
            }
        };
        Self {
            backend,
            formula,
            n,
            p,
            term1: t[0],
            term2: t[1],
            term3: t[2],
            total,
            harmonic_lowered,
            harmonic_raised,
            term3_remainder: t[2] + harmonic_raised,
            estimate,
            estimate_slack: slack,
            gap_eigenvalue,
        }
    }
}
