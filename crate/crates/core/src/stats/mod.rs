//! Likelihood-ratio homogeneity tests for count matrices.
//!
//! All statistics are evaluated in deviance form with the factorial terms
//! cancelled, using `0 * ln 0 = 0`. Degrees of freedom depend only on the
//! matrix shape, never on the data.

mod chisq;
mod homogeneity;

pub use chisq::{chisq_sf, ln_chisq_sf, ln_gamma, ChiSqTail, P_FLOOR};
pub use homogeneity::{
    exposure_homogeneity, multinomial_homogeneity, poisson_homogeneity, AtomicModel,
};

use serde::{Deserialize, Serialize};

/// Outcome of one likelihood-ratio test.
///
/// `p` is floored at [`P_FLOOR`]; `ln_p` is exact and is what orderings use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: u32,
    pub p: f64,
    pub ln_p: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clamped: bool,
}

impl TestResult {
    pub fn new(statistic: f64, dof: u32) -> Self {
        let statistic = statistic.max(0.0);
        let tail = chisq_sf(statistic, dof).expect("statistic is nonnegative and dof positive");
        TestResult {
            statistic,
            dof,
            p: tail.p,
            ln_p: tail.ln_p,
            clamped: tail.clamped,
        }
    }

    /// A null result (`W = 0`, `p = 1`).
    pub fn null(dof: u32) -> Self {
        TestResult {
            statistic: 0.0,
            dof,
            p: 1.0,
            ln_p: 0.0,
            clamped: false,
        }
    }

    /// Strictly more significant than `other`.
    ///
    /// With equal degrees of freedom this compares statistics directly, so it
    /// never loses resolution to tail-probability rounding.
    pub fn beats(&self, other: &TestResult) -> bool {
        if self.dof == other.dof {
            self.statistic > other.statistic
        } else {
            self.ln_p < other.ln_p
        }
    }
}
