//! Synthetic control weights.
//!
//! Two nested problems: for fixed predictor weights `v`, donor weights `w`
//! minimize the v-weighted distance between treated and synthetic
//! predictors ([`solve_w`]); `v` itself is chosen to minimize the
//! pre-period outcome MSPE of the resulting synthetic unit
//! ([`optimize_v`]).

mod fit;
mod matrices;
pub mod nelder_mead;
mod simplex_qp;

pub use fit::{fit, optimize_v, outer_loss, OuterEval, OuterProblem, StartTrace, SynthFit, VOptimum};
pub use matrices::{build_matrices, PredictorMatrices};
pub use nelder_mead::NelderMeadSettings;
pub use simplex_qp::{inner_objective, solve_w, solve_w_with, InnerSettings};

use crate::numeric::{compensated_sum, normalize_simplex, on_simplex};
use crate::panel::{PanelError, UnitId};
use serde::Serialize;
use thiserror::Error;

/// Tolerance for simplex membership of weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("`{unit}` has no value for predictor `{predictor}`")]
    MissingPredictor { unit: UnitId, predictor: String },
    #[error("predictor `{predictor}` has zero variance across units")]
    DegeneratePredictor { predictor: String },
    #[error("inner solver did not converge in {iterations} iterations (duality gap {residual:.3e})")]
    SolverFailure {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
    #[error("all {starts} predictor-weight starts failed: {last_error}")]
    OptimizationFailure { starts: usize, last_error: String },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

macro_rules! simplex_weights {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Checks simplex membership within [`SIMPLEX_TOL`].
            pub fn new(values: Vec<f64>) -> Result<Self, EstimatorError> {
                if !on_simplex(&values, SIMPLEX_TOL) {
                    return Err(EstimatorError::InvalidWeights(format!(
                        "{values:?} is not on the unit simplex (sum {})",
                        compensated_sum(values.iter().copied())
                    )));
                }
                Ok(Self(values))
            }

            pub fn equal(n: usize) -> Self {
                Self(vec![1.0 / n as f64; n])
            }

            /// Clips negatives and rescales onto the simplex.
            pub fn from_raw(mut values: Vec<f64>) -> Self {
                normalize_simplex(&mut values);
                Self(values)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }
    };
}

simplex_weights!(
    /// Predictor weights: one non-negative entry per predictor, summing to one.
    VWeights
);
simplex_weights!(
    /// Donor weights, aligned with the donor order of the matrices they came from.
    WWeights
);

/// Knobs for the nested optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Random Dirichlet starts on top of the equal-weight and vertex starts.
    pub outer_starts: usize,
    pub seed: u64,
    pub outer: NelderMeadSettings,
    pub inner: InnerSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            outer_starts: 16,
            seed: 0,
            outer: NelderMeadSettings::default(),
            inner: InnerSettings::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validate_simplex() {
        assert!(VWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(VWeights::new(vec![0.5, 0.6]).is_err());
        assert!(WWeights::new(vec![1.2, -0.2]).is_err());
        assert!(WWeights::new(vec![]).is_err());
        let w = WWeights::from_raw(vec![-1.0, 2.0, 2.0]);
        assert_eq!(w.as_slice(), &[0.0, 0.5, 0.5]);
    }
}
