//! The black-box classifier contract and its in-process implementations.

mod centroid;
mod toy_mlp;

pub use centroid::CentroidSoftmaxModel;
pub use toy_mlp::ToyMlpModel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums for rows computed in-process.
pub const IN_PROCESS_SUM_TOL: f64 = 1e-9;
/// Tolerance on row sums for rows received over the plugin wire.
pub const WIRE_SUM_TOL: f64 = 1e-6;

/// Class probabilities for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityRow(Vec<f64>);

impl ProbabilityRow {
    /// Checks every entry is in `[0, 1]` and the row sums to 1 within `tol`.
    pub fn new(probabilities: Vec<f64>, tol: f64) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Protocol("empty probability row".into()));
        }
        if let Some(p) = probabilities
            .iter()
            .find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(Error::Protocol(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Protocol(format!("normalization violated: row sums to {sum}")));
        }
        Ok(Self(probabilities))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0.get(class).copied()
    }
}

/// A classifier reachable only through batched probability queries.
///
/// Implementations must be deterministic: identical input batches yield
/// identical rows, in input order.
pub trait Oracle: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Expected sample width, when the oracle declares one.
    fn sample_dim(&self) -> Option<usize>;

    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>>;

    /// Probability of `target` at `x` and its gradient with respect to `x`.
    /// Only glass-box oracles provide this.
    fn target_gradient(&self, _x: &[f64], _target: usize) -> Result<(f64, Vec<f64>)> {
        Err(Error::NotDifferentiable(self.describe()))
    }

    fn describe(&self) -> String;
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn sample_dim(&self) -> Option<usize> {
        (**self).sample_dim()
    }
    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>> {
        (**self).predict_batch(samples)
    }
    fn target_gradient(&self, x: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
        (**self).target_gradient(x, target)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

pub(crate) fn check_target(target: usize, num_classes: usize) -> Result<()> {
    if target < num_classes {
        Ok(())
    } else {
        Err(Error::TargetOutOfRange { target, num_classes })
    }
}
