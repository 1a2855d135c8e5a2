use serde::{Deserialize, Serialize};

use crate::latent::Specimen;

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub converged: bool,
    /// Individual sample evaluations charged to the run.
    pub model_calls: u64,
    /// ES generations after the initial population, or GD iterations.
    pub generations: u64,
    /// Seconds; excluded from every reproducibility comparison.
    pub wall_time: f64,
    pub best_specimen: Specimen,
    pub final_elite: Vec<Specimen>,
}

impl RunResult {
    /// Equality over every field except `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time: 0.0,
            ..self.clone()
        } == Self {
            wall_time: 0.0,
            ..other.clone()
        }
    }

    pub fn best_fitness(&self) -> f64 {
        self.best_specimen.fitness_or_min()
    }
}
