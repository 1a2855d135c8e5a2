//! Wrappers that record every batch passed to an oracle or generator.

use std::sync::Mutex;

use crate::error::Result;
use crate::generators::Generator;
use crate::latent::LatentVector;
use crate::oracles::{Oracle, ProbabilityRow};

#[derive(Debug, Default)]
struct Log(Mutex<Vec<usize>>);

impl Log {
    fn push(&self, n: usize) {
        self.0.lock().expect("call log").push(n);
    }

    fn sizes(&self) -> Vec<usize> {
        self.0.lock().expect("call log").clone()
    }
}

/// Counts samples scored by the wrapped oracle.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    log: Log,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            log: Log::default(),
        }
    }

    /// Total samples scored, i.e. model calls.
    pub fn calls(&self) -> u64 {
        self.log.sizes().iter().sum::<usize>() as u64
    }

    /// Size of each `predict_batch` invocation, in order.
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.log.sizes()
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn sample_dim(&self) -> Option<usize> {
        self.inner.sample_dim()
    }

    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>> {
        self.log.push(samples.len());
        self.inner.predict_batch(samples)
    }

    fn target_gradient(&self, x: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
        self.log.push(1);
        self.inner.target_gradient(x, target)
    }

    fn describe(&self) -> String {
        format!("counting({})", self.inner.describe())
    }
}

/// Counts latents decoded by the wrapped generator.
#[derive(Debug)]
pub struct CountingGenerator<G> {
    inner: G,
    log: Log,
}

impl<G: Generator> CountingGenerator<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            log: Log::default(),
        }
    }

    pub fn decoded(&self) -> u64 {
        self.log.sizes().iter().sum::<usize>() as u64
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.log.sizes()
    }
}

impl<G: Generator> Generator for CountingGenerator<G> {
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }

    fn sample_dim(&self) -> usize {
        self.inner.sample_dim()
    }

    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        self.log.push(latents.len());
        self.inner.decode_batch(latents)
    }

    fn pullback(&self, z: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.inner.pullback(z, cotangent)
    }

    fn describe(&self) -> String {
        format!("counting({})", self.inner.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::IdentityGenerator;
    use crate::oracles::CentroidSoftmaxModel;

    #[test]
    fn counts_batches() {
        let o = CountingOracle::new(CentroidSoftmaxModel::new(vec![vec![0.0], vec![1.0]], 1.0).unwrap());
        o.predict_batch(&[vec![0.0], vec![1.0]]).unwrap();
        o.predict_batch(&[vec![2.0]]).unwrap();
        o.target_gradient(&[0.5], 0).unwrap();
        assert_eq!(o.batch_sizes(), vec![2, 1, 1]);
        assert_eq!(o.calls(), 4);
        let g = CountingGenerator::new(IdentityGenerator::new(1));
        g.decode_batch(&[LatentVector::zeros(1)]).unwrap();
        assert_eq!(g.decoded(), 1);
    }
}
