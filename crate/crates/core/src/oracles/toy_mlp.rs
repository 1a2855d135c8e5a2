use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{Layer, Mlp, OutputActivation};

use super::{check_target, Oracle, ProbabilityRow, IN_PROCESS_SUM_TOL};

/// A small tanh network with a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMlpModel {
    net: Mlp,
}

impl ToyMlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        Mlp::new(layers, OutputActivation::Softmax).map(|net| Self { net })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.output_activation() != OutputActivation::Softmax {
            return Err(Error::Config(format!(
                "classifier needs a softmax output, found {}",
                net.output_activation()
            )));
        }
        Ok(Self { net })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn widths(&self) -> Vec<usize> {
        self.net.widths()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_mlp(Mlp::load(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.net.save(path)
    }
}

impl Oracle for ToyMlpModel {
    fn num_classes(&self) -> usize {
        self.net.output_width()
    }

    fn sample_dim(&self) -> Option<usize> {
        Some(self.net.input_width())
    }

    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>> {
        samples
            .iter()
            .map(|x| ProbabilityRow::new(self.net.forward(x)?, IN_PROCESS_SUM_TOL))
            .collect()
    }

    fn target_gradient(&self, x: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
        check_target(target, self.num_classes())?;
        let mut onehot = vec![0.0; self.num_classes()];
        onehot[target] = 1.0;
        let (p, grad) = self.net.forward_and_vjp(x, &onehot)?;
        Ok((p[target], grad))
    }

    fn describe(&self) -> String {
        let widths: Vec<String> = self.widths().iter().map(usize::to_string).collect();
        format!("toy-mlp({})", widths.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(rng: &mut ChaCha8Rng, inp: usize, out: usize) -> Layer {
        let rows: Vec<Vec<f64>> = (0..out)
            .map(|_| (0..inp).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let bias = (0..out).map(|_| rng.random_range(-0.5..0.5)).collect();
        Layer::from_rows(&rows, bias).unwrap()
    }

    /// Straight loops over the raw row-major parameters.
    fn naive_forward(rows: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (i, (w, b)) in rows.iter().enumerate() {
            let mut next = Vec::new();
            for (r, row) in w.iter().enumerate() {
                let mut acc = b[r];
                for (j, wij) in row.iter().enumerate() {
                    acc += wij * h[j];
                }
                next.push(acc);
            }
            h = if i + 1 < rows.len() {
                next.iter().map(|v| v.tanh()).collect()
            } else {
                let mx = next.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = next.iter().map(|v| (v - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                e.iter().map(|v| v / z).collect()
            };
        }
        h
    }

    fn raw(layer: &Layer) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = (0..layer.weight.nrows())
            .map(|r| layer.weight.row(r).iter().copied().collect())
            .collect();
        (rows, layer.bias.iter().copied().collect())
    }

    #[test]
    fn zero_network_is_uniform() {
        let layer = Layer::from_rows(&[vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]], vec![0.0; 3]).unwrap();
        let model = ToyMlpModel::new(vec![layer]).unwrap();
        let rows = model.predict_batch(&[vec![3.0, -1.0, 2.0, 9.0]]).unwrap();
        for p in rows[0].as_slice() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_layer_at_origin_is_uniform() {
        let layer = Layer::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2]).unwrap();
        let model = ToyMlpModel::new(vec![layer]).unwrap();
        assert_eq!(
            model.predict_batch(&[vec![0.0, 0.0]]).unwrap()[0].as_slice(),
            &[0.5, 0.5]
        );
    }

    #[test]
    fn matches_naive_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layers = vec![random_layer(&mut rng, 3, 5), random_layer(&mut rng, 5, 4)];
        let raw_layers: Vec<_> = layers.iter().map(raw).collect();
        let model = ToyMlpModel::new(layers).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let got = model.predict_batch(std::slice::from_ref(&x)).unwrap();
            let want = naive_forward(&raw_layers, &x);
            for (g, w) in got[0].as_slice().iter().zip(&want) {
                assert_abs_diff_eq!(*g, *w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let layer = Layer::from_rows(&[vec![1.0, 0.0]], vec![0.0]).unwrap();
        let model = ToyMlpModel::new(vec![layer]).unwrap();
        assert!(matches!(model.predict_batch(&[vec![1.0]]), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_softmax_head_rejected() {
        let layer = Layer::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        let net = Mlp::new(vec![layer], OutputActivation::Tanh).unwrap();
        assert!(ToyMlpModel::from_mlp(net).is_err());
    }
}
