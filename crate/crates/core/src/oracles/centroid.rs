use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{read_model_file, softmax, write_numbers, FormatError, Lines};

use super::{check_target, Oracle, ProbabilityRow, IN_PROCESS_SUM_TOL};

/// Softmax over negative squared distances to one centroid per class:
/// `p_c(x) ∝ exp(-‖x - μ_c‖² / τ)`.
///
/// File format:
///
/// ```text
/// centroid
/// temperature 2
/// centroids 3 4      # count, dimension
/// <one line of 4 numbers per centroid>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSoftmaxModel {
    centroids: Vec<Vec<f64>>,
    temperature: f64,
}

impl CentroidSoftmaxModel {
    pub fn new(centroids: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Dimension("at least one centroid required".into()))?;
        if dim == 0 || centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::Dimension("centroids must share a nonzero dimension".into()));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite centroid coordinate".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be > 0, got {temperature}")));
        }
        Ok(Self { centroids, temperature })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "sample width {} does not match centroid dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let logits: Vec<f64> = self
            .centroids
            .iter()
            .map(|mu| -x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / self.temperature)
            .collect();
        Ok(softmax(&logits))
    }

    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "centroid").unwrap();
        writeln!(s, "temperature {}", self.temperature).unwrap();
        writeln!(s, "centroids {} {}", self.centroids.len(), self.dim()).unwrap();
        for c in &self.centroids {
            write_numbers(&mut s, c.iter());
        }
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, FormatError> {
        let mut lines = Lines::new(text);
        lines.expect_keyword("centroid")?;
        let temperature = lines.keyed_value::<f64>("temperature")?;
        let (count, dim) = lines.keyed_pair("centroids")?;
        let centroids = (0..count)
            .map(|_| lines.numbers(dim))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        lines.expect_end()?;
        Self::new(centroids, temperature).map_err(|e| FormatError::new(0, e.to_string()))
    }

    /// Reads a model file, trying `path.centroid` when `path` does not exist.
    pub fn load(path: &Path) -> Result<Self> {
        let (path, text) = read_model_file(path, "centroid")?;
        Self::parse(&text).map_err(|e| e.at(&path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_canonical_string())?;
        Ok(())
    }
}

impl Oracle for CentroidSoftmaxModel {
    fn num_classes(&self) -> usize {
        self.centroids.len()
    }

    fn sample_dim(&self) -> Option<usize> {
        Some(self.dim())
    }

    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>> {
        samples
            .iter()
            .map(|x| ProbabilityRow::new(self.probabilities(x)?, IN_PROCESS_SUM_TOL))
            .collect()
    }

    /// `∇p_t = p_t · (2/τ) · (μ_t − Σ_j p_j μ_j)`.
    fn target_gradient(&self, x: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
        check_target(target, self.num_classes())?;
        let p = self.probabilities(x)?;
        let scale = p[target] * 2.0 / self.temperature;
        let grad = (0..self.dim())
            .map(|i| {
                let mean: f64 = p.iter().zip(&self.centroids).map(|(pj, mu)| pj * mu[i]).sum();
                scale * (self.centroids[target][i] - mean)
            })
            .collect();
        Ok((p[target], grad))
    }

    fn describe(&self) -> String {
        format!("centroid-softmax({} classes, dim {})", self.num_classes(), self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_at_centroid() {
        let m = CentroidSoftmaxModel::new(vec![vec![0.0, 0.0], vec![10.0, 0.0]], 1.0).unwrap();
        let rows = m.predict_batch(&[vec![0.0, 0.0]]).unwrap();
        let expected = 1.0 / (1.0 + (-100.0f64).exp());
        assert_abs_diff_eq!(rows[0].as_slice()[0], expected, epsilon = 1e-9);
    }

    #[test]
    fn equidistant_sample_is_uniform() {
        let m = CentroidSoftmaxModel::new(vec![vec![-3.0, 1.0], vec![3.0, 1.0]], 0.7).unwrap();
        let rows = m.predict_batch(&[vec![0.0, -4.0]]).unwrap();
        assert_abs_diff_eq!(rows[0].as_slice()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].as_slice()[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn midpoint_with_temperature_two() {
        let m = CentroidSoftmaxModel::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], 2.0).unwrap();
        let rows = m.predict_batch(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(rows[0].as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = CentroidSoftmaxModel::new(vec![vec![0.0, 0.0]], 1.0).unwrap();
        assert!(matches!(m.predict_batch(&[vec![1.0]]), Err(Error::Dimension(_))));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CentroidSoftmaxModel::new(vec![vec![0.0], vec![0.0, 1.0]], 1.0).is_err());
        assert!(CentroidSoftmaxModel::new(vec![vec![0.0]], 0.0).is_err());
        assert!(CentroidSoftmaxModel::new(vec![], 1.0).is_err());
    }

    #[test]
    fn file_round_trip() {
        let m = CentroidSoftmaxModel::new(vec![vec![0.1, -2.5], vec![3.0, 1e-7]], 1.5).unwrap();
        let text = m.to_canonical_string();
        let back = CentroidSoftmaxModel::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_canonical_string(), text);
    }
}
