//! Latent-space geometry: points in the box `[-u, u]^d` and the specimens
//! that carry them through evolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the generator's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    /// Wraps `components`, rejecting empty or non-finite input.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Dimension("latent vector must have d >= 1".into()));
        }
        check_finite(&components)?;
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn in_box(&self, u: f64) -> bool {
        self.0.iter().all(|c| (-u..=u).contains(c))
    }

    /// Componentwise saturation onto `[-u, u]`. Infallible for values that
    /// already satisfy the finiteness invariant.
    pub(crate) fn clamped(mut self, u: f64) -> Self {
        for c in &mut self.0 {
            *c = c.clamp(-u, u);
        }
        self
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Projects `z` onto the latent box `[-u, u]^d`.
///
/// The projection is idempotent and leaves points already inside the box
/// untouched.
pub fn clamp_latent(z: &[f64], u: f64) -> Result<LatentVector> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Config(format!("u must be a positive finite number, got {u}")));
    }
    LatentVector::new(z.to_vec()).map(|z| z.clamped(u))
}

/// Fitness cache on a specimen. `None` means the specimen has not been sent
/// through the generator and oracle yet.
pub type Fitness = Option<f64>;

/// The unit of evolution: a latent position, its momentum, and its cached
/// fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Specimen {
    pub latent: LatentVector,
    pub velocity: Vec<f64>,
    pub fitness: Fitness,
}

impl Specimen {
    /// A fresh specimen at `latent` with zero velocity and no fitness.
    pub fn new(latent: LatentVector) -> Self {
        let velocity = vec![0.0; latent.dim()];
        Self {
            latent,
            velocity,
            fitness: None,
        }
    }

    pub fn is_scored(&self) -> bool {
        self.fitness.is_some()
    }

    /// Fitness, or `f64::NEG_INFINITY` for an unscored specimen.
    pub fn fitness_or_min(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_inside_box_is_identity() {
        let z = clamp_latent(&[0.3, -0.2], 5.0).unwrap();
        assert_eq!(z.as_slice(), &[0.3, -0.2]);
    }

    #[test]
    fn clamp_saturates_componentwise() {
        let z = clamp_latent(&[7.1, -9.0], 5.0).unwrap();
        assert_eq!(z.as_slice(), &[5.0, -5.0]);
    }

    #[test]
    fn clamp_boundary_is_fixed_point() {
        let z = clamp_latent(&[-5.0, 5.0], 5.0).unwrap();
        assert_eq!(z.as_slice(), &[-5.0, 5.0]);
    }

    #[test]
    fn clamp_rejects_non_finite() {
        assert!(matches!(
            clamp_latent(&[0.0, f64::NAN], 5.0),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(clamp_latent(&[f64::INFINITY], 5.0).is_err());
    }

    #[test]
    fn empty_latent_rejected() {
        assert!(LatentVector::new(vec![]).is_err());
    }

    #[test]
    fn fresh_specimen_has_zero_velocity() {
        let s = Specimen::new(LatentVector::new(vec![1.0, 2.0, 3.0]).unwrap());
        assert_eq!(s.velocity, vec![0.0; 3]);
        assert!(!s.is_scored());
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent_projection(
            z in prop::collection::vec(-1e6f64..1e6, 1..8),
            u in 0.01f64..100.0,
        ) {
            let once = clamp_latent(&z, u).unwrap();
            let twice = clamp_latent(once.as_slice(), u).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.as_slice().iter().all(|c| c.abs() <= u));
            if z.iter().all(|c| c.abs() <= u) {
                prop_assert_eq!(once.as_slice(), z.as_slice());
            }
        }
    }
}
