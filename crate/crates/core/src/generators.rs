//! The generator contract: deterministic decoders from latent space to
//! sample space.

use std::path::Path;

use crate::error::{Error, Result};
use crate::latent::LatentVector;
use crate::mlp::{Layer, Mlp, OutputActivation};

/// A deterministic batch decoder from latent vectors to sample vectors.
pub trait Generator: Send + Sync {
    fn latent_dim(&self) -> usize;

    fn sample_dim(&self) -> usize;

    /// Decodes `latents` in order; output length equals input length.
    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>>;

    /// `Jᵀ c` where `J` is the Jacobian of the decoder at `z`.
    fn pullback(&self, _z: &[f64], _cotangent: &[f64]) -> Result<Vec<f64>> {
        Err(Error::NotDifferentiable(self.describe()))
    }

    fn describe(&self) -> String;
}

impl<T: Generator + ?Sized> Generator for Box<T> {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn sample_dim(&self) -> usize {
        (**self).sample_dim()
    }
    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        (**self).decode_batch(latents)
    }
    fn pullback(&self, z: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        (**self).pullback(z, cotangent)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} width {got} does not match expected {want}"
        )))
    }
}

/// Returns latents unchanged; searches the oracle's input space directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityGenerator {
    dim: usize,
}

impl IdentityGenerator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

/// Identity decode of a batch.
pub fn identity_decode(latents: &[LatentVector]) -> Vec<Vec<f64>> {
    latents.iter().map(|z| z.as_slice().to_vec()).collect()
}

impl Generator for IdentityGenerator {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        for z in latents {
            check_dim("latent", z.dim(), self.dim)?;
        }
        Ok(identity_decode(latents))
    }

    fn pullback(&self, z: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        check_dim("latent", z.len(), self.dim)?;
        check_dim("cotangent", cotangent.len(), self.dim)?;
        Ok(cotangent.to_vec())
    }

    fn describe(&self) -> String {
        format!("identity({})", self.dim)
    }
}

/// `x = W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDecoder {
    net: Mlp,
}

impl AffineDecoder {
    /// `weight` is row-major, `sample_dim` rows of `latent_dim` entries.
    pub fn new(weight: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let layer = Layer::from_rows(weight, bias)?;
        Mlp::new(vec![layer], OutputActivation::Identity).map(|net| Self { net })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.layers().len() != 1 || net.output_activation() != OutputActivation::Identity {
            return Err(Error::Config(
                "affine decoder file must hold one layer with identity output".into(),
            ));
        }
        Ok(Self { net })
    }

    pub fn layer(&self) -> &Layer {
        &self.net.layers()[0]
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_mlp(Mlp::load(path)?)
    }
}

impl Generator for AffineDecoder {
    fn latent_dim(&self) -> usize {
        self.net.input_width()
    }

    fn sample_dim(&self) -> usize {
        self.net.output_width()
    }

    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        latents.iter().map(|z| self.net.forward(z.as_slice())).collect()
    }

    fn pullback(&self, z: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.net.forward_and_vjp(z, cotangent).map(|(_, g)| g)
    }

    fn describe(&self) -> String {
        format!("affine({}->{})", self.latent_dim(), self.sample_dim())
    }
}

/// Tanh network with a tanh output, so samples lie in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDecoder {
    net: Mlp,
}

impl MlpDecoder {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        Mlp::new(layers, OutputActivation::Tanh).map(|net| Self { net })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.output_activation() != OutputActivation::Tanh {
            return Err(Error::Config(format!(
                "mlp decoder needs a tanh output, found {}",
                net.output_activation()
            )));
        }
        Ok(Self { net })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_mlp(Mlp::load(path)?)
    }
}

impl Generator for MlpDecoder {
    fn latent_dim(&self) -> usize {
        self.net.input_width()
    }

    fn sample_dim(&self) -> usize {
        self.net.output_width()
    }

    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        latents.iter().map(|z| self.net.forward(z.as_slice())).collect()
    }

    fn pullback(&self, z: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.net.forward_and_vjp(z, cotangent).map(|(_, g)| g)
    }

    fn describe(&self) -> String {
        let widths: Vec<String> = self.net.widths().iter().map(usize::to_string).collect();
        format!("mlp-decoder({})", widths.join("x"))
    }
}
