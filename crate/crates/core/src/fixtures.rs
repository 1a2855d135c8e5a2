//! Deterministic generator/oracle pairs with known landscape geometry.
//!
//! | name              | generator             | oracle                     |
//! |-------------------|-----------------------|----------------------------|
//! | `easy`            | identity, d = 2       | constant, target ≈ 0.9999  |
//! | `multimodal`      | identity, d = 4       | 3-centroid softmax         |
//! | `saddle`          | identity, d = 2       | 2-4-3 tanh/softmax network |
//! | `affine-centroid` | affine 3 → 4          | 3-centroid softmax         |
//! | `affine-mlp`      | affine 3 → 4          | 4-8-3 network              |
//! | `mlp-centroid`    | tanh network 3-6-4    | 3-centroid softmax         |
//! | `mlp-mlp`         | tanh network 3-6-4    | 4-8-3 network              |
//!
//! The last four are seeded random and exist for gradient checking. The target
//! class is 0 everywhere.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generators::{AffineDecoder, Generator, IdentityGenerator, MlpDecoder};
use crate::latent::LatentVector;
use crate::mlp::Layer;
use crate::oracles::{CentroidSoftmaxModel, Oracle, ToyMlpModel};

/// A generator and an oracle ready to be searched.
pub struct Pipeline {
    pub generator: Box<dyn Generator>,
    pub oracle: Box<dyn Oracle>,
}

impl Pipeline {
    pub fn new(generator: impl Generator + 'static, oracle: impl Oracle + 'static) -> Self {
        Self {
            generator: Box::new(generator),
            oracle: Box::new(oracle),
        }
    }
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("generator", &self.generator.describe())
            .field("oracle", &self.oracle.describe())
            .finish()
    }
}

/// Something that can open a fresh [`Pipeline`], once per worker.
pub trait PipelineSource: Sync {
    fn open(&self) -> Result<Pipeline>;
}

impl<F> PipelineSource for F
where
    F: Fn() -> Result<Pipeline> + Sync,
{
    fn open(&self) -> Result<Pipeline> {
        self()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinFixture {
    Easy,
    Multimodal,
    Saddle,
    AffineCentroid,
    AffineMlp,
    MlpCentroid,
    MlpMlp,
}

impl BuiltinFixture {
    pub const ALL: [Self; 7] = [
        Self::Easy,
        Self::Multimodal,
        Self::Saddle,
        Self::AffineCentroid,
        Self::AffineMlp,
        Self::MlpCentroid,
        Self::MlpMlp,
    ];

    /// The four combinations of differentiable decoder and classifier.
    pub const DIFFERENTIABLE: [Self; 4] = [Self::AffineCentroid, Self::AffineMlp, Self::MlpCentroid, Self::MlpMlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Multimodal => "multimodal",
            Self::Saddle => "saddle",
            Self::AffineCentroid => "affine-centroid",
            Self::AffineMlp => "affine-mlp",
            Self::MlpCentroid => "mlp-centroid",
            Self::MlpMlp => "mlp-mlp",
        }
    }

    pub fn latent_dim(self) -> usize {
        match self {
            Self::Easy | Self::Saddle => 2,
            Self::Multimodal => 4,
            Self::AffineCentroid | Self::AffineMlp | Self::MlpCentroid | Self::MlpMlp => 3,
        }
    }

    /// A stationary non-optimal point of the target probability, when the
    /// fixture is built around one.
    pub fn saddle_point(self) -> Option<LatentVector> {
        match self {
            Self::Saddle => Some(LatentVector::zeros(2)),
            _ => None,
        }
    }

    pub fn build(self) -> Pipeline {
        match self {
            Self::Easy => Pipeline::new(IdentityGenerator::new(2), easy_oracle()),
            Self::Multimodal => Pipeline::new(IdentityGenerator::new(4), multimodal_oracle()),
            Self::Saddle => Pipeline::new(IdentityGenerator::new(2), saddle_oracle()),
            Self::AffineCentroid => Pipeline::new(random_affine(), random_centroid()),
            Self::AffineMlp => Pipeline::new(random_affine(), random_classifier()),
            Self::MlpCentroid => Pipeline::new(random_decoder(), random_centroid()),
            Self::MlpMlp => Pipeline::new(random_decoder(), random_classifier()),
        }
    }
}

impl FromStr for BuiltinFixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|f| f.name()).collect();
            Error::Config(format!("unknown fixture {s:?} (known: {})", names.join(", ")))
        })
    }
}

impl fmt::Display for BuiltinFixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn layer(rows: &[&[f64]], bias: &[f64]) -> Layer {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Layer::from_rows(&rows, bias.to_vec()).expect("fixture layer shapes are consistent")
}

/// Zero weights and biases (10, 0, 0): class 0 gets `e¹⁰ / (e¹⁰ + 2)`
/// everywhere.
pub fn easy_oracle() -> ToyMlpModel {
    ToyMlpModel::new(vec![layer(&[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]], &[10.0, 0.0, 0.0])]).expect("valid fixture")
}

/// Target centroid near the `+` corner of the box, rivals at the origin and
/// at `(-2, 2, -2, 2)`. The temperature is high enough that the 0.95 region
/// is only a small neighbourhood of the corner, which uniform draws rarely hit.
pub fn multimodal_oracle() -> CentroidSoftmaxModel {
    CentroidSoftmaxModel::new(
        vec![
            vec![4.0, 4.0, 4.0, 4.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![-2.0, 2.0, -2.0, 2.0],
        ],
        24.0,
    )
    .expect("valid fixture")
}

/// Hidden units `tanh(1 ± x₀)` and `tanh(1 ± x₁)`. Their pairwise sums are even
/// bumps peaking at 0, and class 0's logit is `5·(bump₁ − bump₀) − 3`: it grows
/// away from `x₀ = 0` and shrinks away from `x₁ = 0`. The origin is therefore
/// a saddle of the class-0 probability, with `p₀(0) = e⁻³ / (e⁻³ + 2) ≈ 0.024`,
/// while `|x₀|` near the box edge with small `|x₁|` gives `p₀ > 0.95`.
pub fn saddle_oracle() -> ToyMlpModel {
    let hidden = layer(
        &[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]],
        &[1.0, 1.0, 1.0, 1.0],
    );
    let head = layer(
        &[&[-5.0, -5.0, 5.0, 5.0], &[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0]],
        &[-3.0, 0.0, 0.0],
    );
    ToyMlpModel::new(vec![hidden, head]).expect("valid fixture")
}

fn random_rows(rng: &mut ChaCha8Rng, out: usize, inp: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..out)
        .map(|_| (0..inp).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

fn random_layer(rng: &mut ChaCha8Rng, inp: usize, out: usize, scale: f64) -> Layer {
    let rows = random_rows(rng, out, inp, scale);
    let bias = (0..out).map(|_| rng.random_range(-0.5..0.5)).collect();
    Layer::from_rows(&rows, bias).expect("fixture layer shapes are consistent")
}

pub fn random_affine() -> AffineDecoder {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAFF1);
    let w = random_rows(&mut rng, 4, 3, 0.6);
    let b = (0..4).map(|_| rng.random_range(-0.3..0.3)).collect();
    AffineDecoder::new(&w, b).expect("valid fixture")
}

pub fn random_decoder() -> MlpDecoder {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0);
    MlpDecoder::new(vec![
        random_layer(&mut rng, 3, 6, 0.8),
        random_layer(&mut rng, 6, 4, 0.8),
    ])
    .expect("valid fixture")
}

pub fn random_centroid() -> CentroidSoftmaxModel {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCE17);
    CentroidSoftmaxModel::new(random_rows(&mut rng, 3, 4, 1.0), 2.0).expect("valid fixture")
}

pub fn random_classifier() -> ToyMlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0C1A);
    ToyMlpModel::new(vec![
        random_layer(&mut rng, 4, 8, 1.2),
        random_layer(&mut rng, 8, 3, 1.5),
    ])
    .expect("valid fixture")
}
