//! Exemplar synthesis for black-box classifiers.
//!
//! Given a generator `G` from a latent box `[-u, u]^d` to sample space and a
//! classifier `C` that only answers probability queries, find latents whose
//! decoded samples `C` assigns to a target class with high confidence.
//!
//! The search itself is [`es::run_es`], an elitist evolutionary strategy whose
//! mutations carry per-specimen momentum. [`gd::run_gd`] is the glass-box
//! comparison that needs analytic gradients through both models, and
//! [`bench`] runs either one many times over reproducible random streams.
//!
//! ```
//! use exemplar_core::{fixtures::BuiltinFixture, rng_streams, run_es, EsConfig};
//!
//! let pipeline = BuiltinFixture::Multimodal.build();
//! let cfg = EsConfig { latent_dim: 4, ..EsConfig::default() };
//! let result = run_es(&cfg, &*pipeline.generator, &*pipeline.oracle, &mut rng_streams(7, 0)).unwrap();
//! assert!(result.converged);
//! assert_eq!(result.model_calls, 50 + result.generations * 20);
//! ```

pub mod bench;
pub mod config;
mod error;
pub mod es;
pub mod fixtures;
pub mod gd;
pub mod generators;
pub mod instrument;
pub mod latent;
pub mod mlp;
pub mod oracles;
pub mod pipeline;
pub mod plugin;
pub mod report;
mod result;
pub mod rng;

pub use bench::{run_sweep, run_trials, BenchStats, Method, SweepRow, TrialRecord};
pub use config::{
    validate_config, validate_gd_config, ConfigFile, ConvergeOn, EsConfig, GdConfig, SweepAxis, SweepSpec,
};
pub use error::{Error, Result};
pub use es::{
    check_convergence, es_step, evaluate_unscored, init_population, mutate_specimen, run_es, select_elite, EsState,
    EsVariant,
};
pub use fixtures::{BuiltinFixture, Pipeline, PipelineSource};
pub use gd::{composite_gradient, finite_diff_gradient, gradient_check, run_gd, GdStart, GradientCheck};
pub use generators::{AffineDecoder, Generator, IdentityGenerator, MlpDecoder};
pub use latent::{clamp_latent, LatentVector, Specimen};
pub use oracles::{CentroidSoftmaxModel, Oracle, ProbabilityRow, ToyMlpModel};
pub use pipeline::{GeneratorSource, OracleSource, PipelineSpec};
pub use result::RunResult;
pub use rng::{rng_streams, TrialRng};
