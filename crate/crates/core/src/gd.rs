//! Glass-box baseline: gradient ascent with momentum on the target-class
//! probability, differentiating through both generator and classifier.
//!
//! One call to [`composite_gradient`] is one forward pass plus its backward
//! pass and is charged as a single model call.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{validate_gd_config, GdConfig};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::latent::{LatentVector, Specimen};
use crate::oracles::{check_target, Oracle};
use crate::result::RunResult;
use crate::rng::TrialRng;

/// `p_target(G(z))` and its gradient with respect to `z` via the chain rule.
pub fn composite_gradient<G, O>(gen: &G, oracle: &O, z: &LatentVector, target: usize) -> Result<(f64, Vec<f64>)>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    let x = gen
        .decode_batch(std::slice::from_ref(z))?
        .pop()
        .ok_or_else(|| Error::Protocol("generator returned no sample".into()))?;
    let (p, grad_x) = oracle.target_gradient(&x, target)?;
    let grad_z = gen.pullback(z.as_slice(), &grad_x)?;
    Ok((p, grad_z))
}

/// Central differences `(f(z + h·e_i) − f(z − h·e_i)) / 2h` per coordinate.
///
/// # Panics
///
/// If `h` is not positive.
pub fn finite_diff_gradient<F>(mut f: F, z: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite difference step must be positive");
    let mut probe = z.to_vec();
    (0..z.len())
        .map(|i| {
            probe[i] = z[i] + h;
            let up = f(&probe);
            probe[i] = z[i] - h;
            let down = f(&probe);
            probe[i] = z[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Gradients below this norm are compared absolutely rather than relatively.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Analytic and central-difference gradients at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub fitness: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `‖a − n‖ / max(‖a‖, ‖n‖, GRADIENT_FLOOR)` in the Euclidean norm.
    pub relative_error: f64,
}

/// Compares [`composite_gradient`] against [`finite_diff_gradient`] with
/// step `h`.
pub fn gradient_check<G, O>(gen: &G, oracle: &O, z: &LatentVector, target: usize, h: f64) -> Result<GradientCheck>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    let (fitness, analytic) = composite_gradient(gen, oracle, z, target)?;
    let mut failure = None;
    let mut f = |p: &[f64]| -> f64 {
        let value = LatentVector::new(p.to_vec())
            .and_then(|p| composite_gradient(gen, oracle, &p, target))
            .map(|(v, _)| v);
        value.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    };
    let numeric = finite_diff_gradient(&mut f, z.as_slice(), h);
    if let Some(e) = failure {
        return Err(e);
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied())
        .max(norm(&mut numeric.iter().copied()))
        .max(GRADIENT_FLOOR);
    Ok(GradientCheck {
        fitness,
        relative_error: diff / scale,
        analytic,
        numeric,
    })
}

/// Where a gradient run starts.
#[derive(Debug, Clone, PartialEq)]
pub enum GdStart {
    /// A fixed latent (clamped into the box).
    Point(LatentVector),
    /// Uniform in the box, drawn from the run's RNG.
    Random,
}

/// Position, velocity and accounting of a gradient run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdState {
    pub z: LatentVector,
    pub velocity: Vec<f64>,
    pub model_calls: u64,
    pub converged: bool,
}

/// One iteration: evaluate at `state.z`, then (unless converged) move.
/// Returns the updated state and the fitness observed at the old position.
pub fn gd_step<G, O>(mut state: GdState, gen: &G, oracle: &O, cfg: &GdConfig) -> Result<(GdState, f64)>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    let (fitness, grad) = composite_gradient(gen, oracle, &state.z, cfg.target_class)?;
    state.model_calls += 1;
    if fitness >= cfg.threshold {
        state.converged = true;
        return Ok((state, fitness));
    }
    for (v, g) in state.velocity.iter_mut().zip(&grad) {
        *v = cfg.momentum * *v + cfg.learning_rate * g;
    }
    let moved: Vec<f64> = state
        .z
        .as_slice()
        .iter()
        .zip(&state.velocity)
        .map(|(z, v)| (z + v).clamp(-cfg.u, cfg.u))
        .collect();
    state.z = LatentVector::new(moved)?;
    Ok((state, fitness))
}

/// Iterates `v' = μ·v + η·∇f(z)`, `z' = clamp(z + v')` until the fitness
/// reaches the threshold or the budget runs out.
pub fn run_gd<G, O>(cfg: &GdConfig, gen: &G, oracle: &O, start: GdStart, rng: &mut TrialRng) -> Result<RunResult>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    let cfg = validate_gd_config(cfg.clone())?;
    if gen.latent_dim() != cfg.latent_dim {
        return Err(Error::Dimension(format!(
            "generator latent_dim {} does not match config latent_dim {}",
            gen.latent_dim(),
            cfg.latent_dim
        )));
    }
    check_target(cfg.target_class, oracle.num_classes())?;
    let z0 = match start {
        GdStart::Point(z) => {
            if z.dim() != cfg.latent_dim {
                return Err(Error::Dimension(format!(
                    "start point width {} does not match latent_dim {}",
                    z.dim(),
                    cfg.latent_dim
                )));
            }
            z.clamped(cfg.u)
        }
        GdStart::Random => LatentVector::new((0..cfg.latent_dim).map(|_| rng.random_range(-cfg.u..=cfg.u)).collect())?,
    };
    let started = Instant::now();
    let mut state = GdState {
        velocity: vec![0.0; cfg.latent_dim],
        z: z0,
        model_calls: 0,
        converged: false,
    };
    let mut best: Option<Specimen> = None;
    loop {
        let here = Specimen {
            latent: state.z.clone(),
            velocity: state.velocity.clone(),
            fitness: None,
        };
        let (next, fitness) = gd_step(state, gen, oracle, &cfg)?;
        state = next;
        if best.as_ref().is_none_or(|b| fitness > b.fitness_or_min()) {
            best = Some(Specimen {
                fitness: Some(fitness),
                ..here.clone()
            });
        }
        if state.converged || state.model_calls >= cfg.max_calls {
            let last = Specimen {
                fitness: Some(fitness),
                ..here
            };
            return Ok(RunResult {
                converged: state.converged,
                model_calls: state.model_calls,
                generations: state.model_calls,
                wall_time: started.elapsed().as_secs_f64(),
                best_specimen: best.expect("at least one evaluation"),
                final_elite: vec![last],
            });
        }
    }
}
