//! Evolutionary strategy with momentum over a generator's latent space.
//!
//! One run proceeds as follows:
//!
//! 1. Draw `t` latents uniformly from `[-u, u]^d` with zero velocity and score
//!    them in one batch.
//! 2. Keep the `k` fittest specimens (ties go to the lower index).
//! 3. Give every elite specimen `m` offspring. Each offspring draws
//!    `ε ~ N(0, s²I)`, sets its velocity to `v' = α·v + ε` and its position to
//!    `clamp(z + v')`. Offspring are produced elite-major, mutation-minor.
//! 4. Score the `k·m` offspring in one batch; the next population is the
//!    elite followed by the offspring.
//! 5. Stop once the elite clears the confidence threshold or the call budget
//!    is spent.
//!
//! Fitness is cached, so an elite specimen is never sent to the model twice
//! and a run that lasts `G` generations costs exactly `t + G·k·m` calls.
//! With `α = 0` the update reduces to plain Gaussian mutation; the
//! [`EsVariant::Plain`] rule implements that directly and is kept as a
//! separate path so the two can be compared.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, ConvergeOn, EsConfig};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::latent::{LatentVector, Specimen};
use crate::oracles::{check_target, Oracle};
use crate::result::RunResult;
use crate::rng::TrialRng;

/// Mutation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EsVariant {
    /// `v' = α·v + ε`, `z' = clamp(z + v')`.
    #[default]
    Momentum,
    /// `z' = clamp(z + ε)`; velocity stays zero.
    Plain,
}

/// Population and bookkeeping between generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsState {
    pub population: Vec<Specimen>,
    pub generation: u64,
    pub model_calls: u64,
    pub converged: bool,
}

/// `t` specimens drawn uniformly from the latent box, unscored.
pub fn init_population(cfg: &EsConfig, rng: &mut TrialRng) -> Result<EsState> {
    let cfg = validate_config(cfg.clone())?;
    let population = (0..cfg.t)
        .map(|_| {
            let z = (0..cfg.latent_dim).map(|_| rng.random_range(-cfg.u..=cfg.u)).collect();
            LatentVector::new(z).map(Specimen::new)
        })
        .collect::<Result<_>>()?;
    Ok(EsState {
        population,
        generation: 0,
        model_calls: 0,
        converged: false,
    })
}

fn check_pipeline<G, O>(gen: &G, oracle: &O, cfg: &EsConfig) -> Result<()>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    if gen.latent_dim() != cfg.latent_dim {
        return Err(Error::Dimension(format!(
            "generator latent_dim {} does not match config latent_dim {}",
            gen.latent_dim(),
            cfg.latent_dim
        )));
    }
    if let Some(d) = oracle.sample_dim() {
        if d != gen.sample_dim() {
            return Err(Error::Dimension(format!(
                "oracle sample_dim {d} does not match generator sample_dim {}",
                gen.sample_dim()
            )));
        }
    }
    check_target(cfg.target_class, oracle.num_classes())
}

/// Decodes and scores every unscored specimen with one generator call and one
/// oracle call. Does nothing (and calls nothing) when all are scored.
pub fn evaluate_unscored<G, O>(mut state: EsState, gen: &G, oracle: &O, cfg: &EsConfig) -> Result<EsState>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    check_pipeline(gen, oracle, cfg)?;
    let pending: Vec<usize> = state
        .population
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_scored())
        .map(|(i, _)| i)
        .collect();
    if pending.is_empty() {
        return Ok(state);
    }
    let latents: Vec<LatentVector> = pending.iter().map(|&i| state.population[i].latent.clone()).collect();
    let samples = gen.decode_batch(&latents)?;
    if samples.len() != latents.len() {
        return Err(Error::Protocol(format!(
            "generator returned {} samples for {} latents",
            samples.len(),
            latents.len()
        )));
    }
    let rows = oracle.predict_batch(&samples)?;
    if rows.len() != samples.len() {
        return Err(Error::Protocol(format!(
            "row count mismatch: oracle returned {} rows for {} samples",
            rows.len(),
            samples.len()
        )));
    }
    for (&i, row) in pending.iter().zip(&rows) {
        let p = row.get(cfg.target_class).ok_or(Error::TargetOutOfRange {
            target: cfg.target_class,
            num_classes: row.num_classes(),
        })?;
        state.population[i].fitness = Some(p);
    }
    state.model_calls += pending.len() as u64;
    Ok(state)
}

/// Indices of the `k` fittest specimens, best first; ties keep index order.
pub fn elite_indices(population: &[Specimen], k: usize) -> Result<Vec<usize>> {
    if let Some(i) = population.iter().position(|s| !s.is_scored()) {
        return Err(Error::Unscored(i));
    }
    if k > population.len() {
        return Err(Error::Config(format!(
            "elite size {k} exceeds population size {}",
            population.len()
        )));
    }
    let mut order: Vec<usize> = (0..population.len()).collect();
    // stable sort keeps lower indices first among equal fitness
    order.sort_by(|&a, &b| {
        population[b]
            .fitness_or_min()
            .total_cmp(&population[a].fitness_or_min())
    });
    order.truncate(k);
    Ok(order)
}

/// The `k` fittest specimens sorted by descending fitness.
pub fn select_elite(population: &[Specimen], k: usize) -> Result<Vec<Specimen>> {
    Ok(elite_indices(population, k)?
        .into_iter()
        .map(|i| population[i].clone())
        .collect())
}

/// Applies a momentum mutation with an explicit perturbation `noise`.
pub fn mutate_with_noise(spec: &Specimen, noise: &[f64], alpha: f64, u: f64) -> Specimen {
    let velocity: Vec<f64> = spec.velocity.iter().zip(noise).map(|(v, e)| alpha * v + e).collect();
    let z: Vec<f64> = spec
        .latent
        .as_slice()
        .iter()
        .zip(&velocity)
        .map(|(z, v)| (z + v).clamp(-u, u))
        .collect();
    Specimen {
        latent: LatentVector::new(z).expect("finite latent plus finite step stays finite"),
        velocity,
        fitness: None,
    }
}

/// Plain Gaussian mutation with an explicit perturbation `noise`.
pub fn mutate_plain_with_noise(spec: &Specimen, noise: &[f64], u: f64) -> Specimen {
    let z: Vec<f64> = spec
        .latent
        .as_slice()
        .iter()
        .zip(noise)
        .map(|(z, e)| (z + e).clamp(-u, u))
        .collect();
    Specimen::new(LatentVector::new(z).expect("finite latent plus finite step stays finite"))
}

fn draw_noise(dim: usize, s: f64, rng: &mut TrialRng) -> Vec<f64> {
    let normal = Normal::new(0.0, s).expect("s validated > 0");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

/// One momentum offspring of `spec`; the parent is left untouched.
pub fn mutate_specimen(spec: &Specimen, cfg: &EsConfig, rng: &mut TrialRng) -> Specimen {
    let noise = draw_noise(spec.latent.dim(), cfg.s, rng);
    mutate_with_noise(spec, &noise, cfg.alpha, cfg.u)
}

fn mutate(spec: &Specimen, cfg: &EsConfig, variant: EsVariant, rng: &mut TrialRng) -> Specimen {
    match variant {
        EsVariant::Momentum => mutate_specimen(spec, cfg, rng),
        EsVariant::Plain => {
            let noise = draw_noise(spec.latent.dim(), cfg.s, rng);
            mutate_plain_with_noise(spec, &noise, cfg.u)
        }
    }
}

/// One generation: select, mutate, score the offspring in a single batch.
pub fn es_step<G, O>(
    state: EsState,
    gen: &G,
    oracle: &O,
    cfg: &EsConfig,
    variant: EsVariant,
    rng: &mut TrialRng,
) -> Result<EsState>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    let elite = select_elite(&state.population, cfg.k)?;
    let mut population = Vec::with_capacity(cfg.k * (cfg.m + 1));
    population.extend(elite.iter().cloned());
    for parent in &elite {
        for _ in 0..cfg.m {
            population.push(mutate(parent, cfg, variant, rng));
        }
    }
    let next = EsState {
        population,
        generation: state.generation + 1,
        model_calls: state.model_calls,
        converged: false,
    };
    let mut next = evaluate_unscored(next, gen, oracle, cfg)?;
    next.converged = check_convergence(&next, cfg);
    Ok(next)
}

/// Whether the current elite (or best specimen, per `converge_on`) clears the
/// threshold. The comparison is inclusive.
pub fn check_convergence(state: &EsState, cfg: &EsConfig) -> bool {
    let mut fitness: Vec<f64> = state.population.iter().map(Specimen::fitness_or_min).collect();
    if fitness.is_empty() {
        return false;
    }
    fitness.sort_by(|a, b| b.total_cmp(a));
    let needed = match cfg.converge_on {
        ConvergeOn::Best => 1,
        ConvergeOn::Elite => cfg.k.min(fitness.len()),
    };
    fitness[needed - 1] >= cfg.threshold
}

/// Full run with the momentum rule.
pub fn run_es<G, O>(cfg: &EsConfig, gen: &G, oracle: &O, rng: &mut TrialRng) -> Result<RunResult>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
{
    run_es_observed(cfg, EsVariant::Momentum, gen, oracle, rng, |_| {})
}

/// Full run with either mutation rule; `observe` sees every scored state,
/// starting with the initial population.
pub fn run_es_observed<G, O, F>(
    cfg: &EsConfig,
    variant: EsVariant,
    gen: &G,
    oracle: &O,
    rng: &mut TrialRng,
    mut observe: F,
) -> Result<RunResult>
where
    G: Generator + ?Sized,
    O: Oracle + ?Sized,
    F: FnMut(&EsState),
{
    let cfg = validate_config(cfg.clone())?;
    if cfg.max_calls < cfg.t as u64 {
        return Err(Error::Config(format!(
            "budget below initial population cost (max_calls {} < t {})",
            cfg.max_calls, cfg.t
        )));
    }
    check_pipeline(gen, oracle, &cfg)?;
    let start = Instant::now();

    let state = init_population(&cfg, rng)?;
    let mut state = evaluate_unscored(state, gen, oracle, &cfg)?;
    state.converged = check_convergence(&state, &cfg);
    observe(&state);
    let mut best = select_elite(&state.population, 1)?.remove(0);

    while !state.converged && state.model_calls < cfg.max_calls {
        state = es_step(state, gen, oracle, &cfg, variant, rng)?;
        observe(&state);
        let top = &state.population[elite_indices(&state.population, 1)?[0]];
        if top.fitness_or_min() > best.fitness_or_min() {
            best = top.clone();
        }
    }

    let final_elite = select_elite(&state.population, cfg.k)?;
    Ok(RunResult {
        converged: state.converged,
        model_calls: state.model_calls,
        generations: state.generation,
        wall_time: start.elapsed().as_secs_f64(),
        best_specimen: best,
        final_elite,
    })
}
