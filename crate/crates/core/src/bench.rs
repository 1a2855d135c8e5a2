//! Repeated-trial runner and one-axis hyperparameter sweeps.
//!
//! Trial `i` always draws from `rng_streams(master_seed, i)`, so its outcome
//! does not depend on the worker count or on which worker picks it up.
//! Aggregation walks the trials in index order.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::config::{EsConfig, GdConfig, SweepAxis, SweepSpec};
use crate::error::{Error, Result};
use crate::es::{run_es_observed, EsVariant};
use crate::fixtures::{Pipeline, PipelineSource};
use crate::gd::{run_gd, GdStart};
use crate::result::RunResult;
use crate::rng::rng_streams;

/// An optimizer together with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Evolutionary strategy with momentum.
    Es(EsConfig),
    /// Evolutionary strategy with plain Gaussian mutation.
    EsPlain(EsConfig),
    /// Gradient ascent with momentum from a uniformly random start.
    Gd(GdConfig),
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Es(_) => "es-momentum",
            Self::EsPlain(_) => "es-plain",
            Self::Gd(_) => "gd-momentum",
        }
    }

    pub fn es_config(&self) -> Option<&EsConfig> {
        match self {
            Self::Es(c) | Self::EsPlain(c) => Some(c),
            Self::Gd(_) => None,
        }
    }

    /// Runs trial `trial` on `pipeline`.
    pub fn run_once(&self, pipeline: &Pipeline, master_seed: u64, trial: u64) -> Result<RunResult> {
        let mut rng = rng_streams(master_seed, trial);
        let (gen, oracle) = (&*pipeline.generator, &*pipeline.oracle);
        match self {
            Self::Es(cfg) => run_es_observed(cfg, EsVariant::Momentum, gen, oracle, &mut rng, |_| {}),
            Self::EsPlain(cfg) => run_es_observed(cfg, EsVariant::Plain, gen, oracle, &mut rng, |_| {}),
            Self::Gd(cfg) => run_gd(cfg, gen, oracle, GdStart::Random, &mut rng),
        }
    }

    fn check_budget(&self) -> Result<()> {
        if let Some(cfg) = self.es_config() {
            if cfg.max_calls < cfg.t as u64 {
                return Err(Error::Config(format!(
                    "budget below initial population cost (max_calls {} < t {})",
                    cfg.max_calls, cfg.t
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Stream index passed to `rng_streams` together with the master seed.
    pub trial: u64,
    pub converged: bool,
    pub calls: u64,
    pub generations: u64,
    pub best_fitness: f64,
    pub time: f64,
}

/// Aggregates over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub method: Method,
    pub master_seed: u64,
    pub trials: usize,
    pub converged_count: usize,
    /// Mean calls over all trials, converged or not.
    pub avg_calls: f64,
    /// Mean calls over converged trials only.
    pub avg_calls_converged: Option<f64>,
    pub avg_time: f64,
    pub records: Vec<TrialRecord>,
}

impl BenchStats {
    pub fn from_records(method: Method, master_seed: u64, records: Vec<TrialRecord>) -> Self {
        let n = records.len();
        let mean = |it: &mut dyn Iterator<Item = f64>, count: usize| -> f64 { it.sum::<f64>() / count as f64 };
        let converged: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
        Self {
            method,
            master_seed,
            trials: n,
            converged_count: converged.len(),
            avg_calls: mean(&mut records.iter().map(|r| r.calls as f64), n),
            avg_calls_converged: (!converged.is_empty())
                .then(|| mean(&mut converged.iter().map(|r| r.calls as f64), converged.len())),
            avg_time: mean(&mut records.iter().map(|r| r.time), n),
            records,
        }
    }

    pub fn convergence_rate(&self) -> f64 {
        self.converged_count as f64 / self.trials as f64
    }

    /// Equality ignoring every timing field.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |s: &Self| {
            let mut s = s.clone();
            s.avg_time = 0.0;
            for r in &mut s.records {
                r.time = 0.0;
            }
            s
        };
        strip(self) == strip(other)
    }
}

/// Runs `n` independent trials on up to `workers` threads. Each worker opens
/// its own pipeline from `source`.
///
/// The first failing trial (lowest index) aborts the batch with
/// [`Error::Trial`], which records how many trials had completed.
pub fn run_trials(
    method: &Method,
    source: &dyn PipelineSource,
    n: usize,
    master_seed: u64,
    workers: usize,
) -> Result<BenchStats> {
    if n == 0 {
        return Err(Error::Config("trial count must be >= 1".into()));
    }
    method.check_budget()?;
    let results = run_indexed(n, workers, source, |pipeline, i| {
        method.run_once(pipeline, master_seed, i as u64)
    })?;
    let records = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| TrialRecord {
            trial: i as u64,
            converged: r.converged,
            calls: r.model_calls,
            generations: r.generations,
            best_fitness: r.best_fitness(),
            time: r.wall_time,
        })
        .collect();
    Ok(BenchStats::from_records(method.clone(), master_seed, records))
}

fn run_indexed<T, F>(n: usize, workers: usize, source: &dyn PipelineSource, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Pipeline, usize) -> Result<T> + Sync,
{
    let workers = workers.clamp(1, n);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    let open_errors: Mutex<Vec<Error>> = Mutex::new(Vec::new());

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let pipeline = match source.open() {
                    Ok(p) => p,
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        open_errors.lock().expect("error list").push(e);
                        return;
                    }
                };
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let outcome = job(&pipeline, i);
                    if outcome.is_err() {
                        abort.store(true, Ordering::SeqCst);
                    }
                    slots.lock().expect("result slots")[i] = Some(outcome);
                }
            });
        }
    });

    if let Some(e) = open_errors.into_inner().expect("error list").into_iter().next() {
        return Err(e);
    }
    let slots = slots.into_inner().expect("result slots");
    let completed = slots.iter().filter(|s| matches!(s, Some(Ok(_)))).count();
    let mut out = Vec::with_capacity(n);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => {
                return Err(Error::Trial {
                    trial: i,
                    completed,
                    source: Box::new(e),
                })
            }
            None => unreachable!("trial {i} skipped without an earlier failure"),
        }
    }
    Ok(out)
}

/// One sweep row: the varied parameter, its value, and the batch statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub stats: BenchStats,
}

/// Evaluates every grid point of `spec` with the momentum strategy, in
/// declaration order.
pub fn run_sweep(
    spec: &SweepSpec,
    source: &dyn PipelineSource,
    n: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    spec.points()?
        .into_iter()
        .map(|(axis, value, cfg)| {
            run_trials(&Method::Es(cfg), source, n, master_seed, workers).map(|stats| SweepRow { axis, value, stats })
        })
        .collect()
}
