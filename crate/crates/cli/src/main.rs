//! `exemplar`: search for class exemplars, benchmark optimizers, check
//! gradients, and vet plugins.
//!
//! Exit status is 0 on success (or convergence), 2 when a run finishes
//! without converging, and 1 on any error.


use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use exemplar_core::gd::gradient_check;
use exemplar_core::report::{render_report, ReportFormat};
use exemplar_core::{
    rng_streams, run_es, run_gd, run_sweep, run_trials, BenchStats, ConfigFile, ConvergeOn, GdStart, GeneratorSource,
    LatentVector, Method, OracleSource, Pipeline, PipelineSource, PipelineSpec, RunResult,
};
use rand::Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "exemplar", version, about = "Exemplar synthesis for black-box classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolutionary strategy once.
    Run(RunArgs),
    /// Run the gradient baseline once from a random start.
    Gd(GdArgs),
    /// Repeat one method over many seeded trials and report statistics.
    Bench(BenchArgs),
    /// Run the `[sweep]` grid of a config file.
    Sweep(SweepArgs),
    /// Compare analytic and finite-difference gradients at random latents.
    Gradcheck(GradcheckArgs),
    /// Check that a plugin follows the protocol.
    PluginTest(PluginTestArgs),
}

#[derive(Args)]
struct Source {
    /// Config file; `.toml` may be omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set max_calls=N`.
    #[arg(long, value_name = "N")]
    max_calls: Option<u64>,
    /// Oracle plugin command line, replacing the configured oracle.
    #[arg(long, value_name = "CMD")]
    oracle_cmd: Option<String>,
    /// Generator plugin command line, replacing the configured generator.
    #[arg(long, value_name = "CMD")]
    generator_cmd: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which specimens must clear the threshold.
    #[arg(long, value_enum)]
    converge_on: Option<ConvergeArg>,
    /// Result file (JSON); stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GdArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value_t = MethodArg::Es)]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    converge_on: Option<ConvergeArg>,
    /// Report file; `.json` selects JSON, anything else CSV. Stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    converge_on: Option<ConvergeArg>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random latents.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Args)]
#[group(id = "plugin", required = true, multiple = true)]
struct PluginTestArgs {
    #[arg(long, value_name = "CMD", group = "plugin")]
    oracle_cmd: Option<String>,
    #[arg(long, value_name = "CMD", group = "plugin")]
    generator_cmd: Option<String>,
    /// Seed for the probe batch.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvergeArg {
    Best,
    Elite,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Es,
    EsPlain,
    Gd,
}

/// Config, pipeline source, and one opened pipeline for dimension discovery.
struct Setup {
    config: ConfigFile,
    spec: PipelineSpec,
    pipeline: Pipeline,
}

impl Setup {
    fn load(source: &Source, converge_on: Option<ConvergeArg>) -> Result<Self> {
        let mut overrides = source.overrides.clone();
        if let Some(n) = source.max_calls {
            overrides.push(format!("max_calls={n}"));
        }
        if let Some(c) = converge_on {
            let c = match c {
                ConvergeArg::Best => ConvergeOn::Best,
                ConvergeArg::Elite => ConvergeOn::Elite,
            };
            overrides.push(format!("converge_on=\"{c}\""));
        }
        let config = match &source.config {
            Some(path) => ConfigFile::load_with_overrides(path, &overrides)?,
            None => ConfigFile::parse_with_overrides("", &overrides)?,
        };
        let mut spec = PipelineSpec::from_config(&config)?;
        if let Some(cmd) = &source.oracle_cmd {
            spec.oracle = Some(OracleSource::Command(cmd.clone()));
        }
        if let Some(cmd) = &source.generator_cmd {
            spec.generator = Some(GeneratorSource::Command(cmd.clone()));
        }
        let pipeline = spec.open()?;
        if let Some(d) = config.latent_dim {
            if d != pipeline.generator.latent_dim() {
                bail!(
                    "latent_dim {d} does not match the generator's latent dimension {}",
                    pipeline.generator.latent_dim()
                );
            }
        }
        Ok(Self { config, spec, pipeline })
    }

    fn latent_dim(&self) -> usize {
        self.pipeline.generator.latent_dim()
    }
}

fn workers(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn run_document(
    method: &str,
    seed: u64,
    setup: &Setup,
    config: serde_json::Value,
    result: &RunResult,
) -> Result<String> {
    let best = result.best_specimen.latent.clone();
    let sample = setup
        .pipeline
        .generator
        .decode_batch(std::slice::from_ref(&best))?
        .pop();
    let doc = json!({
        "method": method,
        "seed": seed,
        "generator": setup.pipeline.generator.describe(),
        "oracle": setup.pipeline.oracle.describe(),
        "config": config,
        "result": result,
        "best_latent": best,
        "best_sample": sample,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn finish_run(result: &RunResult, out: Option<&Path>) -> ExitCode {
    if out.is_some() {
        eprintln!(
            "{} after {} model calls ({} generations), best fitness {:.6}",
            if result.converged { "converged" } else { "not converged" },
            result.model_calls,
            result.generations,
            result.best_fitness()
        );
    }
    if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let setup = Setup::load(&args.source, args.converge_on)?;
    let cfg = setup.config.es_config(setup.latent_dim())?;
    let p = &setup.pipeline;
    let result = run_es(&cfg, &*p.generator, &*p.oracle, &mut rng_streams(args.seed, 0))?;
    let doc = run_document("es-momentum", args.seed, &setup, serde_json::to_value(&cfg)?, &result)?;
    emit(args.out.as_deref(), &doc)?;
    Ok(finish_run(&result, args.out.as_deref()))
}

fn cmd_gd(args: GdArgs) -> Result<ExitCode> {
    let setup = Setup::load(&args.source, None)?;
    let cfg = setup.config.gd_config(setup.latent_dim())?;
    let p = &setup.pipeline;
    let result = run_gd(
        &cfg,
        &*p.generator,
        &*p.oracle,
        GdStart::Random,
        &mut rng_streams(args.seed, 0),
    )?;
    let doc = run_document("gd-momentum", args.seed, &setup, serde_json::to_value(&cfg)?, &result)?;
    emit(args.out.as_deref(), &doc)?;
    Ok(finish_run(&result, args.out.as_deref()))
}

fn report(stats: &[BenchStats], out: Option<&Path>) -> Result<()> {
    let format = out.map(ReportFormat::from_path).unwrap_or(ReportFormat::Csv);
    emit(out, &render_report(stats, format)?)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let setup = Setup::load(&args.source, args.converge_on)?;
    let d = setup.latent_dim();
    let method = match args.method {
        MethodArg::Es => Method::Es(setup.config.es_config(d)?),
        MethodArg::EsPlain => Method::EsPlain(setup.config.es_config(d)?),
        MethodArg::Gd => Method::Gd(setup.config.gd_config(d)?),
    };
    let stats = run_trials(&method, &setup.spec, args.trials, args.seed, workers(args.workers))?;
    report(&[stats], args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let setup = Setup::load(&args.source, args.converge_on)?;
    let base = setup.config.es_config(setup.latent_dim())?;
    let Some(spec) = setup.config.sweep_spec(&base)? else {
        bail!("config has no [sweep] section");
    };
    let rows = run_sweep(&spec, &setup.spec, args.trials, args.seed, workers(args.workers))?;
    let stats: Vec<BenchStats> = rows.into_iter().map(|r| r.stats).collect();
    report(&stats, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    if args.step.is_nan() || args.step <= 0.0 {
        bail!("--step must be positive");
    }
    let setup = Setup::load(&args.source, None)?;
    let cfg = setup.config.gd_config(setup.latent_dim())?;
    let p = &setup.pipeline;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..args.trials {
        let mut rng = rng_streams(args.seed, i as u64);
        let z: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.random_range(-cfg.u..=cfg.u)).collect();
        let check = gradient_check(
            &*p.generator,
            &*p.oracle,
            &LatentVector::new(z)?,
            cfg.target_class,
            args.step,
        )?;
        worst = worst.max(check.relative_error);
        if check.relative_error > args.tolerance {
            failures += 1;
            println!("point {i}: relative error {:.3e}", check.relative_error);
        }
    }
    println!(
        "{} of {} points within {:e}; worst relative error {:.3e}",
        args.trials - failures,
        args.trials,
        args.tolerance,
        worst
    );
    if failures > 0 {
        bail!("gradient check failed at {failures} points");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gd(a) => cmd_gd(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::PluginTest(a) => plugin_test::run(a.oracle_cmd.as_deref(), a.generator_cmd.as_deref(), a.seed),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
