//! Serves a built-in or file-backed oracle or generator over the plugin
//! protocol on stdin/stdout.
//!
//! ```text
//! exemplar-plugin oracle --fixture multimodal
//! exemplar-plugin oracle --centroid model.centroid
//! exemplar-plugin generator --affine decoder.mlp
//! exemplar-plugin oracle --echo 3 --fault bad-norm
//! ```

use std::io::{stdin, stdout, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use exemplar_core::mlp::softmax;
use exemplar_core::plugin::{serve, Reply};
use exemplar_core::{
    AffineDecoder, BuiltinFixture, CentroidSoftmaxModel, Generator, IdentityGenerator, LatentVector, MlpDecoder,
    Oracle, ToyMlpModel,
};

#[derive(Parser)]
#[command(
    name = "exemplar-plugin",
    version,
    about = "Serve a model over the exemplar plugin protocol"
)]
struct Cli {
    #[command(subcommand)]
    role: RoleCmd,
}

#[derive(Subcommand)]
enum RoleCmd {
    /// Answer `predict` requests.
    Oracle(OracleArgs),
    /// Answer `decode` requests.
    Generator(GeneratorArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("oracle_model").required(true).args(["fixture", "centroid", "mlp", "echo"])))]
struct OracleArgs {
    /// Oracle half of a built-in fixture.
    #[arg(long)]
    fixture: Option<BuiltinFixture>,
    /// Centroid model file.
    #[arg(long)]
    centroid: Option<PathBuf>,
    /// MLP model file with softmax output.
    #[arg(long)]
    mlp: Option<PathBuf>,
    /// Softmax of the sample itself, with this many classes.
    #[arg(long, value_name = "DIM")]
    echo: Option<usize>,
    #[arg(long, value_enum)]
    fault: Option<Fault>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("generator_model").required(true).args(["fixture", "affine", "mlp", "echo"])))]
struct GeneratorArgs {
    #[arg(long)]
    fixture: Option<BuiltinFixture>,
    /// Affine decoder file.
    #[arg(long)]
    affine: Option<PathBuf>,
    /// Tanh MLP decoder file.
    #[arg(long)]
    mlp: Option<PathBuf>,
    /// Identity decoder of this dimension.
    #[arg(long, value_name = "DIM")]
    echo: Option<usize>,
    #[arg(long, value_enum)]
    fault: Option<Fault>,
}

/// Deliberate protocol violations, for exercising `exemplar plugin-test`.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    /// Drop the last row of every reply.
    ShortRows,
    /// Scale every row by 1.2.
    BadNorm,
    /// Perturb replies by a per-request counter.
    Nondeterministic,
}

fn apply_fault(fault: Option<Fault>, counter: &mut u64, mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    match fault {
        None => {}
        Some(Fault::ShortRows) => {
            rows.pop();
        }
        Some(Fault::BadNorm) => rows.iter_mut().flatten().for_each(|v| *v *= 1.2),
        Some(Fault::Nondeterministic) => {
            *counter += 1;
            let shift = *counter as f64 * 1e-3;
            for row in &mut rows {
                if let [first, second, ..] = row.as_mut_slice() {
                    // keeps oracle rows normalized
                    let d = shift.min(*second);
                    *first += d;
                    *second -= d;
                } else if let Some(v) = row.first_mut() {
                    *v += shift;
                }
            }
        }
    }
    rows
}

struct EchoOracle(usize);

impl Oracle for EchoOracle {
    fn num_classes(&self) -> usize {
        self.0
    }

    fn sample_dim(&self) -> Option<usize> {
        Some(self.0)
    }

    fn predict_batch(&self, samples: &[Vec<f64>]) -> exemplar_core::Result<Vec<exemplar_core::ProbabilityRow>> {
        samples
            .iter()
            .map(|x| exemplar_core::ProbabilityRow::new(softmax(x), exemplar_core::oracles::IN_PROCESS_SUM_TOL))
            .collect()
    }

    fn describe(&self) -> String {
        format!("echo oracle ({} classes)", self.0)
    }
}

fn oracle(args: &OracleArgs) -> Result<Box<dyn Oracle>> {
    Ok(if let Some(f) = args.fixture {
        f.build().oracle
    } else if let Some(p) = &args.centroid {
        Box::new(CentroidSoftmaxModel::load(p)?)
    } else if let Some(p) = &args.mlp {
        Box::new(ToyMlpModel::load(p)?)
    } else if let Some(d) = args.echo {
        if d < 2 {
            bail!("echo oracle needs at least 2 classes");
        }
        Box::new(EchoOracle(d))
    } else {
        unreachable!("clap requires one model source")
    })
}

fn generator(args: &GeneratorArgs) -> Result<Box<dyn Generator>> {
    Ok(if let Some(f) = args.fixture {
        f.build().generator
    } else if let Some(p) = &args.affine {
        Box::new(AffineDecoder::load(p)?)
    } else if let Some(p) = &args.mlp {
        Box::new(MlpDecoder::load(p)?)
    } else if let Some(d) = args.echo {
        if d == 0 {
            bail!("echo generator needs a positive dimension");
        }
        Box::new(IdentityGenerator::new(d))
    } else {
        unreachable!("clap requires one model source")
    })
}

fn run(cli: Cli) -> Result<()> {
    let input = BufReader::new(stdin().lock());
    let output = stdout().lock();
    let mut counter = 0;
    match cli.role {
        RoleCmd::Oracle(args) => {
            let model = oracle(&args)?;
            let Some(sample_dim) = model.sample_dim() else {
                bail!("oracle has no fixed sample dimension");
            };
            let hello = Reply::oracle_hello(model.num_classes(), sample_dim);
            serve(
                hello,
                |samples| {
                    let rows = model.predict_batch(&samples).map_err(|e| e.to_string())?;
                    let rows = rows.into_iter().map(|r| r.as_slice().to_vec()).collect();
                    Ok(apply_fault(args.fault, &mut counter, rows))
                },
                input,
                output,
            )?;
        }
        RoleCmd::Generator(args) => {
            let model = generator(&args)?;
            let hello = Reply::generator_hello(model.latent_dim(), model.sample_dim());
            serve(
                hello,
                |latents| {
                    let latents = latents
                        .into_iter()
                        .map(LatentVector::new)
                        .collect::<exemplar_core::Result<Vec<_>>>()
                        .map_err(|e| e.to_string())?;
                    let samples = model.decode_batch(&latents).map_err(|e| e.to_string())?;
                    Ok(apply_fault(args.fault, &mut counter, samples))
                },
                input,
                output,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exemplar-plugin: {e:#}");
            ExitCode::FAILURE
        }
    }
}
