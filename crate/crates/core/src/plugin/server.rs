use std::io::{BufRead, Write};

use crate::error::Result;
use crate::generators::Generator;
use crate::latent::LatentVector;
use crate::oracles::Oracle;

use super::protocol::{decode_request, encode, Reply, Request, Role, PROTOCOL_VERSION};

/// Answers requests from `input` on `output` until end of input.
///
/// `hello` is sent in reply to the handshake. `handle` receives the batch of a
/// `predict` request (for oracles) or a `decode` request (for generators)
/// and returns the rows to send back, or an error message.
pub fn serve<R, W, F>(hello: Reply, mut handle: F, input: R, mut output: W) -> Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(Vec<Vec<f64>>) -> std::result::Result<Vec<Vec<f64>>, String>,
{
    let role = match &hello {
        Reply::Hello { role, .. } => *role,
        _ => panic!("serve needs a hello reply"),
    };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match decode_request(&line) {
            Err(e) => Reply::Error { message: e.to_string() },
            Ok(Request::Hello { protocol }) if protocol == PROTOCOL_VERSION => hello.clone(),
            Ok(Request::Hello { protocol }) => Reply::Error {
                message: format!("unsupported protocol version {protocol}"),
            },
            Ok(Request::Predict { samples }) if role == Role::Oracle => match handle(samples) {
                Ok(rows) => Reply::Probs { rows },
                Err(message) => Reply::Error { message },
            },
            Ok(Request::Decode { latents }) if role == Role::Generator => match handle(latents) {
                Ok(samples) => Reply::Samples { samples },
                Err(message) => Reply::Error { message },
            },
            Ok(_) => Reply::Error {
                message: format!("request not supported by a {role:?} plugin"),
            },
        };
        writeln!(output, "{}", encode(&reply)?)?;
        output.flush()?;
    }
    Ok(())
}

/// Serves an in-process oracle over the plugin protocol.
pub fn serve_oracle<O, R, W>(oracle: &O, input: R, output: W) -> Result<()>
where
    O: Oracle + ?Sized,
    R: BufRead,
    W: Write,
{
    let sample_dim = oracle.sample_dim().unwrap_or(0);
    serve(
        Reply::oracle_hello(oracle.num_classes(), sample_dim),
        |samples| {
            oracle
                .predict_batch(&samples)
                .map(|rows| rows.into_iter().map(|r| r.as_slice().to_vec()).collect())
                .map_err(|e| e.to_string())
        },
        input,
        output,
    )
}

/// Serves an in-process generator over the plugin protocol.
pub fn serve_generator<G, R, W>(gen: &G, input: R, output: W) -> Result<()>
where
    G: Generator + ?Sized,
    R: BufRead,
    W: Write,
{
    serve(
        Reply::generator_hello(gen.latent_dim(), gen.sample_dim()),
        |latents| {
            let latents = latents
                .into_iter()
                .map(LatentVector::new)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            gen.decode_batch(&latents).map_err(|e| e.to_string())
        },
        input,
        output,
    )
}
