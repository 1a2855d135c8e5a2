//! Newline-delimited JSON messages exchanged with plugin processes.
//!
//! ```text
//! parent -> child  {"type":"hello","protocol":1}
//! child  -> parent {"type":"hello","role":"oracle","num_classes":3,"sample_dim":4}
//! parent -> child  {"type":"predict","samples":[[0.1,0.2,0.3,0.4]]}
//! child  -> parent {"type":"probs","rows":[[0.7,0.2,0.1]]}
//!
//! child  -> parent {"type":"hello","role":"generator","latent_dim":2,"sample_dim":4}
//! parent -> child  {"type":"decode","latents":[[0.5,-1.0]]}
//! child  -> parent {"type":"samples","samples":[[0.1,0.2,0.3,0.4]]}
//!
//! child  -> parent {"type":"error","message":"..."}
//! ```
//!
//! One message per line, UTF-8. Numbers are written in shortest round-trip
//! decimal form, so values survive the wire bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Oracle,
    Generator,
}

/// Messages sent by the parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello { protocol: u32 },
    Predict { samples: Vec<Vec<f64>> },
    Decode { latents: Vec<Vec<f64>> },
}

/// Messages sent by the child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Reply {
    Hello {
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        latent_dim: Option<usize>,
        sample_dim: usize,
    },
    Probs {
        rows: Vec<Vec<f64>>,
    },
    Samples {
        samples: Vec<Vec<f64>>,
    },
    Error {
        message: String,
    },
}

impl Reply {
    pub fn oracle_hello(num_classes: usize, sample_dim: usize) -> Self {
        Self::Hello {
            role: Role::Oracle,
            num_classes: Some(num_classes),
            latent_dim: None,
            sample_dim,
        }
    }

    pub fn generator_hello(latent_dim: usize, sample_dim: usize) -> Self {
        Self::Hello {
            role: Role::Generator,
            num_classes: None,
            latent_dim: Some(latent_dim),
            sample_dim,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Hello { .. } => "hello",
            Self::Probs { .. } => "probs",
            Self::Samples { .. } => "samples",
            Self::Error { .. } => "error",
        }
    }
}

/// Serializes `msg` as a single line (without the trailing newline).
pub fn encode<T: Serialize>(msg: &T) -> Result<String> {
    Ok(serde_json::to_string(msg)?)
}

pub fn decode_reply(line: &str) -> Result<Reply> {
    serde_json::from_str(line).map_err(|e| Error::Protocol(format!("malformed reply {line:?}: {e}")))
}

pub fn decode_request(line: &str) -> Result<Request> {
    serde_json::from_str(line).map_err(|e| Error::Protocol(format!("malformed request {line:?}: {e}")))
}

pub(crate) fn unexpected(expected: &str, got: &Reply) -> Error {
    Error::Protocol(format!("expected `{expected}` reply, got `{}`", got.kind()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        assert_eq!(
            encode(&Request::Hello { protocol: 1 }).unwrap(),
            r#"{"type":"hello","protocol":1}"#
        );
        assert_eq!(
            encode(&Reply::oracle_hello(3, 4)).unwrap(),
            r#"{"type":"hello","role":"oracle","num_classes":3,"sample_dim":4}"#
        );
        assert_eq!(
            encode(&Request::Predict {
                samples: vec![vec![0.5, -1.0]]
            })
            .unwrap(),
            r#"{"type":"predict","samples":[[0.5,-1.0]]}"#
        );
        let r = decode_reply(r#"{"type":"probs","rows":[[0.25,0.75]]}"#).unwrap();
        assert_eq!(
            r,
            Reply::Probs {
                rows: vec![vec![0.25, 0.75]]
            }
        );
    }

    #[test]
    fn floats_survive_the_wire() {
        let xs = vec![
            0.1 + 0.2,
            1.0 / 3.0,
            1e-300,
            -2.5e17,
            f64::MIN_POSITIVE,
            0.9999999999999999,
        ];
        let line = encode(&Request::Predict {
            samples: vec![xs.clone()],
        })
        .unwrap();
        match decode_request(&line).unwrap() {
            Request::Predict { samples } => {
                for (a, b) in samples[0].iter().zip(&xs) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_reply_is_protocol_error() {
        assert!(matches!(decode_reply("{\"type\":\"nope\"}"), Err(Error::Protocol(_))));
        assert!(matches!(decode_reply("not json"), Err(Error::Protocol(_))));
    }
}
