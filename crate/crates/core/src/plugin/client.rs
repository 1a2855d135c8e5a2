use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::latent::LatentVector;
use crate::oracles::{Oracle, ProbabilityRow, WIRE_SUM_TOL};

use super::protocol::{decode_reply, encode, unexpected, Reply, Request, Role, PROTOCOL_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const TIMEOUT_ENV: &str = "EXEMPLAR_PLUGIN_TIMEOUT_SECS";

/// Reply timeout from `EXEMPLAR_PLUGIN_TIMEOUT_SECS`, else 30 s.
pub fn timeout_from_env() -> Result<Duration> {
    match std::env::var(TIMEOUT_ENV) {
        Ok(raw) => raw
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|s| *s > 0.0 && s.is_finite())
            .map(Duration::from_secs_f64)
            .ok_or_else(|| Error::Config(format!("{TIMEOUT_ENV} must be a positive number, got {raw:?}"))),
        Err(_) => Ok(DEFAULT_TIMEOUT),
    }
}

/// What the child announced during the handshake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handshake {
    pub role: Role,
    pub num_classes: Option<usize>,
    pub latent_dim: Option<usize>,
    pub sample_dim: usize,
}

/// A request/reply channel to a plugin, usually a child process.
///
/// Replies are read on a background thread so that every request can be
/// bounded by the timeout.
pub struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
    stderr: Arc<Mutex<Vec<String>>>,
    label: String,
}

fn spawn_line_reader(reader: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(reader).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl Connection {
    /// Launches `command_line` (shell-style quoting, no shell) with piped
    /// stdio.
    pub fn spawn(command_line: &str, timeout: Duration) -> Result<Self> {
        let argv = shlex::split(command_line)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::Config(format!("cannot parse plugin command {command_line:?}")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::PluginExited {
                message: format!("cannot launch {:?}: {e}", argv[0]),
                diagnostics: vec![],
            })?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let stderr = child.stderr.take().expect("stderr piped");
        let captured = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&captured);
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                if !line.trim().is_empty() {
                    sink.lock().expect("stderr buffer").push(line);
                }
            }
        });
        Ok(Self {
            writer: Box::new(stdin),
            lines: spawn_line_reader(stdout),
            timeout,
            child: Some(child),
            stderr: captured,
            label: command_line.to_string(),
        })
    }

    /// Wraps an arbitrary reader/writer pair, e.g. an in-process server on
    /// the other end of a pipe.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
        label: &str,
    ) -> Self {
        Self {
            writer: Box::new(writer),
            lines: spawn_line_reader(reader),
            timeout,
            child: None,
            stderr: Arc::new(Mutex::new(Vec::new())),
            label: label.to_string(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn exited(&mut self, what: &str) -> Error {
        let status = self.child.as_mut().and_then(|c| {
            // give the process a moment to finish writing diagnostics
            for _ in 0..50 {
                if let Ok(Some(status)) = c.try_wait() {
                    return Some(status);
                }
                thread::sleep(Duration::from_millis(10));
            }
            None
        });
        thread::sleep(Duration::from_millis(20));
        let diagnostics = self.stderr.lock().expect("stderr buffer").clone();
        let message = match status {
            Some(s) => format!("{} {what} ({s})", self.label),
            None => format!("{} {what}", self.label),
        };
        Error::PluginExited { message, diagnostics }
    }

    /// Sends one request and waits for one reply. An `error` reply becomes
    /// [`Error::PluginReported`].
    pub fn request(&mut self, req: &Request) -> Result<Reply> {
        let mut line = encode(req)?;
        line.push('\n');
        if self
            .writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .is_err()
        {
            return Err(self.exited("closed its input"));
        }
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => match decode_reply(&reply)? {
                Reply::Error { message } => Err(Error::PluginReported(message)),
                other => Ok(other),
            },
            Ok(Err(e)) => Err(Error::Protocol(format!("unreadable reply: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::PluginTimeout(self.timeout.as_secs_f64())),
            Err(RecvTimeoutError::Disconnected) => Err(self.exited("exited before replying")),
        }
    }

    pub fn handshake(&mut self) -> Result<Handshake> {
        match self.request(&Request::Hello {
            protocol: PROTOCOL_VERSION,
        })? {
            Reply::Hello {
                role,
                num_classes,
                latent_dim,
                sample_dim,
            } => Ok(Handshake {
                role,
                num_classes,
                latent_dim,
                sample_dim,
            }),
            other => Err(unexpected("hello", &other)),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn require(field: Option<usize>, name: &str) -> Result<usize> {
    field
        .filter(|v| *v >= 1)
        .ok_or_else(|| Error::Protocol(format!("hello reply lacks a positive `{name}`")))
}

/// An oracle living in another process.
pub struct SubprocessOracle {
    conn: Mutex<Connection>,
    num_classes: usize,
    sample_dim: usize,
}

impl SubprocessOracle {
    pub fn spawn(command_line: &str, timeout: Duration) -> Result<Self> {
        Self::connect(Connection::spawn(command_line, timeout)?)
    }

    /// Performs the handshake on an open connection.
    pub fn connect(mut conn: Connection) -> Result<Self> {
        let hello = conn.handshake()?;
        if hello.role != Role::Oracle {
            return Err(Error::Protocol(format!("expected role oracle, got {:?}", hello.role)));
        }
        Ok(Self {
            num_classes: require(hello.num_classes, "num_classes")?,
            sample_dim: require(Some(hello.sample_dim), "sample_dim")?,
            conn: Mutex::new(conn),
        })
    }

    /// Rows exactly as received, after count and width checks but before
    /// normalization checks.
    pub fn predict_raw(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let mut conn = self.conn.lock().expect("plugin connection");
        let rows = match conn.request(&Request::Predict {
            samples: samples.to_vec(),
        })? {
            Reply::Probs { rows } => rows,
            other => return Err(unexpected("probs", &other)),
        };
        if rows.len() != samples.len() {
            return Err(Error::Protocol(format!(
                "row count mismatch: {} rows for {} samples",
                rows.len(),
                samples.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != self.num_classes) {
            return Err(Error::Protocol(format!(
                "row width {} does not match num_classes {}",
                r.len(),
                self.num_classes
            )));
        }
        Ok(rows)
    }
}

impl Oracle for SubprocessOracle {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn sample_dim(&self) -> Option<usize> {
        Some(self.sample_dim)
    }

    fn predict_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<ProbabilityRow>> {
        self.predict_raw(samples)?
            .into_iter()
            .map(|r| ProbabilityRow::new(r, WIRE_SUM_TOL))
            .collect()
    }

    fn describe(&self) -> String {
        format!(
            "subprocess oracle `{}`",
            self.conn.lock().expect("plugin connection").label()
        )
    }
}

/// A generator living in another process.
pub struct SubprocessGenerator {
    conn: Mutex<Connection>,
    latent_dim: usize,
    sample_dim: usize,
}

impl SubprocessGenerator {
    pub fn spawn(command_line: &str, timeout: Duration) -> Result<Self> {
        Self::connect(Connection::spawn(command_line, timeout)?)
    }

    pub fn connect(mut conn: Connection) -> Result<Self> {
        let hello = conn.handshake()?;
        if hello.role != Role::Generator {
            return Err(Error::Protocol(format!(
                "expected role generator, got {:?}",
                hello.role
            )));
        }
        Ok(Self {
            latent_dim: require(hello.latent_dim, "latent_dim")?,
            sample_dim: require(Some(hello.sample_dim), "sample_dim")?,
            conn: Mutex::new(conn),
        })
    }
}

impl Generator for SubprocessGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn sample_dim(&self) -> usize {
        self.sample_dim
    }

    fn decode_batch(&self, latents: &[LatentVector]) -> Result<Vec<Vec<f64>>> {
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        let mut conn = self.conn.lock().expect("plugin connection");
        let samples = match conn.request(&Request::Decode {
            latents: latents.iter().map(|z| z.as_slice().to_vec()).collect(),
        })? {
            Reply::Samples { samples } => samples,
            other => return Err(unexpected("samples", &other)),
        };
        if samples.len() != latents.len() {
            return Err(Error::Protocol(format!(
                "row count mismatch: {} samples for {} latents",
                samples.len(),
                latents.len()
            )));
        }
        if samples
            .iter()
            .any(|s| s.len() != self.sample_dim || s.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Protocol(format!(
                "sample rows must hold {} finite numbers",
                self.sample_dim
            )));
        }
        Ok(samples)
    }

    fn describe(&self) -> String {
        format!(
            "subprocess generator `{}`",
            self.conn.lock().expect("plugin connection").label()
        )
    }
}
