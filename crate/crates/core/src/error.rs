use std::path::PathBuf;

/// Errors raised anywhere in the exemplar pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("config not found: {}", .0.display())]
    ConfigNotFound(PathBuf),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite latent component at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("model file {path}: {message}")]
    ModelFormat { path: String, message: String },

    #[error("target class {target} out of range for {num_classes} classes")]
    TargetOutOfRange { target: usize, num_classes: usize },

    #[error("unscored specimen at index {0}")]
    Unscored(usize),

    #[error("{0} does not expose analytic gradients")]
    NotDifferentiable(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("plugin exited: {message}{}", fmt_diagnostics(.diagnostics))]
    PluginExited { message: String, diagnostics: Vec<String> },

    #[error("plugin timed out after {0:.1} s")]
    PluginTimeout(f64),

    #[error("plugin reported error: {0}")]
    PluginReported(String),

    #[error("trial {trial} failed after {completed} completed trials: {source}")]
    Trial {
        trial: usize,
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_diagnostics(lines: &[String]) -> String {
    if lines.is_empty() {
        String::new()
    } else {
        format!("; stderr: {}", lines.join(" | "))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
