//! Dense tanh networks shared by the toy classifier and the toy decoders,
//! together with their plain-text model file format.
//!
//! # File format
//!
//! ```text
//! # comments and blank lines are ignored
//! mlp
//! output softmax          # softmax | tanh | identity
//! layers 2
//! layer 2 8               # input width, output width
//! <8 lines of 2 weights>  # row-major, one output unit per line
//! <1 line of 8 biases>
//! layer 8 3
//! <3 lines of 8 weights>
//! <1 line of 3 biases>
//! ```
//!
//! Hidden layers always use tanh. [`Mlp::to_canonical_string`] writes the
//! format without comments, one space between numbers, and each number in its
//! shortest round-trip decimal form, so `save(load(f))` reproduces any
//! canonical file byte for byte.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reads `path`, or `path.ext` when only that exists.
pub(crate) fn read_model_file(path: &Path, ext: &str) -> Result<(std::path::PathBuf, String)> {
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".");
    with_ext.push(ext);
    let with_ext = std::path::PathBuf::from(with_ext);
    let chosen = if !path.exists() && with_ext.is_file() {
        with_ext
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&chosen)?;
    Ok((chosen, text))
}

/// Activation applied after the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Softmax,
    Tanh,
    Identity,
}

impl FromStr for OutputActivation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "softmax" => Ok(Self::Softmax),
            "tanh" => Ok(Self::Tanh),
            "identity" => Ok(Self::Identity),
            other => Err(format!("unknown output activation {other:?}")),
        }
    }
}

impl fmt::Display for OutputActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Softmax => "softmax",
            Self::Tanh => "tanh",
            Self::Identity => "identity",
        })
    }
}

/// One affine map `x -> W x + b`; `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    /// Builds a layer from row-major weights.
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let out = rows.len();
        let inp = rows.first().map_or(0, Vec::len);
        if out == 0 || inp == 0 {
            return Err(Error::Dimension("layer must have nonzero width".into()));
        }
        if rows.iter().any(|r| r.len() != inp) {
            return Err(Error::Dimension("ragged weight rows".into()));
        }
        if bias.len() != out {
            return Err(Error::Dimension(format!(
                "bias length {} does not match output width {out}",
                bias.len()
            )));
        }
        let weight = DMatrix::from_row_iterator(out, inp, rows.iter().flatten().copied());
        Ok(Self {
            weight,
            bias: DVector::from_vec(bias),
        })
    }

    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.nrows()
    }
}

/// A feed-forward network with tanh hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    output: OutputActivation,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl Mlp {
    pub fn new(layers: Vec<Layer>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.input_width() != prev.output_width() {
                return Err(Error::Dimension(format!(
                    "layer {} input width {} ≠ previous output width {}",
                    i + 1,
                    next.input_width(),
                    prev.output_width()
                )));
            }
        }
        if layers
            .iter()
            .any(|l| l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::Dimension("non-finite parameter".into()));
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    /// Widths from input to output, e.g. `[2, 8, 3]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(Layer::output_width))
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_width() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "input width {} does not match network input width {}",
                x.len(),
                self.input_width()
            )))
        }
    }

    /// Runs the network, keeping every post-activation vector (hidden layers
    /// only) plus the final output.
    fn forward_trace(&self, x: &[f64]) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        self.check_input(x)?;
        let mut acts = vec![DVector::from_column_slice(x)];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let pre = &layer.weight * &acts[i] + &layer.bias;
            if i < last {
                acts.push(pre.map(f64::tanh));
            } else {
                let out = match self.output {
                    OutputActivation::Softmax => softmax(pre.as_slice()),
                    OutputActivation::Tanh => pre.iter().map(|v| v.tanh()).collect(),
                    OutputActivation::Identity => pre.as_slice().to_vec(),
                };
                return Ok((acts, out));
            }
        }
        unreachable!("network has at least one layer")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_trace(x).map(|(_, out)| out)
    }

    /// Output together with the vector-Jacobian product `Jᵀ c` with respect
    /// to the input, where `J` is the Jacobian of the full network output.
    pub fn forward_and_vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (acts, out) = self.forward_trace(x)?;
        if cotangent.len() != out.len() {
            return Err(Error::Dimension(format!(
                "cotangent length {} does not match output width {}",
                cotangent.len(),
                out.len()
            )));
        }
        let c = DVector::from_column_slice(cotangent);
        // gradient with respect to the final pre-activation
        let mut delta = match self.output {
            OutputActivation::Softmax => {
                let p = DVector::from_column_slice(&out);
                let pc = p.dot(&c);
                p.component_mul(&c.add_scalar(-pc))
            }
            OutputActivation::Tanh => {
                DVector::from_iterator(out.len(), out.iter().zip(c.iter()).map(|(y, ci)| ci * (1.0 - y * y)))
            }
            OutputActivation::Identity => c,
        };
        for i in (0..self.layers.len()).rev() {
            let grad_in = self.layers[i].weight.transpose() * &delta;
            if i == 0 {
                return Ok((out, grad_in.as_slice().to_vec()));
            }
            // acts[i] is the tanh output feeding layer i
            delta = grad_in.component_mul(&acts[i].map(|h| 1.0 - h * h));
        }
        unreachable!("network has at least one layer")
    }

    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "mlp").unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        writeln!(s, "layers {}", self.layers.len()).unwrap();
        for layer in &self.layers {
            writeln!(s, "layer {} {}", layer.input_width(), layer.output_width()).unwrap();
            for r in 0..layer.weight.nrows() {
                write_numbers(&mut s, layer.weight.row(r).iter());
            }
            write_numbers(&mut s, layer.bias.iter());
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_canonical_string())?;
        Ok(())
    }

    /// Reads a model file, trying `path.mlp` when `path` does not exist.
    pub fn load(path: &Path) -> Result<Self> {
        let (path, text) = read_model_file(path, "mlp")?;
        Self::parse(&text).map_err(|e| e.at(&path))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, FormatError> {
        let mut lines = Lines::new(text);
        lines.expect_keyword("mlp")?;
        let output = lines.keyed_value::<OutputActivation>("output")?;
        let count = lines.keyed_value::<usize>("layers")?;
        if count == 0 {
            return Err(lines.error("layer count must be >= 1"));
        }
        let mut layers = Vec::with_capacity(count);
        for index in 0..count {
            let (line_no, header) = lines.next_line()?;
            let dims = header
                .strip_prefix("layer ")
                .map(|rest| rest.split_whitespace().map(str::parse::<usize>).collect::<Vec<_>>())
                .ok_or_else(|| FormatError::new(line_no, format!("expected `layer IN OUT` for layer {index}")))?;
            let [Ok(inp), Ok(out)] = dims[..] else {
                return Err(FormatError::new(
                    line_no,
                    format!("expected `layer IN OUT` for layer {index}"),
                ));
            };
            if inp == 0 || out == 0 {
                return Err(FormatError::new(line_no, format!("layer {index} has zero width")));
            }
            if let Some(prev) = layers.last().map(Layer::output_width) {
                if inp != prev {
                    return Err(FormatError::new(
                        line_no,
                        format!("layer {index} input width {inp} ≠ previous output width {prev}"),
                    ));
                }
            }
            let rows = (0..out)
                .map(|_| lines.numbers(inp))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let bias = lines.numbers(out)?;
            let layer = Layer::from_rows(&rows, bias).map_err(|e| lines.error(e.to_string()))?;
            layers.push(layer);
        }
        lines.expect_end()?;
        Mlp::new(layers, output).map_err(|e| FormatError::new(0, e.to_string()))
    }
}

pub(crate) fn write_numbers<'a>(s: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(' ');
        }
        first = false;
        write!(s, "{v}").unwrap();
    }
    s.push('\n');
}

/// A model file parse error with its (1-based) line number; line 0 means the
/// error concerns the file as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }

    pub fn at(self, path: &Path) -> Error {
        let message = if self.line == 0 {
            self.message
        } else {
            format!("line {}: {}", self.line, self.message)
        };
        Error::ModelFormat {
            path: path.display().to_string(),
            message,
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Line cursor over a model file that skips comments and blank lines.
pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            inner: it.peekable(),
            last_line: 0,
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::new(self.last_line, message)
    }

    pub(crate) fn next_line(&mut self) -> std::result::Result<(usize, &'a str), FormatError> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last_line = n;
                Ok((n, l))
            }
            None => Err(FormatError::new(self.last_line, "unexpected end of file")),
        }
    }

    pub(crate) fn expect_keyword(&mut self, keyword: &str) -> std::result::Result<(), FormatError> {
        let (n, l) = self.next_line()?;
        if l == keyword {
            Ok(())
        } else {
            Err(FormatError::new(n, format!("expected `{keyword}`, found `{l}`")))
        }
    }

    pub(crate) fn keyed_value<T: FromStr>(&mut self, key: &str) -> std::result::Result<T, FormatError>
    where
        T::Err: fmt::Display,
    {
        let (n, l) = self.next_line()?;
        let rest = l
            .strip_prefix(key)
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| FormatError::new(n, format!("expected `{key} <value>`")))?;
        rest.trim()
            .parse()
            .map_err(|e| FormatError::new(n, format!("bad {key}: {e}")))
    }

    pub(crate) fn keyed_pair(&mut self, key: &str) -> std::result::Result<(usize, usize), FormatError> {
        let (n, l) = self.next_line()?;
        let err = || FormatError::new(n, format!("expected `{key} <a> <b>`"));
        let rest = l.strip_prefix(key).ok_or_else(err)?;
        let parts: Vec<_> = rest.split_whitespace().map(str::parse::<usize>).collect();
        match parts[..] {
            [Ok(a), Ok(b)] => Ok((a, b)),
            _ => Err(err()),
        }
    }

    pub(crate) fn numbers(&mut self, expected: usize) -> std::result::Result<Vec<f64>, FormatError> {
        let (n, l) = self.next_line()?;
        let values = l
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FormatError::new(n, format!("bad number `{t}`")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.len() != expected {
            return Err(FormatError::new(
                n,
                format!("expected {expected} numbers, found {}", values.len()),
            ));
        }
        Ok(values)
    }

    pub(crate) fn expect_end(&mut self) -> std::result::Result<(), FormatError> {
        match self.inner.next() {
            None => Ok(()),
            Some((n, _)) => Err(FormatError::new(n, "trailing content")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Mlp {
        Mlp::new(
            vec![
                Layer::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]], vec![0.1, -0.2]).unwrap(),
                Layer::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, 3.0]], vec![0.0, 0.5, -0.5]).unwrap(),
            ],
            OutputActivation::Softmax,
        )
        .unwrap()
    }

    #[test]
    fn widths_chain() {
        assert_eq!(tiny().widths(), vec![2, 2, 3]);
    }

    #[test]
    fn canonical_round_trip() {
        let net = tiny();
        let text = net.to_canonical_string();
        let back = Mlp::parse(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn broken_chain_names_layer() {
        let text = "mlp\noutput softmax\nlayers 2\nlayer 2 2\n1 0\n0 1\n0 0\nlayer 3 1\n1 1 1\n0\n";
        let err = Mlp::parse(text).unwrap_err();
        assert_eq!(err.message, "layer 1 input width 3 ≠ previous output width 2");
        assert_eq!(err.line, 8);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# a model\nmlp\n\noutput identity # affine\nlayers 1\nlayer 1 1\n2\n  3\n";
        let net = Mlp::parse(text).unwrap();
        assert_eq!(net.forward(&[1.5]).unwrap(), vec![6.0]);
    }

    #[test]
    fn wrong_number_count_rejected() {
        let text = "mlp\noutput tanh\nlayers 1\nlayer 2 1\n1\n0\n";
        assert!(Mlp::parse(text).unwrap_err().message.contains("expected 2 numbers"));
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = softmax(&[-1e308, 0.0]);
        assert_eq!(p, vec![0.0, 1.0]);
    }
}
