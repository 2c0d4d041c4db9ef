//! Stochastic matrices and labelled channels.
//!
//! A channel file looks like
//!
//! ```json
//! {"input_alphabet": ["0", "1"],
//!  "output_alphabet": ["0", "1"],
//!  "rows": [[0.9, 0.1], [0.1, 0.9]]}
//! ```
//!
//! Rows are renormalized on load; a row whose mass is off by more than
//! 1e-6 is rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{is_zero, Distribution};
use crate::error::{Error, Result};

/// Row-sum tolerance applied to channel files.
pub const ROW_SUM_TOL: f64 = 1e-6;

/// A stochastic matrix `V(y|x)`, one row per input letter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalChannel {
    rows: Vec<Distribution>,
}

impl ConditionalChannel {
    pub fn new(rows: Vec<Distribution>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidChannel("no rows".into()));
        };
        let ny = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != ny) {
            return Err(Error::AlphabetMismatch(ny, r.len()));
        }
        Ok(Self { rows })
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &Distribution {
        &self.rows[x]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    /// `V(.|x) << W(.|x)` for every `x` in `on`.
    pub fn is_dominated_by(&self, w: &ConditionalChannel, on: &[usize]) -> bool {
        on.iter().all(|&x| self.rows[x].is_dominated_by(&w.rows[x]))
    }

    /// Output distribution `PV`.
    pub fn output_distribution(&self, p: &Distribution) -> Result<Distribution> {
        if p.len() != self.input_size() {
            return Err(Error::AlphabetMismatch(p.len(), self.input_size()));
        }
        let mut q = vec![0.0; self.output_size()];
        for (x, row) in self.rows.iter().enumerate() {
            if is_zero(p[x]) {
                continue;
            }
            for (qy, w) in q.iter_mut().zip(row.probs()) {
                *qy += p[x] * w;
            }
        }
        Distribution::from_weights(q)
    }
}

impl AsRef<ConditionalChannel> for ConditionalChannel {
    fn as_ref(&self) -> &ConditionalChannel {
        self
    }
}

/// A discrete memoryless channel with labelled alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    matrix: ConditionalChannel,
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    #[serde(default)]
    input_alphabet: Vec<String>,
    #[serde(default)]
    output_alphabet: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    /// Builds a channel from raw rows, normalizing each one. Needs at least
    /// one input letter and two output letters.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        Self::with_labels(
            (0..nx).map(|i| i.to_string()).collect(),
            (0..ny).map(|i| i.to_string()).collect(),
            rows,
        )
    }

    pub fn with_labels(
        input_labels: Vec<String>,
        output_labels: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannel("input alphabet is empty".into()));
        }
        if output_labels.len() < 2 {
            return Err(Error::InvalidChannel("output alphabet needs two letters".into()));
        }
        if input_labels.len() != rows.len() {
            return Err(Error::AlphabetMismatch(input_labels.len(), rows.len()));
        }
        let mut out = Vec::with_capacity(rows.len());
        for (x, r) in rows.into_iter().enumerate() {
            if r.len() != output_labels.len() {
                return Err(Error::AlphabetMismatch(output_labels.len(), r.len()));
            }
            let s: f64 = r.iter().sum();
            if !s.is_finite() || (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidChannel(format!("row {x} has mass {s}")));
            }
            out.push(Distribution::from_weights(r)?);
        }
        Ok(Self { input_labels, output_labels, matrix: ConditionalChannel::new(out)? })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ChannelFile = serde_json::from_str(s)?;
        // Labels are optional; missing ones default to letter indices.
        let fill = |labels: Vec<String>, n: usize| {
            if labels.is_empty() {
                (0..n).map(|i| i.to_string()).collect()
            } else {
                labels
            }
        };
        let ny = f.rows.first().map_or(0, Vec::len);
        let nx = f.rows.len();
        Self::with_labels(fill(f.input_alphabet, nx), fill(f.output_alphabet, ny), f.rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let f = ChannelFile {
            input_alphabet: self.input_labels.clone(),
            output_alphabet: self.output_labels.clone(),
            rows: self.matrix.rows.iter().map(|r| r.probs().to_vec()).collect(),
        };
        serde_json::to_string(&f).expect("channel serializes")
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::from_rows(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Z-channel: input 0 is noiseless, input 1 flips to 0 with probability `q`.
    pub fn z_channel(q: f64) -> Result<Self> {
        Self::from_rows(vec![vec![1.0, 0.0], vec![q, 1.0 - q]])
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn matrix(&self) -> &ConditionalChannel {
        &self.matrix
    }

    pub fn input_size(&self) -> usize {
        self.matrix.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.matrix.output_size()
    }

    pub fn row(&self, x: usize) -> &Distribution {
        self.matrix.row(x)
    }

    pub fn rows(&self) -> &[Distribution] {
        self.matrix.rows()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix.get(x, y)
    }
}

impl AsRef<ConditionalChannel> for Channel {
    fn as_ref(&self) -> &ConditionalChannel {
        &self.matrix
    }
}
