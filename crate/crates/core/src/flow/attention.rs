//! Layered attention matrices and the JSON interchange format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum distance of a row sum from 1 accepted on load.
pub const ROW_SUM_TOL: f64 = 1e-4;

/// A dense `n × n` matrix stored row-major. Entry `(j, i)` of an attention
/// layer is the weight query `j` pays to key `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.set(k, k, 1.0);
        }
        m
    }

    /// From nested rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Schema(format!(
                    "row {r} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `Σ_j self[j][i]` for each column `i`, summed in ascending `j`.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(j, i)).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.row(j).iter().sum()).collect()
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.get(k, c);
                }
            }
        }
        out
    }

    /// Divides each row by its sum. All-zero rows, and rows already within
    /// 1e-12 of summing to 1, are left alone, so normalizing twice is a no-op.
    pub fn normalize_rows(&mut self) {
        for j in 0..self.n {
            let sum: f64 = self.row(j).iter().sum();
            if sum > 0.0 && (sum - 1.0).abs() > 1e-12 {
                for x in &mut self.data[j * self.n..(j + 1) * self.n] {
                    *x /= sum;
                }
            }
        }
    }

    /// `weight · I + (1 − weight) · self`, rows renormalized.
    pub fn with_residual(&self, weight: f64) -> SquareMatrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= 1.0 - weight;
        }
        for k in 0..self.n {
            out.data[k * self.n + k] += weight;
        }
        out.normalize_rows();
        out
    }
}

/// How per-head attention was collapsed into one matrix per layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeadReduction {
    #[default]
    Mean,
    Max,
    Single(usize),
}

impl fmt::Display for HeadReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadReduction::Mean => f.write_str("mean"),
            HeadReduction::Max => f.write_str("max"),
            HeadReduction::Single(k) => write!(f, "single:{k}"),
        }
    }
}

impl FromStr for HeadReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(HeadReduction::Mean),
            "max" => Ok(HeadReduction::Max),
            _ => s
                .strip_prefix("single:")
                .and_then(|k| k.parse().ok())
                .map(HeadReduction::Single)
                .ok_or_else(|| Error::Schema(format!("unknown head_reduction {s:?}"))),
        }
    }
}

impl Serialize for HeadReduction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HeadReduction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The interchange document, field for field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionDocument {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "L")]
    pub layers_count: usize,
    pub tokens: Option<Vec<String>>,
    pub head_reduction: HeadReduction,
    pub layers: Vec<Vec<Vec<f64>>>,
}

/// `L` row-stochastic `n × n` attention layers, `layers[0]` nearest the input.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    layers: Vec<SquareMatrix>,
    tokens: Option<Vec<String>>,
    head_reduction: HeadReduction,
}

impl AttentionStack {
    /// Validates and row-renormalizes `layers`.
    ///
    /// Rejects empty stacks, ragged or mismatched matrices, negative or
    /// non-finite weights, and rows whose sum is more than [`ROW_SUM_TOL`]
    /// away from 1.
    pub fn new(mut layers: Vec<SquareMatrix>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Schema("attention stack has no layers".into()));
        };
        let n = first.n();
        if n == 0 {
            return Err(Error::Schema(
                "attention layers must have at least one token".into(),
            ));
        }
        for (l, layer) in layers.iter_mut().enumerate() {
            if layer.n() != n {
                return Err(Error::Schema(format!(
                    "layer {l} is {}x{0}, expected {n}x{n}",
                    layer.n()
                )));
            }
            for j in 0..n {
                for (i, &value) in layer.row(j).iter().enumerate() {
                    if !value.is_finite() || value < 0.0 {
                        return Err(Error::BadWeight {
                            layer: l,
                            row: j,
                            col: i,
                            value,
                        });
                    }
                }
                let sum: f64 = layer.row(j).iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::RowSum {
                        layer: l,
                        row: j,
                        sum,
                    });
                }
            }
            layer.normalize_rows();
        }
        Ok(AttentionStack {
            layers,
            tokens: None,
            head_reduction: HeadReduction::default(),
        })
    }

    pub fn from_rows(layers: &[Vec<Vec<f64>>]) -> Result<Self> {
        let matrices = layers
            .iter()
            .enumerate()
            .map(|(l, rows)| {
                SquareMatrix::from_rows(rows).map_err(|e| Error::Schema(format!("layer {l}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrices)
    }

    pub fn with_tokens(mut self, tokens: Vec<String>) -> Result<Self> {
        if tokens.len() != self.n() {
            return Err(Error::Schema(format!(
                "{} token labels for {} tokens",
                tokens.len(),
                self.n()
            )));
        }
        self.tokens = Some(tokens);
        Ok(self)
    }

    pub fn with_head_reduction(mut self, head_reduction: HeadReduction) -> Self {
        self.head_reduction = head_reduction;
        self
    }

    pub fn n(&self) -> usize {
        self.layers[0].n()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[SquareMatrix] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &SquareMatrix {
        &self.layers[l]
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    pub fn head_reduction(&self) -> HeadReduction {
        self.head_reduction
    }

    pub fn from_document(doc: AttentionDocument) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        if doc.layers.len() != doc.layers_count {
            return Err(Error::Schema(format!(
                "L = {} but {} layers are present",
                doc.layers_count,
                doc.layers.len()
            )));
        }
        for (l, layer) in doc.layers.iter().enumerate() {
            if layer.len() != doc.n {
                return Err(Error::Schema(format!(
                    "layer {l} has {} rows, expected n = {}",
                    layer.len(),
                    doc.n
                )));
            }
        }
        let mut stack = Self::from_rows(&doc.layers)?.with_head_reduction(doc.head_reduction);
        if let Some(tokens) = doc.tokens {
            stack = stack.with_tokens(tokens)?;
        }
        Ok(stack)
    }

    pub fn to_document(&self) -> AttentionDocument {
        AttentionDocument {
            version: 1,
            n: self.n(),
            layers_count: self.depth(),
            tokens: self.tokens.clone(),
            head_reduction: self.head_reduction,
            layers: self.layers.iter().map(SquareMatrix::rows).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AttentionDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }
}

/// Reads and validates an attention interchange file.
pub fn load_attention(path: impl AsRef<Path>) -> Result<AttentionStack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    AttentionStack::from_json(&text)
}
