//! Attribution reports and their JSON / CSV forms.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How a report's values were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ShapleyExact,
    ShapleyMc,
    Loo,
    AttentionFlow,
    Rollout,
    RawAttention,
}

/// Per-player values for one attribution method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub method: Method,
    pub n: usize,
    pub values: Vec<f64>,
    /// Standard error of each Monte Carlo estimate; `None` for exact methods.
    pub stderr: Option<Vec<f64>>,
    pub v_grand: f64,
    pub seed: Option<u64>,
    pub m: Option<u64>,
    #[serde(default)]
    pub metadata: ReportMetadata,
}

/// Descriptive fields that are not part of the numeric payload.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Seconds since the Unix epoch. Excluded from [`AttributionReport::payload_json`].
    #[serde(default)]
    pub generated_at: Option<u64>,
}

impl AttributionReport {
    pub fn new(method: Method, values: Vec<f64>, v_grand: f64) -> Self {
        AttributionReport {
            method,
            n: values.len(),
            values,
            stderr: None,
            v_grand,
            seed: None,
            m: None,
            metadata: ReportMetadata::default(),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.metadata.description = description.into();
        self
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Self {
        self.metadata.labels = labels;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.metadata.notes.push(note.into());
        self
    }

    pub fn stamped_now(mut self) -> Self {
        self.metadata.generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `|Σ values − v(N)|`, the efficiency defect.
    pub fn efficiency_gap(&self) -> f64 {
        (self.total() - self.v_grand).abs()
    }

    /// Whether `Σ values = v(N)` within `rel_tol` relative to `max(1, |v(N)|)`.
    pub fn is_efficient(&self, rel_tol: f64) -> bool {
        self.efficiency_gap() <= rel_tol * self.v_grand.abs().max(1.0)
    }

    pub fn label(&self, i: usize) -> String {
        match &self.metadata.labels {
            Some(labels) if labels.get(i).is_some_and(|l| !l.is_empty()) => labels[i].clone(),
            _ => i.to_string(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON with the timestamp cleared; identical inputs give identical bytes.
    pub fn payload_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.metadata.generated_at = None;
        copy.to_json()
    }

    /// Plot table: `player,label,value[,stderr]`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["player", "label", "value"];
        if self.stderr.is_some() {
            header.push("stderr");
        }
        // writing to a Vec cannot fail
        w.write_record(&header).expect("in-memory csv");
        for i in 0..self.n {
            let mut row = vec![i.to_string(), self.label(i), format_real(self.values[i])];
            if let Some(se) = &self.stderr {
                row.push(format_real(se[i]));
            }
            w.write_record(&row).expect("in-memory csv");
        }
        let bytes = w.into_inner().expect("in-memory csv");
        String::from_utf8(bytes).expect("csv of utf-8 fields")
    }
}

/// A double with 17 significant digits, which always round-trips.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}
