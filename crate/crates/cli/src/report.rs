//! The machine-readable run report every subcommand prints to stdout.
//!
//! Reports are deterministic: map keys are sorted, floats print in
//! shortest round-trip form, and wall-clock timings appear only when
//! explicitly requested. Two runs with equal inputs produce equal bytes.

use nnbisim::approx::ErrorBound;
use nnbisim::bisim::Witness;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Subcommand name.
    pub command: String,
    /// Input files and parameters, stringified, in sorted key order.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ModelSummary>,
    /// Check outcome, where the command implies one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bias_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_presum_gap: Option<f64>,
    /// First violated merge condition, when a check fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<ErrorBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareStats>,
    /// Output valuation of an eval run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files_written: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
    /// Process exit status the run will end with.
    pub exit_status: i32,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            model: None,
            reduced: None,
            verdict: None,
            delta: None,
            max_bias_gap: None,
            max_presum_gap: None,
            witness: None,
            bound: None,
            refinement: None,
            compare: None,
            output: None,
            files_written: Vec::new(),
            timings_ms: None,
            exit_status: 0,
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Shape summary of a model before or after reduction.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub layer_sizes: Vec<usize>,
    pub nodes: usize,
    pub edges: usize,
}

impl ModelSummary {
    pub fn of(net: &nnbisim::network::Network) -> Self {
        ModelSummary {
            layer_sizes: net.layer_sizes().to_vec(),
            nodes: net.num_nodes(),
            edges: net.num_edges(),
        }
    }
}

/// How much work minimization did and what it produced.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementSummary {
    pub act_bias_splits: usize,
    pub presum_splits: usize,
    pub blocks_per_layer: Vec<usize>,
}

/// Sampled deviation statistics from `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct CompareStats {
    pub samples: usize,
    pub seed: u64,
    pub vinf: f64,
    /// Largest block-wise output gap seen.
    pub max_gap: f64,
    pub mean_gap: f64,
}
