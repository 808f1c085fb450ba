//! Experiment configuration files.
//!
//! A config is one JSON object. Every field is optional; command-line flags
//! take precedence over config fields, which take precedence over the
//! per-experiment defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adaptive::SubsetSampling;
use crate::data::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RiskSweep,
    Decompose,
    Overlap,
    Multinomial,
    AdaptiveHist,
    LearnProbs,
    BoundsTable,
    Consistency,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::RiskSweep,
        ExperimentKind::Decompose,
        ExperimentKind::Overlap,
        ExperimentKind::Multinomial,
        ExperimentKind::AdaptiveHist,
        ExperimentKind::LearnProbs,
        ExperimentKind::BoundsTable,
        ExperimentKind::Consistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RiskSweep => "risk-sweep",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Overlap => "overlap",
            ExperimentKind::Multinomial => "multinomial",
            ExperimentKind::AdaptiveHist => "adaptive-hist",
            ExperimentKind::LearnProbs => "learn-probs",
            ExperimentKind::BoundsTable => "bounds-table",
            ExperimentKind::Consistency => "consistency",
        }
    }

    /// Child index of the experiment seed under the root seed.
    pub fn seed_index(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Split-coordinate probabilities; defaults to `1/S` on the strong set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    /// Leaf counts `kₙ`: one per `n`, a single value for all, or (decompose) a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<Vec<u64>>,
    /// Consistency probe leaf rule `kₙ = round(n^a)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datasets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub square_sup_bound: Option<bool>,

    /// Category probability vectors for `overlap` and `multinomial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SubsetSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Draw a fresh second sample per selection trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fresh_sample: Option<bool>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,

    /// Query points of the consistency probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

impl ExperimentConfig {
    /// Parses a config, or the `config` echo of a run manifest so a run can be replayed.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        if let Ok(serde_json::Value::Object(mut obj)) = serde_json::from_str(text) {
            if obj.contains_key("root_seed") {
                if let Some(inner) = obj.remove("config") {
                    return serde_json::from_value(inner)
                        .map_err(|e| HarnessError::Config(format!("invalid config in manifest: {e}")));
                }
            }
        }
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = ExperimentConfig::from_json("{\n  \"seed\": 1,\n  \"sede\": 2\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sede") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn parses_nested_model() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "risk-sweep", "seed": 5, "n": [512, 1024],
                "model": {"dim": 1, "function": {"kind": "sparse-linear", "beta": [1]}, "sigma": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(ExperimentKind::RiskSweep));
        assert_eq!(cfg.model.unwrap().sigma, 0.1);
    }

    #[test]
    fn manifest_config_is_accepted() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "overlap", "status": "complete", "root_seed": 3,
                "config": {"experiment": "overlap", "seed": 3, "depths": [1, 2]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.depths, Some(vec![1, 2]));
    }

    #[test]
    fn kinds_have_distinct_seed_indices() {
        let idx: Vec<u64> = ExperimentKind::ALL.iter().map(|k| k.seed_index()).collect();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
        for k in ExperimentKind::ALL {
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }
}
