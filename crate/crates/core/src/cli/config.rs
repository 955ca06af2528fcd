//! Experiment configuration: the model document plus an optional
//! `experiment` section with every run setting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{CostsDocument, ModelDocument, PayloadEncoding, PlantDocument};
use crate::policy::{ControllerConfig, SchedulerConfig};
use crate::voi::{QuadratureSpec, DEFAULT_BOUND_MULTIPLE, DEFAULT_GRID_POINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub model: PlantDocument,
    pub costs: CostsDocument,
    #[serde(default)]
    pub experiment: ExperimentSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Policy used by `simulate`, `voi-table` lookups and `sweep`.
    pub scheduler: SchedulerConfig,
    pub controller: ControllerConfig,
    /// Policies evaluated side by side by `compare`.
    pub compare: Vec<NamedPolicy>,
    pub grid: GridSettings,
    pub quadrature: QuadratureSpec,
    pub seeds: SeedSettings,
    /// Tradeoff values for `sweep`; empty means the model's own `lambda`.
    pub lambdas: Vec<f64>,
    pub payload: PayloadEncoding,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            scheduler: SchedulerConfig::VoiQuadratic,
            controller: ControllerConfig::CertaintyEquivalent,
            compare: vec![
                NamedPolicy {
                    name: "voi_quadratic".into(),
                    scheduler: SchedulerConfig::VoiQuadratic,
                    controller: ControllerConfig::CertaintyEquivalent,
                },
                NamedPolicy {
                    name: "periodic_1".into(),
                    scheduler: SchedulerConfig::Periodic { period: 1, phase: 0 },
                    controller: ControllerConfig::CertaintyEquivalent,
                },
            ],
            grid: GridSettings::default(),
            quadrature: QuadratureSpec::default(),
            seeds: SeedSettings::default(),
            lambdas: Vec::new(),
            payload: PayloadEncoding::Estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPolicy {
    pub name: String,
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Nodes per dimension (odd).
    pub points: usize,
    /// Half-width in mismatch standard deviations.
    pub bound_multiple: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            bound_multiple: DEFAULT_BOUND_MULTIPLE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSettings {
    pub base: u64,
    pub count: usize,
}

impl Default for SeedSettings {
    fn default() -> Self {
        Self { base: 0, count: 1000 }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }

    pub fn document(&self) -> ModelDocument {
        ModelDocument {
            horizon: self.horizon,
            model: self.model.clone(),
            costs: self.costs.clone(),
        }
    }

    /// Tradeoff values for a sweep, falling back to the model's `lambda`.
    pub fn sweep_lambdas(&self) -> Vec<f64> {
        if self.experiment.lambdas.is_empty() {
            vec![self.costs.lambda]
        } else {
            self.experiment.lambdas.clone()
        }
    }
}
