//! JSON document format for a model and its costs.
//!
//! ```json
//! {
//!   "horizon": 500,
//!   "model": { "A": [[..]], "B": [[..]], "C": [[..]], "W": [[..]], "V": [[..]],
//!              "m0": [..], "M0": [[..]] },
//!   "costs": { "Q": [[..]], "Q_terminal": [[..]], "R": [[..]], "ell": 1.0, "lambda": 0.0066 }
//! }
//! ```
//!
//! A matrix is either a single row-major nested array (replicated across all
//! stages) or a list of such arrays, one per stage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CostWeights, LinearGaussianModel, Problem};
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Stationary(Vec<Vec<f64>>),
    PerStage(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Stationary(f64),
    PerStage(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantDocument {
    #[serde(rename = "A")]
    pub transition: MatrixSpec,
    #[serde(rename = "B")]
    pub input: MatrixSpec,
    #[serde(rename = "C")]
    pub output: MatrixSpec,
    #[serde(rename = "W")]
    pub process_noise: MatrixSpec,
    #[serde(rename = "V")]
    pub measurement_noise: MatrixSpec,
    pub m0: Vec<f64>,
    #[serde(rename = "M0")]
    pub initial_cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsDocument {
    #[serde(rename = "Q")]
    pub state_weight: MatrixSpec,
    #[serde(rename = "Q_terminal", default, skip_serializing_if = "Option::is_none")]
    pub terminal_weight: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub input_weight: MatrixSpec,
    pub ell: ScalarSpec,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub horizon: usize,
    pub model: PlantDocument,
    pub costs: CostsDocument,
}

fn matrix(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    from_rows(rows).ok_or_else(|| Error::Config(format!("{name}: ragged matrix rows")))
}

fn expand(name: &'static str, spec: &MatrixSpec, stages: usize) -> Result<Vec<DMatrix<f64>>> {
    match spec {
        MatrixSpec::Stationary(rows) => Ok(vec![matrix(name, rows)?; stages]),
        MatrixSpec::PerStage(list) => {
            if list.len() != stages {
                return Err(Error::StageCount {
                    matrix: name,
                    expected: stages,
                    found: list.len(),
                });
            }
            list.iter().map(|rows| matrix(name, rows)).collect()
        }
    }
}

fn compress(mats: &[DMatrix<f64>]) -> MatrixSpec {
    match mats.first() {
        Some(first) if mats.iter().all(|m| m == first) => MatrixSpec::Stationary(to_rows(first)),
        _ => MatrixSpec::PerStage(mats.iter().map(to_rows).collect()),
    }
}

impl ModelDocument {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Expands stationary shorthands into per-stage matrices. Shape problems
    /// surface later, in validation.
    pub fn build(&self) -> Result<(LinearGaussianModel, CostWeights)> {
        let stages = self.horizon + 1;
        let plant = &self.model;
        let model = LinearGaussianModel {
            horizon: self.horizon,
            transition: expand("A", &plant.transition, stages)?,
            input: expand("B", &plant.input, stages)?,
            output: expand("C", &plant.output, stages)?,
            process_noise: expand("W", &plant.process_noise, stages)?,
            measurement_noise: expand("V", &plant.measurement_noise, stages)?,
            initial_mean: DVector::from_vec(plant.m0.clone()),
            initial_cov: matrix("M0", &plant.initial_cov)?,
        };

        let costs = &self.costs;
        let state_weight = match (&costs.state_weight, &costs.terminal_weight) {
            (MatrixSpec::Stationary(rows), terminal) => {
                let q = matrix("Q", rows)?;
                let qt = match terminal {
                    Some(t) => matrix("Q_terminal", t)?,
                    None => q.clone(),
                };
                let mut all = vec![q; stages];
                all.push(qt);
                all
            }
            (spec @ MatrixSpec::PerStage(list), None) if list.len() == stages + 1 => {
                expand("Q", spec, stages + 1)?
            }
            (spec @ MatrixSpec::PerStage(_), Some(t)) => {
                let mut all = expand("Q", spec, stages)?;
                all.push(matrix("Q_terminal", t)?);
                all
            }
            (MatrixSpec::PerStage(list), None) => {
                return Err(Error::StageCount {
                    matrix: "Q",
                    expected: stages + 1,
                    found: list.len(),
                })
            }
        };
        let comm_weight = match &costs.ell {
            ScalarSpec::Stationary(l) => vec![*l; stages],
            ScalarSpec::PerStage(list) => {
                if list.len() != stages {
                    return Err(Error::StageCount {
                        matrix: "ell",
                        expected: stages,
                        found: list.len(),
                    });
                }
                list.clone()
            }
        };
        let weights = CostWeights {
            state_weight,
            input_weight: expand("R", &costs.input_weight, stages)?,
            comm_weight,
            tradeoff: costs.lambda,
        };
        Ok((model, weights))
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let (model, costs) = self.build()?;
        Problem::new(model, costs)
    }

    /// Inverse of [`build`](Self::build); per-stage lists that repeat one
    /// matrix are written back in stationary form.
    pub fn from_parts(model: &LinearGaussianModel, costs: &CostWeights) -> Self {
        let horizon = model.horizon;
        let running = &costs.state_weight[..costs.state_weight.len().saturating_sub(1)];
        let terminal = costs.state_weight.last();
        let (state_weight, terminal_weight) = match compress(running) {
            MatrixSpec::Stationary(rows) => {
                let t = terminal.map(to_rows);
                let t = if t.as_ref() == Some(&rows) { None } else { t };
                (MatrixSpec::Stationary(rows), t)
            }
            MatrixSpec::PerStage(_) => (MatrixSpec::PerStage(costs.state_weight.iter().map(to_rows).collect()), None),
        };
        let ell = match costs.comm_weight.first() {
            Some(&l) if costs.comm_weight.iter().all(|&x| x.to_bits() == l.to_bits()) => ScalarSpec::Stationary(l),
            _ => ScalarSpec::PerStage(costs.comm_weight.clone()),
        };
        Self {
            horizon,
            model: PlantDocument {
                transition: compress(&model.transition),
                input: compress(&model.input),
                output: compress(&model.output),
                process_noise: compress(&model.process_noise),
                measurement_noise: compress(&model.measurement_noise),
                m0: model.initial_mean.iter().copied().collect(),
                initial_cov: to_rows(&model.initial_cov),
            },
            costs: CostsDocument {
                state_weight,
                terminal_weight,
                input_weight: compress(&costs.input_weight),
                ell,
                lambda: costs.tradeoff,
            },
        }
    }

    /// Re-targets the horizon; only valid when every per-stage entry is stationary.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let stationary = [
            &self.model.transition,
            &self.model.input,
            &self.model.output,
            &self.model.process_noise,
            &self.model.measurement_noise,
            &self.costs.state_weight,
            &self.costs.input_weight,
        ]
        .iter()
        .all(|m| matches!(m, MatrixSpec::Stationary(_)))
            && matches!(self.costs.ell, ScalarSpec::Stationary(_));
        if !stationary {
            return Err(Error::Config(
                "horizon can only be changed on a fully stationary model".into(),
            ));
        }
        let mut doc = self.clone();
        doc.horizon = horizon;
        Ok(doc)
    }
}
