//! Schedulers and controllers.
//!
//! Every scheduler here is deterministic. Apart from [`Scheduler::EstimateThreshold`],
//! which exists for dual-effect contrast experiments, they read only the
//! estimation mismatch.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, quad_form};
use crate::lqr::RiccatiSolution;
use crate::model::{MatrixSpec, Problem};
use crate::voi::{quadratic_voi, VoiTable};

/// Closed-form `VoI⁺` data for every stage.
#[derive(Debug, Clone)]
pub struct QuadraticVoi {
    transition: Vec<DMatrix<f64>>,
    penalty_next: Vec<DMatrix<f64>>,
    price: Vec<f64>,
}

impl QuadraticVoi {
    pub fn new(problem: &Problem, ric: &RiccatiSolution) -> Self {
        let horizon = problem.horizon();
        Self {
            transition: problem.model().transition.clone(),
            penalty_next: (0..=horizon).map(|k| ric.penalty_after(k).clone()).collect(),
            price: ric.transmission_price.clone(),
        }
    }

    pub fn value(&self, k: usize, e: &DVector<f64>) -> f64 {
        quadratic_voi(e, &self.transition[k], &self.penalty_next[k], self.price[k])
    }
}

/// No-transmit region of a threshold scheduler.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Scalar mismatch: hold while `lower <= ẽ <= upper`.
    Interval { lower: f64, upper: f64 },
    /// Hold while `ẽᵀ P ẽ <= radius²`.
    Ellipsoid { shape: DMatrix<f64>, radius: f64 },
}

impl Region {
    pub fn symmetric(threshold: f64) -> Self {
        Region::Interval {
            lower: -threshold,
            upper: threshold,
        }
    }

    fn holds(&self, e: &DVector<f64>) -> bool {
        match self {
            Region::Interval { lower, upper } => e[0] >= *lower && e[0] <= *upper,
            Region::Ellipsoid { shape, radius } => quad_form(e, shape) <= radius * radius,
        }
    }

    fn is_symmetric(&self) -> bool {
        match self {
            Region::Interval { lower, upper } => *lower == -*upper,
            Region::Ellipsoid { .. } => true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Scheduler {
    /// Transmit iff the tabulated value of information is nonnegative.
    VoiExact(Arc<VoiTable>),
    /// Transmit iff `VoI⁺ >= 0`.
    VoiQuadratic(Arc<QuadraticVoi>),
    /// Transmit at stages `k` with `k % period == phase`.
    Periodic { period: usize, phase: usize },
    /// Transmit iff the mismatch leaves the stage's region. A single region
    /// applies to every stage.
    Threshold(Vec<Region>),
    /// Transmit iff component `component` of the encoder estimate exceeds `level`.
    EstimateThreshold { component: usize, level: f64 },
    /// Open-loop decision sequence.
    Fixed(Vec<bool>),
}

impl Scheduler {
    pub fn periodic(period: usize) -> Self {
        Scheduler::Periodic { period, phase: 0 }
    }

    pub fn quadratic(problem: &Problem, ric: &RiccatiSolution) -> Self {
        Scheduler::VoiQuadratic(Arc::new(QuadraticVoi::new(problem, ric)))
    }

    pub fn is_mismatch_only(&self) -> bool {
        !matches!(self, Scheduler::EstimateThreshold { .. })
    }

    /// Whether the no-transmit region is symmetric about zero at every stage.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Scheduler::Threshold(regions) => regions.iter().all(Region::is_symmetric),
            Scheduler::EstimateThreshold { .. } => false,
            _ => true,
        }
    }

    /// Transmission decision for a mismatch-only scheduler.
    ///
    /// # Panics
    /// On [`Scheduler::EstimateThreshold`]; use [`decide`](Self::decide).
    pub fn schedule(&self, k: usize, mismatch: &DVector<f64>) -> bool {
        self.decide(k, mismatch, None)
    }

    pub fn decide(&self, k: usize, mismatch: &DVector<f64>, estimate: Option<&DVector<f64>>) -> bool {
        match self {
            Scheduler::VoiExact(table) => table.voi_lookup(k, mismatch).map(|v| v >= 0.0).unwrap_or(false),
            Scheduler::VoiQuadratic(q) => q.value(k, mismatch) >= 0.0,
            Scheduler::Periodic { period, phase } => k % period == *phase,
            Scheduler::Threshold(regions) => {
                let region = if regions.len() == 1 { &regions[0] } else { &regions[k] };
                !region.holds(mismatch)
            }
            Scheduler::EstimateThreshold { component, level } => {
                let estimate = estimate.expect("estimate-dependent scheduler needs the encoder estimate");
                estimate[*component] > *level
            }
            Scheduler::Fixed(pattern) => pattern[k],
        }
    }

    /// The value of information this scheduler thresholds, if any.
    pub fn voi_value(&self, k: usize, mismatch: &DVector<f64>) -> Option<f64> {
        match self {
            Scheduler::VoiExact(table) => table.voi_lookup(k, mismatch).ok(),
            Scheduler::VoiQuadratic(q) => Some(q.value(k, mismatch)),
            _ => None,
        }
    }
}

/// `u(k) = −G(k) x̂(k)`.
#[derive(Debug, Clone)]
pub enum Controller {
    CertaintyEquivalent(Arc<Vec<DMatrix<f64>>>),
    CustomLinear(Arc<Vec<DMatrix<f64>>>),
}

impl Controller {
    pub fn certainty_equivalent(ric: &RiccatiSolution) -> Self {
        Controller::CertaintyEquivalent(Arc::new(ric.gain.clone()))
    }

    /// Certainty-equivalent gains multiplied by `factor`.
    pub fn scaled(ric: &RiccatiSolution, factor: f64) -> Self {
        Controller::CustomLinear(Arc::new(ric.gain.iter().map(|l| l * factor).collect()))
    }

    pub fn control(&self, k: usize, estimate: &DVector<f64>) -> DVector<f64> {
        let gains = match self {
            Controller::CertaintyEquivalent(g) | Controller::CustomLinear(g) => g,
        };
        -(&gains[k] * estimate)
    }
}

/// Serialized scheduler selection, keyed by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerConfig {
    VoiExact,
    VoiQuadratic,
    Periodic {
        period: usize,
        #[serde(default)]
        phase: usize,
    },
    /// Symmetric scalar thresholds, one per stage or a single stationary one.
    Threshold { thresholds: Vec<f64> },
    /// Scalar interval `[lower, upper]` as the no-transmit region.
    Interval { lower: f64, upper: f64 },
    /// Ellipsoidal no-transmit region `ẽᵀPẽ <= radius²`.
    Ellipsoid { shape: Vec<Vec<f64>>, radius: f64 },
    EstimateThreshold { component: usize, level: f64 },
    /// Accepted by the parser so configs can express it; rejected when built.
    Randomized { probability: f64 },
}

/// Serialized controller selection, keyed by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    CertaintyEquivalent,
    Scaled { factor: f64 },
    CustomLinear { gains: MatrixSpec },
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig::VoiQuadratic
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig::CertaintyEquivalent
    }
}

impl SchedulerConfig {
    pub fn needs_table(&self) -> bool {
        matches!(self, SchedulerConfig::VoiExact)
    }

    pub fn build(&self, problem: &Problem, ric: &RiccatiSolution, table: Option<&Arc<VoiTable>>) -> Result<Scheduler> {
        let horizon = problem.horizon();
        let scalar_only = |what: &str| -> Result<()> {
            if problem.state_dim() != 1 {
                return Err(Error::Policy(format!("{what} scheduler needs a scalar model")));
            }
            Ok(())
        };
        Ok(match self {
            SchedulerConfig::VoiExact => Scheduler::VoiExact(
                table
                    .cloned()
                    .ok_or_else(|| Error::Policy("voi_exact scheduler needs a value-of-information table".into()))?,
            ),
            SchedulerConfig::VoiQuadratic => Scheduler::quadratic(problem, ric),
            SchedulerConfig::Periodic { period, phase } => {
                if *period == 0 || phase >= period {
                    return Err(Error::Policy(format!("invalid period {period} / phase {phase}")));
                }
                Scheduler::Periodic {
                    period: *period,
                    phase: *phase,
                }
            }
            SchedulerConfig::Threshold { thresholds } => {
                scalar_only("threshold")?;
                if thresholds.len() != 1 && thresholds.len() != horizon + 1 {
                    return Err(Error::Policy(format!(
                        "expected 1 or {} thresholds, got {}",
                        horizon + 1,
                        thresholds.len()
                    )));
                }
                Scheduler::Threshold(thresholds.iter().map(|&c| Region::symmetric(c)).collect())
            }
            SchedulerConfig::Interval { lower, upper } => {
                scalar_only("interval")?;
                Scheduler::Threshold(vec![Region::Interval {
                    lower: *lower,
                    upper: *upper,
                }])
            }
            SchedulerConfig::Ellipsoid { shape, radius } => {
                let shape = from_rows(shape).ok_or_else(|| Error::Policy("ragged ellipsoid shape".into()))?;
                if shape.shape() != (problem.state_dim(), problem.state_dim()) {
                    return Err(Error::Policy("ellipsoid shape does not match the state dimension".into()));
                }
                Scheduler::Threshold(vec![Region::Ellipsoid { shape, radius: *radius }])
            }
            SchedulerConfig::EstimateThreshold { component, level } => {
                if *component >= problem.state_dim() {
                    return Err(Error::Policy(format!("component {component} out of range")));
                }
                Scheduler::EstimateThreshold {
                    component: *component,
                    level: *level,
                }
            }
            SchedulerConfig::Randomized { .. } => return Err(Error::Randomized),
        })
    }
}

impl ControllerConfig {
    pub fn build(&self, problem: &Problem, ric: &RiccatiSolution) -> Result<Controller> {
        Ok(match self {
            ControllerConfig::CertaintyEquivalent => Controller::certainty_equivalent(ric),
            ControllerConfig::Scaled { factor } => Controller::scaled(ric, *factor),
            ControllerConfig::CustomLinear { gains } => {
                let stages = problem.horizon() + 1;
                let shape = (problem.input_dim(), problem.state_dim());
                let gains: Vec<DMatrix<f64>> = match gains {
                    MatrixSpec::Stationary(rows) => {
                        vec![from_rows(rows).ok_or_else(|| Error::Policy("ragged gain".into()))?; stages]
                    }
                    MatrixSpec::PerStage(list) if list.len() == stages => list
                        .iter()
                        .map(|rows| from_rows(rows).ok_or_else(|| Error::Policy("ragged gain".into())))
                        .collect::<Result<_>>()?,
                    MatrixSpec::PerStage(list) => {
                        return Err(Error::Policy(format!("expected {stages} gains, got {}", list.len())))
                    }
                };
                if gains.iter().any(|g| g.shape() != shape) {
                    return Err(Error::Policy(format!("gains must be {}x{}", shape.0, shape.1)));
                }
                Controller::CustomLinear(Arc::new(gains))
            }
        })
    }
}
