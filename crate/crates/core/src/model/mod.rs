//! Plant, sensor, channel and cost parameterization.
//!
//! Stage convention: decisions are taken at stages `0..=N`. Per-stage plant
//! matrices therefore have `N + 1` entries, while the state weight carries an
//! extra terminal entry for `x(N+1)`.

mod document;

pub use document::{CostsDocument, MatrixSpec, ModelDocument, PlantDocument, ScalarSpec};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Asymmetry below this is treated as rounding and removed.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    pub horizon: usize,
    pub transition: Vec<DMatrix<f64>>,
    pub input: Vec<DMatrix<f64>>,
    pub output: Vec<DMatrix<f64>>,
    pub process_noise: Vec<DMatrix<f64>>,
    pub measurement_noise: Vec<DMatrix<f64>>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

impl LinearGaussianModel {
    /// Replicates one set of matrices over stages `0..=horizon`.
    #[allow(clippy::too_many_arguments)]
    pub fn stationary(
        horizon: usize,
        transition: DMatrix<f64>,
        input: DMatrix<f64>,
        output: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        initial_mean: DVector<f64>,
        initial_cov: DMatrix<f64>,
    ) -> Self {
        let stages = horizon + 1;
        Self {
            horizon,
            transition: vec![transition; stages],
            input: vec![input; stages],
            output: vec![output; stages],
            process_noise: vec![process_noise; stages],
            measurement_noise: vec![measurement_noise; stages],
            initial_mean,
            initial_cov,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.initial_mean.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input.first().map_or(0, |b| b.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.output.first().map_or(0, |c| c.nrows())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    /// `Q(k)` for `k = 0..=N+1`.
    pub state_weight: Vec<DMatrix<f64>>,
    /// `R(k)` for `k = 0..=N`.
    pub input_weight: Vec<DMatrix<f64>>,
    /// Communication weight `ℓ(k)` for `k = 0..=N`.
    pub comm_weight: Vec<f64>,
    /// Tradeoff multiplier `λ`.
    pub tradeoff: f64,
}

impl CostWeights {
    pub fn stationary(
        horizon: usize,
        state_weight: DMatrix<f64>,
        terminal_weight: DMatrix<f64>,
        input_weight: DMatrix<f64>,
        comm_weight: f64,
        tradeoff: f64,
    ) -> Self {
        let mut q = vec![state_weight; horizon + 1];
        q.push(terminal_weight);
        Self {
            state_weight: q,
            input_weight: vec![input_weight; horizon + 1],
            comm_weight: vec![comm_weight; horizon + 1],
            tradeoff,
        }
    }
}

/// Channel output: the transmitted payload or the erasure symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSymbol {
    Payload(DVector<f64>),
    Erasure,
}

impl ChannelSymbol {
    pub fn is_erasure(&self) -> bool {
        matches!(self, ChannelSymbol::Erasure)
    }
}

/// What a transmitted packet carries. Both are equivalent for the decoder;
/// the mismatch has smaller magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadEncoding {
    #[default]
    Estimate,
    Mismatch,
}

/// Channel input-output map. The returned symbol is delivered one stage later.
pub fn channel_step(transmit: bool, payload: &DVector<f64>) -> ChannelSymbol {
    if transmit {
        ChannelSymbol::Payload(payload.clone())
    } else {
        ChannelSymbol::Erasure
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub matrix: &'static str,
    pub stage: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(k) => write!(f, "{}({}) {}", self.matrix, k, self.message),
            None => write!(f, "{} {}", self.matrix, self.message),
        }
    }
}

/// Outcome of [`validate_model`]: the violated invariants plus copies of the
/// inputs with rounding-level asymmetry removed.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub symmetrized: usize,
    pub model: LinearGaussianModel,
    pub costs: CostWeights,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

fn check_count(matrix: &'static str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::StageCount {
            matrix,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_shapes(matrix: &'static str, mats: &[DMatrix<f64>], shape: (usize, usize)) -> Result<()> {
    for (k, m) in mats.iter().enumerate() {
        if m.shape() != shape {
            return Err(Error::Dimension {
                matrix,
                stage: k,
                expected: shape,
                found: m.shape(),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Definiteness {
    Positive,
    Semi,
}

struct Checker {
    violations: Vec<Violation>,
    symmetrized: usize,
}

impl Checker {
    fn symmetric(&mut self, matrix: &'static str, stage: Option<usize>, m: &mut DMatrix<f64>) -> bool {
        let asym = linalg::asymmetry(m);
        if asym == 0.0 {
            return true;
        }
        if asym <= SYMMETRY_TOLERANCE {
            *m = linalg::symmetrize(m);
            self.symmetrized += 1;
            return true;
        }
        self.violations.push(Violation {
            matrix,
            stage,
            message: format!("not symmetric (max asymmetry {asym:e})"),
        });
        false
    }

    fn definite(&mut self, matrix: &'static str, stage: Option<usize>, m: &mut DMatrix<f64>, kind: Definiteness) {
        if !self.symmetric(matrix, stage, m) {
            return;
        }
        let ok = match kind {
            Definiteness::Positive => linalg::is_positive_definite(m),
            Definiteness::Semi => linalg::is_positive_semidefinite(m),
        };
        if !ok {
            let message = match kind {
                Definiteness::Positive => "not positive definite",
                Definiteness::Semi => "not positive semidefinite",
            };
            self.violations.push(Violation {
                matrix,
                stage,
                message: message.to_string(),
            });
        }
    }
}

/// Checks shapes, symmetry and definiteness of the model and cost weights.
///
/// Shape errors are returned as `Err`; everything else is collected in the
/// report. The inputs are not modified.
pub fn validate_model(model: &LinearGaussianModel, costs: &CostWeights) -> Result<ValidationReport> {
    let stages = model.horizon + 1;
    let n = model.state_dim();
    let m = model.input_dim();
    let p = model.output_dim();

    check_count("A", model.transition.len(), stages)?;
    check_count("B", model.input.len(), stages)?;
    check_count("C", model.output.len(), stages)?;
    check_count("W", model.process_noise.len(), stages)?;
    check_count("V", model.measurement_noise.len(), stages)?;
    check_count("Q", costs.state_weight.len(), stages + 1)?;
    check_count("R", costs.input_weight.len(), stages)?;
    check_count("ell", costs.comm_weight.len(), stages)?;

    check_shapes("A", &model.transition, (n, n))?;
    check_shapes("B", &model.input, (n, m))?;
    check_shapes("C", &model.output, (p, n))?;
    check_shapes("W", &model.process_noise, (n, n))?;
    check_shapes("V", &model.measurement_noise, (p, p))?;
    check_shapes("M0", std::slice::from_ref(&model.initial_cov), (n, n))?;
    check_shapes("Q", &costs.state_weight, (n, n))?;
    check_shapes("R", &costs.input_weight, (m, m))?;

    let mut model = model.clone();
    let mut costs = costs.clone();
    let mut checker = Checker {
        violations: Vec::new(),
        symmetrized: 0,
    };

    for (k, w) in model.process_noise.iter_mut().enumerate() {
        checker.definite("W", Some(k), w, Definiteness::Positive);
    }
    for (k, v) in model.measurement_noise.iter_mut().enumerate() {
        checker.definite("V", Some(k), v, Definiteness::Positive);
    }
    checker.definite("M0", None, &mut model.initial_cov, Definiteness::Positive);
    for (k, q) in costs.state_weight.iter_mut().enumerate() {
        checker.definite("Q", Some(k), q, Definiteness::Semi);
    }
    for (k, r) in costs.input_weight.iter_mut().enumerate() {
        checker.definite("R", Some(k), r, Definiteness::Positive);
    }
    for (k, &l) in costs.comm_weight.iter().enumerate() {
        if !(l >= 0.0 && l.is_finite()) {
            checker.violations.push(Violation {
                matrix: "ell",
                stage: Some(k),
                message: format!("must be a finite nonnegative number, got {l}"),
            });
        }
    }
    if !(costs.tradeoff > 0.0 && costs.tradeoff.is_finite()) {
        checker.violations.push(Violation {
            matrix: "lambda",
            stage: None,
            message: format!("must be positive, got {}", costs.tradeoff),
        });
    }
    let non_finite = model
        .transition
        .iter()
        .chain(&model.input)
        .chain(&model.output)
        .any(|mat| mat.iter().any(|v| !v.is_finite()))
        || model.initial_mean.iter().any(|v| !v.is_finite());
    if non_finite {
        checker.violations.push(Violation {
            matrix: "model",
            stage: None,
            message: "contains non-finite entries".to_string(),
        });
    }

    Ok(ValidationReport {
        violations: checker.violations,
        symmetrized: checker.symmetrized,
        model,
        costs,
    })
}

/// A validated model together with its cost weights. Immutable once built.
#[derive(Debug, Clone)]
pub struct Problem {
    model: LinearGaussianModel,
    costs: CostWeights,
}

impl Problem {
    pub fn new(model: LinearGaussianModel, costs: CostWeights) -> Result<Self> {
        let report = validate_model(&model, &costs)?;
        if !report.is_valid() {
            return Err(Error::Invalid(report.messages()));
        }
        Ok(Self {
            model: report.model,
            costs: report.costs,
        })
    }

    pub fn model(&self) -> &LinearGaussianModel {
        &self.model
    }

    pub fn costs(&self) -> &CostWeights {
        &self.costs
    }

    pub fn horizon(&self) -> usize {
        self.model.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.model.output_dim()
    }

    /// Same problem with a different tradeoff multiplier.
    pub fn with_tradeoff(&self, tradeoff: f64) -> Result<Self> {
        let mut costs = self.costs.clone();
        costs.tradeoff = tradeoff;
        Self::new(self.model.clone(), costs)
    }
}
