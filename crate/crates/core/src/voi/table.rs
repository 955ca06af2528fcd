use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::MismatchGrid;
use super::quadrature::{GaussianRule, QuadratureRule};
use crate::error::{Error, Result};
use crate::estimator::KalmanSchedule;
use crate::linalg::quad_form;
use crate::lqr::RiccatiSolution;
use crate::model::Problem;

pub const DEFAULT_MAX_DIM: usize = 2;
pub const DEFAULT_QUADRATURE_NODES: usize = 9;
pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_BOUND_MULTIPLE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Nodes per dimension.
    pub nodes: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl QuadratureSpec {
    pub fn gauss_hermite(nodes: usize) -> Self {
        Self {
            nodes,
            rule: QuadratureRule::GaussHermite,
        }
    }

    pub fn trapezoid(nodes: usize) -> Self {
        Self {
            nodes,
            rule: QuadratureRule::Trapezoid,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_QUADRATURE_NODES)
    }
}

/// Per-dimension standard deviation used to size the grid: the largest
/// mismatch-innovation standard deviation over the horizon.
pub fn mismatch_scale(schedule: &KalmanSchedule) -> Vec<f64> {
    let covs = &schedule.mismatch_innovation_cov;
    let n = covs[0].nrows();
    let from = if covs.len() > 1 { 1 } else { 0 };
    (0..n)
        .map(|j| {
            let s = covs[from..].iter().map(|c| c[(j, j)]).fold(0.0_f64, f64::max).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Default grid: `points` nodes per dimension on `±bound_multiple` mismatch
/// standard deviations.
pub fn default_grid(schedule: &KalmanSchedule, points: usize, bound_multiple: f64) -> Result<MismatchGrid> {
    let bounds: Vec<f64> = mismatch_scale(schedule)
        .into_iter()
        .map(|s| bound_multiple * s)
        .collect();
    MismatchGrid::uniform(&bounds, points)
}

/// Value function, value of information and `ϱ` sampled on a mismatch grid
/// for every decision stage.
///
/// With the per-stage alternatives
/// `V_k|σ=1 = θ(k) + E[V_{k+1}(ξ)]` and
/// `V_k|σ=0 = (Aẽ)ᵀΓ(k+1)(Aẽ) + E[V_{k+1}(Aẽ + ξ)]`,
/// `V_k` is their minimum and `VoI_k` their difference. `V_{N+1} ≡ 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoiTable {
    pub grid: MismatchGrid,
    pub quadrature: QuadratureSpec,
    pub value: Vec<Vec<f64>>,
    pub voi: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    transmission_price: Vec<f64>,
    quadratic_weight: Vec<Vec<Vec<f64>>>,
}

pub fn build_voi_table(
    problem: &Problem,
    ric: &RiccatiSolution,
    schedule: &KalmanSchedule,
    grid: MismatchGrid,
    quadrature: QuadratureSpec,
    max_dim: usize,
) -> Result<VoiTable> {
    let n = problem.state_dim();
    if n > max_dim {
        return Err(Error::TooManyDimensions { n, max: max_dim });
    }
    if grid.dim() != n {
        return Err(Error::Config(format!(
            "grid has {} dimensions, model has {n}",
            grid.dim()
        )));
    }
    let horizon = problem.horizon();
    let model = problem.model();
    let len = grid.len();
    let half = len.div_ceil(2);

    let mut value = vec![Vec::new(); horizon + 1];
    let mut voi = vec![Vec::new(); horizon + 1];
    let mut rho = vec![Vec::new(); horizon + 1];
    let mut weights = vec![DMatrix::zeros(n, n); horizon + 1];

    let zeros = vec![0.0; len];
    for k in (0..=horizon).rev() {
        let a = &model.transition[k];
        let weight = a.transpose() * ric.penalty_after(k) * a;
        let theta = ric.transmission_price[k];
        let next: &[f64] = if k == horizon { &zeros } else { &value[k + 1] };
        let rule = (k < horizon).then(|| GaussianRule::with_rule(&schedule.mismatch_innovation_cov[k + 1], quadrature.nodes, quadrature.rule));
        let expect = |shift: &DVector<f64>| -> f64 {
            match &rule {
                Some(rule) => rule.expect(|xi| grid.interpolate(next, &(shift + xi))),
                None => 0.0,
            }
        };
        let reset = expect(&DVector::zeros(n));

        let computed: Vec<(f64, f64, f64)> = (0..half)
            .into_par_iter()
            .map(|flat| {
                let e = grid.node(flat);
                let quadratic = quad_form(&e, &weight);
                let continuation = expect(&(a * &e));
                let hold = quadratic + continuation;
                let send = theta + reset;
                (hold.min(send), hold - send, continuation - reset)
            })
            .collect();

        let mut v = vec![0.0; len];
        let mut d = vec![0.0; len];
        let mut r = vec![0.0; len];
        for (flat, &(vf, df, rf)) in computed.iter().enumerate() {
            let mirror = grid.mirror(flat);
            v[flat] = vf;
            v[mirror] = vf;
            d[flat] = df;
            d[mirror] = df;
            r[flat] = rf;
            r[mirror] = rf;
        }
        value[k] = v;
        voi[k] = d;
        rho[k] = r;
        weights[k] = weight;
    }

    Ok(VoiTable {
        grid,
        quadrature,
        value,
        voi,
        rho,
        transmission_price: ric.transmission_price.clone(),
        quadratic_weight: weights.iter().map(crate::linalg::to_rows).collect(),
    })
}

impl VoiTable {
    pub fn horizon(&self) -> usize {
        self.value.len() - 1
    }

    fn check_stage(&self, k: usize) -> Result<()> {
        if k > self.horizon() {
            return Err(Error::StageOutOfRange {
                stage: k,
                max: self.horizon(),
            });
        }
        Ok(())
    }

    fn quadratic(&self, k: usize, e: &DVector<f64>) -> f64 {
        let w = &self.quadratic_weight[k];
        let mut acc = 0.0;
        for (i, row) in w.iter().enumerate() {
            for (j, &wij) in row.iter().enumerate() {
                acc += e[i] * wij * e[j];
            }
        }
        acc - self.transmission_price[k]
    }

    /// Interpolated `VoI_k(ẽ)`. Inside the grid this is multilinear
    /// interpolation of the nodal values; outside, the quadratic term is
    /// evaluated exactly and only `ϱ_k` is clamped to the boundary.
    pub fn voi_lookup(&self, k: usize, e: &DVector<f64>) -> Result<f64> {
        self.check_stage(k)?;
        if self.grid.contains(e) {
            Ok(self.grid.interpolate(&self.voi[k], e))
        } else {
            Ok(self.quadratic(k, e) + self.grid.interpolate(&self.rho[k], e))
        }
    }

    /// `ϱ_k(ẽ) = E[V_{k+1}(Aẽ + ξ)] − E[V_{k+1}(ξ)]`, clamped outside the grid.
    pub fn rho_extract(&self, k: usize, e: &DVector<f64>) -> Result<f64> {
        self.check_stage(k)?;
        Ok(self.grid.interpolate(&self.rho[k], e))
    }

    pub fn value_lookup(&self, k: usize, e: &DVector<f64>) -> Result<f64> {
        self.check_stage(k)?;
        Ok(self.grid.interpolate(&self.value[k], e))
    }
}
