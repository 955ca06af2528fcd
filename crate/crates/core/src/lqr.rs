//! Backward Riccati recursion for the certainty-equivalent regulator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{quad_form, symmetrize};
use crate::model::Problem;

/// Per-stage output of the backward pass.
///
/// Indexing: `cost_to_go[k]` is `S(k)` for `k = 0..=N+2` with `S(N+1) = Q(N+1)`
/// and `S(N+2) = 0`. `estimation_penalty[k]` is
/// `Γ(k) = A(k)ᵀS(k+1)B(k)(B(k)ᵀS(k+1)B(k) + R(k))⁻¹B(k)ᵀS(k+1)A(k)` built from
/// stage-`k` matrices, for `k = 0..=N+1`; `Γ(N+1) = 0` because `S(N+2) = 0`.
/// The value of information at stage `k` consumes `Γ(k+1)`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub cost_to_go: Vec<DMatrix<f64>>,
    pub gain: Vec<DMatrix<f64>>,
    /// `B(k)ᵀS(k+1)B(k) + R(k)`, the weight of `u + Lx` in the stage cost.
    pub input_curvature: Vec<DMatrix<f64>>,
    pub estimation_penalty: Vec<DMatrix<f64>>,
    /// `θ(k) = ℓ(k)·λ`.
    pub transmission_price: Vec<f64>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.gain.len() - 1
    }

    /// `Γ(k+1)`, the weight that the stage-`k` value of information puts on `A(k)ẽ(k)`.
    pub fn penalty_after(&self, k: usize) -> &DMatrix<f64> {
        &self.estimation_penalty[k + 1]
    }
}

pub fn riccati_backward(problem: &Problem) -> Result<RiccatiSolution> {
    let model = problem.model();
    let costs = problem.costs();
    let horizon = problem.horizon();
    let n = problem.state_dim();

    let mut cost_to_go = vec![DMatrix::zeros(n, n); horizon + 3];
    cost_to_go[horizon + 1] = costs.state_weight[horizon + 1].clone();
    let mut gain = Vec::with_capacity(horizon + 1);
    let mut input_curvature = Vec::with_capacity(horizon + 1);
    let mut estimation_penalty = vec![DMatrix::zeros(n, n); horizon + 2];

    for k in (0..=horizon).rev() {
        let a = &model.transition[k];
        let b = &model.input[k];
        let next = &cost_to_go[k + 1];
        let bt_s = b.transpose() * next;
        let curvature = symmetrize(&(&bt_s * b + &costs.input_weight[k]));
        let chol = curvature
            .clone()
            .cholesky()
            .ok_or(Error::Factorization {
                what: "BᵀSB + R",
                stage: k,
            })?;
        let l = chol.solve(&(&bt_s * a));
        let at_s_b = a.transpose() * next * b;
        let penalty = symmetrize(&(&at_s_b * &l));
        let s = &costs.state_weight[k] + a.transpose() * next * a - &penalty;
        cost_to_go[k] = symmetrize(&s);
        estimation_penalty[k] = penalty;
        gain.push(l);
        input_curvature.push(curvature);
    }
    gain.reverse();
    input_curvature.reverse();

    let transmission_price = costs
        .comm_weight
        .iter()
        .map(|&l| l * costs.tradeoff)
        .collect();

    Ok(RiccatiSolution {
        cost_to_go,
        gain,
        input_curvature,
        estimation_penalty,
        transmission_price,
    })
}

/// `η(k) = (u + L(k)x)ᵀ(B(k)ᵀS(k+1)B(k) + R(k))(u + L(k)x)`. The caller
/// handles the terminal convention `η(N+1) = 0`.
pub fn stage_cost_eta(x: &DVector<f64>, u: &DVector<f64>, k: usize, ric: &RiccatiSolution) -> f64 {
    let deviation = u + &ric.gain[k] * x;
    quad_form(&deviation, &ric.input_curvature[k])
}
