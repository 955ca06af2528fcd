//! Value of information: exact backward recursion on a mismatch grid and the
//! closed-form quadratic approximation.

mod grid;
mod quadrature;
mod table;

pub use grid::MismatchGrid;
pub use quadrature::{GaussHermite, GaussianRule, QuadratureRule};
pub use table::{
    build_voi_table, default_grid, mismatch_scale, QuadratureSpec, VoiTable, DEFAULT_BOUND_MULTIPLE,
    DEFAULT_GRID_POINTS, DEFAULT_MAX_DIM, DEFAULT_QUADRATURE_NODES,
};

use nalgebra::{DMatrix, DVector};

use crate::linalg::quad_form;
use crate::lqr::RiccatiSolution;
use crate::model::Problem;

/// `ẽᵀAᵀΓAẽ − θ` for explicit matrices.
pub fn quadratic_voi(e: &DVector<f64>, transition: &DMatrix<f64>, penalty_next: &DMatrix<f64>, price: f64) -> f64 {
    let ae = transition * e;
    quad_form(&ae, penalty_next) - price
}

/// Quadratic approximation `VoI⁺_k(ẽ) = ẽᵀA(k)ᵀΓ(k+1)A(k)ẽ − θ(k)`.
pub fn voi_quadratic(e: &DVector<f64>, k: usize, ric: &RiccatiSolution, problem: &Problem) -> f64 {
    quadratic_voi(
        e,
        &problem.model().transition[k],
        ric.penalty_after(k),
        ric.transmission_price[k],
    )
}
