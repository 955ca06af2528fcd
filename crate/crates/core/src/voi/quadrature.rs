use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetrize;

/// One-dimensional rule for the standard normal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Gauss–Hermite: exact for polynomials, slow on kinked integrands.
    #[default]
    GaussHermite,
    /// Equally spaced nodes on ±8 standard deviations with normalized
    /// Gaussian trapezoid weights.
    Trapezoid,
}

impl QuadratureRule {
    pub fn standard_normal(self, count: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            QuadratureRule::GaussHermite => {
                let gh = GaussHermite::new(count);
                (gh.nodes, gh.weights)
            }
            QuadratureRule::Trapezoid => trapezoid(count),
        }
    }
}

/// Half-width of the trapezoid rule in standard deviations.
const TRAPEZOID_REACH: f64 = 8.0;

fn trapezoid(count: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 1, "quadrature needs at least one node");
    if count == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let step = 2.0 * TRAPEZOID_REACH / (count - 1) as f64;
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    for i in 0..count.div_ceil(2) {
        let j = count - 1 - i;
        let x = TRAPEZOID_REACH - i as f64 * step;
        let end = if i == 0 { 0.5 } else { 1.0 };
        let w = end * (-0.5 * x * x).exp();
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Gauss–Hermite rule for the standard normal, with nodes and weights made
/// exactly symmetric about zero. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    pub fn new(count: usize) -> Self {
        assert!(count >= 1, "quadrature needs at least one node");
        let jacobi = DMatrix::from_fn(count, count, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..count)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut nodes = vec![0.0; count];
        let mut weights = vec![0.0; count];
        for i in 0..count.div_ceil(2) {
            let j = count - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if count % 2 == 1 {
            nodes[count / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }
}

/// Tensor-product rule for `N(0, cov)`, built in the eigenbasis of `cov`.
/// Directions with negligible variance are dropped.
#[derive(Debug, Clone)]
pub struct GaussianRule {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl GaussianRule {
    /// Gauss–Hermite in every direction.
    pub fn new(cov: &DMatrix<f64>, count: usize) -> Self {
        Self::with_rule(cov, count, QuadratureRule::GaussHermite)
    }

    pub fn with_rule(cov: &DMatrix<f64>, count: usize, rule: QuadratureRule) -> Self {
        let n = cov.nrows();
        let eig = SymmetricEigen::new(symmetrize(cov));
        let largest = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        let directions: Vec<DVector<f64>> = (0..n)
            .filter(|&j| largest > 0.0 && eig.eigenvalues[j] > 1e-14 * largest)
            .map(|j| eig.eigenvectors.column(j) * eig.eigenvalues[j].sqrt())
            .collect();

        let (nodes, node_weights) = rule.standard_normal(count);
        let mut points = vec![DVector::zeros(n)];
        let mut weights = vec![1.0];
        for dir in &directions {
            let mut next_points = Vec::with_capacity(points.len() * count);
            let mut next_weights = Vec::with_capacity(points.len() * count);
            for (p, w) in points.iter().zip(&weights) {
                for (x, wx) in nodes.iter().zip(&node_weights) {
                    next_points.push(p + dir * *x);
                    next_weights.push(w * wx);
                }
            }
            points = next_points;
            weights = next_weights;
        }
        Self { points, weights }
    }

    pub fn expect(&self, mut f: impl FnMut(&DVector<f64>) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}
