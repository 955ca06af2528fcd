use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor-product grid over the estimation mismatch, symmetric under `ẽ ↦ -ẽ`.
///
/// Nodes are stored row-major with the last dimension fastest, so the
/// reflection of flat index `i` is `len() - 1 - i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchGrid {
    axes: Vec<Vec<f64>>,
}

impl MismatchGrid {
    /// Uniform grid with `points` nodes on `[-bound_j, bound_j]` in every dimension.
    pub fn uniform(bounds: &[f64], points: usize) -> Result<Self> {
        if points < 3 || points % 2 == 0 {
            return Err(Error::AsymmetricGrid(format!(
                "need an odd number of points >= 3, got {points}"
            )));
        }
        let half = (points - 1) / 2;
        let axes = bounds
            .iter()
            .map(|&bound| {
                (0..points)
                    .map(|i| {
                        if i < half {
                            -(bound * ((half - i) as f64 / half as f64))
                        } else {
                            bound * ((i - half) as f64 / half as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::from_axes(axes)
    }

    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::AsymmetricGrid("grid has no dimensions".into()));
        }
        for (j, axis) in axes.iter().enumerate() {
            let d = axis.len();
            if d < 3 || d % 2 == 0 {
                return Err(Error::AsymmetricGrid(format!(
                    "axis {j} needs an odd number of points >= 3, got {d}"
                )));
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::AsymmetricGrid(format!("axis {j} is not strictly increasing")));
            }
            for i in 0..d / 2 + 1 {
                if axis[i] != -axis[d - 1 - i] {
                    return Err(Error::AsymmetricGrid(format!(
                        "axis {j}: node {i} ({}) does not mirror node {} ({})",
                        axis[i],
                        d - 1 - i,
                        axis[d - 1 - i]
                    )));
                }
            }
        }
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mirror(&self, flat: usize) -> usize {
        self.len() - 1 - flat
    }

    pub fn node(&self, flat: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut rest = flat;
        for j in (0..self.dim()).rev() {
            let d = self.axes[j].len();
            out[j] = self.axes[j][rest % d];
            rest /= d;
        }
        out
    }

    pub fn contains(&self, point: &DVector<f64>) -> bool {
        self.axes
            .iter()
            .zip(point.iter())
            .all(|(axis, &x)| x >= axis[0] && x <= axis[axis.len() - 1])
    }

    /// Multilinear interpolation of nodal `values`, clamping outside the grid.
    /// The query is first reflected into the half-space whose first nonzero
    /// coordinate is positive, so symmetric data gives exactly symmetric results.
    pub fn interpolate(&self, values: &[f64], point: &DVector<f64>) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let flip = point.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0);
        let n = self.dim();

        let mut base = 0usize;
        let mut stride = 1usize;
        let mut cells = [(0usize, 0usize, 0.0f64); 8];
        let mut cells_vec;
        let cells: &mut [(usize, usize, f64)] = if n <= cells.len() {
            &mut cells[..n]
        } else {
            cells_vec = vec![(0usize, 0usize, 0.0f64); n];
            &mut cells_vec
        };
        for j in (0..n).rev() {
            let axis = &self.axes[j];
            let d = axis.len();
            let raw = if flip { -point[j] } else { point[j] };
            let x = raw.clamp(axis[0], axis[d - 1]);
            let i = axis.partition_point(|&b| b <= x).saturating_sub(1).min(d - 2);
            let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
            cells[j] = (i, stride, t);
            base += i * stride;
            stride *= d;
        }

        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut index = base;
            for (j, &(_, stride, t)) in cells.iter().enumerate() {
                if corner & (1 << j) != 0 {
                    weight *= t;
                    index += stride;
                } else {
                    weight *= 1.0 - t;
                }
            }
            if weight != 0.0 {
                acc += weight * values[index];
            }
        }
        acc
    }
}
