//! Particle approximation of the decoder's belief over the estimation
//! mismatch under a fixed scheduler, and the signaling residuals `ι(k)` and
//! `Ξ(k)` it implies.
//!
//! The particles track `ẽ = x̌ − x̂` relative to the linear equilibrium decoder,
//! so they evolve as `ẽ(k+1) = (1 − σ(k))A(k)ẽ(k) + ξ(k+1)`. Because the
//! encoder error is orthogonal to everything the decoder sees,
//! `E[ê | 𝓙, σ = 0] = E[ẽ | 𝓙, σ = 0]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::KalmanSchedule;
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, sqrt_factor};
use crate::model::Problem;
use crate::policy::Scheduler;

/// Weight normalization tolerance.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MismatchParticleCloud {
    particles: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

fn gaussian_sample<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    factor * z
}

impl MismatchParticleCloud {
    pub fn from_gaussian<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, count: usize, rng: &mut R) -> Self {
        let factor = sqrt_factor(cov);
        let particles = (0..count).map(|_| mean + gaussian_sample(&factor, rng)).collect();
        Self {
            particles,
            weights: vec![1.0 / count as f64; count],
        }
    }

    pub fn from_parts(particles: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if particles.len() != weights.len() || particles.is_empty() {
            return Err(Error::Config("particles and weights must be nonempty and equally long".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config("particle weights must be nonnegative".into()));
        }
        let mut cloud = Self { particles, weights };
        if !cloud.normalize() {
            return Err(Error::Config("particle weights sum to zero".into()));
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[DVector<f64>] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn normalize(&mut self) -> bool {
        let total = compensated_sum(self.weights.iter().copied());
        if !(total > 0.0) {
            return false;
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        debug_assert!(
            (compensated_sum(self.weights.iter().copied()) - 1.0).abs() <= WEIGHT_TOLERANCE * self.len() as f64
        );
        true
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn mean(&self) -> DVector<f64> {
        weighted_moments(&self.particles, &self.weights).0
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        weighted_moments(&self.particles, &self.weights).1
    }

    fn systematic_resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.len();
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cumulative = self.weights[0];
        let mut i = 0;
        let mut resampled = Vec::with_capacity(n);
        for _ in 0..n {
            while u > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.weights[i];
            }
            resampled.push(self.particles[i].clone());
            u += step;
        }
        self.particles = resampled;
        self.weights = vec![step; n];
    }
}

/// Weighted mean and covariance; weights need not be normalized.
fn weighted_moments(particles: &[DVector<f64>], weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = particles[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(n);
    for (p, w) in particles.iter().zip(weights) {
        mean.axpy(*w / total, p, 1.0);
    }
    let mut cov = DMatrix::zeros(n, n);
    for (p, w) in particles.iter().zip(weights) {
        let d = p - &mean;
        cov.ger(*w / total, &d, &d, 1.0);
    }
    (mean, cov)
}

#[derive(Debug, Clone)]
pub struct ParticleResiduals {
    /// `ι̂(k) = A(k)·E[ẽ(k) | 𝓙(k), σ(k) = 0]`.
    pub iota: DVector<f64>,
    /// Monte Carlo standard error of each component of `ι̂`.
    pub iota_se: DVector<f64>,
    /// `Ξ̂(k) = A(k)(Cov[ẽ | 𝓙] − Cov[ẽ | 𝓙, σ = 0])A(k)ᵀ`.
    pub xi: DMatrix<f64>,
    /// Probability mass of the no-transmit region.
    pub hold_probability: f64,
    /// Cloud for stage `k+1` after conditioning on the observed decision;
    /// `None` at the last stage.
    pub next: Option<MismatchParticleCloud>,
}

/// Signaling residuals at stage `k` and the cloud for stage `k+1`.
#[allow(clippy::too_many_arguments)]
pub fn particle_residuals<R: Rng + ?Sized>(
    cloud: &MismatchParticleCloud,
    scheduler: &Scheduler,
    k: usize,
    observed_transmit: bool,
    problem: &Problem,
    schedule: &KalmanSchedule,
    rng: &mut R,
) -> Result<ParticleResiduals> {
    if !scheduler.is_mismatch_only() {
        return Err(Error::Policy("particle residuals need a mismatch-only scheduler".into()));
    }
    let horizon = problem.horizon();
    if k > horizon {
        return Err(Error::StageOutOfRange { stage: k, max: horizon });
    }
    let n = problem.state_dim();
    let a = &problem.model().transition[k];

    let hold_weights: Vec<f64> = cloud
        .particles
        .iter()
        .zip(&cloud.weights)
        .map(|(p, &w)| if scheduler.schedule(k, p) { 0.0 } else { w })
        .collect();
    let hold_probability: f64 = hold_weights.iter().sum();

    let (iota, iota_se, xi) = if hold_probability > 0.0 {
        let (hold_mean, hold_cov) = weighted_moments(&cloud.particles, &hold_weights);
        let (_, full_cov) = weighted_moments(&cloud.particles, &cloud.weights);
        let mut mean_cov = DMatrix::zeros(n, n);
        for (p, &w) in cloud.particles.iter().zip(&hold_weights) {
            if w > 0.0 {
                let d = p - &hold_mean;
                let wn = w / hold_probability;
                mean_cov.ger(wn * wn, &d, &d, 1.0);
            }
        }
        let se_cov = a * mean_cov * a.transpose();
        let se = DVector::from_fn(n, |j, _| se_cov[(j, j)].max(0.0).sqrt());
        (a * hold_mean, se, a * (full_cov - hold_cov) * a.transpose())
    } else if observed_transmit {
        (DVector::zeros(n), DVector::zeros(n), DMatrix::zeros(n, n))
    } else {
        return Err(Error::Degenerate { stage: k });
    };

    let next = if k < horizon {
        let factor = sqrt_factor(&schedule.mismatch_innovation_cov[k + 1]);
        let count = cloud.len();
        let next = if observed_transmit {
            MismatchParticleCloud {
                particles: (0..count).map(|_| gaussian_sample(&factor, rng)).collect(),
                weights: vec![1.0 / count as f64; count],
            }
        } else {
            let mut held = MismatchParticleCloud {
                particles: cloud.particles.clone(),
                weights: hold_weights,
            };
            held.normalize();
            if held.effective_sample_size() < 0.5 * count as f64 {
                held.systematic_resample(rng);
            }
            for p in held.particles.iter_mut() {
                *p = a * &*p + gaussian_sample(&factor, rng);
            }
            held
        };
        Some(next)
    } else {
        None
    };

    Ok(ParticleResiduals {
        iota,
        iota_se,
        xi,
        hold_probability,
        next,
    })
}
