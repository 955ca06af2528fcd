use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::policy::{Controller, Scheduler};

use super::monte_carlo::seed_sequence;
use super::rollout::{rollout, SimulationContext};

/// Comparison of one seed's rollouts under two controllers.
#[derive(Debug, Clone, Serialize)]
pub struct DualEffectReport {
    pub seed: u64,
    pub identical_decisions: bool,
    pub decision_differences: usize,
    /// Largest `|ẽ_first(k) − ẽ_second(k)|` over stages and components.
    pub max_mismatch_gap: f64,
    /// Largest entrywise gap between the decoder covariances `E(k)`.
    pub max_decoder_cov_gap: f64,
}

/// Runs the same seed under two controllers and reports how far the
/// transmission decisions, mismatches and decoder covariances drift apart.
pub fn dual_effect_probe(
    ctx: &SimulationContext,
    scheduler: &Scheduler,
    first: &Controller,
    second: &Controller,
    seed: u64,
) -> DualEffectReport {
    let a = rollout(ctx, scheduler, first, seed);
    let b = rollout(ctx, scheduler, second, seed);
    let mut decision_differences = 0;
    let mut max_mismatch_gap: f64 = 0.0;
    let mut max_decoder_cov_gap: f64 = 0.0;
    for (sa, sb) in a.stages.iter().zip(&b.stages) {
        if sa.transmit != sb.transmit {
            decision_differences += 1;
        }
        max_mismatch_gap = max_mismatch_gap.max((&sa.mismatch - &sb.mismatch).amax());
        max_decoder_cov_gap = max_decoder_cov_gap.max((&sa.decoder_cov - &sb.decoder_cov).amax());
    }
    DualEffectReport {
        seed,
        identical_decisions: decision_differences == 0,
        decision_differences,
        max_mismatch_gap,
        max_decoder_cov_gap,
    }
}

/// Sample covariance of `x(k) − x̂(k)` against the decoder's `E(k)`.
#[derive(Debug, Clone)]
pub struct CovarianceCheck {
    pub stage: usize,
    pub sample: DMatrix<f64>,
    /// Seed average of the decoder covariance.
    pub predicted: DMatrix<f64>,
    /// `‖sample − predicted‖_F / ‖predicted‖_F`.
    pub relative_error: f64,
}

pub fn decoder_error_covariance(
    ctx: &SimulationContext,
    scheduler: &Scheduler,
    controller: &Controller,
    n_seeds: usize,
    base_seed: u64,
    stages: &[usize],
) -> Result<Vec<CovarianceCheck>> {
    if n_seeds < 2 {
        return Err(Error::Config(format!("need at least 2 seeds, got {n_seeds}")));
    }
    if let Some(&k) = stages.iter().find(|&&k| k > ctx.horizon()) {
        return Err(Error::StageOutOfRange {
            stage: k,
            max: ctx.horizon(),
        });
    }
    let seeds = seed_sequence(base_seed, n_seeds);
    let per_seed: Vec<Vec<(DVector<f64>, DMatrix<f64>)>> = seeds
        .par_iter()
        .map(|&seed| {
            let trace = rollout(ctx, scheduler, controller, seed);
            stages
                .iter()
                .map(|&k| {
                    let s = &trace.stages[k];
                    (&s.state - &s.decoder_estimate, s.decoder_cov.clone())
                })
                .collect()
        })
        .collect();

    let n = ctx.problem.state_dim();
    let count = n_seeds as f64;
    let checks = stages
        .iter()
        .enumerate()
        .map(|(j, &stage)| {
            let entry_mean = |f: &dyn Fn(&(DVector<f64>, DMatrix<f64>)) -> f64| {
                per_seed.iter().map(|row| f(&row[j])).collect::<CompensatedSum>().value() / count
            };
            let mean = DVector::from_fn(n, |r, _| entry_mean(&|s| s.0[r]));
            let sample = DMatrix::from_fn(n, n, |r, c| {
                per_seed
                    .iter()
                    .map(|row| (row[j].0[r] - mean[r]) * (row[j].0[c] - mean[c]))
                    .collect::<CompensatedSum>()
                    .value()
                    / (count - 1.0)
            });
            let predicted = DMatrix::from_fn(n, n, |r, c| entry_mean(&|s| s.1[(r, c)]));
            let relative_error = (&sample - &predicted).norm() / predicted.norm();
            CovarianceCheck {
                stage,
                sample,
                predicted,
                relative_error,
            }
        })
        .collect();
    Ok(checks)
}
