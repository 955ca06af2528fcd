use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::policy::{Controller, Scheduler};

use super::rollout::{rollout_metrics, SimulationContext, TraceMetrics};

/// A named scheduler/controller pair.
#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub name: String,
    pub scheduler: Scheduler,
    pub controller: Controller,
}

impl PolicySpec {
    pub fn new(name: impl Into<String>, scheduler: Scheduler, controller: Controller) -> Self {
        Self {
            name: name.into(),
            scheduler,
            controller,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let se = if n > 1 {
            let ss: CompensatedSum = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            (ss.value() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se }
    }

    /// `mean / se`; infinite when the samples are identical but nonzero, zero when all vanish.
    pub fn t_statistic(&self) -> f64 {
        if self.se > 0.0 {
            self.mean / self.se
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicySummary {
    pub name: String,
    pub rate: Estimate,
    pub regulation: Estimate,
    pub loss: Estimate,
    pub equivalent_loss: Estimate,
    pub transmissions: Estimate,
}

/// Per-seed differences `first − second`.
#[derive(Debug, Clone, Serialize)]
pub struct PairedDifference {
    pub first: String,
    pub second: String,
    pub rate: Estimate,
    pub regulation: Estimate,
    pub loss: Estimate,
    pub equivalent_loss: Estimate,
    pub loss_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicySummary>,
    pub paired: Vec<PairedDifference>,
    /// `samples[i][s]` are the metrics of policy `i` on seed `s`.
    #[serde(skip)]
    pub samples: Vec<Vec<TraceMetrics>>,
}

impl MonteCarloSummary {
    pub fn policy(&self, name: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.name == name)
    }

    pub fn paired(&self, first: &str, second: &str) -> Option<&PairedDifference> {
        self.paired.iter().find(|p| p.first == first && p.second == second)
    }
}

/// Seeds `base, base+1, …`.
pub fn seed_sequence(base_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base_seed.wrapping_add(i)).collect()
}

/// Evaluates every policy on the same noise paths and reports per-policy
/// means and all pairwise differences. Results do not depend on the number of
/// worker threads.
pub fn monte_carlo(ctx: &SimulationContext, policies: &[PolicySpec], n_seeds: usize, base_seed: u64) -> Result<MonteCarloSummary> {
    if n_seeds < 2 {
        return Err(Error::Config(format!("need at least 2 seeds, got {n_seeds}")));
    }
    if policies.is_empty() {
        return Err(Error::Config("no policies to evaluate".into()));
    }
    let seeds = seed_sequence(base_seed, n_seeds);
    let per_seed: Vec<Vec<TraceMetrics>> = seeds
        .par_iter()
        .map(|&seed| {
            let noise = ctx.noise_path(seed);
            policies
                .iter()
                .map(|p| rollout_metrics(ctx, &p.scheduler, &p.controller, &noise))
                .collect()
        })
        .collect();
    let samples: Vec<Vec<TraceMetrics>> = (0..policies.len())
        .map(|i| per_seed.iter().map(|row| row[i]).collect())
        .collect();

    let column = |i: usize, f: fn(&TraceMetrics) -> f64| samples[i].iter().map(f).collect::<Vec<_>>();
    let summaries = policies
        .iter()
        .enumerate()
        .map(|(i, p)| PolicySummary {
            name: p.name.clone(),
            rate: Estimate::from_samples(&column(i, |m| m.rate)),
            regulation: Estimate::from_samples(&column(i, |m| m.regulation)),
            loss: Estimate::from_samples(&column(i, |m| m.loss)),
            equivalent_loss: Estimate::from_samples(&column(i, |m| m.equivalent_loss)),
            transmissions: Estimate::from_samples(&column(i, |m| m.transmissions as f64)),
        })
        .collect();

    let diff = |i: usize, j: usize, f: fn(&TraceMetrics) -> f64| {
        let d: Vec<f64> = samples[i].iter().zip(&samples[j]).map(|(a, b)| f(a) - f(b)).collect();
        Estimate::from_samples(&d)
    };
    let mut paired = Vec::new();
    for i in 0..policies.len() {
        for j in 0..policies.len() {
            if i == j {
                continue;
            }
            let loss = diff(i, j, |m| m.loss);
            paired.push(PairedDifference {
                first: policies[i].name.clone(),
                second: policies[j].name.clone(),
                rate: diff(i, j, |m| m.rate),
                regulation: diff(i, j, |m| m.regulation),
                loss,
                equivalent_loss: diff(i, j, |m| m.equivalent_loss),
                loss_t: loss.t_statistic(),
            });
        }
    }

    Ok(MonteCarloSummary {
        horizon: ctx.horizon(),
        seeds,
        policies: summaries,
        paired,
        samples,
    })
}
