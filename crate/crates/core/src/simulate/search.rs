use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{Controller, Region, Scheduler};

use super::monte_carlo::{seed_sequence, Estimate};
use super::rollout::{rollout_with_noise, SimulationContext};

/// Largest horizon the exhaustive pattern enumeration accepts.
pub const MAX_SEARCH_HORIZON: usize = 3;

#[derive(Debug, Clone)]
pub struct ThresholdCandidate {
    pub label: String,
    pub scheduler: Scheduler,
}

#[derive(Debug, Clone)]
pub struct SearchSettings {
    /// Seeds used to rank the candidates.
    pub selection_seeds: usize,
    /// Independent seeds used to compare the reference with the winner.
    pub evaluation_seeds: usize,
    pub base_seed: u64,
    /// Maximum number of candidate-seed evaluations.
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeEntry {
    pub label: String,
    pub loss: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub landscape: Vec<LandscapeEntry>,
    pub best: usize,
    /// Reference loss on the selection seeds.
    pub reference_loss: Estimate,
    /// Paired `Φ(reference) − Φ(best)` on the evaluation seeds.
    pub gap: Estimate,
}

impl SearchReport {
    pub fn best_entry(&self) -> &LandscapeEntry {
        &self.landscape[self.best]
    }
}

/// Per-stage symmetric thresholds: every combination of `levels` across the
/// `N+1` stages. An infinite level never transmits.
pub fn symmetric_threshold_grid(levels: &[f64], horizon: usize) -> Vec<ThresholdCandidate> {
    let stages = horizon + 1;
    let count = levels.len().pow(stages as u32);
    (0..count)
        .map(|mut index| {
            let mut chosen = Vec::with_capacity(stages);
            for _ in 0..stages {
                chosen.push(levels[index % levels.len()]);
                index /= levels.len();
            }
            let label = format!("symmetric{chosen:?}");
            let regions = chosen.into_iter().map(Region::symmetric).collect();
            ThresholdCandidate {
                label,
                scheduler: Scheduler::Threshold(regions),
            }
        })
        .collect()
}

/// Loss of every open-loop transmission pattern and the mismatch each
/// pattern prefix produces, for one noise path.
struct PatternTable {
    loss: Vec<f64>,
    mismatch: Vec<f64>,
}

enum ScalarRule<'a> {
    Intervals(Vec<(f64, f64)>),
    General(&'a Scheduler),
}

impl<'a> ScalarRule<'a> {
    fn compile(scheduler: &'a Scheduler, stages: usize) -> Self {
        if let Scheduler::Threshold(regions) = scheduler {
            let intervals: Option<Vec<_>> = (0..stages)
                .map(|k| match regions.get(if regions.len() == 1 { 0 } else { k }) {
                    Some(Region::Interval { lower, upper }) => Some((*lower, *upper)),
                    _ => None,
                })
                .collect();
            if let Some(intervals) = intervals {
                return ScalarRule::Intervals(intervals);
            }
        }
        ScalarRule::General(scheduler)
    }

    fn transmit(&self, k: usize, e: f64) -> bool {
        match self {
            ScalarRule::Intervals(bounds) => {
                let (lower, upper) = bounds[k];
                !(e >= lower && e <= upper)
            }
            ScalarRule::General(s) => s.schedule(k, &DVector::from_element(1, e)),
        }
    }
}

fn loss_of(rule: &ScalarRule, table: &PatternTable, stages: usize) -> f64 {
    let mut pattern = 0usize;
    for k in 0..stages {
        if rule.transmit(k, table.mismatch[pattern * stages + k]) {
            pattern |= 1 << k;
        }
    }
    table.loss[pattern]
}

fn pattern_tables(ctx: &SimulationContext, seeds: &[u64], controller: &Controller) -> Vec<PatternTable> {
    let stages = ctx.horizon() + 1;
    let patterns = 1usize << stages;
    seeds
        .par_iter()
        .map(|&seed| {
            let noise = ctx.noise_path(seed);
            let mut loss = Vec::with_capacity(patterns);
            let mut mismatch = Vec::with_capacity(patterns * stages);
            for p in 0..patterns {
                let fixed = Scheduler::Fixed((0..stages).map(|k| p >> k & 1 == 1).collect());
                let trace = rollout_with_noise(ctx, &fixed, controller, &noise, seed);
                loss.push(trace.metrics.loss);
                mismatch.extend(trace.stages.iter().map(|s| s.mismatch[0]));
            }
            PatternTable { loss, mismatch }
        })
        .collect()
}

/// Exhaustive evaluation of mismatch-threshold policies on a scalar model by
/// enumerating all `2^(N+1)` transmission patterns per noise path. The
/// controller is certainty-equivalent. The winner is picked on the selection
/// seeds and compared with `reference` on independent evaluation seeds.
pub fn brute_force_threshold_search(
    ctx: &SimulationContext,
    candidates: &[ThresholdCandidate],
    reference: &Scheduler,
    settings: &SearchSettings,
) -> Result<SearchReport> {
    if ctx.problem.state_dim() != 1 {
        return Err(Error::Config("threshold search needs a scalar state".into()));
    }
    if ctx.horizon() > MAX_SEARCH_HORIZON {
        return Err(Error::Config(format!(
            "threshold search needs horizon <= {MAX_SEARCH_HORIZON}, got {}",
            ctx.horizon()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Config("empty threshold grid".into()));
    }
    if settings.selection_seeds < 2 || settings.evaluation_seeds < 2 {
        return Err(Error::Config("threshold search needs at least 2 seeds per phase".into()));
    }
    if let Some(c) = candidates.iter().find(|c| !c.scheduler.is_mismatch_only()) {
        return Err(Error::Policy(format!("candidate {} is not mismatch-only", c.label)));
    }
    if !reference.is_mismatch_only() {
        return Err(Error::Policy("reference scheduler is not mismatch-only".into()));
    }
    let evaluations = (candidates.len() + 1) * settings.selection_seeds;
    if evaluations > settings.budget {
        return Err(Error::Budget {
            evaluations,
            budget: settings.budget,
        });
    }

    let stages = ctx.horizon() + 1;
    let controller = ctx.certainty_equivalent();
    let selection = seed_sequence(settings.base_seed, settings.selection_seeds);
    let tables = pattern_tables(ctx, &selection, &controller);

    let landscape: Vec<LandscapeEntry> = candidates
        .par_iter()
        .map(|c| {
            let rule = ScalarRule::compile(&c.scheduler, stages);
            let losses: Vec<f64> = tables.iter().map(|t| loss_of(&rule, t, stages)).collect();
            LandscapeEntry {
                label: c.label.clone(),
                loss: Estimate::from_samples(&losses),
            }
        })
        .collect();
    let best = landscape
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.loss.mean.total_cmp(&b.1.loss.mean))
        .map(|(i, _)| i)
        .expect("nonempty");

    let reference_rule = ScalarRule::compile(reference, stages);
    let reference_losses: Vec<f64> = tables.iter().map(|t| loss_of(&reference_rule, t, stages)).collect();
    drop(tables);

    let evaluation = seed_sequence(
        settings.base_seed.wrapping_add(settings.selection_seeds as u64),
        settings.evaluation_seeds,
    );
    let held_out = pattern_tables(ctx, &evaluation, &controller);
    let best_rule = ScalarRule::compile(&candidates[best].scheduler, stages);
    let gaps: Vec<f64> = held_out
        .iter()
        .map(|t| loss_of(&reference_rule, t, stages) - loss_of(&best_rule, t, stages))
        .collect();

    Ok(SearchReport {
        landscape,
        best,
        reference_loss: Estimate::from_samples(&reference_losses),
        gap: Estimate::from_samples(&gaps),
    })
}

/// Loss of a mismatch-only policy computed from the pattern enumeration, for
/// cross-checking against a direct rollout.
pub fn pattern_loss(ctx: &SimulationContext, scheduler: &Scheduler, seed: u64) -> f64 {
    let stages = ctx.horizon() + 1;
    let tables = pattern_tables(ctx, &[seed], &ctx.certainty_equivalent());
    loss_of(&ScalarRule::compile(scheduler, stages), &tables[0], stages)
}
