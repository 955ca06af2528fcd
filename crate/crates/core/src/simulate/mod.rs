//! Closed-loop simulation, Monte Carlo evaluation under common random
//! numbers, and small-scale diagnostics.

mod diagnostics;
mod monte_carlo;
mod rollout;
mod search;

pub use diagnostics::{decoder_error_covariance, dual_effect_probe, CovarianceCheck, DualEffectReport};
pub use monte_carlo::{
    monte_carlo, seed_sequence, Estimate, MonteCarloSummary, PairedDifference, PolicySpec, PolicySummary,
};
pub use rollout::{
    rollout, rollout_metrics, rollout_with_noise, NoiseFactors, NoisePath, SimulationContext, SimulationTrace,
    StageRecord, TraceMetrics,
};
pub use search::{
    brute_force_threshold_search, pattern_loss, symmetric_threshold_grid, LandscapeEntry, SearchReport,
    SearchSettings, ThresholdCandidate, MAX_SEARCH_HORIZON,
};
