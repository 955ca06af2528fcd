use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::estimator::{decoder_update_equilibrium, DecoderState, EncoderState, KalmanSchedule};
use crate::linalg::{quad_form, sqrt_factor, CompensatedSum};
use crate::lqr::{riccati_backward, stage_cost_eta, RiccatiSolution};
use crate::model::{channel_step, ChannelSymbol, PayloadEncoding, Problem};
use crate::policy::{Controller, Scheduler};

/// Square-root factors of `M0`, `W(k)` and `V(k)`, fixed once per problem so
/// that every policy sees the same noise path for a given seed.
#[derive(Debug, Clone)]
pub struct NoiseFactors {
    initial: DMatrix<f64>,
    process: Vec<DMatrix<f64>>,
    measurement: Vec<DMatrix<f64>>,
}

impl NoiseFactors {
    pub fn new(problem: &Problem) -> Self {
        let model = problem.model();
        Self {
            initial: sqrt_factor(&model.initial_cov),
            process: model.process_noise.iter().map(sqrt_factor).collect(),
            measurement: model.measurement_noise.iter().map(sqrt_factor).collect(),
        }
    }
}

/// Primitive random variables of one rollout: `x(0)`, `w(0..=N)`, `v(0..=N)`.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub initial_state: DVector<f64>,
    pub process: Vec<DVector<f64>>,
    pub measurement: Vec<DVector<f64>>,
}

impl NoisePath {
    /// Draws standard normals in the fixed order `x(0)`, then `v(k)`, `w(k)` per stage.
    pub fn sample(problem: &Problem, factors: &NoiseFactors, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |len: usize| DVector::from_fn(len, |_, _| StandardNormal.sample(&mut rng));
        let n = problem.state_dim();
        let p = problem.output_dim();
        let initial_state = &problem.model().initial_mean + &factors.initial * normal(n);
        let mut process = Vec::with_capacity(problem.horizon() + 1);
        let mut measurement = Vec::with_capacity(problem.horizon() + 1);
        for k in 0..=problem.horizon() {
            measurement.push(&factors.measurement[k] * normal(p));
            process.push(&factors.process[k] * normal(n));
        }
        Self {
            initial_state,
            process,
            measurement,
        }
    }
}

/// One decision stage of a closed-loop rollout.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub state: DVector<f64>,
    pub measurement: DVector<f64>,
    pub control: DVector<f64>,
    pub transmit: bool,
    /// Channel output `z(k)` consumed by the decoder at this stage.
    pub received: ChannelSymbol,
    pub encoder_estimate: DVector<f64>,
    pub decoder_estimate: DVector<f64>,
    /// The encoder's replica of `x̂(k)`.
    pub replica_estimate: DVector<f64>,
    pub mismatch: DVector<f64>,
    pub voi: Option<f64>,
    pub encoder_cov: DMatrix<f64>,
    pub decoder_cov: DMatrix<f64>,
}

/// Empirical costs of one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceMetrics {
    /// `(N+1)⁻¹ Σ ℓ(k)σ(k)`.
    pub rate: f64,
    /// `(N+1)⁻¹ (Σ_{k=0}^{N+1} xᵀQx + Σ_{k=0}^{N} uᵀRu)`.
    pub regulation: f64,
    /// `λ·rate + regulation`.
    pub loss: f64,
    /// `Σ θ(k)σ(k) + η(k)`.
    pub equivalent_loss: f64,
    pub transmissions: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub terminal_state: DVector<f64>,
    /// `z(N+1)`, delivered after the last decision.
    pub terminal_received: ChannelSymbol,
    pub metrics: TraceMetrics,
}

/// Everything a rollout needs that depends only on the problem.
#[derive(Debug, Clone)]
pub struct SimulationContext {
    pub problem: Problem,
    pub riccati: RiccatiSolution,
    pub kalman: KalmanSchedule,
    pub noise: NoiseFactors,
    pub encoding: PayloadEncoding,
}

impl SimulationContext {
    pub fn new(problem: Problem) -> Result<Self> {
        let riccati = riccati_backward(&problem)?;
        let kalman = KalmanSchedule::new(&problem)?;
        let noise = NoiseFactors::new(&problem);
        Ok(Self {
            problem,
            riccati,
            kalman,
            noise,
            encoding: PayloadEncoding::Estimate,
        })
    }

    pub fn with_encoding(mut self, encoding: PayloadEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn horizon(&self) -> usize {
        self.problem.horizon()
    }

    pub fn noise_path(&self, seed: u64) -> NoisePath {
        NoisePath::sample(&self.problem, &self.noise, seed)
    }

    pub fn certainty_equivalent(&self) -> Controller {
        Controller::certainty_equivalent(&self.riccati)
    }
}

/// Closed-loop rollout for one seed.
pub fn rollout(ctx: &SimulationContext, scheduler: &Scheduler, controller: &Controller, seed: u64) -> SimulationTrace {
    let noise = ctx.noise_path(seed);
    rollout_with_noise(ctx, scheduler, controller, &noise, seed)
}

pub fn rollout_with_noise(
    ctx: &SimulationContext,
    scheduler: &Scheduler,
    controller: &Controller,
    noise: &NoisePath,
    seed: u64,
) -> SimulationTrace {
    let mut stages = Vec::with_capacity(ctx.horizon() + 1);
    let (terminal_state, terminal_received, metrics) = run(ctx, scheduler, controller, noise, Some(&mut stages));
    SimulationTrace {
        seed,
        stages,
        terminal_state,
        terminal_received,
        metrics,
    }
}

/// Metrics only, without recording the per-stage trace.
pub fn rollout_metrics(ctx: &SimulationContext, scheduler: &Scheduler, controller: &Controller, noise: &NoisePath) -> TraceMetrics {
    run(ctx, scheduler, controller, noise, None).2
}

/// Slot order at stage `k`: the decoder consumes `z(k)`, the control is
/// applied, the encoder filters `y(k)`, updates its decoder replica and
/// decides `σ(k)` (delivered as `z(k+1)`), then the plant moves.
fn run(
    ctx: &SimulationContext,
    scheduler: &Scheduler,
    controller: &Controller,
    noise: &NoisePath,
    mut record: Option<&mut Vec<StageRecord>>,
) -> (DVector<f64>, ChannelSymbol, TraceMetrics) {
    let problem = &ctx.problem;
    let model = problem.model();
    let costs = problem.costs();
    let horizon = problem.horizon();

    let mut state = noise.initial_state.clone();
    let mut decoder = DecoderState::initial(problem);
    let mut replica = decoder.clone();
    let mut encoder: Option<EncoderState> = None;
    let mut received = ChannelSymbol::Erasure;
    let mut previous_control: Option<DVector<f64>> = None;

    let mut rate = CompensatedSum::default();
    let mut regulation = CompensatedSum::default();
    let mut equivalent = CompensatedSum::default();
    let mut transmissions = 0usize;

    for k in 0..=horizon {
        if let Some(u_prev) = &previous_control {
            decoder = decoder_update_equilibrium(&decoder, u_prev, &received, ctx.encoding, k - 1, problem, &ctx.kalman);
        }
        let control = controller.control(k, &decoder.estimate);

        let measurement = &model.output[k] * &state + &noise.measurement[k];
        let enc = match (&encoder, &previous_control) {
            (Some(prev), Some(u_prev)) => {
                replica = decoder_update_equilibrium(&replica, u_prev, &received, ctx.encoding, k - 1, problem, &ctx.kalman);
                prev.advance(&measurement, u_prev, k, problem, &ctx.kalman)
            }
            _ => EncoderState::initial_scheduled(&measurement, problem, &ctx.kalman),
        };
        let mismatch = &enc.estimate - &replica.estimate;
        let transmit = scheduler.decide(k, &mismatch, Some(&enc.estimate));
        let payload = match ctx.encoding {
            PayloadEncoding::Estimate => &enc.estimate,
            PayloadEncoding::Mismatch => &mismatch,
        };
        let outgoing = channel_step(transmit, payload);

        if transmit {
            transmissions += 1;
            rate.add(costs.comm_weight[k]);
            equivalent.add(ctx.riccati.transmission_price[k]);
        }
        regulation.add(quad_form(&state, &costs.state_weight[k]));
        regulation.add(quad_form(&control, &costs.input_weight[k]));
        equivalent.add(stage_cost_eta(&state, &control, k, &ctx.riccati));

        let next_state = &model.transition[k] * &state + &model.input[k] * &control + &noise.process[k];

        if let Some(rec) = record.as_deref_mut() {
            let voi = scheduler.voi_value(k, &mismatch);
            rec.push(StageRecord {
                state: state.clone(),
                measurement,
                control: control.clone(),
                transmit,
                received: std::mem::replace(&mut received, outgoing.clone()),
                encoder_estimate: enc.estimate.clone(),
                decoder_estimate: decoder.estimate.clone(),
                replica_estimate: replica.estimate.clone(),
                mismatch,
                voi,
                encoder_cov: enc.cov.clone(),
                decoder_cov: decoder.cov.clone(),
            });
        } else {
            received = outgoing;
        }

        state = next_state;
        encoder = Some(enc);
        previous_control = Some(control);
    }
    regulation.add(quad_form(&state, &costs.state_weight[horizon + 1]));

    let stages = (horizon + 1) as f64;
    let rate = rate.value() / stages;
    let regulation = regulation.value() / stages;
    let metrics = TraceMetrics {
        rate,
        regulation,
        loss: costs.tradeoff * rate + regulation,
        equivalent_loss: equivalent.value(),
        transmissions,
    };
    (state, received, metrics)
}
