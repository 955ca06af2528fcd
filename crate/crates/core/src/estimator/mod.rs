//! Encoder-side Kalman filter, decoder-side estimator, and the encoder's
//! replica of the decoder.
//!
//! The encoder covariance `O(k)` does not depend on measurements, so it is
//! precomputed once per model in a [`KalmanSchedule`] and shared by every
//! rollout.

mod particle;

pub use particle::{particle_residuals, MismatchParticleCloud, ParticleResiduals};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize};
use crate::model::{ChannelSymbol, PayloadEncoding, Problem};

/// One information-form covariance step: `O(k)` from `O(k-1)`.
pub fn encoder_covariance_step(prev: &DMatrix<f64>, k: usize, problem: &Problem) -> Result<DMatrix<f64>> {
    let model = problem.model();
    let a = &model.transition[k - 1];
    let predicted = symmetrize(&(a * prev * a.transpose() + &model.process_noise[k - 1]));
    information_update(&predicted, k, problem)
}

fn information_update(prior: &DMatrix<f64>, k: usize, problem: &Problem) -> Result<DMatrix<f64>> {
    let model = problem.model();
    let c = &model.output[k];
    let v_inv = spd_inverse(&model.measurement_noise[k]).ok_or(Error::Factorization {
        what: "V",
        stage: k,
    })?;
    let prior_inv = spd_inverse(prior).ok_or(Error::Factorization {
        what: "prior covariance",
        stage: k,
    })?;
    let information = prior_inv + c.transpose() * &v_inv * c;
    spd_inverse(&information).ok_or(Error::Factorization {
        what: "information matrix",
        stage: k,
    })
}

fn kalman_gain(cov: &DMatrix<f64>, k: usize, problem: &Problem) -> Result<DMatrix<f64>> {
    let model = problem.model();
    let v_inv = spd_inverse(&model.measurement_noise[k]).ok_or(Error::Factorization {
        what: "V",
        stage: k,
    })?;
    Ok(cov * model.output[k].transpose() * v_inv)
}

/// Deterministic second-order quantities of the encoder filter for `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct KalmanSchedule {
    /// `O(k)`.
    pub cov: Vec<DMatrix<f64>>,
    /// `K(k) = O(k)C(k)ᵀV(k)⁻¹`.
    pub gain: Vec<DMatrix<f64>>,
    /// Covariance of the mismatch innovation `ξ(k)`: `K(k)Θ(k)K(k)ᵀ` with
    /// `Θ(k) = C(k)(A O Aᵀ + W)C(k)ᵀ + V(k)`. Entry 0 is the covariance of
    /// `ẽ(0) = x̌(0) - m(0)`.
    pub mismatch_innovation_cov: Vec<DMatrix<f64>>,
}

impl KalmanSchedule {
    pub fn new(problem: &Problem) -> Result<Self> {
        let model = problem.model();
        let horizon = problem.horizon();
        let mut cov = Vec::with_capacity(horizon + 1);
        let mut gain = Vec::with_capacity(horizon + 1);
        let mut xi = Vec::with_capacity(horizon + 1);

        let mut prior = model.initial_cov.clone();
        for k in 0..=horizon {
            if k > 0 {
                let a = &model.transition[k - 1];
                prior = symmetrize(&(a * &cov[k - 1] * a.transpose() + &model.process_noise[k - 1]));
            }
            let o = information_update(&prior, k, problem)?;
            let kg = kalman_gain(&o, k, problem)?;
            let c = &model.output[k];
            let theta = c * &prior * c.transpose() + &model.measurement_noise[k];
            xi.push(symmetrize(&(&kg * theta * kg.transpose())));
            cov.push(o);
            gain.push(kg);
        }
        Ok(Self {
            cov,
            gain,
            mismatch_innovation_cov: xi,
        })
    }
}

/// Encoder posterior `x̌(k) = E[x(k) | 𝓘(k)]` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub estimate: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
}

impl EncoderState {
    /// Stage-0 posterior from the first measurement.
    pub fn initial(y0: &DVector<f64>, problem: &Problem) -> Result<Self> {
        let model = problem.model();
        let cov = information_update(&model.initial_cov, 0, problem)?;
        let gain = kalman_gain(&cov, 0, problem)?;
        Ok(Self::correct(model.initial_mean.clone(), y0, cov, gain, 0, problem))
    }

    /// Stage-0 posterior reusing a precomputed schedule.
    pub fn initial_scheduled(y0: &DVector<f64>, problem: &Problem, schedule: &KalmanSchedule) -> Self {
        Self::correct(
            problem.model().initial_mean.clone(),
            y0,
            schedule.cov[0].clone(),
            schedule.gain[0].clone(),
            0,
            problem,
        )
    }

    /// Stage-`k` posterior from this stage-`k-1` posterior, reusing a
    /// precomputed schedule for the covariance and gain.
    pub fn advance(
        &self,
        y: &DVector<f64>,
        u_prev: &DVector<f64>,
        k: usize,
        problem: &Problem,
        schedule: &KalmanSchedule,
    ) -> Self {
        let prediction = self.predict(u_prev, k, problem);
        Self::correct(prediction, y, schedule.cov[k].clone(), schedule.gain[k].clone(), k, problem)
    }

    fn predict(&self, u_prev: &DVector<f64>, k: usize, problem: &Problem) -> DVector<f64> {
        let model = problem.model();
        &model.transition[k - 1] * &self.estimate + &model.input[k - 1] * u_prev
    }

    fn correct(
        prediction: DVector<f64>,
        y: &DVector<f64>,
        cov: DMatrix<f64>,
        gain: DMatrix<f64>,
        k: usize,
        problem: &Problem,
    ) -> Self {
        let innovation = y - &problem.model().output[k] * &prediction;
        let estimate = prediction + &gain * innovation;
        Self { estimate, cov, gain }
    }
}

/// Kalman update at the encoder: stage-`k` posterior from the stage-`k-1`
/// posterior, the new measurement `y(k)` and the previous control `u(k-1)`.
/// The covariance follows the information-form recursion.
pub fn encoder_update(
    state: &EncoderState,
    y: &DVector<f64>,
    u_prev: &DVector<f64>,
    k: usize,
    problem: &Problem,
) -> Result<EncoderState> {
    if k == 0 || k > problem.horizon() {
        return Err(Error::StageOutOfRange {
            stage: k,
            max: problem.horizon(),
        });
    }
    let cov = encoder_covariance_step(&state.cov, k, problem)?;
    let gain = kalman_gain(&cov, k, problem)?;
    let prediction = state.predict(u_prev, k, problem);
    Ok(EncoderState::correct(prediction, y, cov, gain, k, problem))
}

/// Decoder mean `x̂(k)` and covariance `E(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub estimate: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl DecoderState {
    pub fn initial(problem: &Problem) -> Self {
        let model = problem.model();
        Self {
            estimate: model.initial_mean.clone(),
            cov: model.initial_cov.clone(),
        }
    }
}

/// Decoder step at the equilibrium, where the absence of a packet carries no
/// usable information: `x̂(k+1) = A x̂ + B u + σ A ẽ` and
/// `E(k+1) = A E Aᵀ + W − σ A (E − O) Aᵀ`.
///
/// `k` is the stage the state refers to; `received` is `z(k+1)`.
pub fn decoder_update_equilibrium(
    state: &DecoderState,
    u_prev: &DVector<f64>,
    received: &ChannelSymbol,
    encoding: PayloadEncoding,
    k: usize,
    problem: &Problem,
    schedule: &KalmanSchedule,
) -> DecoderState {
    let model = problem.model();
    let a = &model.transition[k];
    let w = &model.process_noise[k];
    let mut estimate = a * &state.estimate + &model.input[k] * u_prev;
    let cov = match received {
        ChannelSymbol::Payload(payload) => {
            let mismatch = match encoding {
                PayloadEncoding::Estimate => payload - &state.estimate,
                PayloadEncoding::Mismatch => payload.clone(),
            };
            estimate += a * mismatch;
            a * &schedule.cov[k] * a.transpose() + w
        }
        ChannelSymbol::Erasure => a * &state.cov * a.transpose() + w,
    };
    DecoderState {
        estimate,
        cov: symmetrize(&cov),
    }
}

/// Rebuilds the decoder's state sequence from what the encoder has logged:
/// the channel symbols `z(1..)` it produced and the controls it observed.
/// Returns `x̂(0..=len)`.
pub fn encoder_replica_of_decoder(
    problem: &Problem,
    schedule: &KalmanSchedule,
    symbols: &[ChannelSymbol],
    controls: &[DVector<f64>],
    encoding: PayloadEncoding,
) -> Vec<DecoderState> {
    let mut states = Vec::with_capacity(symbols.len() + 1);
    states.push(DecoderState::initial(problem));
    for (k, (symbol, u)) in symbols.iter().zip(controls).enumerate() {
        let next = decoder_update_equilibrium(&states[k], u, symbol, encoding, k, problem, schedule);
        states.push(next);
    }
    states
}
