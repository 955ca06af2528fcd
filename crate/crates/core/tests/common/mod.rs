#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use voi_core::cli::ExperimentConfig;
use voi_core::model::{CostWeights, LinearGaussianModel, ModelDocument, Problem};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("shipped config parses")
}

pub fn document(name: &str) -> ModelDocument {
    load_config(name).document()
}

/// The shipped scalar model with its horizon replaced.
pub fn desk(horizon: usize) -> Problem {
    document("scalar-desk.json")
        .with_horizon(horizon)
        .unwrap()
        .to_problem()
        .unwrap()
}

pub fn pendulum() -> Problem {
    document("pendulum.json").to_problem().unwrap()
}

pub fn scalar(horizon: usize, a: f64, b: f64, q: f64, r: f64) -> Problem {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let model = LinearGaussianModel::stationary(horizon, m(a), m(b), m(1.0), m(1.0), m(1.0), DVector::zeros(1), m(1.0));
    let costs = CostWeights::stationary(horizon, m(q), m(q), m(r), 1.0, 1.0);
    Problem::new(model, costs).unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    &g * g.transpose() * 0.5 + DMatrix::identity(n, n) * floor
}

/// Random model with spectral radius 0.9, `n, p <= 3`, `m <= 2`.
pub fn random_stable_model(rng: &mut ChaCha8Rng, horizon: usize) -> Problem {
    let n = rng.random_range(1..=3);
    let p = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let raw = gaussian_matrix(rng, n, n);
    let radius = raw.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a = if radius > 0.0 { raw * (0.9 / radius) } else { raw };
    let b = gaussian_matrix(rng, n, m);
    let c = gaussian_matrix(rng, p, n);
    let w = spd(rng, n, 0.1);
    let v = spd(rng, p, 0.1);
    let m0 = gaussian_vector(rng, n);
    let big_m0 = spd(rng, n, 0.5);
    let model = LinearGaussianModel::stationary(horizon, a, b, c, w, v, m0, big_m0);
    let costs = CostWeights::stationary(
        horizon,
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
        DMatrix::identity(m, m),
        1.0,
        1.0,
    );
    Problem::new(model, costs).unwrap()
}

/// Covariance-form Kalman filter: `O(k)`, `K(k)` and the posterior means for
/// the given measurements and controls (Joseph-form update).
pub struct CovarianceFilter {
    pub cov: Vec<DMatrix<f64>>,
    pub gain: Vec<DMatrix<f64>>,
    pub mean: Vec<DVector<f64>>,
}

pub fn covariance_filter(problem: &Problem, ys: &[DVector<f64>], us: &[DVector<f64>]) -> CovarianceFilter {
    let model = problem.model();
    let n = problem.state_dim();
    let mut prior_cov = model.initial_cov.clone();
    let mut prior_mean = model.initial_mean.clone();
    let mut out = CovarianceFilter {
        cov: Vec::new(),
        gain: Vec::new(),
        mean: Vec::new(),
    };
    for (k, y) in ys.iter().enumerate() {
        let c = &model.output[k];
        let s = c * &prior_cov * c.transpose() + &model.measurement_noise[k];
        let gain = &prior_cov * c.transpose() * s.try_inverse().unwrap();
        let i_kc = DMatrix::identity(n, n) - &gain * c;
        let cov = &i_kc * &prior_cov * i_kc.transpose() + &gain * &model.measurement_noise[k] * gain.transpose();
        let mean = &prior_mean + &gain * (y - c * &prior_mean);
        let a = &model.transition[k];
        prior_cov = a * &cov * a.transpose() + &model.process_noise[k];
        prior_mean = a * &mean + &model.input[k] * &us[k];
        out.cov.push(cov);
        out.gain.push(gain);
        out.mean.push(mean);
    }
    out
}

/// Positive root of the scalar algebraic Riccati equation by bisection.
pub fn scalar_are_root(a: f64, b: f64, q: f64, r: f64) -> f64 {
    let f = |s: f64| q + a * a * s - (a * b * s).powi(2) / (b * b * s + r) - s;
    let (mut lo, mut hi) = (q, q.max(1.0));
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force scalar value-of-information recursion on a fine uniform grid,
/// with expectations over the mismatch innovation by dense trapezoid sums.
/// Returns `VoI_k` sampled on `nodes` for every stage.
pub struct DenseVoi {
    pub nodes: Vec<f64>,
    pub voi: Vec<Vec<f64>>,
}

pub fn dense_scalar_voi(
    transition: &[f64],
    penalty_next: &[f64],
    price: &[f64],
    innovation_var: &[f64],
    bound: f64,
    points: usize,
    noise_points: usize,
) -> DenseVoi {
    let horizon = transition.len() - 1;
    let h = 2.0 * bound / (points - 1) as f64;
    let nodes: Vec<f64> = (0..points).map(|i| -bound + i as f64 * h).collect();
    let interp = |values: &[f64], x: f64| -> f64 {
        let t = ((x + bound) / h).clamp(0.0, (points - 1) as f64);
        let i = (t.floor() as usize).min(points - 2);
        let f = t - i as f64;
        values[i] * (1.0 - f) + values[i + 1] * f
    };
    let mut next = vec![0.0; points];
    let mut voi = vec![Vec::new(); horizon + 1];
    for k in (0..=horizon).rev() {
        let expect: Box<dyn Fn(f64) -> f64> = if k < horizon {
            let sd = innovation_var[k + 1].sqrt();
            let step = 16.0 * sd / (noise_points - 1) as f64;
            let mut xs = Vec::with_capacity(noise_points);
            let mut ws = Vec::with_capacity(noise_points);
            for j in 0..noise_points {
                let x = -8.0 * sd + j as f64 * step;
                let end = if j == 0 || j == noise_points - 1 { 0.5 } else { 1.0 };
                xs.push(x);
                ws.push(end * (-0.5 * (x / sd).powi(2)).exp());
            }
            let total: f64 = ws.iter().sum();
            let next = next.clone();
            Box::new(move |shift: f64| xs.iter().zip(&ws).map(|(x, w)| w * interp(&next, shift + x)).sum::<f64>() / total)
        } else {
            Box::new(|_| 0.0)
        };
        let send = price[k] + expect(0.0);
        let mut value = vec![0.0; points];
        let mut stage_voi = vec![0.0; points];
        for (i, &e) in nodes.iter().enumerate() {
            let ae = transition[k] * e;
            let hold = penalty_next[k] * ae * ae + expect(ae);
            value[i] = hold.min(send);
            stage_voi[i] = hold - send;
        }
        voi[k] = stage_voi;
        next = value;
    }
    DenseVoi { nodes, voi }
}

pub fn short_pendulum(horizon: usize) -> Problem {
    document("pendulum.json")
        .with_horizon(horizon)
        .unwrap()
        .to_problem()
        .unwrap()
}
