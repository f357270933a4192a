//! Maximum likelihood calibration of exponential-kernel Hawkes models.

mod lbfgs;
mod likelihood;
mod scalar;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use lbfgs::{minimize, LbfgsOptions, LbfgsOutcome, StopReason, TraceEntry};
pub use likelihood::{log_likelihood, log_likelihood_direct, LikelihoodData, FD_LOG_STEP};
pub use scalar::{Dual, Scalar};

use crate::error::{Error, Result};
use crate::hawkes::{EventStream, HawkesParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Forward-mode dual numbers, one pass per likelihood row.
    #[default]
    Automatic,
    /// Central differences on the log-parameters.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub optimizer: LbfgsOptions,
    pub gradient: GradientMode,
    /// With `false` only the baselines move; excitation and decay stay at the start values.
    pub fit_excitation: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: LbfgsOptions::default(),
            gradient: GradientMode::Automatic,
            fit_excitation: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub theta_hat: HawkesParams,
    pub loglik: f64,
    pub start: HawkesParams,
    pub loglik_start: f64,
    pub horizon: f64,
    pub events: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Largest gradient component in log-parameters at `theta_hat`.
    pub gradient_norm: f64,
    pub gradient_mode: GradientMode,
    pub elapsed_s: f64,
    pub trace: Vec<TraceEntry>,
}

impl CalibrationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Maximise the log-likelihood over positive parameters by L-BFGS on their
/// logarithms. Entries that start at zero stay at zero.
pub fn mle_fit(stream: &EventStream, horizon: f64, start: &HawkesParams, options: &FitOptions) -> Result<CalibrationResult> {
    start.validate()?;
    let began = Instant::now();
    let dim = start.dimension;
    let data = LikelihoodData::new(stream, horizon, dim)?;
    let theta0 = start.flatten();
    let free: Vec<usize> = (0..theta0.len())
        .filter(|&i| theta0[i] > 0.0 && (options.fit_excitation || i < dim))
        .collect();
    let eta0: Vec<f64> = free.iter().map(|&i| theta0[i].ln()).collect();
    // exp(ln x) need not round-trip; untouched coordinates keep the start value.
    let assemble = |eta: &[f64]| {
        let mut theta = theta0.clone();
        for ((&i, e), e0) in free.iter().zip(eta).zip(&eta0) {
            if e != e0 {
                theta[i] = e.exp();
            }
        }
        theta
    };
    let objective = |eta: &[f64]| -> (f64, Vec<f64>) {
        let theta = assemble(eta);
        let evaluated = HawkesParams::from_flat(dim, &theta).and_then(|p| match options.gradient {
            GradientMode::Automatic => data.gradient(&p),
            GradientMode::FiniteDifference => {
                let g = data.gradient_fd(&p, FD_LOG_STEP)?;
                Ok((data.log_likelihood(&p)?, g))
            }
        });
        match evaluated {
            Ok((ll, g)) if ll.is_finite() => (-ll, free.iter().map(|&i| -g[i] * theta[i]).collect()),
            _ => (f64::INFINITY, vec![f64::NAN; free.len()]),
        }
    };
    let loglik_start = data.log_likelihood(start)?;
    let outcome = minimize(objective, &eta0, &options.optimizer)?;
    let theta_hat = HawkesParams::from_flat(dim, &assemble(&outcome.x))?;
    Ok(CalibrationResult {
        theta_hat,
        loglik: -outcome.f,
        start: start.clone(),
        loglik_start,
        horizon,
        events: stream.len(),
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        converged: outcome.converged,
        stop_reason: outcome.reason,
        gradient_norm: outcome.grad.iter().fold(0.0, |m, v| m.max(v.abs())),
        gradient_mode: options.gradient,
        elapsed_s: began.elapsed().as_secs_f64(),
        trace: outcome.trace,
    })
}

/// Start point from event counts alone: half of each type's empirical rate
/// is baseline, and a rank-one branching matrix with spectral radius 1/2
/// and unit decays supplies the rest, so the implied stationary rates match
/// the observed ones.
pub fn heuristic_start(stream: &EventStream, horizon: f64, dimension: usize) -> Result<HawkesParams> {
    if dimension == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidParams("dimension and horizon must be positive".into()));
    }
    let counts: Vec<f64> = stream.counts(dimension).iter().map(|&c| c.max(1) as f64).collect();
    let total: f64 = counts.iter().sum();
    let mu = counts.iter().map(|c| 0.5 * c / horizon).collect();
    let alpha = counts.iter().map(|c| vec![0.5 * c / total; dimension]).collect();
    let beta = vec![vec![1.0; dimension]; dimension];
    HawkesParams::new(mu, alpha, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub mae: f64,
    pub rmse: f64,
}

/// Mean absolute and root-mean-square error over the flattened parameters.
pub fn deviation_measures(theta_hat: &HawkesParams, theta_true: &HawkesParams) -> Result<Deviation> {
    if theta_hat.dimension != theta_true.dimension {
        return Err(Error::DimensionMismatch {
            expected: theta_true.dimension,
            found: theta_hat.dimension,
        });
    }
    let a = theta_hat.flatten();
    let b = theta_true.flatten();
    let n = a.len() as f64;
    let (abs, sq) = a
        .iter()
        .zip(&b)
        .fold((0.0, 0.0), |(s1, s2), (x, y)| (s1 + (x - y).abs(), s2 + (x - y).powi(2)));
    Ok(Deviation {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    })
}
