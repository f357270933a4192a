use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::{EventStream, HawkesParams};

/// Compensator increments between consecutive events of one type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    /// 1-based event type.
    pub event_type: usize,
    pub residuals: Vec<f64>,
    /// Set when the type had fewer than two events.
    pub insufficient: bool,
}

/// Compensator of type `m` evaluated at each of its own events.
fn compensator_at_events(params: &HawkesParams, stream: &EventStream, m: usize) -> Vec<f64> {
    let dim = params.dimension;
    let mut state = vec![0.0; dim];
    let mut last = vec![0.0; dim];
    let mut count = vec![0usize; dim];
    let mut out = Vec::new();
    for e in &stream.events {
        let t = e.time;
        if e.mark == m {
            let mut value = params.mu[m] * t;
            for n in 0..dim {
                if count[n] > 0 {
                    let decayed = state[n] * (-params.beta[m][n] * (t - last[n])).exp();
                    value += params.alpha[m][n] / params.beta[m][n] * (count[n] as f64 - decayed);
                }
            }
            out.push(value);
        }
        let z = e.mark;
        state[z] = if count[z] == 0 {
            1.0
        } else {
            state[z] * (-params.beta[m][z] * (t - last[z])).exp() + 1.0
        };
        last[z] = t;
        count[z] += 1;
    }
    out
}

/// Residuals for every type; under the generating model each series is an
/// i.i.d. unit-exponential sample.
pub fn generalized_residuals(params: &HawkesParams, stream: &EventStream) -> Result<Vec<ResidualSeries>> {
    params.validate()?;
    stream.validate(params.dimension)?;
    Ok((0..params.dimension)
        .into_par_iter()
        .map(|m| {
            let comp = compensator_at_events(params, stream, m);
            let residuals: Vec<f64> = comp.windows(2).map(|w| w[1] - w[0]).collect();
            ResidualSeries {
                event_type: m + 1,
                insufficient: residuals.is_empty(),
                residuals,
            }
        })
        .collect())
}

/// Pairs of unit-exponential quantiles at `(i - 0.5) / n` and the sorted sample.
pub fn qq_data(residuals: &[f64]) -> Result<Vec<(f64, f64)>> {
    if residuals.is_empty() {
        return Err(Error::Test("Q-Q data needs at least one residual".into()));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (-(-(i as f64 + 0.5) / n).ln_1p(), x))
        .collect())
}
