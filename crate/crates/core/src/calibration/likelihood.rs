use rayon::prelude::*;

use super::scalar::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::hawkes::{EventStream, HawkesParams};

/// A stream checked against a dimension and horizon, ready for repeated
/// likelihood evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodData {
    dimension: usize,
    horizon: f64,
    times: Vec<f64>,
    marks: Vec<usize>,
    counts: Vec<usize>,
}

impl LikelihoodData {
    pub fn new(stream: &EventStream, horizon: f64, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        let checked = EventStream::new(horizon, stream.events.clone());
        checked.validate(dimension)?;
        Ok(Self {
            dimension,
            horizon,
            times: stream.times().collect(),
            marks: stream.events.iter().map(|e| e.mark).collect(),
            counts: stream.counts(dimension),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    fn check(&self, params: &HawkesParams) -> Result<()> {
        if params.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: params.dimension,
            });
        }
        params.validate()
    }

    /// Row `m` of the log-likelihood. `alpha` and `beta` are the row's
    /// entries. Each source type keeps one decayed sum, brought up to date
    /// only when it is read or incremented.
    fn row<S: Scalar>(&self, m: usize, mu: S, alpha: &[S], beta: &[S]) -> Result<S> {
        let dim = self.dimension;
        let mut state = vec![S::constant(0.0); dim];
        let mut last = vec![f64::NAN; dim];
        let mut log_sum = S::constant(0.0);
        for (i, (&t, &z)) in self.times.iter().zip(&self.marks).enumerate() {
            if z == m {
                let mut lambda = mu;
                for n in 0..dim {
                    if last[n].is_nan() {
                        continue;
                    }
                    lambda += alpha[n] * state[n] * beta[n].scale(-(t - last[n])).exp();
                }
                let v = lambda.value();
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonFinite {
                        event_index: i,
                        event_type: m + 1,
                        intensity: v,
                    });
                }
                log_sum += lambda.ln();
            }
            state[z] = if last[z].is_nan() {
                S::constant(1.0)
            } else {
                state[z] * beta[z].scale(-(t - last[z])).exp() + S::constant(1.0)
            };
            last[z] = t;
        }
        let t_end = self.horizon;
        let mut compensator = mu.scale(t_end);
        for n in 0..dim {
            if last[n].is_nan() {
                continue;
            }
            let remaining = state[n] * beta[n].scale(-(t_end - last[n])).exp();
            compensator += alpha[n] / beta[n] * (S::constant(self.counts[n] as f64) - remaining);
        }
        let out = S::constant(t_end) - compensator + log_sum;
        if !out.value().is_finite() {
            return Err(Error::NonFinite {
                event_index: self.times.len(),
                event_type: m + 1,
                intensity: out.value(),
            });
        }
        Ok(out)
    }

    /// Per-type log-likelihood terms.
    pub fn rows(&self, params: &HawkesParams) -> Result<Vec<f64>> {
        self.check(params)?;
        (0..self.dimension)
            .into_par_iter()
            .map(|m| self.row(m, params.mu[m], &params.alpha[m], &params.beta[m]))
            .collect()
    }

    /// Log-likelihood; rows are summed in type order so the result does not
    /// depend on scheduling.
    pub fn log_likelihood(&self, params: &HawkesParams) -> Result<f64> {
        Ok(self.rows(params)?.iter().sum())
    }

    /// Value and gradient of row `m` with respect to its own parameters, in
    /// the order `(mu[m], alpha[m][0..M], beta[m][0..M])`.
    pub fn row_gradient(&self, params: &HawkesParams, m: usize) -> Result<(f64, Vec<f64>)> {
        macro_rules! dispatch {
            ($($dim:literal => $n:literal),*) => {
                match self.dimension {
                    $($dim => self.row_gradient_dual::<$n>(params, m),)*
                    _ => self.row_gradient_fd(params, m),
                }
            };
        }
        dispatch!(
            1 => 3, 2 => 5, 3 => 7, 4 => 9, 5 => 11, 6 => 13, 7 => 15, 8 => 17,
            9 => 19, 10 => 21, 11 => 23, 12 => 25, 13 => 27, 14 => 29, 15 => 31, 16 => 33
        )
    }

    fn row_gradient_dual<const N: usize>(&self, params: &HawkesParams, m: usize) -> Result<(f64, Vec<f64>)> {
        let dim = self.dimension;
        debug_assert_eq!(N, 2 * dim + 1);
        let mu = Dual::<N>::variable(params.mu[m], 0);
        let alpha: Vec<Dual<N>> = (0..dim).map(|n| Dual::variable(params.alpha[m][n], 1 + n)).collect();
        let beta: Vec<Dual<N>> = (0..dim)
            .map(|n| Dual::variable(params.beta[m][n], 1 + dim + n))
            .collect();
        let out = self.row(m, mu, &alpha, &beta)?;
        Ok((out.v, out.d.to_vec()))
    }

    /// Central differences in log-parameters, used above the sizes compiled
    /// for dual numbers.
    fn row_gradient_fd(&self, params: &HawkesParams, m: usize) -> Result<(f64, Vec<f64>)> {
        let mut local: Vec<f64> = std::iter::once(params.mu[m])
            .chain(params.alpha[m].iter().copied())
            .chain(params.beta[m].iter().copied())
            .collect();
        let dim = self.dimension;
        let eval = |v: &[f64]| self.row(m, v[0], &v[1..=dim], &v[1 + dim..]);
        let value = eval(&local)?;
        let mut grad = vec![0.0; local.len()];
        for j in 0..local.len() {
            grad[j] = central_log_difference(&mut local, j, FD_LOG_STEP, &eval)?;
        }
        Ok((value, grad))
    }

    /// Log-likelihood and its gradient in the flattened `(mu, alpha, beta)` layout.
    pub fn gradient(&self, params: &HawkesParams) -> Result<(f64, Vec<f64>)> {
        self.check(params)?;
        let dim = self.dimension;
        let rows: Vec<(f64, Vec<f64>)> = (0..dim)
            .into_par_iter()
            .map(|m| self.row_gradient(params, m))
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; params.len()];
        let mut value = 0.0;
        for (m, (v, g)) in rows.into_iter().enumerate() {
            value += v;
            grad[m] = g[0];
            for n in 0..dim {
                grad[HawkesParams::alpha_index(dim, m, n)] = g[1 + n];
                grad[HawkesParams::beta_index(dim, m, n)] = g[1 + dim + n];
            }
        }
        Ok((value, grad))
    }

    /// Gradient by central differences of the full log-likelihood with step
    /// `step` on each log-parameter, reported with respect to the parameters
    /// themselves. Entries at zero are left at zero.
    pub fn gradient_fd(&self, params: &HawkesParams, step: f64) -> Result<Vec<f64>> {
        self.check(params)?;
        let dim = self.dimension;
        let mut flat = params.flatten();
        let eval = |v: &[f64]| self.log_likelihood(&HawkesParams::from_flat(dim, v)?);
        (0..flat.len())
            .map(|j| central_log_difference(&mut flat, j, step, &eval))
            .collect()
    }
}

/// Step on log-parameters for finite-difference gradients.
pub const FD_LOG_STEP: f64 = 1e-5;

fn central_log_difference<F>(v: &mut [f64], j: usize, step: f64, eval: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let x = v[j];
    if x == 0.0 {
        return Ok(0.0);
    }
    v[j] = x * step.exp();
    let up = eval(v);
    v[j] = x * (-step).exp();
    let down = eval(v);
    v[j] = x;
    Ok((up? - down?) / (2.0 * step) / x)
}

/// Log-likelihood of `stream` on `(0, horizon]`.
pub fn log_likelihood(params: &HawkesParams, stream: &EventStream, horizon: f64) -> Result<f64> {
    LikelihoodData::new(stream, horizon, params.dimension)?.log_likelihood(params)
}

/// The same quantity by the direct double sum over all earlier events,
/// quadratic in the number of events.
pub fn log_likelihood_direct(params: &HawkesParams, stream: &EventStream, horizon: f64) -> Result<f64> {
    params.validate()?;
    EventStream::new(horizon, stream.events.clone()).validate(params.dimension)?;
    let mut total = 0.0;
    for m in 0..params.dimension {
        let mut log_sum = 0.0;
        let mut compensator = params.mu[m] * horizon;
        for (i, ei) in stream.events.iter().enumerate() {
            let (a, b) = (params.alpha[m][ei.mark], params.beta[m][ei.mark]);
            compensator += a / b * (1.0 - (-b * (horizon - ei.time)).exp());
            if ei.mark != m {
                continue;
            }
            let lambda = params.mu[m]
                + stream.events[..i]
                    .iter()
                    .map(|ej| params.alpha[m][ej.mark] * (-params.beta[m][ej.mark] * (ei.time - ej.time)).exp())
                    .sum::<f64>();
            if !(lambda > 0.0) {
                return Err(Error::NonFinite {
                    event_index: i,
                    event_type: m + 1,
                    intensity: lambda,
                });
            }
            log_sum += lambda.ln();
        }
        total += horizon - compensator + log_sum;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::Event;
    use approx::assert_relative_eq;

    fn poisson(mu: f64) -> HawkesParams {
        HawkesParams::new(vec![mu], vec![vec![0.0]], vec![vec![1.0]]).unwrap()
    }

    fn stream(horizon: f64, evs: &[(f64, usize)]) -> EventStream {
        EventStream::new(
            horizon,
            evs.iter().map(|&(time, mark)| Event { time, mark, volume: None }).collect(),
        )
    }

    #[test]
    fn poisson_reduction() {
        let s = stream(10.0, &[(1.0, 0), (4.0, 0), (7.5, 0)]);
        let ll = log_likelihood(&poisson(0.5), &s, 10.0).unwrap();
        assert_relative_eq!(ll, 2.9205584583201643, max_relative = 1e-14);
    }

    #[test]
    fn empty_stream_is_compensator_only() {
        let p = HawkesParams::baseline_order_flow();
        let s = stream(100.0, &[]);
        let ll = log_likelihood(&p, &s, 100.0).unwrap();
        let expected: f64 = p.mu.iter().map(|mu| 100.0 - mu * 100.0).sum();
        assert_relative_eq!(ll, expected, max_relative = 1e-14);
    }

    #[test]
    fn recursion_matches_direct_sum() {
        let p = HawkesParams::new(
            vec![0.3, 0.2, 0.5],
            vec![vec![0.4, 0.1, 0.2], vec![0.05, 0.3, 0.1], vec![0.2, 0.2, 0.1]],
            vec![vec![1.0, 2.0, 0.7], vec![1.5, 0.9, 3.0], vec![0.8, 1.1, 2.2]],
        )
        .unwrap();
        let evs: Vec<(f64, usize)> = (0..50).map(|i| (0.37 * (i + 1) as f64 + 0.01 * (i % 7) as f64, (i * 7) % 3)).collect();
        let s = stream(20.0, &evs);
        let fast = log_likelihood(&p, &s, 20.0).unwrap();
        let slow = log_likelihood_direct(&p, &s, 20.0).unwrap();
        assert_relative_eq!(fast, slow, max_relative = 1e-12);
    }

    #[test]
    fn dual_gradient_matches_differences() {
        let p = HawkesParams::new(
            vec![0.3, 0.2],
            vec![vec![0.4, 0.1], vec![0.05, 0.3]],
            vec![vec![1.0, 2.0], vec![1.5, 0.9]],
        )
        .unwrap();
        let s = stream(10.0, &[(0.5, 0), (1.1, 1), (1.3, 0), (4.0, 1), (4.2, 1), (8.0, 0)]);
        let data = LikelihoodData::new(&s, 10.0, 2).unwrap();
        let (v, g) = data.gradient(&p).unwrap();
        assert_relative_eq!(v, data.log_likelihood(&p).unwrap(), max_relative = 1e-14);
        let fd = data.gradient_fd(&p, FD_LOG_STEP).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-9);
        }
        let (_, row_fd) = data.row_gradient_fd(&p, 1).unwrap();
        let (_, row_ad) = data.row_gradient(&p, 1).unwrap();
        for (a, b) in row_ad.iter().zip(&row_fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_intensity_names_event() {
        let p = HawkesParams::new(vec![0.0, 1.0], vec![vec![0.0; 2]; 2], vec![vec![1.0; 2]; 2]).unwrap();
        let s = stream(5.0, &[(1.0, 1), (2.0, 0)]);
        match log_likelihood(&p, &s, 5.0) {
            Err(Error::NonFinite { event_index, event_type, .. }) => {
                assert_eq!((event_index, event_type), (1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn horizon_before_last_event_is_rejected() {
        let s = stream(5.0, &[(1.0, 0), (6.0, 0)]);
        assert!(log_likelihood(&poisson(1.0), &s, 5.0).is_err());
    }
}
