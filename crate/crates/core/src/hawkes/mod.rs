//! Multivariate Hawkes processes with exponential kernels.

mod params;
mod stream;

pub use params::{half_life, spectral_radius, HawkesParams};
pub use stream::{Event, EventStream};

use crate::error::{Error, Result};
use crate::rng::{open_unit, substream, Substream};

/// Event times are stored on a microsecond grid so that the 6-decimal CSV
/// form is exact.
pub const TIME_RESOLUTION: f64 = 1e-6;

/// Conditional intensity of type `m` at time `t`; only events strictly
/// before `t` contribute.
pub fn intensity_at(params: &HawkesParams, history: &EventStream, m: usize, t: f64) -> Result<f64> {
    if m >= params.dimension {
        return Err(Error::Domain(format!(
            "type index {m} out of range for dimension {}",
            params.dimension
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let excitation: f64 = history
        .events
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| params.alpha[m][e.mark] * (-params.beta[m][e.mark] * (t - e.time)).exp())
        .sum();
    Ok(params.mu[m] + excitation)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationOptions {
    /// Simulate even when the branching matrix has spectral radius >= 1.
    pub allow_nonstationary: bool,
}

/// Ogata thinning on `(0, horizon]`.
///
/// Between events every exponential kernel decays, so the total intensity
/// just after the latest point bounds the intensity until the next one.
pub fn simulate_thinning(
    params: &HawkesParams,
    horizon: f64,
    seed: u64,
    options: SimulationOptions,
) -> Result<EventStream> {
    params.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let radius = params.spectral_radius();
    if radius >= 1.0 && !options.allow_nonstationary {
        return Err(Error::NonStationary { radius });
    }

    let m = params.dimension;
    let alpha: Vec<f64> = params.alpha.iter().flatten().copied().collect();
    let beta: Vec<f64> = params.beta.iter().flatten().copied().collect();
    // excitation[i * m + j]: current contribution of type-j history to type i.
    let mut excitation = vec![0.0; m * m];
    let mut lambda = params.mu.clone();
    let mut rng = substream(seed, Substream::Arrivals);

    let mut t = 0.0;
    let mut events = Vec::new();
    let mut last_tick: i64 = 0;
    loop {
        let bound: f64 = lambda.iter().sum();
        if bound <= 0.0 {
            break;
        }
        let tau = -open_unit(&mut rng).ln() / bound;
        t += tau;
        if t > horizon {
            break;
        }
        for (e, b) in excitation.iter_mut().zip(&beta) {
            *e *= (-b * tau).exp();
        }
        for (i, l) in lambda.iter_mut().enumerate() {
            *l = params.mu[i] + excitation[i * m..(i + 1) * m].iter().sum::<f64>();
        }
        let u = open_unit(&mut rng) * bound;
        let mut cumulative = 0.0;
        let accepted = lambda.iter().position(|l| {
            cumulative += l;
            u <= cumulative
        });
        let Some(mark) = accepted else {
            continue;
        };
        for i in 0..m {
            excitation[i * m + mark] += alpha[i * m + mark];
            lambda[i] += alpha[i * m + mark];
        }
        let tick = ((t / TIME_RESOLUTION).round() as i64).max(last_tick + 1);
        let time = tick as f64 / 1e6;
        if time > horizon {
            break;
        }
        last_tick = tick;
        events.push(Event {
            time,
            mark,
            volume: None,
        });
    }
    Ok(EventStream::new(horizon, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn univariate(mu: f64, alpha: f64, beta: f64) -> HawkesParams {
        HawkesParams::new(vec![mu], vec![vec![alpha]], vec![vec![beta]]).unwrap()
    }

    #[test]
    fn intensity_without_history_is_baseline() {
        let p = HawkesParams::baseline_order_flow();
        let empty = EventStream::new(100.0, vec![]);
        assert_eq!(intensity_at(&p, &empty, 2, 42.0).unwrap(), 0.02);
        assert!(intensity_at(&p, &empty, 10, 1.0).is_err());
    }

    #[test]
    fn intensity_after_one_event() {
        let p = univariate(0.01, 0.01, 0.2);
        let h = EventStream::new(10.0, vec![Event { time: 0.0, mark: 0, volume: None }]);
        assert_relative_eq!(
            intensity_at(&p, &h, 0, 5.0).unwrap(),
            0.013678794411714424,
            max_relative = 1e-12
        );
    }

    #[test]
    fn intensity_is_right_continuous_with_jump_alpha() {
        let p = HawkesParams::new(
            vec![0.1, 0.2],
            vec![vec![0.3, 0.4], vec![0.5, 0.6]],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let h = EventStream::new(
            10.0,
            vec![
                Event { time: 1.0, mark: 0, volume: None },
                Event { time: 2.0, mark: 1, volume: None },
            ],
        );
        let at = intensity_at(&p, &h, 0, 2.0).unwrap();
        let after = intensity_at(&p, &h, 0, 2.0 + 1e-9).unwrap();
        assert_relative_eq!(after - at, 0.4, epsilon = 1e-8);
        assert!(at >= p.mu[0]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = HawkesParams::baseline_order_flow();
        let a = simulate_thinning(&p, 3600.0, 11, SimulationOptions::default()).unwrap();
        let b = simulate_thinning(&p, 3600.0, 11, SimulationOptions::default()).unwrap();
        let c = simulate_thinning(&p, 3600.0, 12, SimulationOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate(10).unwrap();
    }

    #[test]
    fn nonstationary_rejected_unless_overridden() {
        let p = univariate(0.1, 0.5, 0.4);
        assert!(matches!(
            simulate_thinning(&p, 10.0, 1, SimulationOptions::default()),
            Err(Error::NonStationary { .. })
        ));
        let opts = SimulationOptions { allow_nonstationary: true };
        assert!(simulate_thinning(&p, 10.0, 1, opts).is_ok());
    }

    #[test]
    fn poisson_limit_count() {
        // alpha = 0: counts are Poisson(mu T) with mean 288.
        let p = univariate(0.01, 0.0, 0.2);
        let runs = 40;
        let total: usize = (0..runs)
            .map(|s| simulate_thinning(&p, 28800.0, s, SimulationOptions::default()).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        // sd of the mean = sqrt(288 / 40) ~ 2.7
        assert!((mean - 288.0).abs() < 12.0, "mean {mean}");
    }

    #[test]
    fn doubling_baseline_doubles_count() {
        let runs = 20;
        let count = |mu: f64| -> f64 {
            let p = univariate(mu, 0.0, 1.0);
            (0..runs)
                .map(|s| simulate_thinning(&p, 5000.0, 100 + s, SimulationOptions::default()).unwrap().len())
                .sum::<usize>() as f64
        };
        let ratio = count(0.2) / count(0.1);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }
}
