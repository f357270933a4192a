use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calibration::LikelihoodData;
use crate::error::{Error, Result};
use crate::hawkes::HawkesParams;

/// Relative step for differencing the gradient.
const HESSIAN_STEP: f64 = 1e-5;

/// Negative Hessian of the log-likelihood at `params`, by central
/// differences of the exact row gradients. Each likelihood row depends only
/// on its own parameters, so the matrix is block diagonal.
pub fn observed_fisher(params: &HawkesParams, data: &LikelihoodData) -> Result<DMatrix<f64>> {
    let dim = params.dimension;
    if data.dimension() != dim {
        return Err(Error::DimensionMismatch {
            expected: data.dimension(),
            found: dim,
        });
    }
    let mut info = DMatrix::zeros(params.len(), params.len());
    for m in 0..dim {
        let index: Vec<usize> = std::iter::once(m)
            .chain((0..dim).map(|n| HawkesParams::alpha_index(dim, m, n)))
            .chain((0..dim).map(|n| HawkesParams::beta_index(dim, m, n)))
            .collect();
        let k = index.len();
        let mut block = DMatrix::zeros(k, k);
        let mut flat = params.flatten();
        for (j, &fj) in index.iter().enumerate() {
            let x = flat[fj];
            let h = HESSIAN_STEP * x.abs().max(1e-3);
            // Forward difference where a central step would leave the domain.
            let (lo, hi) = if x - h > 0.0 {
                (x - h, x + h)
            } else {
                (x, x + h)
            };
            flat[fj] = hi;
            let (_, g_hi) = data.row_gradient(&HawkesParams::from_flat(dim, &flat)?, m)?;
            flat[fj] = lo;
            let (_, g_lo) = data.row_gradient(&HawkesParams::from_flat(dim, &flat)?, m)?;
            flat[fj] = x;
            for i in 0..k {
                block[(i, j)] = -(g_hi[i] - g_lo[i]) / (hi - lo);
            }
        }
        let block = (&block + block.transpose()) * 0.5;
        for i in 0..k {
            for j in 0..k {
                let v = block[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        event_index: 0,
                        event_type: m + 1,
                        intensity: v,
                    });
                }
                info[(index[i], index[j])] = v;
            }
        }
    }
    Ok(info)
}

/// z-value of a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub label: String,
    pub estimate: f64,
    /// Diagonal entry of the inverse information; may be negative.
    pub variance: Option<f64>,
    pub half_width: Option<f64>,
    pub negative_variance: bool,
}

/// Inverse of the information matrix, or `None` when it is singular.
pub fn covariance(info: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = info.clone().try_inverse()?;
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// `estimate +- 1.96 sqrt(var / T)` for each parameter. Negative variances
/// keep the estimate and drop the interval.
pub fn confidence_intervals(params: &HawkesParams, info: &DMatrix<f64>, horizon: f64) -> Result<Vec<ConfidenceInterval>> {
    let flat = params.flatten();
    if info.nrows() != flat.len() || info.ncols() != flat.len() {
        return Err(Error::DimensionMismatch {
            expected: flat.len(),
            found: info.nrows(),
        });
    }
    let cov = covariance(info);
    Ok(flat
        .iter()
        .enumerate()
        .map(|(i, &estimate)| {
            let variance = cov.as_ref().map(|c| c[(i, i)]);
            let negative = variance.is_some_and(|v| v < 0.0);
            ConfidenceInterval {
                label: HawkesParams::parameter_label(params.dimension, i),
                estimate,
                variance,
                half_width: variance.filter(|v| *v >= 0.0).map(|v| Z_95 * (v / horizon).sqrt()),
                negative_variance: negative,
            }
        })
        .collect())
}

/// Delta-method variance of `alpha / beta`.
pub fn branching_ratio_variance(alpha: f64, beta: f64, var_alpha: f64, var_beta: f64, cov: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::Domain("branching ratio undefined for zero decay".into()));
    }
    Ok(var_alpha / (beta * beta) + (alpha / (beta * beta)).powi(2) * var_beta - 2.0 * alpha / beta.powi(3) * cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingInterval {
    /// 1-based target and source types.
    pub target: usize,
    pub source: usize,
    pub gamma: f64,
    pub variance: Option<f64>,
    pub half_width: Option<f64>,
    pub flagged: bool,
}

/// Intervals for every branching ratio, with the parameter covariance taken
/// as the inverse information divided by `horizon`, as for the parameter
/// intervals.
pub fn branching_ratio_cis(params: &HawkesParams, info: &DMatrix<f64>, horizon: f64) -> Result<Vec<BranchingInterval>> {
    let dim = params.dimension;
    if info.nrows() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            found: info.nrows(),
        });
    }
    let cov = covariance(info);
    let mut out = Vec::with_capacity(dim * dim);
    for m in 0..dim {
        for n in 0..dim {
            let (a, b) = (params.alpha[m][n], params.beta[m][n]);
            let (ia, ib) = (HawkesParams::alpha_index(dim, m, n), HawkesParams::beta_index(dim, m, n));
            let variance = match &cov {
                Some(c) if c[(ia, ia)] >= 0.0 && c[(ib, ib)] >= 0.0 => Some(branching_ratio_variance(
                    a,
                    b,
                    c[(ia, ia)] / horizon,
                    c[(ib, ib)] / horizon,
                    c[(ia, ib)] / horizon,
                )?),
                _ => None,
            };
            let half_width = variance.filter(|v| *v >= 0.0).map(|v| Z_95 * v.sqrt());
            out.push(BranchingInterval {
                target: m + 1,
                source: n + 1,
                gamma: a / b,
                variance,
                flagged: half_width.is_none(),
                half_width,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::{Event, EventStream};
    use approx::assert_relative_eq;

    #[test]
    fn poisson_information() {
        let events: Vec<Event> = (1..=40)
            .map(|i| Event { time: i as f64 * 0.2, mark: 0, volume: None })
            .collect();
        let s = EventStream::new(10.0, events);
        let p = HawkesParams::new(vec![4.0], vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let data = LikelihoodData::new(&s, 10.0, 1).unwrap();
        let info = observed_fisher(&p, &data).unwrap();
        assert_relative_eq!(info[(0, 0)], 40.0 / 16.0, max_relative = 1e-6);
    }

    #[test]
    fn symmetric_information() {
        let events: Vec<Event> = (0..60)
            .map(|i| Event { time: 0.3 * (i + 1) as f64 + 0.01 * (i % 5) as f64, mark: (i * 5) % 2, volume: None })
            .collect();
        let s = EventStream::new(20.0, events);
        let p = HawkesParams::new(
            vec![0.5, 0.7],
            vec![vec![0.4, 0.2], vec![0.3, 0.5]],
            vec![vec![1.2, 0.8], vec![1.5, 2.0]],
        )
        .unwrap();
        let info = observed_fisher(&p, &LikelihoodData::new(&s, 20.0, 2).unwrap()).unwrap();
        let asym = (&info - info.transpose()).amax() / info.amax();
        assert!(asym < 1e-6);
        // Row 0 parameters never interact with row 1 parameters.
        assert_eq!(info[(0, 1)], 0.0);
    }

    #[test]
    fn interval_width() {
        let p = HawkesParams::new(vec![1.0], vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        let info = DMatrix::from_diagonal_element(3, 3, 1e6);
        let ci = confidence_intervals(&p, &info, 28800.0).unwrap();
        assert_relative_eq!(ci[0].half_width.unwrap(), 1.1549410759380276e-05, max_relative = 1e-12);
        assert_eq!(ci[2].label, "beta[1,1]");
    }

    #[test]
    fn negative_variance_is_flagged() {
        let p = HawkesParams::new(vec![1.0], vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        let info = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, -2.0, 1.0]));
        let ci = confidence_intervals(&p, &info, 1.0).unwrap();
        assert!(ci[1].negative_variance && ci[1].half_width.is_none());
        assert_eq!(ci[1].estimate, 1.0);
        let br = branching_ratio_cis(&p, &info, 1.0).unwrap();
        assert!(br[0].flagged);
        let singular = DMatrix::zeros(3, 3);
        assert!(confidence_intervals(&p, &singular, 1.0).unwrap().iter().all(|c| c.half_width.is_none()));
    }

    #[test]
    fn delta_method() {
        assert_eq!(branching_ratio_variance(0.3, 0.2, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(branching_ratio_variance(1.0, 2.0, 0.04, 0.09, 0.0).unwrap(), 0.015625, max_relative = 1e-15);
        assert!(branching_ratio_variance(1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }
}
