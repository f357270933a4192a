use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of an M-variate Hawkes process with exponential kernels
/// `phi[m][n](t) = alpha[m][n] * exp(-beta[m][n] * t)`.
///
/// Row `m` holds the effect of every type `n` on the intensity of type `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub dimension: usize,
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl HawkesParams {
    pub fn new(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let params = Self {
            dimension: mu.len(),
            mu,
            alpha,
            beta,
        };
        params.validate()?;
        Ok(params)
    }

    /// The 10-type order-flow parameter set: `mu` alternates bid/ask baselines
    /// for the event types of [`crate::injection::EventKind`], `alpha = mu 1^T`
    /// and every decay is 0.2/s.
    pub fn baseline_order_flow() -> Self {
        let mu = vec![0.01, 0.01, 0.02, 0.02, 0.02, 0.02, 0.015, 0.015, 0.015, 0.015];
        let m = mu.len();
        let alpha = mu.iter().map(|&row| vec![row; m]).collect();
        let beta = vec![vec![0.2; m]; m];
        Self {
            dimension: m,
            mu,
            alpha,
            beta,
        }
    }

    /// Restriction to the given (0-based) event types, preserving their order.
    pub fn restrict(&self, types: &[usize]) -> Result<Self> {
        for &t in types {
            if t >= self.dimension {
                return Err(Error::Domain(format!(
                    "type index {t} out of range for dimension {}",
                    self.dimension
                )));
            }
        }
        let pick = |mat: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            types
                .iter()
                .map(|&i| types.iter().map(|&j| mat[i][j]).collect())
                .collect()
        };
        Self::new(
            types.iter().map(|&i| self.mu[i]).collect(),
            pick(&self.alpha),
            pick(&self.beta),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dimension;
        if m == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if self.mu.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.mu.len(),
            });
        }
        for (name, mat) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if mat.len() != m || mat.iter().any(|row| row.len() != m) {
                return Err(Error::InvalidParams(format!("{name} must be {m}x{m}")));
            }
        }
        if let Some(x) = self.mu.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParams(format!("mu entries must be >= 0, got {x}")));
        }
        if let Some(x) = self.alpha.iter().flatten().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParams(format!("alpha entries must be >= 0, got {x}")));
        }
        if let Some(x) = self.beta.iter().flatten().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidParams(format!("beta entries must be > 0, got {x}")));
        }
        Ok(())
    }

    /// Number of free parameters, `2 M^2 + M`.
    pub fn len(&self) -> usize {
        2 * self.dimension * self.dimension + self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.dimension == 0
    }

    /// Flattened `(mu, alpha row-major, beta row-major)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.mu);
        out.extend(self.alpha.iter().flatten());
        out.extend(self.beta.iter().flatten());
        out
    }

    pub fn from_flat(dimension: usize, flat: &[f64]) -> Result<Self> {
        let m = dimension;
        if flat.len() != 2 * m * m + m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m * m + m,
                found: flat.len(),
            });
        }
        let mu = flat[..m].to_vec();
        let alpha = flat[m..m + m * m].chunks(m).map(<[f64]>::to_vec).collect();
        let beta = flat[m + m * m..].chunks(m).map(<[f64]>::to_vec).collect();
        Self::new(mu, alpha, beta)
    }

    /// Human-readable label of the flattened parameter at `index`, 1-based
    /// type numbers (`mu[3]`, `alpha[1,10]`, ...).
    pub fn parameter_label(dimension: usize, index: usize) -> String {
        let m = dimension;
        if index < m {
            format!("mu[{}]", index + 1)
        } else if index < m + m * m {
            let k = index - m;
            format!("alpha[{},{}]", k / m + 1, k % m + 1)
        } else {
            let k = index - m - m * m;
            format!("beta[{},{}]", k / m + 1, k % m + 1)
        }
    }

    /// Flat index of `alpha[m][n]`.
    pub fn alpha_index(dimension: usize, m: usize, n: usize) -> usize {
        dimension + m * dimension + n
    }

    /// Flat index of `beta[m][n]`.
    pub fn beta_index(dimension: usize, m: usize, n: usize) -> usize {
        dimension + dimension * dimension + m * dimension + n
    }

    /// Branching matrix `Gamma[m][n] = alpha[m][n] / beta[m][n]`.
    pub fn branching_ratios(&self) -> Vec<Vec<f64>> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a / b).collect())
            .collect()
    }

    /// Perron root of the branching matrix.
    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.branching_ratios(), 1e-10)
    }

    /// Stationary mean intensity `(I - Gamma)^{-1} mu`.
    pub fn stationary_intensity(&self) -> Result<Vec<f64>> {
        let m = self.dimension;
        let gamma = self.branching_ratios();
        let lhs = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - gamma[i][j]
        });
        let rhs = nalgebra::DVector::from_column_slice(&self.mu);
        lhs.lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::Domain("I - Gamma is singular".into()))
    }
}

/// Perron root of a non-negative matrix by power iteration on the shifted
/// matrix `A + I`, which has the same dominant eigenvector and no periodicity.
pub fn spectral_radius(matrix: &[Vec<f64>], tol: f64) -> f64 {
    let m = matrix.len();
    if m == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    let mut estimate = f64::NAN;
    for _ in 0..200_000 {
        let y: Vec<f64> = (0..m)
            .map(|i| x[i] + matrix[i].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let next = norm - 1.0;
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - estimate).abs() < tol {
            return next.max(0.0);
        }
        estimate = next;
    }
    estimate.max(0.0)
}

/// Time for an excitation with decay `beta` to halve.
pub fn half_life(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("decay must be positive, got {beta}")));
    }
    Ok(std::f64::consts::LN_2 / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn baseline_set_has_210_parameters() {
        let p = HawkesParams::baseline_order_flow();
        p.validate().unwrap();
        assert_eq!(p.len(), 210);
        assert_eq!(p.flatten().len(), 210);
        assert_eq!(HawkesParams::from_flat(10, &p.flatten()).unwrap(), p);
    }

    #[test]
    fn branching_ratios_of_baseline_row_one() {
        let g = HawkesParams::baseline_order_flow().branching_ratios();
        for n in 0..10 {
            assert_relative_eq!(g[0][n], 0.05, max_relative = 1e-12);
        }
    }

    #[test]
    fn branching_ratio_edge_cases() {
        let p = HawkesParams::new(
            vec![0.1, 0.1],
            vec![vec![0.0, 0.3], vec![0.7, 1.1]],
            vec![vec![0.5, 0.3], vec![0.7, 1.1]],
        )
        .unwrap();
        let g = p.branching_ratios();
        assert_eq!(g[0][0], 0.0);
        assert_eq!(g[0][1], 1.0);
        assert_eq!(g[1][0], 1.0);
        assert_eq!(g[1][1], 1.0);
    }

    #[test]
    fn spectral_radius_of_rank_one_baseline() {
        // Gamma = 5 mu 1^T has single non-zero eigenvalue 5 * sum(mu) = 0.8.
        let rho = HawkesParams::baseline_order_flow().spectral_radius();
        assert_relative_eq!(rho, 0.8, max_relative = 1e-8);
    }

    #[test]
    fn spectral_radius_handles_periodic_and_reducible() {
        let swap = vec![vec![0.0, 0.9], vec![0.9, 0.0]];
        assert_relative_eq!(spectral_radius(&swap, 1e-12), 0.9, max_relative = 1e-8);
        let diag = vec![vec![0.5, 0.0], vec![0.0, 0.0]];
        assert_relative_eq!(spectral_radius(&diag, 1e-12), 0.5, max_relative = 1e-8);
    }

    #[test]
    fn stationary_intensity_is_five_mu() {
        let p = HawkesParams::baseline_order_flow();
        let lambda = p.stationary_intensity().unwrap();
        for (l, mu) in lambda.iter().zip(&p.mu) {
            assert_relative_eq!(*l, 5.0 * mu, max_relative = 1e-10);
        }
        assert_relative_eq!(lambda[0] * 28800.0, 1440.0, max_relative = 1e-10);
    }

    #[test]
    fn half_life_values() {
        assert_relative_eq!(half_life(0.2).unwrap(), 3.465735902799726, max_relative = 1e-12);
        assert_relative_eq!(half_life(std::f64::consts::LN_2).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(half_life(2.0 * std::f64::consts::LN_2).unwrap(), 0.5, max_relative = 1e-15);
        assert!(half_life(0.0).is_err());
        assert!(half_life(-1.0).is_err());
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(HawkesParams::new(vec![-0.1], vec![vec![0.0]], vec![vec![1.0]]).is_err());
        assert!(HawkesParams::new(vec![0.1], vec![vec![-0.1]], vec![vec![1.0]]).is_err());
        assert!(HawkesParams::new(vec![0.1], vec![vec![0.1]], vec![vec![0.0]]).is_err());
        assert!(HawkesParams::new(vec![0.1], vec![vec![0.1, 0.2]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn labels_follow_flat_order() {
        assert_eq!(HawkesParams::parameter_label(10, 0), "mu[1]");
        assert_eq!(HawkesParams::parameter_label(10, 10), "alpha[1,1]");
        assert_eq!(HawkesParams::parameter_label(10, 19), "alpha[1,10]");
        assert_eq!(HawkesParams::parameter_label(10, 110), "beta[1,1]");
        assert_eq!(HawkesParams::parameter_label(10, 209), "beta[10,10]");
        assert_eq!(HawkesParams::alpha_index(10, 0, 9), 19);
        assert_eq!(HawkesParams::beta_index(10, 9, 9), 209);
    }
}
