use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || x.is_nan() {
        return Err(Error::Test(format!("chi-square tail needs df > 0 and a number, got df={df}, x={x}")));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(0.5 * df, 0.5 * x))
}

/// Asymptotic Kolmogorov tail `2 sum (-1)^(k-1) exp(-2 k^2 x^2)`, 100 terms.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against the unit exponential.
pub fn ks_test(sample: &[f64]) -> Result<TestResult> {
    if sample.is_empty() {
        return Err(Error::Test("KS test needs a non-empty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::Test("KS sample contains NaN".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let cdf = if x > 0.0 { -(-x).exp_m1() } else { 0.0 };
        d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf)
    });
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

/// Ljung-Box portmanteau test over `lags` autocorrelations.
pub fn ljung_box(sample: &[f64], lags: usize) -> Result<TestResult> {
    let n = sample.len();
    if lags == 0 || n <= lags {
        return Err(Error::Test(format!("Ljung-Box needs 0 < lags < n, got lags={lags}, n={n}")));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = sample.iter().map(|x| x - mean).collect();
    let denom: f64 = centred.iter().map(|x| x * x).sum();
    if !(denom > 0.0) {
        return Err(Error::Test("Ljung-Box sample has zero variance".into()));
    }
    let nf = n as f64;
    let q = (1..=lags)
        .map(|k| {
            let rho = centred[k..].iter().zip(&centred).map(|(a, b)| a * b).sum::<f64>() / denom;
            rho * rho / (nf - k as f64)
        })
        .sum::<f64>()
        * nf
        * (nf + 2.0);
    Ok(TestResult {
        statistic: q,
        p_value: chi2_sf(q, lags as f64)?,
    })
}

/// Likelihood-ratio test of the restricted log-likelihood `loglik_true`
/// against the maximised `loglik_hat`.
pub fn lr_test(loglik_true: f64, loglik_hat: f64, df: usize) -> Result<TestResult> {
    let statistic = -2.0 * (loglik_true - loglik_hat);
    if statistic.is_nan() || statistic < 0.0 {
        return Err(Error::Test(format!(
            "likelihood-ratio statistic {statistic} is negative: the fit is worse than the restricted model"
        )));
    }
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, df as f64)?,
    })
}
