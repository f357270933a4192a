use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fisher::{branching_ratio_cis, confidence_intervals, observed_fisher, BranchingInterval, ConfidenceInterval};
use super::residuals::{generalized_residuals, qq_data, ResidualSeries};
use super::stats::{ks_test, ljung_box, lr_test, TestResult};
use crate::calibration::{deviation_measures, Deviation, LikelihoodData};
use crate::csvio::{create, opt_f64, write_rows};
use crate::error::{Error, Result};
use crate::hawkes::{half_life, EventStream, HawkesParams};

/// Elementwise `theta_hat - theta_true` plus the half-lives of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionTables {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub half_life_hat: Vec<Vec<f64>>,
    pub half_life_true: Vec<Vec<f64>>,
}

fn diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x - y).collect())
        .collect()
}

fn half_lives(beta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    beta.iter().map(|row| row.iter().map(|&b| half_life(b)).collect()).collect()
}

pub fn distortion_tables(theta_hat: &HawkesParams, theta_true: &HawkesParams) -> Result<DistortionTables> {
    if theta_hat.dimension != theta_true.dimension {
        return Err(Error::DimensionMismatch {
            expected: theta_true.dimension,
            found: theta_hat.dimension,
        });
    }
    Ok(DistortionTables {
        mu: theta_hat.mu.iter().zip(&theta_true.mu).map(|(a, b)| a - b).collect(),
        alpha: diff(&theta_hat.alpha, &theta_true.alpha),
        beta: diff(&theta_hat.beta, &theta_true.beta),
        gamma: diff(&theta_hat.branching_ratios(), &theta_true.branching_ratios()),
        half_life_hat: half_lives(&theta_hat.beta)?,
        half_life_true: half_lives(&theta_true.beta)?,
    })
}

/// For target type `m`: one (branching ratio, half-life, event count) triple
/// per source type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubblePoint {
    pub source: usize,
    pub branching_ratio: f64,
    pub half_life: f64,
    pub event_count: usize,
}

pub fn bubble_data(params: &HawkesParams, stream: &EventStream, target: usize) -> Result<Vec<BubblePoint>> {
    if target >= params.dimension {
        return Err(Error::Domain(format!("target type {} out of range", target + 1)));
    }
    let counts = stream.counts(params.dimension);
    (0..params.dimension)
        .map(|n| {
            Ok(BubblePoint {
                source: n + 1,
                branching_ratio: params.alpha[target][n] / params.beta[target][n],
                half_life: half_life(params.beta[target][n])?,
                event_count: counts[n],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTest {
    pub event_type: usize,
    pub residual_count: usize,
    pub ks: Option<TestResult>,
    pub ljung_box: Option<TestResult>,
    /// Why a test could not be run.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatio {
    pub loglik_true: f64,
    pub loglik_hat: f64,
    pub df: usize,
    pub test: TestResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    pub lags: usize,
    /// Compute the observed information and the interval tables.
    pub information: bool,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            lags: 20,
            information: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub horizon: f64,
    pub lags: usize,
    pub residuals: Vec<ResidualSeries>,
    pub residual_tests: Vec<ResidualTest>,
    pub likelihood_ratio: Option<LikelihoodRatio>,
    pub deviation: Option<Deviation>,
    pub confidence_intervals: Vec<ConfidenceInterval>,
    pub negative_variances: usize,
    pub branching_intervals: Vec<BranchingInterval>,
    pub half_lives: Vec<Vec<f64>>,
    pub distortion: Option<DistortionTables>,
    #[serde(skip)]
    params: Option<HawkesParams>,
    #[serde(skip)]
    counts: Vec<usize>,
}

fn residual_test(series: &ResidualSeries, lags: usize) -> ResidualTest {
    let r = &series.residuals;
    let ks = ks_test(r);
    let lb = ljung_box(r, lags);
    let note = match (&ks, &lb) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    ResidualTest {
        event_type: series.event_type,
        residual_count: r.len(),
        ks: ks.ok(),
        ljung_box: lb.ok(),
        note,
    }
}

/// Full battery under the fitted parameters: residual tests per type, and
/// when the generating parameters are known, the likelihood-ratio test and
/// distortion tables.
pub fn run_diagnostics(
    stream: &EventStream,
    horizon: f64,
    theta_hat: &HawkesParams,
    theta_true: Option<&HawkesParams>,
    options: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    let data = LikelihoodData::new(stream, horizon, theta_hat.dimension)?;
    let bounded = EventStream::new(horizon, stream.events.clone());
    let residuals = generalized_residuals(theta_hat, &bounded)?;
    let residual_tests = residuals.par_iter().map(|s| residual_test(s, options.lags)).collect();

    let (likelihood_ratio, deviation, distortion) = match theta_true {
        Some(truth) => {
            let loglik_true = data.log_likelihood(truth)?;
            let loglik_hat = data.log_likelihood(theta_hat)?;
            let df = truth.len();
            let test = lr_test(loglik_true, loglik_hat, df)?;
            (
                Some(LikelihoodRatio {
                    loglik_true,
                    loglik_hat,
                    df,
                    test,
                }),
                Some(deviation_measures(theta_hat, truth)?),
                Some(distortion_tables(theta_hat, truth)?),
            )
        }
        None => (None, None, None),
    };

    let (confidence_intervals, branching_intervals) = if options.information {
        let info = observed_fisher(theta_hat, &data)?;
        (
            confidence_intervals(theta_hat, &info, horizon)?,
            branching_ratio_cis(theta_hat, &info, horizon)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let negative_variances = confidence_intervals.iter().filter(|c| c.negative_variance).count();

    Ok(DiagnosticsReport {
        horizon,
        lags: options.lags,
        residuals,
        residual_tests,
        likelihood_ratio,
        deviation,
        confidence_intervals,
        negative_variances,
        branching_intervals,
        half_lives: half_lives(&theta_hat.beta)?,
        distortion,
        params: Some(theta_hat.clone()),
        counts: stream.counts(theta_hat.dimension),
    })
}

fn matrix_rows(mat: &[Vec<f64>]) -> impl Iterator<Item = Vec<String>> + '_ {
    mat.iter().enumerate().flat_map(|(m, row)| {
        row.iter()
            .enumerate()
            .map(move |(n, v)| vec![(m + 1).to_string(), (n + 1).to_string(), v.to_string()])
    })
}

impl DiagnosticsReport {
    /// Types whose KS and Ljung-Box p-values both exceed `level`.
    pub fn passing_types(&self, level: f64) -> usize {
        self.residual_tests
            .iter()
            .filter(|t| {
                t.ks.is_some_and(|r| r.p_value > level) && t.ljung_box.is_some_and(|r| r.p_value > level)
            })
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `diagnostics.json` plus per-type residual, Q-Q and bubble CSVs, the
    /// distortion matrices and the interval table.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("diagnostics.json"), self.to_json()?)?;
        for s in &self.residuals {
            let m = s.event_type;
            write_rows(
                create(&dir.join(format!("residuals_{m}.csv")))?,
                &["index", "residual"],
                s.residuals.iter().enumerate().map(|(i, r)| vec![i.to_string(), r.to_string()]),
            )?;
            let qq = if s.residuals.is_empty() { Vec::new() } else { qq_data(&s.residuals)? };
            write_rows(
                create(&dir.join(format!("qq_{m}.csv")))?,
                &["theoretical", "empirical"],
                qq.iter().map(|(t, e)| vec![t.to_string(), e.to_string()]),
            )?;
        }
        if let Some(params) = &self.params {
            let stream_counts = &self.counts;
            for m in 0..params.dimension {
                write_rows(
                    create(&dir.join(format!("bubble_{}.csv", m + 1)))?,
                    &["source", "branching_ratio", "half_life", "event_count"],
                    (0..params.dimension).map(|n| {
                        let b = params.beta[m][n];
                        vec![
                            (n + 1).to_string(),
                            (params.alpha[m][n] / b).to_string(),
                            (std::f64::consts::LN_2 / b).to_string(),
                            stream_counts.get(n).copied().unwrap_or(0).to_string(),
                        ]
                    }),
                )?;
            }
        }
        if let Some(d) = &self.distortion {
            write_rows(
                create(&dir.join("distortion_mu.csv"))?,
                &["type", "value"],
                d.mu.iter().enumerate().map(|(m, v)| vec![(m + 1).to_string(), v.to_string()]),
            )?;
            for (name, mat) in [("alpha", &d.alpha), ("beta", &d.beta), ("gamma", &d.gamma)] {
                write_rows(
                    create(&dir.join(format!("distortion_{name}.csv")))?,
                    &["target", "source", "value"],
                    matrix_rows(mat),
                )?;
            }
        }
        write_rows(
            create(&dir.join("half_lives.csv"))?,
            &["target", "source", "value"],
            matrix_rows(&self.half_lives),
        )?;
        write_rows(
            create(&dir.join("confidence_intervals.csv"))?,
            &["parameter", "estimate", "variance", "half_width", "lower", "upper", "negative_variance"],
            self.confidence_intervals.iter().map(|c| {
                vec![
                    c.label.clone(),
                    c.estimate.to_string(),
                    opt_f64(c.variance),
                    opt_f64(c.half_width),
                    opt_f64(c.half_width.map(|h| c.estimate - h)),
                    opt_f64(c.half_width.map(|h| c.estimate + h)),
                    c.negative_variance.to_string(),
                ]
            }),
        )?;
        write_rows(
            create(&dir.join("branching_intervals.csv"))?,
            &["target", "source", "gamma", "variance", "half_width", "flagged"],
            self.branching_intervals.iter().map(|b| {
                vec![
                    b.target.to_string(),
                    b.source.to_string(),
                    b.gamma.to_string(),
                    opt_f64(b.variance),
                    opt_f64(b.half_width),
                    b.flagged.to_string(),
                ]
            }),
        )?;
        Ok(())
    }
}
