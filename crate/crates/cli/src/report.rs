use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use hawkeslob::calibration::{mle_fit, Deviation, FitOptions, TraceEntry};
use hawkeslob::classification::CountRow;
use hawkeslob::diagnostics::{run_diagnostics, DiagnosticsOptions, LikelihoodRatio, ResidualTest};
use hawkeslob::injection::InjectionModel;
use hawkeslob::pipeline::{simulate_run, RunConfig};

use crate::config::write_manifest;

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let mut out = String::from("iteration,objective,grad_norm,step\n");
    for t in trace {
        writeln!(out, "{},{},{},{}", t.iteration, t.objective, t.grad_norm, t.step)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub struct StageOptions {
    pub calibrate: bool,
    pub lags: usize,
    pub max_iters: usize,
}

/// What one (seed, model) run produced; failed stages are listed, not fatal.
pub struct RunSummary {
    pub seed: u64,
    pub model: InjectionModel,
    pub counts: Vec<CountRow>,
    pub deviation: Option<Deviation>,
    pub likelihood_ratio: Option<LikelihoodRatio>,
    pub residual_tests: Vec<ResidualTest>,
    pub negative_variances: Option<usize>,
    pub converged: Option<bool>,
    pub failures: Vec<String>,
}

pub fn run_stages(config: &RunConfig, base: Option<&Path>, dir: &Path, options: &StageOptions) -> RunSummary {
    let mut summary = RunSummary {
        seed: config.seed,
        model: config.model,
        counts: Vec::new(),
        deviation: None,
        likelihood_ratio: None,
        residual_tests: Vec::new(),
        negative_variances: None,
        converged: None,
        failures: Vec::new(),
    };
    let run = match simulate_run(config, base).and_then(|run| run.write_dir(dir).map(|_| run)) {
        Ok(run) => run,
        Err(e) => {
            summary.failures.push(format!("simulate: {e}"));
            return summary;
        }
    };
    summary.counts = run.counts();
    let finish = |summary: &mut RunSummary| {
        if let Err(e) = write_manifest(dir, "reproduce", Some(config.seed), config) {
            summary.failures.push(format!("manifest: {e}"));
        }
    };
    if !options.calibrate {
        finish(&mut summary);
        return summary;
    }

    let stream = run.calibration_stream();
    let mut fit_options = FitOptions::default();
    fit_options.optimizer.max_iters = options.max_iters;
    let fitted = mle_fit(&stream, stream.horizon, &run.params, &fit_options).and_then(|r| {
        std::fs::write(dir.join("calibration.json"), r.to_json()?)?;
        Ok(r)
    });
    let fitted = match fitted {
        Ok(r) => r,
        Err(e) => {
            summary.failures.push(format!("calibrate: {e}"));
            finish(&mut summary);
            return summary;
        }
    };
    if let Err(e) = write_trace(&dir.join("trace.csv"), &fitted.trace) {
        summary.failures.push(format!("trace: {e}"));
    }
    summary.converged = Some(fitted.converged);

    let diag_options = DiagnosticsOptions {
        lags: options.lags,
        information: true,
    };
    match run_diagnostics(&stream, stream.horizon, &fitted.theta_hat, Some(&run.params), &diag_options)
        .and_then(|r| r.write_dir(&dir.join("diagnostics")).map(|_| r))
    {
        Ok(report) => {
            summary.deviation = report.deviation;
            summary.likelihood_ratio = report.likelihood_ratio.clone();
            summary.residual_tests = report.residual_tests.clone();
            summary.negative_variances = Some(report.negative_variances);
        }
        Err(e) => summary.failures.push(format!("validate: {e}")),
    }
    finish(&mut summary);
    summary
}

fn p(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

/// `report.md` plus CSV versions of each table.
pub fn write_report(dir: &Path, config: &RunConfig, seeds: &[u64], runs: &[RunSummary]) -> Result<()> {
    let mut md = String::new();
    writeln!(md, "# Hawkes order-flow reproduction\n")?;
    writeln!(
        md,
        "Horizon {} s, seeds {:?}, types {}.\n",
        config.horizon_s,
        seeds,
        config
            .types
            .as_ref()
            .map_or("1-10".to_string(), |t| format!("{t:?}"))
    )?;

    let find = |seed: u64, model: InjectionModel| runs.iter().find(|r| r.seed == seed && r.model == model);
    let mut counts_csv = String::from("seed,type,hawkes,model1,model2\n");
    let mut dev_csv = String::from("seed,model,mae,rmse,converged\n");
    let mut lr_csv = String::from("seed,model,loglik_true,loglik_hat,statistic,df,p_value\n");
    let mut tests_csv = String::from("seed,model,type,ks_statistic,ks_p,lb_statistic,lb_p\n");

    for &seed in seeds {
        writeln!(md, "## Seed {seed}\n")?;
        writeln!(md, "### Event counts\n\n| type | Hawkes | Model 1 | Model 2 |\n|---|---|---|---|")?;
        let classified = |model| find(seed, model).map(|r| r.counts.as_slice()).unwrap_or(&[]);
        let reference = classified(InjectionModel::Reference);
        for (i, row) in reference.iter().enumerate() {
            let m1 = classified(InjectionModel::Model1).get(i).map_or("-".into(), |r| r.classified_count.to_string());
            let m2 = classified(InjectionModel::Model2).get(i).map_or("-".into(), |r| r.classified_count.to_string());
            writeln!(md, "| {} | {} | {m1} | {m2} |", row.event_type, row.hawkes_count)?;
            writeln!(counts_csv, "{seed},{},{},{m1},{m2}", row.event_type, row.hawkes_count)?;
        }

        writeln!(md, "\n### Parameter deviation and likelihood-ratio test\n")?;
        writeln!(md, "| model | MAE | RMSE | LR statistic | p-value | negative variances | status |\n|---|---|---|---|---|---|---|")?;
        for model in InjectionModel::ALL {
            let Some(r) = find(seed, model) else { continue };
            let status = if r.failures.is_empty() {
                "ok".to_string()
            } else {
                format!("FAILED: {}", r.failures.join("; "))
            };
            writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {status} |",
                model.as_str(),
                p(r.deviation.map(|d| d.mae)),
                p(r.deviation.map(|d| d.rmse)),
                r.likelihood_ratio.as_ref().map_or("-".into(), |l| format!("{:.2}", l.test.statistic)),
                r.likelihood_ratio.as_ref().map_or("-".into(), |l| format!("{:.4e}", l.test.p_value)),
                r.negative_variances.map_or("-".into(), |n| n.to_string()),
            )?;
            if let Some(d) = r.deviation {
                writeln!(dev_csv, "{seed},{},{},{},{}", model.as_str(), d.mae, d.rmse, r.converged.unwrap_or(false))?;
            }
            if let Some(l) = &r.likelihood_ratio {
                writeln!(
                    lr_csv,
                    "{seed},{},{},{},{},{},{}",
                    model.as_str(),
                    l.loglik_true,
                    l.loglik_hat,
                    l.test.statistic,
                    l.df,
                    l.test.p_value
                )?;
            }
        }

        if runs.iter().any(|r| r.seed == seed && !r.residual_tests.is_empty()) {
            writeln!(md, "\n### Residual tests (p-values)\n")?;
            writeln!(md, "| type | ref KS | ref LB | M1 KS | M1 LB | M2 KS | M2 LB |\n|---|---|---|---|---|---|---|")?;
            let n = reference.len();
            for i in 0..n {
                let mut line = format!("| {} |", i + 1);
                for model in InjectionModel::ALL {
                    let t = find(seed, model).and_then(|r| r.residual_tests.get(i));
                    write!(
                        line,
                        " {} | {} |",
                        p(t.and_then(|t| t.ks).map(|r| r.p_value)),
                        p(t.and_then(|t| t.ljung_box).map(|r| r.p_value))
                    )?;
                    if let Some(t) = t {
                        writeln!(
                            tests_csv,
                            "{seed},{},{},{},{},{},{}",
                            model.as_str(),
                            t.event_type,
                            t.ks.map_or(String::new(), |r| r.statistic.to_string()),
                            t.ks.map_or(String::new(), |r| r.p_value.to_string()),
                            t.ljung_box.map_or(String::new(), |r| r.statistic.to_string()),
                            t.ljung_box.map_or(String::new(), |r| r.p_value.to_string()),
                        )?;
                    }
                }
                writeln!(md, "{line}")?;
            }
        }
        writeln!(md)?;
    }
    writeln!(
        md,
        "Per-run outputs, including residual, Q-Q, distortion, interval and bubble data, are under `seed-<n>/<model>/`."
    )?;

    std::fs::write(dir.join("report.md"), md)?;
    std::fs::write(dir.join("counts.csv"), counts_csv)?;
    std::fs::write(dir.join("deviation.csv"), dev_csv)?;
    std::fs::write(dir.join("likelihood_ratio.csv"), lr_csv)?;
    std::fs::write(dir.join("residual_tests.csv"), tests_csv)?;
    Ok(())
}
