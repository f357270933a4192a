//! One configured run: simulate, inject, publish, classify.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classification::{classify, count_table, ClassifiedStream, CountRow};
use crate::csvio::create;
use crate::error::{Error, Result};
use crate::hawkes::{simulate_thinning, EventStream, HawkesParams, SimulationOptions};
use crate::injection::{run_simulation, write_messages_csv, InjectionModel, SimulationOutput, VolumeModel, EVENT_TYPES};
use crate::lob::{microstructure_series, write_series_csv};

pub const DEFAULT_HORIZON: f64 = 28_800.0;

fn default_model() -> InjectionModel {
    InjectionModel::Reference
}

fn default_seed() -> u64 {
    1
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: InjectionModel,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    /// Inline 10-type parameters; the built-in order-flow set when neither
    /// this nor `hawkes_params_path` is given.
    #[serde(default)]
    pub hawkes_params: Option<HawkesParams>,
    #[serde(default)]
    pub hawkes_params_path: Option<PathBuf>,
    /// 1-based event types to simulate; all ten when absent.
    #[serde(default)]
    pub types: Option<Vec<usize>>,
    #[serde(default)]
    pub volume: VolumeModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: default_model(),
            seed: default_seed(),
            horizon_s: DEFAULT_HORIZON,
            hawkes_params: None,
            hawkes_params_path: None,
            types: None,
            volume: VolumeModel::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon_s must be positive, got {}", self.horizon_s)));
        }
        if self.hawkes_params.is_some() && self.hawkes_params_path.is_some() {
            return Err(Error::InvalidParams(
                "give either hawkes_params or hawkes_params_path, not both".into(),
            ));
        }
        if let Some(types) = &self.types {
            let mut seen = [false; EVENT_TYPES];
            if types.is_empty() {
                return Err(Error::InvalidParams("types must not be empty".into()));
            }
            for &t in types {
                if !(1..=EVENT_TYPES).contains(&t) || std::mem::replace(&mut seen[t - 1], true) {
                    return Err(Error::InvalidParams(format!("types: {t} is out of range or repeated")));
                }
            }
        }
        self.volume.validate()
    }

    /// 0-based event types in simulation order.
    pub fn type_indices(&self) -> Vec<usize> {
        match &self.types {
            Some(t) => t.iter().map(|t| t - 1).collect(),
            None => (0..EVENT_TYPES).collect(),
        }
    }

    /// The full 10-type parameter set. Relative parameter paths resolve
    /// against `base_dir`.
    pub fn full_params(&self, base_dir: Option<&Path>) -> Result<HawkesParams> {
        let params = match (&self.hawkes_params, &self.hawkes_params_path) {
            (Some(p), _) => p.clone(),
            (None, Some(path)) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&path)?;
                serde_json::from_str(&text)?
            }
            (None, None) => HawkesParams::baseline_order_flow(),
        };
        params.validate()?;
        if params.dimension != EVENT_TYPES {
            return Err(Error::DimensionMismatch {
                expected: EVENT_TYPES,
                found: params.dimension,
            });
        }
        Ok(params)
    }

    /// Parameters of the simulated (possibly restricted) process.
    pub fn model_params(&self, base_dir: Option<&Path>) -> Result<HawkesParams> {
        self.full_params(base_dir)?.restrict(&self.type_indices())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    /// Parameters of the simulated process, in `type_indices` order.
    pub params: HawkesParams,
    pub simulation: SimulationOutput,
    pub classified: ClassifiedStream,
}

impl RunOutput {
    /// The injected Hawkes realisation with 10-type marks.
    pub fn hawkes(&self) -> &EventStream {
        &self.simulation.stream
    }

    /// Classified events restricted and relabelled to the simulated types,
    /// matching [`RunOutput::params`].
    pub fn calibration_stream(&self) -> EventStream {
        self.classified.stream.restrict(&self.config.type_indices())
    }

    pub fn counts(&self) -> Vec<CountRow> {
        count_table(self.hawkes(), &self.classified)
    }

    /// Writes the Hawkes stream, classified stream and counts; with an engine
    /// run also the message log, market data and microstructure series.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.hawkes().write_csv(create(&dir.join("hawkes.csv"))?)?;
        self.classified.write_csv(create(&dir.join("classified.csv"))?)?;
        std::fs::write(dir.join("counts.json"), serde_json::to_string_pretty(&self.counts())?)?;
        if let Some(log) = &self.simulation.log {
            write_messages_csv(&self.simulation.messages, create(&dir.join("messages.csv"))?)?;
            log.write_dir(dir)?;
            write_series_csv(&microstructure_series(log), create(&dir.join("series.csv"))?)?;
        }
        Ok(())
    }
}

/// Simulate the configured process and push it through the configured model.
pub fn simulate_run(config: &RunConfig, base_dir: Option<&Path>) -> Result<RunOutput> {
    config.validate()?;
    let types = config.type_indices();
    let params = config.model_params(base_dir)?;
    let mut stream = simulate_thinning(&params, config.horizon_s, config.seed, SimulationOptions::default())?;
    for e in &mut stream.events {
        e.mark = types[e.mark];
    }
    let simulation = run_simulation(&stream, config.model, config.seed, &config.volume)?;
    let classified = classify(&simulation)?;
    Ok(RunOutput {
        config: config.clone(),
        params,
        simulation,
        classified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c: RunConfig = serde_json::from_str(r#"{"model": "model2", "seed": 4}"#).unwrap();
        assert_eq!(c.model, InjectionModel::Model2);
        assert_eq!(c.horizon_s, DEFAULT_HORIZON);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 4}"#).is_err());
    }

    #[test]
    fn type_restriction() {
        let c = RunConfig {
            types: Some(vec![1, 2, 3, 4]),
            horizon_s: 600.0,
            model: InjectionModel::Model1,
            ..Default::default()
        };
        let run = simulate_run(&c, None).unwrap();
        assert_eq!(run.params.dimension, 4);
        assert!(run.hawkes().events.iter().all(|e| e.mark < 4));
        assert!(run.calibration_stream().events.iter().all(|e| e.mark < 4));
        let bad = RunConfig {
            types: Some(vec![1, 1]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
