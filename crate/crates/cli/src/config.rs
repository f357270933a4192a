use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hawkeslob::calibration::CalibrationResult;
use hawkeslob::hawkes::HawkesParams;
use hawkeslob::pipeline::RunConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Deserialize JSON, naming the offending key path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, source: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("{}: at `{}`: {}", source.display(), path, e.into_inner())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text, path)
}

pub fn load_config(path: Option<&Path>) -> Result<(RunConfig, Option<PathBuf>)> {
    let Some(path) = path else {
        return Ok((RunConfig::default(), None));
    };
    let config: RunConfig = read_json(path)?;
    let base = path.parent().map(Path::to_path_buf);
    Ok((config, base))
}

/// A parameter file, or the fitted parameters inside a calibration result.
pub fn load_params(path: &Path) -> Result<HawkesParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = parse_json(&text, path)?;
    let params = if value.get("theta_hat").is_some() {
        parse_json::<CalibrationResult>(&text, path)?.theta_hat
    } else {
        parse_json::<HawkesParams>(&text, path)?
    };
    params
        .validate()
        .with_context(|| format!("parameters in {}", path.display()))?;
    Ok(params)
}

/// 1-based type list such as `1,2,3,4`.
pub fn parse_types(s: &str) -> Result<Vec<usize>> {
    let types = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad type {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if types.is_empty() {
        bail!("empty type list");
    }
    Ok(types)
}

pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: &'a C,
    pub files: Vec<String>,
}

/// `manifest.json` next to the outputs of one command.
pub fn write_manifest<C: Serialize>(dir: &Path, command: &str, seed: Option<u64>, config: &C) -> Result<()> {
    let mut files: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| name != "manifest.json")
        .collect();
    files.sort();
    let manifest = Manifest {
        tool: "hawkeslob",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config_sha256: config_hash(config)?,
        config,
        files,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
