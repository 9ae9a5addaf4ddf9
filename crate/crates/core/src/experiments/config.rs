//! Experiment configuration: defaults, CLI-style parsers and the JSON config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrands::ModelSpec;
use crate::kernels::HurstConfig;
use crate::paths::SimulationGrid;

pub const DEFAULT_EPS_LADDER: [usize; 5] = [64, 32, 16, 8, 4];

/// Everything a run depends on. `out` and `workers` only affect where and how
/// fast results are produced, so they are left out of serialized echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hurst: f64,
    pub horizon: f64,
    pub steps: usize,
    pub ext_steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub model: String,
    pub model_params: BTreeMap<String, String>,
    pub eps_ladder: Vec<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip, default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 1.0,
            steps: 512,
            ext_steps: DEFAULT_EPS_LADDER[0],
            paths: 1000,
            seed: 42,
            model: "linear".into(),
            model_params: BTreeMap::new(),
            eps_ladder: DEFAULT_EPS_LADDER.to_vec(),
            out: None,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn hurst_config(&self) -> Result<HurstConfig> {
        HurstConfig::new(self.hurst, self.horizon)
    }

    pub fn grid(&self) -> Result<SimulationGrid> {
        SimulationGrid::new(self.horizon, self.steps, self.ext_steps)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_name(&self.model, &self.model_params)
    }

    /// Checks every field; returns the first problem found.
    pub fn validate(&self) -> Result<()> {
        self.hurst_config()?;
        self.grid()?;
        self.model_spec()?;
        if self.paths == 0 {
            return Err(Error::Config("need at least one path".into()));
        }
        if self.eps_ladder.is_empty() {
            return Err(Error::Config("ε ladder is empty".into()));
        }
        if self.eps_ladder.contains(&0) {
            return Err(Error::Config("ε must be a positive multiple of Δ".into()));
        }
        let max = *self.eps_ladder.iter().max().unwrap_or(&0);
        if self.ext_steps < max {
            return Err(Error::Config(format!(
                "grid extension {}Δ is shorter than the largest ε = {max}Δ",
                self.ext_steps
            )));
        }
        Ok(())
    }

    /// Applies the fields present in a config file on top of `self`.
    pub fn apply(&mut self, file: ConfigFile) -> Result<()> {
        let ConfigFile {
            hurst,
            horizon,
            steps,
            ext_steps,
            paths,
            seed,
            model,
            model_params,
            eps_ladder,
            out,
            workers,
        } = file;
        if let Some(v) = hurst {
            self.hurst = v;
        }
        if let Some(v) = horizon {
            self.horizon = v;
        }
        if let Some(v) = steps {
            self.steps = v;
        }
        if let Some(v) = paths {
            self.paths = v;
        }
        if let Some(v) = seed {
            self.seed = v;
        }
        if let Some(v) = model {
            self.model = v;
        }
        if let Some(params) = model_params {
            self.model_params = params
                .into_iter()
                .map(|(k, v)| Ok((k, param_value_to_string(v)?)))
                .collect::<Result<_>>()?;
        }
        if let Some(l) = eps_ladder {
            self.eps_ladder = match l {
                LadderSpec::Steps(v) => v,
                LadderSpec::Text(s) => parse_eps_ladder(&s)?,
            };
            if ext_steps.is_none() {
                self.ext_steps = self.ext_steps.max(self.eps_ladder.iter().copied().max().unwrap_or(0));
            }
        }
        if let Some(v) = ext_steps {
            self.ext_steps = v;
        }
        if let Some(v) = out {
            self.out = Some(v);
        }
        if let Some(v) = workers {
            self.workers = v;
        }
        Ok(())
    }
}

/// A JSON config file; every field optional, unknown fields rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub hurst: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub ext_steps: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub model_params: Option<BTreeMap<String, serde_json::Value>>,
    pub eps_ladder: Option<LadderSpec>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// `[64, 32, 16]` or `"64Δ,32Δ,16Δ"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    Steps(Vec<usize>),
    Text(String),
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn param_value_to_string(v: serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Config(format!("model parameter must be a string or number, got {other}"))),
    }
}

/// Parses `"64Δ,32Δ,16"`: positive integers, each optionally suffixed by
/// `Δ`, `dt` or `d`.
pub fn parse_eps_ladder(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for raw in text.split(',') {
        let item = raw.trim();
        let digits = ["Δ", "dt", "d"]
            .iter()
            .find_map(|suf| item.strip_suffix(suf))
            .unwrap_or(item)
            .trim();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Config(format!(
                "ε ladder entry '{item}' is not a positive integer multiple of Δ"
            )));
        }
        let k: usize = digits
            .parse()
            .map_err(|_| Error::Config(format!("ε ladder entry '{item}' is out of range")))?;
        if k == 0 {
            return Err(Error::Config("ε must be a positive multiple of Δ".into()));
        }
        out.push(k);
    }
    Ok(out)
}

/// Parses one `key=value` model parameter.
pub fn parse_model_param(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("model parameter '{text}' is not of the form key=value")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(Error::Config(format!("model parameter '{text}' has an empty key or value")));
    }
    Ok((k.to_string(), v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_parsing() {
        assert_eq!(parse_eps_ladder("64Δ,32Δ, 16").unwrap(), vec![64, 32, 16]);
        assert_eq!(parse_eps_ladder("8dt,4d").unwrap(), vec![8, 4]);
        for bad in ["3.7Δ", "", "0", "-4", "4Δ,,8", "Δ", "1e3", "4ΔΔ"] {
            assert!(parse_eps_ladder(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn model_param_parsing() {
        assert_eq!(parse_model_param("alpha=0.25").unwrap(), ("alpha".into(), "0.25".into()));
        assert!(parse_model_param("alpha").is_err());
        assert!(parse_model_param("=1").is_err());
    }

    #[test]
    fn config_file_overrides() {
        let mut c = ExperimentConfig::default();
        let f = ConfigFile::parse(
            r#"{"hurst": 0.6, "model": "fracmart", "model_params": {"alpha": 0.1, "z": "cos"}, "eps_ladder": "128Δ,8Δ"}"#,
        )
        .unwrap();
        c.apply(f).unwrap();
        assert_eq!(c.hurst, 0.6);
        assert_eq!(c.model_params["alpha"], "0.1");
        assert_eq!(c.eps_ladder, vec![128, 8]);
        assert_eq!(c.ext_steps, 128);
        c.validate().unwrap();
        assert!(ConfigFile::parse(r#"{"hurts": 0.6}"#).is_err());
        assert!(ConfigFile::parse(r#"{"eps_ladder": [4, 8]}"#).is_ok());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.hurst = 0.5;
        assert!(matches!(c.validate(), Err(Error::InvalidHurst(_))));
        let mut c = ExperimentConfig::default();
        c.ext_steps = 8;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.paths = 0;
        assert!(c.validate().is_err());
    }
}
