//! `key = value` run configuration files.
//!
//! Blank lines and everything after `#` are ignored. Keys are routed to the
//! model, training or library-selection settings; unknown keys are errors.

use std::fs;
use std::path::Path;

use super::msp::SelectionRules;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Public compound search endpoint used when none is configured.
pub const DEFAULT_ENDPOINT: &str = "https://pubchem.ncbi.nlm.nih.gov/rest/pug";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub selection: SelectionRules,
    pub endpoint: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            selection: SelectionRules::default(),
            endpoint: DEFAULT_ENDPOINT.to_string(),
        }
    }
}

/// Splits config text into `(line number, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, found `{line}`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: missing key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one setting. Keys shared by model and training (`dropout`,
    /// `transform`) update both.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut known = false;
        if self.model.set(key, value)? {
            known = true;
        }
        if self.train.set(key, value)? {
            known = true;
        }
        match key {
            "max_energy" => {
                self.selection.max_energy = value
                    .parse()
                    .map_err(|_| Error::Config(format!("max_energy: `{value}` is not a number")))?;
                known = true;
            }
            "precursor_types" => {
                self.selection.precursor_types = value
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
                known = true;
            }
            "endpoint" => {
                self.endpoint = value.trim_end_matches('/').to_string();
                known = true;
            }
            _ => {}
        }
        if known {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown setting `{key}`")))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (line, k, v) in parse_pairs(text)? {
            config
                .set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {}", strip(&e))))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(&e))))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if !(self.selection.max_energy > 0.0) {
            return Err(Error::Config("max_energy must be positive".into()));
        }
        if self.selection.precursor_types.is_empty() {
            return Err(Error::Config("precursor_types must list at least one type".into()));
        }
        Ok(())
    }

    /// Every setting as text, for provenance lines.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            self.model.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for (k, v) in self.train.to_pairs() {
            if !out.iter().any(|(o, _)| o == k) {
                out.push((k.to_string(), v));
            }
        }
        out.push(("max_energy".into(), format!("{:?}", self.selection.max_energy)));
        out.push(("precursor_types".into(), self.selection.precursor_types.join(",")));
        out.push(("endpoint".into(), self.endpoint.clone()));
        out
    }
}

fn strip(e: &Error) -> String {
    let text = e.to_string();
    text.strip_prefix("invalid configuration: ").map(str::to_string).unwrap_or(text)
}
