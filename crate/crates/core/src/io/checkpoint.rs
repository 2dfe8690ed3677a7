//! Single-file model checkpoints.
//!
//! Layout:
//!
//! ```text
//! MSGNN-CHECKPOINT
//! format=1
//! schema_version=1
//! seed=<u64>
//! model.<key>=<value>      (one line per model setting)
//! train.<key>=<value>      (optional, training settings)
//! metric.<name>=<f64>      (optional)
//! param=<name> <kind> <d0>x<d1>...
//! end
//! <f64 little-endian values of every param, in header order>
//! <u64 little-endian FNV-1a checksum of all preceding bytes>
//! ```

use std::fs;
use std::path::Path;

use super::write_atomic;
use crate::chem::FEATURE_SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::{ParamKind, ParamSet, Tensor};

pub const MAGIC: &str = "MSGNN-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub seed: u64,
    /// Training settings as `key=value` text.
    pub train: Vec<(String, String)>,
    pub metrics: Vec<(String, f64)>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_model(model: &Model, seed: u64) -> Self {
        Checkpoint {
            config: model.config().clone(),
            params: model.params().clone(),
            seed,
            train: Vec::new(),
            metrics: Vec::new(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.config.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = format!("{MAGIC}\nformat={FORMAT_VERSION}\nschema_version={}\nseed={}\n", self.config.schema_version, self.seed);
        for (k, v) in self.config.to_pairs() {
            if k != "schema_version" {
                head.push_str(&format!("model.{k}={v}\n"));
            }
        }
        for (k, v) in &self.train {
            head.push_str(&format!("train.{k}={v}\n"));
        }
        for (k, v) in &self.metrics {
            head.push_str(&format!("metric.{k}={v:?}\n"));
        }
        for p in self.params.iter() {
            let kind = match p.kind {
                ParamKind::Weight => "weight",
                ParamKind::Bias => "bias",
            };
            let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
            head.push_str(&format!("param={} {kind} {}\n", p.name, dims.join("x")));
        }
        head.push_str("end\n");
        let mut bytes = head.into_bytes();
        for p in self.params.iter() {
            for v in p.value.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a(&bytes);
        bytes.extend_from_slice(&sum.to_le_bytes());
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(MAGIC.as_bytes()) || bytes.get(MAGIC.len()) != Some(&b'\n') {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let end = find(bytes, b"\nend\n").ok_or_else(|| bad("truncated checkpoint header"))? + 5;
        let head = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("checkpoint header is not UTF-8"))?;
        let mut lines = head.lines().skip(1);
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            match line.split_once('=') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(bad(format!("expected `{key}=`, found `{line}`"))),
            }
        };
        let format: u32 = field("format")?.parse().map_err(|_| bad("unreadable format version"))?;
        if format != FORMAT_VERSION {
            return Err(bad(format!(
                "checkpoint format {format} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let schema: u32 = field("schema_version")?.parse().map_err(|_| bad("unreadable schema version"))?;
        if schema != FEATURE_SCHEMA_VERSION {
            return Err(bad(format!(
                "checkpoint uses feature schema {schema} but this build featurizes with schema {FEATURE_SCHEMA_VERSION}"
            )));
        }
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("unreadable seed"))?;

        let mut model_pairs = Vec::new();
        let mut train = Vec::new();
        let mut metrics = Vec::new();
        let mut shapes = Vec::new();
        for line in lines {
            if line == "end" {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
            if let Some(key) = k.strip_prefix("model.") {
                model_pairs.push((key.to_string(), v.to_string()));
            } else if let Some(key) = k.strip_prefix("train.") {
                train.push((key.to_string(), v.to_string()));
            } else if let Some(key) = k.strip_prefix("metric.") {
                let value = v.parse().map_err(|_| bad(format!("unreadable metric `{key}`")))?;
                metrics.push((key.to_string(), value));
            } else if k == "param" {
                let parts: Vec<&str> = v.split(' ').collect();
                let [name, kind, dims] = parts[..] else {
                    return Err(bad(format!("malformed parameter line `{line}`")));
                };
                let kind = match kind {
                    "weight" => ParamKind::Weight,
                    "bias" => ParamKind::Bias,
                    _ => return Err(bad(format!("unknown parameter kind `{kind}`"))),
                };
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(format!("malformed shape `{dims}`")))?;
                shapes.push((name.to_string(), kind, shape));
            } else {
                return Err(bad(format!("unknown header key `{k}`")));
            }
        }
        let mut config = ModelConfig::from_pairs(model_pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .map_err(|e| bad(format!("stored model settings are invalid: {e}")))?;
        config.schema_version = schema;

        let total: usize = shapes.iter().map(|(_, _, s)| s.iter().product::<usize>()).sum();
        let expected_len = end + 8 * total + 8;
        if bytes.len() != expected_len {
            return Err(bad(format!(
                "checkpoint is {} bytes but its header describes {expected_len}",
                bytes.len()
            )));
        }
        let (body, tail) = bytes.split_at(expected_len - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("eight bytes"));
        if stored != fnv1a(body) {
            return Err(bad("checksum mismatch; the file is corrupted"));
        }
        let mut values = bytes[end..expected_len - 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")));
        let mut params = ParamSet::new();
        for (name, kind, shape) in shapes {
            let n = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            params.push(name, kind, Tensor::new(shape, data)?);
        }
        let checkpoint = Checkpoint {
            config,
            params,
            seed,
            train,
            metrics,
        };
        checkpoint.model()?;
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
