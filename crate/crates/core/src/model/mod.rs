//! Spectrum predictors: stacked GCN or GAT layers, a graph readout and a
//! dense or gated head, plus a fingerprint MLP baseline.
//!
//! ```
//! use msgnn::chem::parse_smiles;
//! use msgnn::model::{Model, ModelConfig};
//!
//! let config = ModelConfig { num_layers: 2, hidden_width: 8, ..ModelConfig::default() };
//! let model = Model::new(config, 7)?;
//! let spectrum = model.predict(&parse_smiles("CC(=O)O")?)?;
//! assert_eq!(spectrum.intensities().len(), 1000);
//! assert!(spectrum.intensities().iter().all(|&v| v >= 0.0));
//! # Ok::<(), msgnn::Error>(())
//! ```

mod batch;
mod config;
pub mod layers;
pub mod suite;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use batch::GraphBatch;
pub use config::{Encoder, HeadKind, ModelConfig, Pooling};

use crate::chem::{circular_fingerprint, MoleculeGraph, BOND_FEATURE_DIM, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::spectrum::{BinnedSpectrum, Transform};
use crate::tensor::{ParamKind, ParamSet, Tape, Tensor, Var};
use layers::{gat_layer, gcn_layer, global_attention_pool, global_avg_pool, global_max_pool, linear};

/// Model input for one mini-batch.
#[derive(Clone, Debug)]
pub enum Inputs {
    Graph(GraphBatch),
    /// `G × length` fingerprint counts.
    Fingerprint(Tensor),
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Graph(b) => b.num_graphs(),
            Inputs::Fingerprint(t) => t.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct EncoderSlots {
    /// `(weight, bias-or-attention)` per message-passing layer.
    layers: Vec<(usize, usize)>,
    /// `(gate_w, gate_b, feat_w, feat_b)` for the attention readout.
    pool: Option<[usize; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
struct Slots {
    encoder: Option<EncoderSlots>,
    hidden: Vec<(usize, usize)>,
    out: (usize, usize),
    gate: Option<(usize, usize)>,
}

/// Starting value of the output bias. A positive start keeps every output
/// bin above the final ReLU at first, so no bin begins with a dead gradient.
pub const OUTPUT_BIAS_INIT: f64 = 0.1;

/// A configured network together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamSet,
    slots: Slots,
}

/// Names and shapes of every parameter, in storage order.
fn layout(config: &ModelConfig) -> Vec<(String, ParamKind, Vec<usize>)> {
    let mut out = Vec::new();
    let mut push = |name: String, kind, shape: Vec<usize>| out.push((name, kind, shape));
    let h = config.hidden_width;
    let readout_width = match config.encoder {
        Encoder::Fingerprint => config.fingerprint_length,
        Encoder::Gcn | Encoder::Gat => {
            let extra = if config.use_bond_features { BOND_FEATURE_DIM } else { 0 };
            for l in 0..config.num_layers {
                let fan_in = if l == 0 { FEATURE_DIM } else { h } + extra;
                push(format!("gnn.{l}.w"), ParamKind::Weight, vec![fan_in, h]);
                match config.encoder {
                    Encoder::Gcn => push(format!("gnn.{l}.b"), ParamKind::Bias, vec![h]),
                    _ => push(format!("gnn.{l}.a"), ParamKind::Weight, vec![2 * h, 1]),
                }
            }
            if config.pooling == Pooling::GlobalAttention {
                push("pool.gate.w".into(), ParamKind::Weight, vec![h, 1]);
                push("pool.gate.b".into(), ParamKind::Bias, vec![1]);
                push("pool.feat.w".into(), ParamKind::Weight, vec![h, h]);
                push("pool.feat.b".into(), ParamKind::Bias, vec![h]);
            }
            h
        }
    };
    let mut width = readout_width;
    for (k, &next) in config.head_hidden.iter().enumerate() {
        push(format!("head.{k}.w"), ParamKind::Weight, vec![width, next]);
        push(format!("head.{k}.b"), ParamKind::Bias, vec![next]);
        width = next;
    }
    push("head.out.w".into(), ParamKind::Weight, vec![width, config.output_dim]);
    push("head.out.b".into(), ParamKind::Bias, vec![config.output_dim]);
    if config.head == HeadKind::Glu {
        push("head.gate.w".into(), ParamKind::Weight, vec![width, config.output_dim]);
        push("head.gate.b".into(), ParamKind::Bias, vec![config.output_dim]);
    }
    out
}

fn slots_for(config: &ModelConfig, params: &ParamSet) -> Result<Slots> {
    let find = |name: &str| -> Result<usize> {
        params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    };
    let encoder = match config.encoder {
        Encoder::Fingerprint => None,
        Encoder::Gcn | Encoder::Gat => {
            let second = if config.encoder == Encoder::Gcn { "b" } else { "a" };
            let layers = (0..config.num_layers)
                .map(|l| Ok((find(&format!("gnn.{l}.w"))?, find(&format!("gnn.{l}.{second}"))?)))
                .collect::<Result<Vec<_>>>()?;
            let pool = if config.pooling == Pooling::GlobalAttention {
                Some([
                    find("pool.gate.w")?,
                    find("pool.gate.b")?,
                    find("pool.feat.w")?,
                    find("pool.feat.b")?,
                ])
            } else {
                None
            };
            Some(EncoderSlots { layers, pool })
        }
    };
    let hidden = (0..config.head_hidden.len())
        .map(|k| Ok((find(&format!("head.{k}.w"))?, find(&format!("head.{k}.b"))?)))
        .collect::<Result<Vec<_>>>()?;
    let gate = if config.head == HeadKind::Glu {
        Some((find("head.gate.w")?, find("head.gate.b")?))
    } else {
        None
    };
    Ok(Slots {
        encoder,
        hidden,
        out: (find("head.out.w")?, find("head.out.b")?),
        gate,
    })
}

impl Model {
    /// Builds a model with Glorot-uniform weights and zero biases, except the
    /// output bias, which starts at [`OUTPUT_BIAS_INIT`].
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, kind, shape) in layout(&config) {
            let value = match kind {
                ParamKind::Bias if name == "head.out.b" => Tensor::filled(&shape, OUTPUT_BIAS_INIT),
                ParamKind::Bias => Tensor::zeros(&shape),
                ParamKind::Weight => {
                    let (fan_in, fan_out) = (shape[0], shape[1]);
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let data = (0..fan_in * fan_out)
                        .map(|_| (rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0) * limit)
                        .collect();
                    Tensor::new(shape, data)?
                }
            };
            params.push(name, kind, value);
        }
        let slots = slots_for(&config, &params)?;
        Ok(Model { config, params, slots })
    }

    /// Reassembles a model from stored parameters, checking names and shapes
    /// against the configuration.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "configuration expects {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, kind, shape), p) in expected.iter().zip(params.iter()) {
            if &p.name != name || &p.kind != kind || p.value.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` {:?} does not match expected `{name}` {shape:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        let slots = slots_for(&config, &params)?;
        Ok(Model { config, params, slots })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout_rate {rate} outside [0, 1)")));
        }
        self.config.dropout_rate = rate;
        Ok(())
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    /// Packs molecules into the input form this model consumes.
    pub fn inputs(&self, graphs: &[&MoleculeGraph]) -> Result<Inputs> {
        if graphs.is_empty() {
            return Err(Error::Data("no molecules to encode".into()));
        }
        for g in graphs {
            if g.schema_version() != self.config.schema_version {
                return Err(Error::Config(format!(
                    "molecule features use schema {} but the model expects {}",
                    g.schema_version(),
                    self.config.schema_version
                )));
            }
        }
        Ok(match self.config.encoder {
            Encoder::Fingerprint => {
                let len = self.config.fingerprint_length;
                let mut data = Vec::with_capacity(graphs.len() * len);
                for g in graphs {
                    let fp = circular_fingerprint(g, self.config.fingerprint_radius, len);
                    data.extend(fp.into_iter().map(f64::from));
                }
                Inputs::Fingerprint(Tensor::new(vec![graphs.len(), len], data)?)
            }
            Encoder::Gcn | Encoder::Gat => Inputs::Graph(GraphBatch::new(graphs)?),
        })
    }

    /// Records the network on `tape` and returns the `G × output_dim` head
    /// output. `vars` are the parameter leaves in [`ParamSet`] order.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &Inputs,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        if vars.len() != self.params.len() {
            return Err(Error::shape("forward", &[vars.len()], &[self.params.len()]));
        }
        let rate = self.config.dropout_rate;
        let mut v = match (inputs, &self.slots.encoder) {
            (Inputs::Graph(batch), Some(enc)) => {
                let mut h = tape.constant(batch.x.clone());
                let bonds = self.config.use_bond_features;
                for &(w, second) in &enc.layers {
                    h = match self.config.encoder {
                        Encoder::Gcn => gcn_layer(tape, h, batch, vars[w], vars[second], bonds)?,
                        _ => {
                            let out =
                                gat_layer(tape, h, batch, vars[w], vars[second], self.config.attention_slope, bonds)?;
                            tape.relu(out.h)
                        }
                    };
                    h = tape.dropout(h, rate, training, rng)?;
                }
                match (self.config.pooling, enc.pool) {
                    (Pooling::GlobalMax, _) => global_max_pool(tape, h, batch)?,
                    (Pooling::GlobalAvg, _) => global_avg_pool(tape, h, batch)?,
                    (Pooling::GlobalAttention, Some([gw, gb, fw, fb])) => {
                        global_attention_pool(tape, h, batch, vars[gw], vars[gb], vars[fw], vars[fb])?
                    }
                    (Pooling::GlobalAttention, None) => unreachable!("attention readout without parameters"),
                }
            }
            (Inputs::Fingerprint(fp), None) => tape.constant(fp.clone()),
            _ => {
                return Err(Error::Config(format!(
                    "inputs do not match a {} encoder",
                    self.config.encoder
                )))
            }
        };
        for &(w, b) in &self.slots.hidden {
            v = linear(tape, v, vars[w], vars[b])?;
            v = tape.relu(v);
            v = tape.dropout(v, rate, training, rng)?;
        }
        let (w, b) = self.slots.out;
        let mut y = linear(tape, v, vars[w], vars[b])?;
        if let Some((gw, gb)) = self.slots.gate {
            let gate = linear(tape, v, vars[gw], vars[gb])?;
            let gate = tape.sigmoid(gate);
            y = tape.mul(y, gate)?;
        }
        Ok(tape.relu(y))
    }

    /// Eval-mode prediction for one molecule, in the model's transform space
    /// and not normalized.
    pub fn predict(&self, graph: &MoleculeGraph) -> Result<BinnedSpectrum> {
        Ok(self.predict_batch(&[graph])?.pop().expect("one prediction"))
    }

    /// Eval-mode predictions for several molecules packed into one batch.
    pub fn predict_batch(&self, graphs: &[&MoleculeGraph]) -> Result<Vec<BinnedSpectrum>> {
        let inputs = self.inputs(graphs)?;
        let mut tape = Tape::new();
        let vars = self.params.register_frozen(&mut tape);
        // eval mode draws nothing from the generator
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &vars, &inputs, false, &mut rng)?;
        let t = tape.value(out);
        (0..t.rows())
            .map(|r| BinnedSpectrum::new(t.row(r).to_vec(), self.config.transform, false))
            .collect()
    }
}

/// Anything that maps molecules to spectra for ranking.
pub trait SpectrumPredictor: Sync {
    /// Intensity transform of the predicted spectra.
    fn transform(&self) -> Transform;

    fn predict_many(&self, graphs: &[&MoleculeGraph]) -> Result<Vec<BinnedSpectrum>>;
}

impl SpectrumPredictor for Model {
    fn transform(&self) -> Transform {
        self.config.transform
    }

    fn predict_many(&self, graphs: &[&MoleculeGraph]) -> Result<Vec<BinnedSpectrum>> {
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(32) {
            out.extend(self.predict_batch(chunk)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
