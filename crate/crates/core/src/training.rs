//! Dataset splitting, the training objective, and the fit loop with early
//! stopping.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chem::MoleculeGraph;
use crate::error::{Error, Result};
use crate::model::{Model, SpectrumPredictor};
use crate::spectrum::{cosine, BinnedSpectrum, Transform};
use crate::tensor::{l2_penalty, Adam, AdamConfig, ParamSet, Tape, Tensor, Var};

/// Guard added to the norm when normalizing predictions inside the loss.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Smallest drop of the best validation loss that counts as improvement.
    pub min_delta: f64,
    pub dropout: f64,
    pub l2_lambda: f64,
    pub seed: u64,
    pub transform: Transform,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 1000,
            patience: 15,
            min_delta: 1e-6,
            dropout: 0.5,
            l2_lambda: 1.0,
            seed: 0,
            transform: Transform::Log,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if !(self.min_delta >= 0.0) {
            return fail(format!("min_delta must be non-negative, got {}", self.min_delta));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return fail(format!("l2 lambda must be non-negative, got {}", self.l2_lambda));
        }
        if self.transform == Transform::Raw {
            return fail("training targets must use the log or sqrt transform".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys this
    /// type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "lr" | "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch" | "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" | "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "min_delta" => self.min_delta = parse(key, value)?,
            "dropout" | "dropout_rate" => self.dropout = parse(key, value)?,
            "l2" | "l2_lambda" => self.l2_lambda = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "transform" => self.transform = value.trim().parse()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lr", format!("{:?}", self.learning_rate)),
            ("batch", self.batch_size.to_string()),
            ("epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("min_delta", format!("{:?}", self.min_delta)),
            ("dropout", format!("{:?}", self.dropout)),
            ("l2", format!("{:?}", self.l2_lambda)),
            ("seed", self.seed.to_string()),
            ("transform", self.transform.to_string()),
        ]
    }
}

/// Disjoint molecule-level partition of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles `ids` with `seed`, sets aside `test_size` of them, and splits the
/// rest 4:1 into training and validation (validation gets the floor).
///
/// ```
/// let ids: Vec<String> = (0..100).map(|i| format!("M{i}")).collect();
/// let split = msgnn::training::split_dataset(&ids, 0, 7).unwrap();
/// assert_eq!((split.train.len(), split.validation.len()), (80, 20));
/// ```
pub fn split_dataset(ids: &[String], test_size: usize, seed: u64) -> Result<DatasetSplit> {
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::Data(format!("duplicate molecule id `{dup}`")));
    }
    let rest = ids.len().saturating_sub(test_size);
    if rest < 5 {
        return Err(Error::Data(format!(
            "need at least 5 molecules for training and validation, got {rest}"
        )));
    }
    let mut order: Vec<&String> = ids.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, rest) = order.split_at(test_size);
    let (validation, train) = rest.split_at(rest.len() / 5);
    let own = |v: &[&String]| v.iter().map(|s| s.to_string()).collect();
    Ok(DatasetSplit {
        train: own(train),
        validation: own(validation),
        test: own(test),
    })
}

/// One molecule with its normalized target spectrum.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub graph: MoleculeGraph,
    pub target: BinnedSpectrum,
}

/// The recorded pieces of the objective.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub mse: Var,
}

/// Records `mse(normalize(ŷ), y) + λ Σ w²` on the tape. `pred` is the raw
/// `G × 1000` head output and `target` holds unit-norm rows.
pub fn loss(
    tape: &mut Tape,
    pred: Var,
    target: Var,
    vars: &[Var],
    params: &ParamSet,
    l2_lambda: f64,
) -> Result<LossTerms> {
    let unit = tape.normalize_rows(pred, NORM_EPS)?;
    let mse = tape.mse(unit, target)?;
    let total = if l2_lambda == 0.0 {
        mse
    } else {
        let penalty = l2_penalty(tape, vars, params, l2_lambda)?;
        tape.add(mse, penalty)?
    };
    Ok(LossTerms { total, mse })
}

fn target_matrix(examples: &[&Example]) -> Result<Tensor> {
    let cols = examples[0].target.intensities().len();
    let mut data = Vec::with_capacity(examples.len() * cols);
    for e in examples {
        data.extend_from_slice(e.target.intensities());
    }
    Tensor::new(vec![examples.len(), cols], data)
}

fn check_examples(examples: &[Example], transform: Transform, what: &str) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::Data(format!("{what} set is empty")));
    }
    for e in examples {
        if e.target.transform() != transform || !e.target.is_normalized() {
            return Err(Error::Data(format!(
                "target of `{}` must be a normalized {transform} spectrum",
                e.id
            )));
        }
    }
    Ok(())
}

/// What ended a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

/// Losses after one epoch. Epochs count from 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean objective over the epoch's mini-batches, penalty included.
    pub train_loss: f64,
    /// Eval-mode MSE term over the validation set.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop: StopReason,
}

/// Tracks the best validation loss and the run of epochs without
/// improvement.
///
/// ```
/// use msgnn::training::EarlyStopping;
/// let mut stop = EarlyStopping::new(15, 1e-6);
/// assert!(!stop.observe(1, 1.0));
/// let halted = (2..=16).map(|e| stop.observe(e, 1.0)).collect::<Vec<_>>();
/// assert_eq!(halted.iter().position(|&h| h), Some(14)); // epoch 16
/// assert_eq!(stop.best_epoch(), Some(1));
/// ```
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    /// Records an epoch's validation loss; returns `true` when training
    /// should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if self.best_epoch.is_none() || loss <= self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == Some(epoch)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Eval-mode mean MSE term of `model` over `examples`, in batches.
pub fn validation_loss(model: &Model, examples: &[Example], batch_size: usize) -> Result<f64> {
    let refs: Vec<&Example> = examples.iter().collect();
    let parts = refs
        .par_chunks(batch_size.max(1))
        .map(|chunk| -> Result<f64> {
            let graphs: Vec<&MoleculeGraph> = chunk.iter().map(|e| &e.graph).collect();
            let inputs = model.inputs(&graphs)?;
            let mut tape = Tape::new();
            let vars = model.params().register_frozen(&mut tape);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let pred = model.forward(&mut tape, &vars, &inputs, false, &mut rng)?;
            let target = tape.constant(target_matrix(chunk)?);
            let terms = loss(&mut tape, pred, target, &vars, model.params(), 0.0)?;
            Ok(tape.value(terms.mse).item() * chunk.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>() / examples.len() as f64)
}

/// Trains with mini-batch Adam and early stopping on `validation`, and
/// returns the model from the best epoch.
pub fn fit(
    mut model: Model,
    train: &[Example],
    validation: &[Example],
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if model.config().transform != config.transform {
        return Err(Error::Config(format!(
            "model predicts {} spectra but training uses {}",
            model.config().transform,
            config.transform
        )));
    }
    check_examples(train, config.transform, "training")?;
    check_examples(validation, config.transform, "validation")?;
    model.set_dropout_rate(config.dropout)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
        model.params(),
    );
    let mut stopper = EarlyStopping::new(config.patience, config.min_delta);
    let mut best = model.params().clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train[i]).collect();
            let graphs: Vec<&MoleculeGraph> = batch.iter().map(|e| &e.graph).collect();
            let inputs = model.inputs(&graphs)?;
            let mut tape = Tape::new();
            let vars = model.params().register(&mut tape);
            let pred = model.forward(&mut tape, &vars, &inputs, true, &mut rng)?;
            let target = tape.constant(target_matrix(&batch)?);
            let terms = loss(&mut tape, pred, target, &vars, model.params(), config.l2_lambda)?;
            let value = tape.value(terms.total).item();
            if !value.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {value} at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            let mut grads = tape.backward(terms.total)?;
            let grads: Vec<Tensor> = vars
                .iter()
                .zip(model.params().iter())
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.value.shape())))
                .collect();
            adam.step(model.params_mut(), &grads)
                .map_err(|e| Error::Training(format!("epoch {epoch}, batch {}: {e}", b + 1)))?;
            total += value;
            batches += 1;
        }
        let val_loss = validation_loss(&model, validation, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("validation loss became {val_loss} at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            val_loss,
        };
        log::debug!("epoch {epoch}: train {:.6e} val {val_loss:.6e}", record.train_loss);
        epochs.push(record);
        let halt = stopper.observe(epoch, val_loss);
        if stopper.improved_at(epoch) {
            best = model.params().clone();
        }
        if halt {
            stop = StopReason::Patience;
            break;
        }
    }

    let report = TrainReport {
        best_epoch: stopper.best_epoch().expect("at least one epoch ran"),
        best_val_loss: stopper.best_loss(),
        epochs,
        stop,
    };
    log::info!(
        "stopped after {} epochs ({}); best epoch {} with validation loss {:.6e}",
        report.epochs.len(),
        stop.as_str(),
        report.best_epoch,
        report.best_val_loss
    );
    let model = Model::from_params(model.config().clone(), best)?;
    Ok((model, report))
}

/// Mean cosine similarity between predictions and targets. An all-zero
/// prediction scores 0.
pub fn evaluate_similarity<P: SpectrumPredictor + ?Sized>(predictor: &P, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Evaluation("cannot evaluate an empty dataset".into()));
    }
    let graphs: Vec<&MoleculeGraph> = examples.iter().map(|e| &e.graph).collect();
    let preds = predictor.predict_many(&graphs)?;
    let mut sum = 0.0;
    for (p, e) in preds.iter().zip(examples) {
        if p.transform() != e.target.transform() {
            return Err(Error::Evaluation(format!(
                "prediction for `{}` is {} but its target is {}",
                e.id,
                p.transform(),
                e.target.transform()
            )));
        }
        sum += cosine(p.intensities(), e.target.intensities()).unwrap_or(0.0);
    }
    Ok(sum / examples.len() as f64)
}

#[cfg(test)]
mod tests;
