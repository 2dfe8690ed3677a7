use super::*;
use crate::model::{Encoder, HeadKind, ModelConfig, Pooling};
use crate::ranking::ReferencePredictor;
use crate::spectrum::NUM_BINS;
use crate::synthetic::toy_examples;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("M{i:05}")).collect()
}

#[test]
fn split_sizes() {
    let s = split_dataset(&ids(100), 0, 1).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 20, 0));
    let s = split_dataset(&ids(7727), 0, 1).unwrap();
    assert_eq!((s.train.len(), s.validation.len()), (6182, 1545));
    let s = split_dataset(&ids(1100), 100, 1).unwrap();
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (800, 200, 100));
}

#[test]
fn split_is_a_seeded_partition() {
    let all = ids(57);
    let a = split_dataset(&all, 7, 42).unwrap();
    assert_eq!(a, split_dataset(&all, 7, 42).unwrap());
    assert_ne!(a, split_dataset(&all, 7, 43).unwrap());
    let mut union: Vec<String> = a.train.iter().chain(&a.validation).chain(&a.test).cloned().collect();
    union.sort();
    assert_eq!(union, all);
}

#[test]
fn split_errors() {
    assert!(matches!(split_dataset(&ids(4), 0, 0), Err(Error::Data(_))));
    assert!(split_dataset(&ids(10), 6, 0).is_err());
    let mut dup = ids(6);
    dup[5] = dup[0].clone();
    assert!(split_dataset(&dup, 0, 0).is_err());
}

fn loss_values(pred: Vec<f64>, target: Vec<f64>, lambda: f64) -> (f64, f64) {
    let mut params = ParamSet::new();
    params.push("w", crate::tensor::ParamKind::Weight, Tensor::vector(vec![3.0]));
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let p = tape.param(Tensor::new(vec![1, pred.len()], pred).unwrap());
    let t = tape.constant(Tensor::new(vec![1, target.len()], target).unwrap());
    let terms = loss(&mut tape, p, t, &vars, &params, lambda).unwrap();
    (tape.value(terms.total).item(), tape.value(terms.mse).item())
}

fn unit(bins: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; NUM_BINS];
    for &b in bins {
        v[b] = 1.0 / (bins.len() as f64).sqrt();
    }
    v
}

#[test]
fn loss_examples() {
    let y = unit(&[3, 40, 41]);
    let scaled: Vec<f64> = y.iter().map(|v| v * 17.5).collect();
    let (_, mse) = loss_values(scaled, y.clone(), 0.0);
    assert!(mse.abs() < 1e-9);
    let (_, mse) = loss_values(unit(&[5]), unit(&[6]), 0.0);
    assert!((mse - 2.0 / 1000.0).abs() < 1e-12);
    let (total, mse) = loss_values(unit(&[5]), unit(&[6]), 0.0);
    assert_eq!(total, mse);
    let (total, mse) = loss_values(unit(&[5]), unit(&[6]), 1.0);
    assert!((total - mse - 9.0).abs() < 1e-12);
}

#[test]
fn zero_prediction_has_finite_loss_and_gradient() {
    let mut tape = Tape::new();
    let p = tape.param(Tensor::zeros(&[1, NUM_BINS]));
    let t = tape.constant(Tensor::new(vec![1, NUM_BINS], unit(&[1])).unwrap());
    let terms = loss(&mut tape, p, t, &[], &ParamSet::new(), 0.0).unwrap();
    assert!((tape.value(terms.mse).item() - 1.0 / 1000.0).abs() < 1e-15);
    let grads = tape.backward(terms.total).unwrap();
    assert!(grads.get(p).unwrap().is_finite());
}

#[test]
fn patience_rule() {
    let mut stop = EarlyStopping::new(15, 1e-6);
    let mut halted_at = None;
    for epoch in 1..=100 {
        if stop.observe(epoch, 1.0) {
            halted_at = Some(epoch);
            break;
        }
    }
    assert_eq!(halted_at, Some(16));
    assert_eq!(stop.best_epoch(), Some(1));

    let mut stop = EarlyStopping::new(15, 1e-6);
    assert!((1..=1000).all(|e| !stop.observe(e, 10.0 - e as f64 * 1e-3)));
    assert_eq!(stop.best_epoch(), Some(1000));

    // improvements smaller than min_delta do not reset the window
    let mut stop = EarlyStopping::new(3, 1e-6);
    let verdicts: Vec<bool> = [1.0, 1.0 - 5e-7, 1.0 - 9e-7, 1.0 - 2e-6]
        .iter()
        .enumerate()
        .map(|(i, &l)| stop.observe(i + 1, l))
        .collect();
    assert_eq!(verdicts, [false, false, false, false]);
    assert_eq!(stop.best_epoch(), Some(4));
}

#[test]
fn config_pairs_round_trip() {
    let mut c = TrainConfig {
        learning_rate: 3e-4,
        seed: 9,
        transform: Transform::Sqrt,
        ..TrainConfig::default()
    };
    let pairs = c.to_pairs();
    let mut d = TrainConfig::default();
    for (k, v) in &pairs {
        assert!(d.set(k, v).unwrap());
    }
    assert_eq!(c, d);
    assert!(!c.set("layers", "3").unwrap());
    c.patience = 0;
    assert!(c.validate().is_err());
}

fn tiny_model(transform: Transform) -> Model {
    let config = ModelConfig {
        encoder: Encoder::Gcn,
        num_layers: 2,
        hidden_width: 16,
        pooling: Pooling::GlobalAvg,
        head: HeadKind::Dense,
        head_hidden: vec![32],
        transform,
        ..ModelConfig::default()
    };
    Model::new(config, 3).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 6,
        batch_size: 4,
        l2_lambda: 1e-4,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn fit_is_reproducible() {
    let data = toy_examples(10, 4..=7, Transform::Log, 1).unwrap();
    let (train, val) = data.split_at(8);
    let (m1, r1) = fit(tiny_model(Transform::Log), train, val, &quick_config()).unwrap();
    let (m2, r2) = fit(tiny_model(Transform::Log), train, val, &quick_config()).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(m1.params(), m2.params());
    assert_eq!(r1.epochs.len(), 6);
    assert_eq!(r1.stop, StopReason::MaxEpochs);
}

#[test]
fn fit_returns_the_best_epoch() {
    let data = toy_examples(10, 4..=7, Transform::Log, 2).unwrap();
    let (train, val) = data.split_at(8);
    let config = TrainConfig {
        max_epochs: 40,
        patience: 3,
        ..quick_config()
    };
    let (model, report) = fit(tiny_model(Transform::Log), train, val, &config).unwrap();
    let min = report.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert!(report.best_val_loss <= min + 1e-6);
    let again = validation_loss(&model, val, 4).unwrap();
    assert_eq!(again, report.epochs[report.best_epoch - 1].val_loss);
}

#[test]
fn first_epoch_reduces_the_loss() {
    let data = toy_examples(10, 4..=8, Transform::Log, 7).unwrap();
    let model = tiny_model(Transform::Log);
    let before = validation_loss(&model, &data, 32).unwrap();
    let config = TrainConfig {
        max_epochs: 1,
        dropout: 0.0,
        l2_lambda: 0.0,
        ..quick_config()
    };
    let (_, report) = fit(model, &data, &data, &config).unwrap();
    assert!(report.epochs[0].val_loss < before, "{before} -> {:?}", report.epochs[0]);
}

#[test]
fn fit_checks_inputs() {
    let data = toy_examples(6, 4..=6, Transform::Log, 3).unwrap();
    let model = tiny_model(Transform::Log);
    assert!(fit(model.clone(), &data, &[], &quick_config()).is_err());
    let sqrt = TrainConfig {
        transform: Transform::Sqrt,
        ..quick_config()
    };
    assert!(matches!(fit(model.clone(), &data, &data, &sqrt), Err(Error::Config(_))));
    let raw_target = Example {
        target: BinnedSpectrum::new(vec![1.0; NUM_BINS], Transform::Log, false).unwrap(),
        ..data[0].clone()
    };
    assert!(matches!(
        fit(model, &[raw_target], &data, &quick_config()),
        Err(Error::Data(_))
    ));
}

#[test]
fn divergence_reports_epoch_and_batch() {
    let data = toy_examples(6, 4..=6, Transform::Log, 3).unwrap();
    let config = TrainConfig {
        learning_rate: 1e200,
        ..quick_config()
    };
    match fit(tiny_model(Transform::Log), &data, &data, &config) {
        Err(Error::Training(msg)) => assert!(msg.contains("epoch") && msg.contains("batch"), "{msg}"),
        other => panic!("expected a training error, got {other:?}"),
    }
}

#[test]
fn similarity_examples() {
    let data = toy_examples(4, 4..=6, Transform::Log, 4).unwrap();
    let mut perfect = ReferencePredictor::new(Transform::Log);
    for e in &data {
        perfect.insert(&e.graph, e.target.scaled(3.0).unwrap()).unwrap();
    }
    assert!((evaluate_similarity(&perfect, &data).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(evaluate_similarity(&perfect, &[]), Err(Error::Evaluation(_))));

    // one exact prediction and one orthogonal prediction
    let mut half = ReferencePredictor::new(Transform::Log);
    let a = Example {
        target: BinnedSpectrum::new(unit(&[10]), Transform::Log, true).unwrap(),
        ..data[0].clone()
    };
    let b = Example {
        target: BinnedSpectrum::new(unit(&[20]), Transform::Log, true).unwrap(),
        ..data[1].clone()
    };
    half.insert(&a.graph, a.target.clone()).unwrap();
    half.insert(&b.graph, BinnedSpectrum::new(unit(&[30]), Transform::Log, false).unwrap())
        .unwrap();
    assert!((evaluate_similarity(&half, &[a, b]).unwrap() - 0.5).abs() < 1e-15);
}
