//! Trains a model on ten toy molecules and reports the training-set cosine.
//!
//! `cargo run --release --example toy_overfit -- [gat|fingerprint] [key=value ...]`

use std::time::Instant;

use msgnn::model::{Model, ModelConfig};
use msgnn::synthetic::toy_examples;
use msgnn::training::{evaluate_similarity, fit, TrainConfig};

fn main() -> msgnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut model_config = match args.next().as_deref() {
        Some("fingerprint") => ModelConfig::fingerprint_baseline(),
        _ => ModelConfig::default(),
    };
    let mut train = TrainConfig::default();
    let (mut w_scale, mut out_bias) = (1.0, 0.0);
    for arg in args {
        let (k, v) = arg.split_once('=').expect("key=value");
        if k == "out_w_scale" {
            w_scale = v.parse().unwrap();
            continue;
        }
        if k == "out_b" {
            out_bias = v.parse().unwrap();
            continue;
        }
        if !train.set(k, v)? && !model_config.set(k, v)? {
            panic!("unknown setting {k}");
        }
    }
    model_config.transform = train.transform;
    let data = toy_examples(10, 4..=8, train.transform, 7)?;
    let mut model = Model::new(model_config, train.seed)?;
    for slot in 0..model.params().len() {
        let name = model.params().get(slot).name.clone();
        let p = model.params_mut().get_mut(slot).value.data_mut();
        if name == "head.out.w" {
            p.iter_mut().for_each(|v| *v *= w_scale);
        }
        if name == "head.out.b" {
            p.iter_mut().for_each(|v| *v = out_bias);
        }
    }
    let start = Instant::now();
    let (model, report) = fit(model, &data, &data, &train)?;
    for r in report.epochs.iter().filter(|r| r.epoch % 50 == 0 || r.epoch <= 3) {
        println!("epoch {:4}  train {:.6e}  val {:.6e}", r.epoch, r.train_loss, r.val_loss);
    }
    println!(
        "stopped: {} after {} epochs, best epoch {}, {:.1?}",
        report.stop.as_str(),
        report.epochs.len(),
        report.best_epoch,
        start.elapsed()
    );
    println!("mean train cosine {:.5}", evaluate_similarity(&model, &data)?);
    let graphs: Vec<_> = data.iter().map(|e| &e.graph).collect();
    let preds = model.predict_batch(&graphs)?;
    let mut missed = 0;
    let mut dead = 0;
    for k in 0..1000 {
        let wanted = data.iter().any(|e| e.target.intensities()[k] > 0.0);
        let silent = preds.iter().all(|p| p.intensities()[k] == 0.0);
        if wanted && silent {
            dead += 1;
        }
        for (p, e) in preds.iter().zip(&data) {
            if e.target.intensities()[k] > 0.0 && p.intensities()[k] == 0.0 {
                missed += 1;
            }
        }
    }
    println!("target bins never predicted: {dead}; (molecule, bin) target peaks predicted as zero: {missed}");
    Ok(())
}
