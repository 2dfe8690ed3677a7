//! End-to-end gradient checks of whole models under the training loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Encoder, HeadKind, Model, ModelConfig, Pooling};
use crate::chem::to_smiles;
use crate::error::Result;
use crate::spectrum::{normalize, BinnedSpectrum};
use crate::synthetic::random_molecule;
use crate::tensor::{grad_check, GradCheckOptions, Tensor};
use crate::training::loss;

/// Pass threshold on the maximum relative error.
pub const SUITE_TOLERANCE: f64 = 1e-4;

/// Central-difference step. Smaller steps lose to roundoff because the
/// mean-squared loss and its gradients are small.
pub const SUITE_STEP: f64 = 3e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteCase {
    pub label: String,
    pub config: ModelConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub label: String,
    /// The molecules of the checked batch.
    pub smiles: Vec<String>,
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub coords_skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub cases: Vec<SuiteResult>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < SUITE_TOLERANCE
    }
}

/// GCN(3), GAT(3) and GAT(10) with a gated head, each under every readout
/// with and without bond features, plus the fingerprint baseline.
pub fn suite_cases() -> Vec<SuiteCase> {
    let mut out = Vec::new();
    let archs = [
        ("gcn3", Encoder::Gcn, 3, HeadKind::Dense),
        ("gat3", Encoder::Gat, 3, HeadKind::Dense),
        ("gat10-glu", Encoder::Gat, 10, HeadKind::Glu),
    ];
    for (name, encoder, layers, head) in archs {
        for pooling in [Pooling::GlobalMax, Pooling::GlobalAvg, Pooling::GlobalAttention] {
            for bonds in [false, true] {
                out.push(SuiteCase {
                    label: format!("{name}/{pooling}/bonds={}", if bonds { "on" } else { "off" }),
                    config: ModelConfig {
                        encoder,
                        num_layers: layers,
                        use_bond_features: bonds,
                        pooling,
                        head,
                        ..ModelConfig::default()
                    },
                });
            }
        }
    }
    out.push(SuiteCase {
        label: "fingerprint".into(),
        config: ModelConfig::fingerprint_baseline(),
    });
    out
}

/// Checks one case on a batch of two random 4 to 8 atom molecules against a
/// random unit-norm target, sampling `coords` coordinates per parameter
/// tensor.
pub fn check_case(case: &SuiteCase, seed: u64, coords: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::new(case.config.clone(), rng.gen())?;
    let graphs = [random_molecule(&mut rng, 4..=8), random_molecule(&mut rng, 4..=8)];
    let refs: Vec<_> = graphs.iter().collect();
    let inputs = model.inputs(&refs)?;
    let mut target = Vec::with_capacity(2 * case.config.output_dim);
    for _ in 0..2 {
        let raw: Vec<f64> = (0..case.config.output_dim)
            .map(|_| if rng.gen_bool(0.05) { rng.gen_range(0.0..1.0) } else { 0.0 })
            .collect();
        let spec = normalize(&BinnedSpectrum::new(raw, case.config.transform, false)?)?;
        target.extend_from_slice(spec.intensities());
    }
    let target = Tensor::new(vec![2, case.config.output_dim], target)?;
    let values: Vec<Tensor> = model.params().iter().map(|p| p.value.clone()).collect();
    let report = grad_check(
        |tape, vars| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let y = model.forward(tape, vars, &inputs, false, &mut rng)?;
            let t = tape.constant(target.clone());
            Ok(loss(tape, y, t, vars, model.params(), 0.0)?.total)
        },
        &values,
        &GradCheckOptions {
            max_coords_per_input: Some(coords),
            seed,
            skip_kinks: true,
            step: SUITE_STEP,
        },
    )?;
    Ok(SuiteResult {
        label: case.label.clone(),
        smiles: graphs.iter().map(to_smiles).collect(),
        max_rel_error: report.max_rel_error,
        coords_checked: report.coords_checked,
        coords_skipped: report.coords_skipped,
    })
}

/// Runs every case of [`suite_cases`] in parallel.
pub fn run_suite(seed: u64, coords: usize) -> Result<SuiteReport> {
    let cases = suite_cases();
    let results = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| check_case(case, seed.wrapping_add(i as u64), coords))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { cases: results })
}
