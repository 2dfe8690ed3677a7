use rand::seq::SliceRandom;
use rand::Rng;

use super::*;
use crate::chem::{parse_smiles, AtomSpec, BondKind, Edge};
use crate::tensor::{grad_check, GradCheckOptions};

fn small(encoder: Encoder, pooling: Pooling, head: HeadKind, bonds: bool) -> ModelConfig {
    ModelConfig {
        encoder,
        num_layers: 2,
        hidden_width: 6,
        use_bond_features: bonds,
        pooling,
        head,
        head_hidden: vec![5],
        fingerprint_length: 64,
        ..ModelConfig::default()
    }
}

fn all_small_configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for encoder in [Encoder::Gcn, Encoder::Gat] {
        for pooling in [Pooling::GlobalMax, Pooling::GlobalAvg, Pooling::GlobalAttention] {
            for head in [HeadKind::Dense, HeadKind::Glu] {
                for bonds in [false, true] {
                    out.push(small(encoder, pooling, head, bonds));
                }
            }
        }
    }
    out.push(small(Encoder::Fingerprint, Pooling::GlobalMax, HeadKind::Dense, false));
    out
}

fn max_abs_diff(a: &BinnedSpectrum, b: &BinnedSpectrum) -> f64 {
    a.intensities()
        .iter()
        .zip(b.intensities())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn parameter_layout() {
    let m = Model::new(ModelConfig::default(), 1).unwrap();
    let names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names[0], "gnn.0.w");
    assert_eq!(m.params().get(0).value.shape(), &[FEATURE_DIM + 4, 64]);
    assert_eq!(m.params().by_name("gnn.3.a").unwrap().value.shape(), &[128, 1]);
    assert!(m.params().by_name("gnn.3.b").is_none());
    assert!(m.params().by_name("head.gate.w").is_some());
    let gcn = Model::new(small(Encoder::Gcn, Pooling::GlobalAttention, HeadKind::Dense, false), 1).unwrap();
    assert_eq!(gcn.params().get(0).value.shape(), &[FEATURE_DIM, 6]);
    assert_eq!(gcn.params().by_name("gnn.1.b").unwrap().kind, ParamKind::Bias);
    assert!(gcn.params().by_name("pool.feat.w").is_some());
}

#[test]
fn from_params_checks_layout() {
    let m = Model::new(ModelConfig::default(), 3).unwrap();
    let rebuilt = Model::from_params(m.config().clone(), m.params().clone()).unwrap();
    assert_eq!(rebuilt, m);
    let other = small(Encoder::Gat, Pooling::GlobalMax, HeadKind::Glu, true);
    assert!(matches!(
        Model::from_params(other, m.params().clone()),
        Err(Error::Checkpoint(_))
    ));
}

#[test]
fn schema_mismatch_is_a_config_error() {
    let config = ModelConfig {
        schema_version: 2,
        ..ModelConfig::default()
    };
    assert!(matches!(Model::new(config, 0), Err(Error::Config(_))));
}

#[test]
fn prediction_is_deterministic() {
    let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
    for config in all_small_configs() {
        let m = Model::new(config, 11).unwrap();
        let a = m.predict(&g).unwrap();
        let b = m.predict(&g).unwrap();
        assert_eq!(a.intensities(), b.intensities());
        assert_eq!(a.transform(), Transform::Log);
        assert!(!a.is_normalized());
    }
}

#[test]
fn batch_matches_single_predictions() {
    let smiles = ["CCO", "c1ccccc1", "CC(=O)Nc1ccc(O)cc1", "[NH4+]", "OCC1OC(O)C(O)C(O)C1O"];
    let graphs: Vec<MoleculeGraph> = smiles.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let refs: Vec<&MoleculeGraph> = graphs.iter().collect();
    for config in all_small_configs() {
        let m = Model::new(config, 5).unwrap();
        let batch = m.predict_batch(&refs).unwrap();
        for (g, b) in graphs.iter().zip(&batch) {
            assert!(max_abs_diff(&m.predict(g).unwrap(), b) < 1e-9);
        }
    }
}

#[test]
fn permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = parse_smiles("CN1C=NC2=C1C(=O)N(C)C(=O)N2C").unwrap();
    for config in all_small_configs() {
        let m = Model::new(config, 9).unwrap();
        let base = m.predict(&g).unwrap();
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
            perm.shuffle(&mut rng);
            let p = m.predict(&g.permute(&perm).unwrap()).unwrap();
            assert!(max_abs_diff(&base, &p) < 1e-9);
        }
    }
}

fn set_param(m: &mut Model, name: &str, f: impl Fn(usize) -> f64) {
    let slot = m.params().iter().position(|p| p.name == name).unwrap();
    let data = m.params_mut().get_mut(slot).value.data_mut();
    for (i, v) in data.iter_mut().enumerate() {
        *v = f(i);
    }
}

#[test]
fn zero_output_weights_give_relu_of_bias() {
    let g = parse_smiles("CCN").unwrap();
    for config in [
        small(Encoder::Gat, Pooling::GlobalMax, HeadKind::Dense, true),
        small(Encoder::Fingerprint, Pooling::GlobalMax, HeadKind::Dense, false),
    ] {
        let mut m = Model::new(config, 2).unwrap();
        set_param(&mut m, "head.out.w", |_| 0.0);
        set_param(&mut m, "head.out.b", |i| if i % 2 == 0 { 0.25 } else { -0.5 });
        let y = m.predict(&g).unwrap();
        for (i, &v) in y.intensities().iter().enumerate() {
            assert_eq!(v, if i % 2 == 0 { 0.25 } else { 0.0 });
        }
    }
}

#[test]
fn closed_gate_silences_output() {
    let g = parse_smiles("c1ccccc1O").unwrap();
    let mut m = Model::new(small(Encoder::Gat, Pooling::GlobalAvg, HeadKind::Glu, false), 2).unwrap();
    set_param(&mut m, "head.gate.w", |_| 0.0);
    set_param(&mut m, "head.gate.b", |_| -60.0);
    let y = m.predict(&g).unwrap();
    assert!(y.intensities().iter().all(|&v| v < 1e-20));
}

#[test]
fn outputs_are_non_negative() {
    let pool = ["CCO", "c1ccncc1", "CC(=O)O", "N#CC=C", "OP(=O)(O)O", "C1CC1Cl"];
    let configs = all_small_configs();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..1000u64 {
        let config = configs[trial as usize % configs.len()].clone();
        let m = Model::new(config, trial).unwrap();
        let g = parse_smiles(pool[rng.gen_range(0..pool.len())]).unwrap();
        assert!(m.predict(&g).unwrap().intensities().iter().all(|&v| v >= 0.0));
    }
}

fn with_bond(kind: BondKind) -> MoleculeGraph {
    let atoms = vec![
        AtomSpec {
            element: crate::chem::Element::C,
            charge: 0,
            hydrogens: 2,
            aromatic: false,
        };
        3
    ];
    let edges = [Edge { a: 0, b: 1, kind }, Edge { a: 1, b: 2, kind: BondKind::Single }];
    MoleculeGraph::from_parts(&atoms, &edges, "").unwrap()
}

#[test]
fn bond_kinds_matter_only_with_bond_features() {
    let (single, double) = (with_bond(BondKind::Single), with_bond(BondKind::Double));
    for encoder in [Encoder::Gcn, Encoder::Gat] {
        let plain = Model::new(small(encoder, Pooling::GlobalAvg, HeadKind::Dense, false), 3).unwrap();
        assert_eq!(plain.predict(&single).unwrap(), plain.predict(&double).unwrap());
        let bonded = Model::new(small(encoder, Pooling::GlobalAvg, HeadKind::Dense, true), 3).unwrap();
        assert_ne!(bonded.predict(&single).unwrap(), bonded.predict(&double).unwrap());
    }
}

/// `Σ c_k ŷ_k / 1000` over the model output as a function of all parameters,
/// scaled like the mean-squared training loss.
fn model_gradient_error(config: ModelConfig, smiles: &str, dropout_seed: Option<u64>) -> f64 {
    let m = Model::new(config, 21).unwrap();
    let g = parse_smiles(smiles).unwrap();
    let inputs = m.inputs(&[&g]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let weights = Tensor::new(vec![1, 1000], (0..1000).map(|_| rng.gen_range(-1.0..1.0) / 1000.0).collect()).unwrap();
    let values: Vec<Tensor> = m.params().iter().map(|p| p.value.clone()).collect();
    let report = grad_check(
        |tape, vars| {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed.unwrap_or(0));
            let y = m.forward(tape, vars, &inputs, dropout_seed.is_some(), &mut rng)?;
            let c = tape.constant(weights.clone());
            let weighted = tape.mul(y, c)?;
            Ok(tape.sum(weighted))
        },
        &values,
        &GradCheckOptions {
            max_coords_per_input: Some(12),
            skip_kinks: true,
            ..GradCheckOptions::default()
        },
    )
    .unwrap();
    assert!(report.coords_skipped * 10 <= report.coords_checked, "{report:?}");
    report.max_rel_error
}

#[test]
fn full_model_gradients_match_finite_differences() {
    // six heavy atoms
    let smiles = "CC(=O)OC=C";
    for config in all_small_configs() {
        let err = model_gradient_error(config.clone(), smiles, None);
        assert!(err < 1e-4, "{config:?}: {err}");
    }
    let config = small(Encoder::Gat, Pooling::GlobalMax, HeadKind::Glu, true);
    let err = model_gradient_error(ModelConfig { dropout_rate: 0.3, ..config }, smiles, Some(17));
    assert!(err < 1e-4, "with frozen dropout: {err}");
}

#[test]
fn gradient_suite_smoke() {
    let cases = suite::suite_cases();
    assert_eq!(cases.len(), 19);
    let gcn = &cases[0];
    let r = suite::check_case(gcn, 1, 2).unwrap();
    assert!(r.max_rel_error < suite::SUITE_TOLERANCE, "{r:?}");
}
