#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msgnn::chem::parse_smiles;
use msgnn::io::msp::{render_msp, MspRecord};
use msgnn::synthetic::fragment_spectrum;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Runs the binary in `dir` with an empty candidate-cache variable.
pub fn msgnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msgnn"))
        .current_dir(dir)
        .env_remove("MSGNN_CACHE_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = msgnn(dir, args);
    assert!(
        out.status.success(),
        "msgnn {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// An MSP library with one [M+H]+ 20 eV fragmenter spectrum per molecule.
pub fn synthetic_library(molecules: &[(&str, &str)]) -> String {
    let records: Vec<MspRecord> = molecules
        .iter()
        .map(|(name, smiles)| {
            let graph = parse_smiles(smiles).unwrap();
            let mut record = MspRecord::new(*name, fragment_spectrum(&graph).unwrap().peaks().to_vec());
            record.smiles = Some(smiles.to_string());
            record.precursor_type = Some("[M+H]+".into());
            record.collision_energy = Some(20.0);
            record
        })
        .collect();
    render_msp(&records)
}

/// The molecules of the C6H6 candidate-cache fixture.
pub fn c6h6_candidates() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixture("candidate_cache/C6H6.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let (id, smiles) = l.split_once('\t').unwrap();
            (id.to_string(), smiles.to_string())
        })
        .collect()
}
