mod common;

use std::fs;
use std::path::Path;

use msgnn::io::reports::{read_rankings, read_recall, read_spectra};
use msgnn::io::msp::parse_msp_str;

use common::{c6h6_candidates, fixture, msgnn, ok, synthetic_library};

const SMALL: [&str; 8] = ["--set", "layers=2", "--set", "hidden_width=16", "--set", "max_epochs=4", "--set", "dropout=0"];

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = msgnn(dir, args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Reference library of every C6H6 isomer, a two-record query file and the
/// cache fixture under `cache/`.
fn c6h6_workspace(dir: &Path) {
    let candidates = c6h6_candidates();
    let named: Vec<(&str, &str)> = candidates.iter().map(|(i, s)| (i.as_str(), s.as_str())).collect();
    fs::write(dir.join("reference.msp"), synthetic_library(&named)).unwrap();
    fs::write(dir.join("query.msp"), synthetic_library(&named[..2])).unwrap();
    fs::create_dir_all(dir.join("cache")).unwrap();
    fs::copy(fixture("candidate_cache/C6H6.tsv"), dir.join("cache/C6H6.tsv")).unwrap();
}

#[test]
fn usage_and_configuration_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &[]).0, 1);
    assert_eq!(code(d, &["bogus"]).0, 1);
    assert_eq!(code(d, &["rank", "--query", "q.msp", "--candidates", "c", "-o", "r.csv"]).0, 1);
    let (c, err) = code(d, &["--set", "no_such_key=1", "gradcheck"]);
    assert_eq!(c, 1);
    assert!(err.contains("unknown setting"), "{err}");
    assert_eq!(code(d, &["--set", "layers", "gradcheck"]).0, 1);
    assert_eq!(code(d, &["--help"]).0, 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["prepare", "missing.msp", "-o", "m.tsv"]).0, 2);
    fs::write(d.join("bad.ckpt"), b"not a checkpoint").unwrap();
    let (c, err) = code(d, &["predict", "bad.ckpt", "--smiles", "CCO", "-o", "p.csv"]);
    assert_eq!(c, 2);
    assert!(err.contains("magic"), "{err}");
    let (c, err) = code(d, &["fetch-candidates", "H6C6", "--offline", "--cache", "cache"]);
    assert_eq!(c, 2);
    assert!(err.contains("Hill order"), "{err}");
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gradcheck", "--coords", "2"]);
    assert_eq!(out.lines().filter(|l| l.contains("max rel. error")).count(), 19);
    assert!(out.contains("max relative error"));
}

#[test]
fn prepare_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let library = fixture("library50.msp");
    let library = library.to_str().unwrap();
    let out = ok(d, &["prepare", library, "-o", "a.tsv"]);
    assert!(out.contains("50 records"), "{out}");
    ok(d, &["prepare", library, "-o", "b.tsv"]);
    assert_eq!(fs::read(d.join("a.tsv")).unwrap(), fs::read(d.join("b.tsv")).unwrap());
}

#[test]
fn train_predict_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let library = fixture("library50.msp");
    ok(d, &["prepare", library.to_str().unwrap(), "-o", "manifest.tsv"]);
    ok(d, &["--seed", "5", "split", "manifest.tsv", "-o", "split.tsv"]);
    for name in ["a.ckpt", "b.ckpt"] {
        let mut args = vec!["--seed", "5", "train", "manifest.tsv", "--split", "split.tsv", "-o", name];
        args.extend(SMALL);
        ok(d, &args);
    }
    assert_eq!(fs::read(d.join("a.ckpt")).unwrap(), fs::read(d.join("b.ckpt")).unwrap());
    assert!(d.join("a.log.csv").is_file());

    fs::write(d.join("molecules.txt"), "# id and SMILES\nethanol\tCCO\nc1ccccc1O\n").unwrap();
    ok(d, &["predict", "a.ckpt", "--input", "molecules.txt", "-o", "pred.csv"]);
    let (rows, _) = read_spectra(&fs::read_to_string(d.join("pred.csv")).unwrap()).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["ethanol", "S2"]);
    ok(d, &["predict", "a.ckpt", "--smiles", "CCO", "-o", "pred.msp"]);
    let records = parse_msp_str(&fs::read_to_string(d.join("pred.msp")).unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].smiles.as_deref(), Some("CCO"));
}

#[test]
fn rank_with_perfect_predictor_puts_targets_first() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    c6h6_workspace(d);
    for candidates in ["cache", "cache/C6H6.tsv"] {
        ok(d, &["rank", "--reference", "reference.msp", "--query", "query.msp", "--candidates", candidates, "-o", "r.csv"]);
        let (results, _) = read_rankings(&fs::read_to_string(d.join("r.csv")).unwrap()).unwrap();
        assert_eq!(results.len(), 2);
        for r in &results {
            assert_eq!(r.rank_of_target, 1, "{r:?}");
            assert_eq!(r.ranked.len(), 12);
        }
        assert_eq!(results[0].target_id, "benzene");
    }
}

#[test]
fn evaluate_offline_needs_a_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    c6h6_workspace(d);
    ok(d, &["prepare", "reference.msp", "-o", "manifest.tsv"]);
    let (c, err) = code(d, &["evaluate", "--reference", "reference.msp", "manifest.tsv", "--cache", "empty", "-o", "x.csv"]);
    assert_eq!(c, 2);
    assert!(err.contains("offline") && err.contains("fetch-candidates C6H6"), "{err}");

    ok(d, &[
        "evaluate", "--reference", "reference.msp", "manifest.tsv", "--cache", "cache", "--avg-size", "4,12",
        "--stratify", "both", "--stratum-size", "5", "--ks", "1,3", "-o", "recall.csv",
    ]);
    let (tables, _) = read_recall(&fs::read_to_string(d.join("recall.csv")).unwrap()).unwrap();
    let labels: Vec<&str> = tables.iter().map(|t| t.0.as_str()).collect();
    assert_eq!(
        labels,
        [
            "most_similar/m=5;avg_size=4",
            "most_similar/m=5;avg_size=12",
            "least_similar/m=5;avg_size=4",
            "least_similar/m=5;avg_size=12",
        ]
    );
    for (_, report) in &tables {
        assert_eq!(report.queries, 12);
        assert_eq!(report.recall, [1.0, 1.0]);
    }
}

#[test]
fn fetch_candidates_offline_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    c6h6_workspace(d);
    let out = ok(d, &["fetch-candidates", "C6H6", "--offline", "--cache", "cache"]);
    assert!(out.contains("C6H6: 12 candidates (cached)"), "{out}");
    let (c, err) = code(d, &["fetch-candidates", "C6H6", "C7H8", "--offline", "--cache", "cache"]);
    assert_eq!(c, 2);
    assert!(err.contains("C7H8") && err.contains("offline"), "{err}");
}

#[test]
fn report_merges_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    c6h6_workspace(d);
    ok(d, &["rank", "--reference", "reference.msp", "--query", "query.msp", "--candidates", "cache", "-o", "r.csv"]);
    ok(d, &["report", "r.csv", "-o", "out"]);
    let table = fs::read_to_string(d.join("out/recall_table.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("r,rankings,1,1.0,")), "{table}");
    fs::write(d.join("s.csv"), "id,smiles,transform,bin,intensity\n").unwrap();
    assert_eq!(code(d, &["report", "s.csv", "-o", "out"]).0, 2);
}
