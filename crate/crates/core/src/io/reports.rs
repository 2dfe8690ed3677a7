//! CSV reports: predicted spectra, rankings, recall tables and training
//! logs. Each file starts with `# key=value` provenance lines.

use std::collections::BTreeMap;

use super::msp::{render_msp, MspRecord};
use super::{check_header, csv_reader, meta_value, split_meta, write_meta, Meta};
use crate::error::{Error, Result};
use crate::ranking::{RankingResult, RecallReport, ScoredCandidate};
use crate::spectrum::{BinnedSpectrum, Peak, Transform, NUM_BINS};
use crate::training::EpochRecord;

pub const SPECTRUM_COLUMNS: [&str; 5] = ["id", "smiles", "transform", "bin", "intensity"];
pub const RANKING_COLUMNS: [&str; 6] = ["query_id", "candidate_id", "rank", "score", "is_target", "rank_of_target"];
pub const RECALL_COLUMNS: [&str; 5] = ["setting", "k", "recall", "average_rank", "queries"];
pub const TRAINING_COLUMNS: [&str; 3] = ["epoch", "train_loss", "val_loss"];

/// A CSV file's kind, told apart by its header row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    Spectrum,
    Ranking,
    Recall,
    Training,
}

pub fn detect_kind(text: &str) -> Option<ReportKind> {
    let (_, body) = split_meta(text);
    let header: Vec<String> = csv_reader(body).headers().ok()?.iter().map(str::to_string).collect();
    [
        (&SPECTRUM_COLUMNS[..], ReportKind::Spectrum),
        (&RANKING_COLUMNS[..], ReportKind::Ranking),
        (&RECALL_COLUMNS[..], ReportKind::Recall),
        (&TRAINING_COLUMNS[..], ReportKind::Training),
    ]
    .into_iter()
    .find(|(cols, _)| header.iter().map(String::as_str).eq(cols.iter().copied()))
    .map(|(_, kind)| kind)
}

fn finish(meta: &[(String, String)], header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut out = String::new();
    write_meta(&mut out, meta);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("CSV of UTF-8 fields"));
    Ok(out)
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, what: &str, line: usize) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Data(format!("row {line}: invalid {what} `{}`", row.get(i).unwrap_or(""))))
}

/// One predicted spectrum with the molecule it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub id: String,
    pub smiles: String,
    pub spectrum: BinnedSpectrum,
}

/// Writes the non-zero bins of each spectrum, one row per bin.
pub fn write_spectra(rows: &[SpectrumRow], meta: &[(String, String)]) -> Result<String> {
    let mut meta = meta.to_vec();
    let normalized = rows.iter().all(|r| r.spectrum.is_normalized());
    meta.push(("normalized".into(), normalized.to_string()));
    let mut out = Vec::new();
    for r in rows {
        for (bin, &v) in r.spectrum.intensities().iter().enumerate() {
            if v != 0.0 {
                out.push(vec![
                    r.id.clone(),
                    r.smiles.clone(),
                    r.spectrum.transform().to_string(),
                    bin.to_string(),
                    format!("{v:?}"),
                ]);
            }
        }
    }
    finish(&meta, &SPECTRUM_COLUMNS, out)
}

/// Rows of one id must be contiguous. A molecule whose spectrum is all
/// zero has no rows and is not recovered.
pub fn read_spectra(text: &str) -> Result<(Vec<SpectrumRow>, Meta)> {
    let (meta, body) = split_meta(text);
    let normalized = meta_value(&meta, "normalized") == Some("true");
    let mut reader = csv_reader(body);
    check_header(&mut reader, &SPECTRUM_COLUMNS, "spectrum CSV")?;
    let mut out: Vec<(String, String, Transform, Vec<f64>)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let (id, smiles) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
        let transform: Transform = field(&row, 2, "transform", line)?;
        let bin: usize = field(&row, 3, "bin", line)?;
        let value: f64 = field(&row, 4, "intensity", line)?;
        if bin >= NUM_BINS {
            return Err(Error::Data(format!("row {line}: bin {bin} is out of range")));
        }
        match out.last_mut() {
            Some(last) if last.0 == id => last.3[bin] = value,
            _ => {
                if out.iter().any(|o| o.0 == id) {
                    return Err(Error::Data(format!("row {line}: rows for `{id}` are not contiguous")));
                }
                let mut bins = vec![0.0; NUM_BINS];
                bins[bin] = value;
                out.push((id.to_string(), smiles.to_string(), transform, bins));
            }
        }
    }
    let rows = out
        .into_iter()
        .map(|(id, smiles, transform, bins)| {
            Ok(SpectrumRow {
                id,
                smiles,
                spectrum: BinnedSpectrum::new(bins, transform, normalized)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((rows, meta))
}

/// Predicted spectra as MSP records, each non-zero bin placed at its centre.
pub fn spectra_to_msp(rows: &[SpectrumRow]) -> String {
    let records: Vec<MspRecord> = rows
        .iter()
        .map(|r| {
            let peaks = r
                .spectrum
                .intensities()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(b, &v)| Peak {
                    mz: b as f64 + 0.5,
                    intensity: v,
                })
                .collect();
            let mut rec = MspRecord::new(r.id.clone(), peaks);
            rec.smiles = Some(r.smiles.clone());
            rec.extra.push(("Transform".into(), r.spectrum.transform().to_string()));
            rec
        })
        .collect();
    render_msp(&records)
}

/// One row per candidate, in ranked order.
pub fn write_rankings(results: &[RankingResult], meta: &[(String, String)]) -> Result<String> {
    let mut rows = Vec::new();
    for r in results {
        for (i, c) in r.ranked.iter().enumerate() {
            rows.push(vec![
                r.query_id.clone(),
                c.id.clone(),
                (i + 1).to_string(),
                format!("{:?}", c.score),
                (c.id == r.target_id).to_string(),
                r.rank_of_target.to_string(),
            ]);
        }
    }
    finish(meta, &RANKING_COLUMNS, rows)
}

/// Excluded-candidate counts are not stored and read back as zero.
pub fn read_rankings(text: &str) -> Result<(Vec<RankingResult>, Meta)> {
    let (meta, body) = split_meta(text);
    let mut reader = csv_reader(body);
    check_header(&mut reader, &RANKING_COLUMNS, "ranking CSV")?;
    let mut out: Vec<RankingResult> = Vec::new();
    let mut targets: Vec<Option<String>> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let query = row.get(0).unwrap_or("").to_string();
        let id = row.get(1).unwrap_or("").to_string();
        let score: f64 = field(&row, 3, "score", line)?;
        let is_target: bool = field(&row, 4, "is_target", line)?;
        let rank_of_target: usize = field(&row, 5, "rank_of_target", line)?;
        if out.last().is_none_or(|r| r.query_id != query) {
            out.push(RankingResult {
                query_id: query,
                target_id: String::new(),
                ranked: Vec::new(),
                rank_of_target,
                excluded: 0,
            });
            targets.push(None);
        }
        let (r, t) = (out.last_mut().expect("pushed"), targets.last_mut().expect("pushed"));
        if is_target {
            if t.is_some() {
                return Err(Error::Data(format!("row {line}: query `{}` has two targets", r.query_id)));
            }
            *t = Some(id.clone());
        }
        r.ranked.push(ScoredCandidate { id, score });
    }
    for (r, t) in out.iter_mut().zip(targets) {
        r.target_id = t.ok_or_else(|| Error::Data(format!("query `{}` has no target row", r.query_id)))?;
    }
    Ok((out, meta))
}

/// Recall tables for one or more labelled settings, one row per k.
pub fn write_recall(reports: &[(String, RecallReport)], meta: &[(String, String)]) -> Result<String> {
    let mut rows = Vec::new();
    for (label, r) in reports {
        for (k, recall) in r.ks.iter().zip(&r.recall) {
            rows.push(vec![
                label.clone(),
                k.to_string(),
                format!("{recall:?}"),
                format!("{:?}", r.average_rank),
                r.queries.to_string(),
            ]);
        }
    }
    finish(meta, &RECALL_COLUMNS, rows)
}

pub fn read_recall(text: &str) -> Result<(Vec<(String, RecallReport)>, Meta)> {
    let (meta, body) = split_meta(text);
    let mut reader = csv_reader(body);
    check_header(&mut reader, &RECALL_COLUMNS, "recall CSV")?;
    let mut out: Vec<(String, RecallReport)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let label = row.get(0).unwrap_or("").to_string();
        let k: usize = field(&row, 1, "k", line)?;
        let recall: f64 = field(&row, 2, "recall", line)?;
        let average_rank: f64 = field(&row, 3, "average_rank", line)?;
        let queries: usize = field(&row, 4, "queries", line)?;
        match out.last_mut() {
            Some((l, r)) if *l == label => {
                r.ks.push(k);
                r.recall.push(recall);
            }
            _ => out.push((
                label,
                RecallReport {
                    ks: vec![k],
                    recall: vec![recall],
                    average_rank,
                    queries,
                },
            )),
        }
    }
    Ok((out, meta))
}

pub fn write_training_log(epochs: &[EpochRecord], meta: &[(String, String)]) -> Result<String> {
    let rows = epochs
        .iter()
        .map(|e| vec![e.epoch.to_string(), format!("{:?}", e.train_loss), format!("{:?}", e.val_loss)])
        .collect();
    finish(meta, &TRAINING_COLUMNS, rows)
}

pub fn read_training_log(text: &str) -> Result<(Vec<EpochRecord>, Meta)> {
    let (meta, body) = split_meta(text);
    let mut reader = csv_reader(body);
    check_header(&mut reader, &TRAINING_COLUMNS, "training log")?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        out.push(EpochRecord {
            epoch: field(&row, 0, "epoch", i + 1)?,
            train_loss: field(&row, 1, "train_loss", i + 1)?,
            val_loss: field(&row, 2, "val_loss", i + 1)?,
        });
    }
    Ok((out, meta))
}

/// Merges recall tables from several runs into one long table keyed by
/// run name, ready for plotting recall against k per setting.
pub fn aggregate_recall(runs: &[(String, Vec<(String, RecallReport)>)]) -> Result<String> {
    let mut rows = Vec::new();
    for (run, reports) in runs {
        for (setting, r) in reports {
            for (k, recall) in r.ks.iter().zip(&r.recall) {
                rows.push(vec![
                    run.clone(),
                    setting.clone(),
                    k.to_string(),
                    format!("{recall:?}"),
                    format!("{:?}", r.average_rank),
                    r.queries.to_string(),
                ]);
            }
        }
    }
    finish(&[], &["run", "setting", "k", "recall", "average_rank", "queries"], rows)
}

/// Merges training logs into `run, epoch, train_loss, val_loss` rows plus a
/// per-run summary of the best epoch.
pub fn aggregate_training(runs: &[(String, Vec<EpochRecord>)]) -> Result<(String, String)> {
    let mut curves = Vec::new();
    let mut best: BTreeMap<&str, (usize, f64, usize)> = BTreeMap::new();
    for (run, epochs) in runs {
        for e in epochs {
            curves.push(vec![
                run.clone(),
                e.epoch.to_string(),
                format!("{:?}", e.train_loss),
                format!("{:?}", e.val_loss),
            ]);
            let entry = best.entry(run).or_insert((e.epoch, e.val_loss, 0));
            if e.val_loss < entry.1 {
                (entry.0, entry.1) = (e.epoch, e.val_loss);
            }
            entry.2 += 1;
        }
    }
    let summary = best
        .into_iter()
        .map(|(run, (epoch, loss, n))| vec![run.to_string(), n.to_string(), epoch.to_string(), format!("{loss:?}")])
        .collect();
    Ok((
        finish(&[], &["run", "epoch", "train_loss", "val_loss"], curves)?,
        finish(&[], &["run", "epochs", "best_epoch", "best_val_loss"], summary)?,
    ))
}
