//! NIST-style MSP spectral libraries.
//!
//! A record is a block of `Key: value` header lines, a `Num Peaks:` line and
//! that many peak entries. Blocks are separated by blank lines. Peak entries
//! are `mz intensity` pairs separated by whitespace, and several pairs may
//! share a line when separated by `;`. A trailing quoted annotation on a peak
//! line is ignored.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;

use thiserror::Error;

use crate::chem::{parse_smiles, structure_key};
use crate::spectrum::{Peak, PeakList};

#[derive(Debug, Error)]
#[error("line {line}: {kind}")]
pub struct MspError {
    /// 1-based line number where the problem was detected.
    pub line: usize,
    pub kind: MspErrorKind,
}

#[derive(Debug, Error)]
pub enum MspErrorKind {
    #[error("record `{name}` declares {declared} peaks but lists {found}")]
    PeakCountMismatch {
        name: String,
        declared: usize,
        found: usize,
    },
    #[error("malformed peak entry `{0}`")]
    MalformedPeak(String),
    #[error("invalid `Num Peaks` value `{0}`")]
    BadPeakCount(String),
    #[error("header line without a colon: `{0}`")]
    BadHeader(String),
    #[error("record has no `Name` header")]
    MissingName,
    #[error("record `{0}` has no `Num Peaks` header")]
    MissingPeakCount(String),
    #[error("read failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MspRecord {
    pub name: String,
    pub precursor_mz: Option<f64>,
    pub precursor_type: Option<String>,
    /// Collision energy in eV.
    pub collision_energy: Option<f64>,
    pub smiles: Option<String>,
    pub inchi: Option<String>,
    /// Header lines this parser does not interpret, in file order.
    pub extra: Vec<(String, String)>,
    pub peaks: Vec<Peak>,
}

impl MspRecord {
    pub fn new(name: impl Into<String>, peaks: Vec<Peak>) -> Self {
        MspRecord {
            name: name.into(),
            precursor_mz: None,
            precursor_type: None,
            collision_energy: None,
            smiles: None,
            inchi: None,
            extra: Vec::new(),
            peaks,
        }
    }

    pub fn num_peaks(&self) -> usize {
        self.peaks.len()
    }

    pub fn peak_list(&self) -> crate::Result<PeakList> {
        PeakList::new(self.peaks.clone())
    }
}

fn normalize_key(key: &str) -> String {
    key.trim()
        .chars()
        .filter(|c| !matches!(c, '_' | ' ' | '-'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Reads the number in front of an optional `eV` unit, e.g. `35`, `35 eV`, `35.0eV`.
fn parse_energy(value: &str) -> Option<f64> {
    let v = value.trim();
    let v = v
        .strip_suffix("eV")
        .or_else(|| v.strip_suffix("ev"))
        .or_else(|| v.strip_suffix("EV"))
        .unwrap_or(v)
        .trim();
    v.parse::<f64>().ok().filter(|e| e.is_finite())
}

/// Pulls `SMILES=...` out of a free-text comment field, as written by NIST
/// and MoNA exports.
fn smiles_from_comment(comment: &str) -> Option<String> {
    for token in comment.split('"') {
        let token = token.trim();
        if let Some(s) = token.strip_prefix("SMILES=").or_else(|| token.strip_prefix("computed SMILES=")) {
            let s = s.split_whitespace().next().unwrap_or("");
            if !s.is_empty() {
                return Some(s.to_string());
            }
        }
    }
    None
}

fn parse_peak_entries(line: &str, lineno: usize, out: &mut Vec<Peak>) -> Result<(), MspError> {
    let malformed = || MspError {
        line: lineno,
        kind: MspErrorKind::MalformedPeak(line.trim().to_string()),
    };
    let body = match line.find('"') {
        Some(q) => &line[..q],
        None => line,
    };
    for entry in body.split(';') {
        let mut fields = entry.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty());
        let Some(mz) = fields.next() else { continue };
        let intensity = fields.next().ok_or_else(malformed)?;
        if fields.next().is_some() {
            return Err(malformed());
        }
        let mz: f64 = mz.parse().map_err(|_| malformed())?;
        let intensity: f64 = intensity.parse().map_err(|_| malformed())?;
        if !(mz > 0.0 && mz.is_finite() && intensity >= 0.0 && intensity.is_finite()) {
            return Err(malformed());
        }
        out.push(Peak { mz, intensity });
    }
    Ok(())
}

struct Pending {
    record: MspRecord,
    has_name: bool,
    declared: Option<usize>,
    start_line: usize,
}

impl Pending {
    fn new(start_line: usize) -> Self {
        Pending {
            record: MspRecord::new("", Vec::new()),
            has_name: false,
            declared: None,
            start_line,
        }
    }

    fn finish(mut self, end_line: usize) -> Result<MspRecord, MspError> {
        if !self.has_name {
            return Err(MspError {
                line: self.start_line,
                kind: MspErrorKind::MissingName,
            });
        }
        let Some(declared) = self.declared else {
            return Err(MspError {
                line: self.start_line,
                kind: MspErrorKind::MissingPeakCount(self.record.name),
            });
        };
        if declared != self.record.peaks.len() {
            return Err(MspError {
                line: end_line,
                kind: MspErrorKind::PeakCountMismatch {
                    name: self.record.name,
                    declared,
                    found: self.record.peaks.len(),
                },
            });
        }
        if self.record.smiles.is_none() {
            self.record.smiles = self
                .record
                .extra
                .iter()
                .filter(|(k, _)| normalize_key(k) == "comments" || normalize_key(k) == "comment")
                .find_map(|(_, v)| smiles_from_comment(v));
        }
        Ok(self.record)
    }
}

/// Parses every record of an MSP library.
pub fn parse_msp<R: BufRead>(reader: R) -> Result<Vec<MspRecord>, MspError> {
    let mut records = Vec::new();
    let mut pending: Option<Pending> = None;
    let mut last_line = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.map_err(|e| MspError {
            line: lineno,
            kind: MspErrorKind::Io(e),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if let Some(p) = pending.take() {
                records.push(p.finish(lineno - 1)?);
            }
            continue;
        }
        if trimmed.starts_with('#') && pending.is_none() {
            continue;
        }
        let in_peaks = pending.as_ref().is_some_and(|p| p.declared.is_some());
        if in_peaks && !is_name_line(trimmed) {
            let p = pending.as_mut().expect("pending record");
            parse_peak_entries(trimmed, lineno, &mut p.record.peaks)?;
            continue;
        }
        if is_name_line(trimmed) {
            if let Some(p) = pending.take() {
                records.push(p.finish(lineno - 1)?);
            }
        }
        let p = pending.get_or_insert_with(|| Pending::new(lineno));
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(MspError {
                line: lineno,
                kind: MspErrorKind::BadHeader(trimmed.to_string()),
            });
        };
        let value = value.trim();
        match normalize_key(key).as_str() {
            "name" => {
                p.record.name = value.to_string();
                p.has_name = true;
            }
            "numpeaks" => {
                let n = value.parse::<usize>().map_err(|_| MspError {
                    line: lineno,
                    kind: MspErrorKind::BadPeakCount(value.to_string()),
                })?;
                p.declared = Some(n);
            }
            "precursormz" if value.parse::<f64>().is_ok() => {
                p.record.precursor_mz = value.parse().ok();
            }
            "precursortype" => p.record.precursor_type = Some(value.to_string()),
            "collisionenergy" if parse_energy(value).is_some() => {
                p.record.collision_energy = parse_energy(value);
            }
            "smiles" => p.record.smiles = Some(value.to_string()),
            "inchi" => p.record.inchi = Some(value.to_string()),
            _ => p.record.extra.push((key.trim().to_string(), value.to_string())),
        }
    }
    if let Some(p) = pending.take() {
        records.push(p.finish(last_line)?);
    }
    Ok(records)
}

pub fn parse_msp_str(text: &str) -> Result<Vec<MspRecord>, MspError> {
    parse_msp(text.as_bytes())
}

fn is_name_line(line: &str) -> bool {
    line.split_once(':').is_some_and(|(k, _)| normalize_key(k) == "name")
}

/// Renders records in the layout [`parse_msp`] reads.
pub fn render_msp(records: &[MspRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{}", DisplayRecord(r));
    }
    out
}

struct DisplayRecord<'a>(&'a MspRecord);

impl fmt::Display for DisplayRecord<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        writeln!(f, "Name: {}", r.name)?;
        if let Some(t) = &r.precursor_type {
            writeln!(f, "Precursor_type: {t}")?;
        }
        if let Some(mz) = r.precursor_mz {
            writeln!(f, "PrecursorMZ: {mz:?}")?;
        }
        if let Some(e) = r.collision_energy {
            writeln!(f, "Collision_energy: {e:?}")?;
        }
        if let Some(s) = &r.smiles {
            writeln!(f, "SMILES: {s}")?;
        }
        if let Some(s) = &r.inchi {
            writeln!(f, "InChI: {s}")?;
        }
        for (k, v) in &r.extra {
            writeln!(f, "{k}: {v}")?;
        }
        writeln!(f, "Num Peaks: {}", r.peaks.len())?;
        for p in &r.peaks {
            writeln!(f, "{:?} {:?}", p.mz, p.intensity)?;
        }
        Ok(())
    }
}

/// Which spectra to keep per molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRules {
    /// Spectra must have a collision energy strictly below this, in eV.
    pub max_energy: f64,
    /// Accepted precursor types, compared verbatim after trimming.
    pub precursor_types: Vec<String>,
}

impl Default for SelectionRules {
    fn default() -> Self {
        SelectionRules {
            max_energy: 40.0,
            precursor_types: vec!["[M+H]+".into(), "[M-H]-".into()],
        }
    }
}

/// One chosen spectrum per molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct Selected {
    pub molecule_id: String,
    pub smiles: String,
    /// Position of the chosen record in the library.
    pub record_index: usize,
    pub record_name: String,
    pub precursor_type: String,
    pub collision_energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionStats {
    pub records: usize,
    pub molecules: usize,
    pub kept: usize,
    /// Records without a SMILES that parses.
    pub unparseable: usize,
    /// Molecules with no spectrum passing the rules.
    pub dropped_molecules: usize,
    /// Molecules where several spectra shared the maximal energy.
    pub ties: usize,
}

/// Groups records by molecular structure and keeps, per molecule, the
/// spectrum with the largest collision energy below the cap among the
/// allowed precursor types. Ties go to the earliest record.
///
/// Molecule ids are assigned in order of first appearance, so the result
/// depends only on the library contents.
pub fn select_spectra(records: &[MspRecord], rules: &SelectionRules) -> (Vec<Selected>, SelectionStats) {
    let mut stats = SelectionStats {
        records: records.len(),
        ..Default::default()
    };
    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, (String, Vec<usize>)> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let Some(graph) = r.smiles.as_deref().and_then(|s| parse_smiles(s).ok()) else {
            stats.unparseable += 1;
            continue;
        };
        let key = structure_key(&graph);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                (r.smiles.clone().unwrap_or_default(), Vec::new())
            })
            .1
            .push(i);
    }
    stats.molecules = order.len();

    let allowed = |t: &Option<String>| {
        t.as_deref()
            .is_some_and(|t| rules.precursor_types.iter().any(|a| a.trim() == t.trim()))
    };
    let mut out = Vec::new();
    for key in order {
        let (smiles, members) = &groups[&key];
        let mut best: Option<(usize, f64)> = None;
        let mut tied = false;
        for &i in members {
            let r = &records[i];
            let Some(e) = r.collision_energy else { continue };
            if !(e < rules.max_energy) || !allowed(&r.precursor_type) {
                continue;
            }
            match best {
                Some((_, b)) if e == b => tied = true,
                Some((_, b)) if e < b => {}
                _ => {
                    best = Some((i, e));
                    tied = false;
                }
            }
        }
        let Some((i, e)) = best else {
            stats.dropped_molecules += 1;
            continue;
        };
        if tied {
            stats.ties += 1;
            log::info!("several spectra of {smiles} share energy {e} eV; keeping record {i}");
        }
        out.push(Selected {
            molecule_id: format!("M{:05}", out.len() + stats.dropped_molecules),
            smiles: smiles.clone(),
            record_index: i,
            record_name: records[i].name.clone(),
            precursor_type: records[i].precursor_type.clone().unwrap_or_default(),
            collision_energy: e,
        });
    }
    stats.kept = out.len();
    (out, stats)
}
