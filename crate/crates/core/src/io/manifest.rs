//! Dataset manifests and split files, both tab-separated.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::msp::{parse_msp_str, MspRecord, Selected};
use super::{check_header, meta_value, split_meta, tsv_reader, write_meta, Meta};
use crate::chem::{parse_smiles, structure_key};
use crate::error::{Error, Result};
use crate::training::DatasetSplit;

const MANIFEST_COLUMNS: [&str; 7] = [
    "molecule_id",
    "smiles",
    "source",
    "record_index",
    "record_name",
    "precursor_type",
    "collision_energy",
];

/// One selected spectrum per molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub molecule_id: String,
    pub smiles: String,
    /// Spectral library the record comes from, relative to the manifest.
    pub source: String,
    /// Zero-based position of the record in `source`.
    pub record_index: usize,
    pub record_name: String,
    pub precursor_type: String,
    pub collision_energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub meta: Meta,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn from_selection(selected: &[Selected], source: &str, meta: Meta) -> Self {
        DatasetManifest {
            meta,
            entries: selected
                .iter()
                .map(|s| ManifestEntry {
                    molecule_id: s.molecule_id.clone(),
                    smiles: s.smiles.clone(),
                    source: source.to_string(),
                    record_index: s.record_index,
                    record_name: s.record_name.clone(),
                    precursor_type: s.precursor_type.clone(),
                    collision_energy: s.collision_energy,
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.molecule_id.clone()).collect()
    }

    /// Checks the manifest invariants: unique ids and parseable SMILES.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.molecule_id.as_str()) {
                return Err(Error::Data(format!("duplicate molecule id `{}` in manifest", e.molecule_id)));
            }
            parse_smiles(&e.smiles)
                .map_err(|err| Error::Data(format!("molecule `{}` has unparseable SMILES: {err}", e.molecule_id)))?;
        }
        Ok(())
    }

    /// The entries whose ids are in `ids`, in manifest order.
    pub fn subset(&self, ids: &[String]) -> DatasetManifest {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        DatasetManifest {
            meta: self.meta.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| wanted.contains(e.molecule_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        write_meta(&mut out, &self.meta);
        out.push_str(&MANIFEST_COLUMNS.join("\t"));
        out.push('\n');
        for e in &self.entries {
            let fields = [
                e.molecule_id.as_str(),
                &e.smiles,
                &e.source,
                &e.record_index.to_string(),
                &clean(&e.record_name),
                &clean(&e.precursor_type),
                &format!("{:?}", e.collision_energy),
            ];
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (meta, body) = split_meta(text);
        let mut reader = tsv_reader(body);
        check_header(&mut reader, &MANIFEST_COLUMNS, "manifest")?;
        let mut entries = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let field = |k: usize| row.get(k).unwrap_or("").to_string();
            let bad = |what: &str| Error::Data(format!("manifest row {}: invalid {what}", i + 1));
            entries.push(ManifestEntry {
                molecule_id: field(0),
                smiles: field(1),
                source: field(2),
                record_index: field(3).parse().map_err(|_| bad("record_index"))?,
                record_name: field(4),
                precursor_type: field(5),
                collision_energy: field(6).parse().map_err(|_| bad("collision_energy"))?,
            });
        }
        let manifest = DatasetManifest { meta, entries };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Loads the referenced library records, parsing each library once.
    /// Sources resolve relative to `base`.
    pub fn load_records(&self, base: &Path) -> Result<Vec<MspRecord>> {
        let mut libraries: HashMap<&str, Vec<MspRecord>> = HashMap::new();
        let mut out = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            if !libraries.contains_key(e.source.as_str()) {
                let path = resolve(base, &e.source);
                let text = fs::read_to_string(&path)
                    .map_err(|err| Error::Data(format!("cannot read library {}: {err}", path.display())))?;
                libraries.insert(&e.source, parse_msp_str(&text)?);
            }
            let record = libraries[e.source.as_str()].get(e.record_index).ok_or_else(|| {
                Error::Data(format!(
                    "molecule `{}` points at record {} but {} has fewer records",
                    e.molecule_id, e.record_index, e.source
                ))
            })?;
            if record.name != e.record_name {
                return Err(Error::Data(format!(
                    "molecule `{}`: record {} of {} is `{}`, expected `{}`",
                    e.molecule_id, e.record_index, e.source, record.name, e.record_name
                )));
            }
            let same = record
                .smiles
                .as_deref()
                .and_then(|s| parse_smiles(s).ok())
                .zip(parse_smiles(&e.smiles).ok())
                .is_some_and(|(a, b)| structure_key(&a) == structure_key(&b));
            if !same {
                return Err(Error::Data(format!(
                    "molecule `{}`: library record has a different structure",
                    e.molecule_id
                )));
            }
            out.push(record.clone());
        }
        Ok(out)
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub(crate) fn resolve(base: &Path, source: &str) -> PathBuf {
    let p = Path::new(source);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Renders a split as `molecule_id<TAB>subset` rows.
pub fn render_split(split: &DatasetSplit, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    write_meta(&mut out, meta);
    out.push_str("molecule_id\tsubset\n");
    for (name, ids) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        for id in ids {
            out.push_str(id);
            out.push('\t');
            out.push_str(name);
            out.push('\n');
        }
    }
    out
}

pub fn parse_split(text: &str) -> Result<(DatasetSplit, Meta)> {
    let (meta, body) = split_meta(text);
    let mut reader = tsv_reader(body);
    check_header(&mut reader, &["molecule_id", "subset"], "split file")?;
    let mut split = DatasetSplit::default();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let (id, subset) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
        if !seen.insert(id.to_string()) {
            return Err(Error::Data(format!("molecule `{id}` appears twice in the split")));
        }
        let list = match subset {
            "train" => &mut split.train,
            "validation" => &mut split.validation,
            "test" => &mut split.test,
            other => return Err(Error::Data(format!("unknown subset `{other}` for `{id}`"))),
        };
        list.push(id.to_string());
    }
    Ok((split, meta))
}

/// Seed recorded in a file's provenance lines, if any.
pub fn recorded_seed(meta: &[(String, String)]) -> Option<u64> {
    meta_value(meta, "seed").and_then(|s| s.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetManifest {
        DatasetManifest {
            meta: vec![("source".into(), "lib.msp".into())],
            entries: vec![
                ManifestEntry {
                    molecule_id: "M00000".into(),
                    smiles: "CCO".into(),
                    source: "lib.msp".into(),
                    record_index: 0,
                    record_name: "ethanol; 35 eV".into(),
                    precursor_type: "[M+H]+".into(),
                    collision_energy: 35.0,
                },
                ManifestEntry {
                    molecule_id: "M00001".into(),
                    smiles: "c1ccccc1O".into(),
                    source: "lib.msp".into(),
                    record_index: 3,
                    record_name: "phenol".into(),
                    precursor_type: "[M-H]-".into(),
                    collision_energy: 20.5,
                },
            ],
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = sample();
        let text = m.render();
        assert!(text.starts_with("# source=lib.msp\nmolecule_id\tsmiles"));
        let back = DatasetManifest::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn manifest_invariants() {
        let mut m = sample();
        m.entries[1].molecule_id = "M00000".into();
        assert!(DatasetManifest::parse(&m.render()).is_err());
        let mut m = sample();
        m.entries[0].smiles = "C1CC".into();
        assert!(matches!(DatasetManifest::parse(&m.render()), Err(Error::Data(_))));
        assert!(DatasetManifest::parse("id\tsmiles\n").is_err());
    }

    #[test]
    fn split_round_trip() {
        let split = DatasetSplit {
            train: vec!["a".into(), "b".into()],
            validation: vec!["c".into()],
            test: vec!["d".into()],
        };
        let meta = vec![("seed".to_string(), "4".to_string())];
        let (back, m) = parse_split(&render_split(&split, &meta)).unwrap();
        assert_eq!(back, split);
        assert_eq!(recorded_seed(&m), Some(4));
        assert!(parse_split("molecule_id\tsubset\na\ttrain\na\ttest\n").is_err());
        assert!(parse_split("molecule_id\tsubset\na\tholdout\n").is_err());
    }
}
