//! Candidate lists keyed by molecular formula, with an on-disk cache.
//!
//! A cache directory holds one `<formula>.tsv` per formula: `# key=value`
//! provenance lines, then an `id<TAB>smiles` header and one row per
//! compound.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{check_header, split_meta, tsv_reader, write_atomic, write_meta, Meta};
use crate::chem::{parse_smiles, skeleton_key, Formula};
use crate::error::{Error, Result};
use crate::ranking::{Candidate, CandidateSet, Provenance};

/// Somewhere candidate structures can be looked up by formula.
pub trait CandidateSource {
    /// Short description recorded in the cache, e.g. the endpoint URL.
    fn describe(&self) -> String;

    fn fetch(&self, formula: &str) -> Result<Vec<Candidate>>;
}

/// Checks that `text` is a formula written in Hill order and returns it.
pub fn validate_formula(text: &str) -> Result<Formula> {
    let formula: Formula = text.trim().parse()?;
    let canonical = formula.to_string();
    if canonical != text.trim() {
        return Err(Error::Data(format!(
            "formula `{text}` is not in Hill order (expected `{canonical}`)"
        )));
    }
    Ok(formula)
}

/// Reads an `id<TAB>smiles` candidate file.
pub fn read_candidates(path: &Path) -> Result<(Meta, Vec<Candidate>)> {
    let text = fs::read_to_string(path)?;
    let (meta, body) = split_meta(&text);
    let mut reader = tsv_reader(body);
    check_header(&mut reader, &["id", "smiles"], &format!("candidate file {}", path.display()))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push(Candidate::new(row.get(0).unwrap_or(""), row.get(1).unwrap_or("")));
    }
    Ok((meta, out))
}

#[derive(Clone, Debug)]
pub struct CandidateCache {
    dir: PathBuf,
}

impl CandidateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CandidateCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, formula: &str) -> PathBuf {
        self.dir.join(format!("{formula}.tsv"))
    }

    pub fn contains(&self, formula: &str) -> bool {
        self.path(formula).is_file()
    }

    /// The cached list for `formula`, or `None` on a miss.
    pub fn load(&self, formula: &str) -> Result<Option<(Meta, Vec<Candidate>)>> {
        match read_candidates(&self.path(formula)) {
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            other => other.map(Some),
        }
    }

    pub fn store(&self, formula: &str, candidates: &[Candidate], meta: &[(String, String)]) -> Result<()> {
        let mut text = String::new();
        write_meta(&mut text, meta);
        text.push_str("id\tsmiles\n");
        for c in candidates {
            if c.id.contains(['\t', '\n']) || c.smiles.contains(['\t', '\n']) {
                return Err(Error::Candidates(format!("candidate `{}` contains a tab or newline", c.id)));
            }
            text.push_str(&c.id);
            text.push('\t');
            text.push_str(&c.smiles);
            text.push('\n');
        }
        write_atomic(&self.path(formula), text.as_bytes())
    }
}

/// A formula's candidates and whether they came from the cache.
#[derive(Clone, Debug, PartialEq)]
pub struct Fetched {
    pub formula: String,
    pub candidates: Vec<Candidate>,
    pub from_cache: bool,
}

/// Looks `formula` up in `cache`, falling back to `source` on a miss and
/// caching what it returns. With no source the cache must already hold the
/// formula.
pub fn fetch_candidates(formula: &str, cache: &CandidateCache, source: Option<&dyn CandidateSource>) -> Result<Fetched> {
    validate_formula(formula)?;
    let formula = formula.trim();
    if let Some((_, candidates)) = cache.load(formula)? {
        if candidates.is_empty() {
            return Err(Error::Candidates(format!("no candidates for {formula} in the cache")));
        }
        return Ok(Fetched {
            formula: formula.to_string(),
            candidates,
            from_cache: true,
        });
    }
    let offline_hint = format!(
        "prepare the cache while online with `msgnn fetch-candidates {formula}` (cache: {})",
        cache.dir().display()
    );
    let Some(source) = source else {
        return Err(Error::Candidates(format!(
            "offline and {formula} is not cached; {offline_hint}"
        )));
    };
    let candidates = source
        .fetch(formula)
        .map_err(|e| Error::Candidates(format!("lookup of {formula} failed ({e}); {offline_hint}")))?;
    if candidates.is_empty() {
        return Err(Error::Candidates(format!("the lookup returned no candidates for {formula}")));
    }
    let meta = vec![
        ("formula".to_string(), formula.to_string()),
        ("source".to_string(), source.describe()),
        ("count".to_string(), candidates.len().to_string()),
    ];
    cache.store(formula, &candidates, &meta)?;
    Ok(Fetched {
        formula: formula.to_string(),
        candidates,
        from_cache: false,
    })
}

/// Builds the candidate set of one query. Entries with the target's
/// structure (compared by [`skeleton_key`]) are dropped and the target is
/// added under `target_id`, so the true molecule appears exactly once.
/// Repeated ids keep their first entry.
pub fn candidate_set_for(
    query_id: &str,
    target_id: &str,
    target_smiles: &str,
    fetched: &[Candidate],
    provenance: Provenance,
) -> Result<CandidateSet> {
    let key = skeleton_key(&parse_smiles(target_smiles)?);
    let mut seen = HashSet::from([target_id.to_string()]);
    let mut candidates = vec![Candidate::new(target_id, target_smiles)];
    for c in fetched {
        let same = parse_smiles(&c.smiles).is_ok_and(|g| skeleton_key(&g) == key);
        if !same && seen.insert(c.id.clone()) {
            candidates.push(c.clone());
        }
    }
    CandidateSet::new(query_id, target_id, candidates, provenance)
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    struct Counting {
        calls: Cell<usize>,
        reply: Vec<Candidate>,
    }

    impl CandidateSource for Counting {
        fn describe(&self) -> String {
            "test".into()
        }

        fn fetch(&self, _: &str) -> Result<Vec<Candidate>> {
            self.calls.set(self.calls.get() + 1);
            Ok(self.reply.clone())
        }
    }

    struct Down;

    impl CandidateSource for Down {
        fn describe(&self) -> String {
            "down".into()
        }

        fn fetch(&self, _: &str) -> Result<Vec<Candidate>> {
            Err(Error::Candidates("connection refused".into()))
        }
    }

    #[test]
    fn formulas_must_be_hill_ordered() {
        assert!(validate_formula("C6H6").is_ok());
        assert!(validate_formula("C2H6O").is_ok());
        assert!(validate_formula("ClH").is_ok());
        assert!(validate_formula("H6C6").is_err());
        assert!(validate_formula("C6H6C").is_err());
        assert!(validate_formula("C0H4").is_err());
        assert!(validate_formula("c6h6").is_err());
        assert!(validate_formula("").is_err());
    }

    #[test]
    fn second_lookup_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CandidateCache::new(dir.path());
        let source = Counting {
            calls: Cell::new(0),
            reply: vec![Candidate::new("CID241", "c1ccccc1"), Candidate::new("CID11", "C=C1C=CC=C1")],
        };
        let first = fetch_candidates("C6H6", &cache, Some(&source)).unwrap();
        assert!(!first.from_cache);
        let second = fetch_candidates("C6H6", &cache, Some(&source)).unwrap();
        assert!(second.from_cache);
        assert_eq!(source.calls.get(), 1);
        assert_eq!(first.candidates, second.candidates);
        let (meta, _) = cache.load("C6H6").unwrap().unwrap();
        assert_eq!(super::super::meta_value(&meta, "source"), Some("test"));
    }

    #[test]
    fn offline_and_failure_modes() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CandidateCache::new(dir.path());
        match fetch_candidates("C6H6", &cache, None) {
            Err(Error::Candidates(m)) => assert!(m.contains("offline") && m.contains("fetch-candidates"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(fetch_candidates("C6H6", &cache, Some(&Down)), Err(Error::Candidates(m)) if m.contains("fetch-candidates")));
        let empty = Counting {
            calls: Cell::new(0),
            reply: vec![],
        };
        assert!(matches!(fetch_candidates("C6H6", &cache, Some(&empty)), Err(Error::Candidates(m)) if m.contains("no candidates")));
        assert!(!cache.contains("C6H6"));
    }

    #[test]
    fn target_appears_once() {
        let fetched = vec![
            Candidate::new("CID241", "C1=CC=CC=C1"),
            Candidate::new("CID11", "C=C1C=CC=C1"),
            Candidate::new("CID11", "C=C1C=CC=C1"),
            Candidate::new("bad", "C1CC"),
        ];
        let set = candidate_set_for("q1", "M00001", "c1ccccc1", &fetched, Provenance::Fetched).unwrap();
        let ids: Vec<&str> = set.candidates().iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["M00001", "CID11", "bad"]);
        assert_eq!(set.target().smiles, "c1ccccc1");
    }
}
