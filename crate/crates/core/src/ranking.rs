//! Candidate ranking by predicted-spectrum similarity, recall@k reports,
//! and the candidate-set manipulations used to probe ranking difficulty.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::chem::{circular_fingerprint, parse_smiles, structure_key, MoleculeGraph, DEFAULT_LENGTH, DEFAULT_RADIUS};
use crate::error::{Error, Result};
use crate::model::SpectrumPredictor;
use crate::spectrum::{cosine, BinnedSpectrum, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Retrieved from the compound database (possibly via the cache).
    Fetched,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Fetched => "fetched",
            Provenance::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fetched" => Ok(Provenance::Fetched),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(Error::Data(format!("unknown candidate provenance `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub id: String,
    pub smiles: String,
}

impl Candidate {
    pub fn new(id: impl Into<String>, smiles: impl Into<String>) -> Self {
        Candidate {
            id: id.into(),
            smiles: smiles.into(),
        }
    }
}

/// Molecules sharing a query's formula, one of which is the true answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    query_id: String,
    target_id: String,
    candidates: Vec<Candidate>,
    provenance: Provenance,
}

impl CandidateSet {
    pub fn new(
        query_id: impl Into<String>,
        target_id: impl Into<String>,
        candidates: Vec<Candidate>,
        provenance: Provenance,
    ) -> Result<Self> {
        let (query_id, target_id) = (query_id.into(), target_id.into());
        let mut seen = HashSet::new();
        for c in &candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Data(format!("duplicate candidate id `{}` for query `{query_id}`", c.id)));
            }
        }
        if !seen.contains(target_id.as_str()) {
            return Err(Error::Data(format!(
                "target `{target_id}` is not among the candidates of query `{query_id}`"
            )));
        }
        Ok(CandidateSet {
            query_id,
            target_id,
            candidates,
            provenance,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn target(&self) -> &Candidate {
        self.candidates
            .iter()
            .find(|c| c.id == self.target_id)
            .expect("target is a candidate")
    }

    /// The same query restricted to candidates accepted by `keep`; the
    /// target always stays.
    pub fn retain(&self, mut keep: impl FnMut(&Candidate) -> bool) -> CandidateSet {
        CandidateSet {
            candidates: self
                .candidates
                .iter()
                .filter(|c| c.id == self.target_id || keep(c))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingResult {
    pub query_id: String,
    pub target_id: String,
    /// Candidates by descending score, ties by ascending id.
    pub ranked: Vec<ScoredCandidate>,
    /// `1 + |{c ≠ target : score(c) ≥ score(target)}|`.
    pub rank_of_target: usize,
    /// Candidates dropped because their SMILES did not parse.
    pub excluded: usize,
}

impl RankingResult {
    pub fn target_score(&self) -> f64 {
        self.ranked
            .iter()
            .find(|c| c.id == self.target_id)
            .map_or(f64::NAN, |c| c.score)
    }
}

/// Scores every parseable candidate against `query`. Returns the scores in
/// candidate order and the number of excluded candidates.
pub fn score_candidates<P: SpectrumPredictor + ?Sized>(
    query: &BinnedSpectrum,
    set: &CandidateSet,
    predictor: &P,
) -> Result<(Vec<ScoredCandidate>, usize)> {
    if query.transform() != predictor.transform() {
        return Err(Error::Evaluation(format!(
            "query `{}` is a {} spectrum but the predictor produces {}",
            set.query_id,
            query.transform(),
            predictor.transform()
        )));
    }
    if query.is_all_zero() {
        return Err(Error::Evaluation(format!("query `{}` has an all-zero spectrum", set.query_id)));
    }
    let mut graphs = Vec::with_capacity(set.len());
    let mut ids = Vec::with_capacity(set.len());
    let mut excluded = 0;
    for c in &set.candidates {
        match parse_smiles(&c.smiles) {
            Ok(g) => {
                graphs.push(g);
                ids.push(c.id.clone());
            }
            Err(e) if c.id == set.target_id => {
                return Err(Error::Evaluation(format!(
                    "target `{}` of query `{}` does not parse: {e}",
                    c.id, set.query_id
                )))
            }
            Err(e) => {
                log::warn!("query `{}`: skipping candidate `{}`: {e}", set.query_id, c.id);
                excluded += 1;
            }
        }
    }
    let refs: Vec<&MoleculeGraph> = graphs.iter().collect();
    let preds = predictor.predict_many(&refs)?;
    let scored = ids
        .into_iter()
        .zip(&preds)
        .map(|(id, p)| ScoredCandidate {
            id,
            score: cosine(p.intensities(), query.intensities()).unwrap_or(0.0),
        })
        .collect();
    Ok((scored, excluded))
}

/// Orders scored candidates and computes the pessimistic rank of the
/// target.
pub fn rank_scores(
    query_id: &str,
    target_id: &str,
    mut scored: Vec<ScoredCandidate>,
    excluded: usize,
) -> Result<RankingResult> {
    let target_score = scored
        .iter()
        .find(|c| c.id == target_id)
        .map(|c| c.score)
        .ok_or_else(|| Error::Evaluation(format!("target `{target_id}` was not scored for query `{query_id}`")))?;
    let rank_of_target = 1 + scored
        .iter()
        .filter(|c| c.id != target_id && c.score >= target_score)
        .count();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    Ok(RankingResult {
        query_id: query_id.to_string(),
        target_id: target_id.to_string(),
        ranked: scored,
        rank_of_target,
        excluded,
    })
}

/// Ranks `set` by cosine similarity between each candidate's predicted
/// spectrum and `query`. Ties count against the target.
pub fn rank_candidates<P: SpectrumPredictor + ?Sized>(
    query: &BinnedSpectrum,
    set: &CandidateSet,
    predictor: &P,
) -> Result<RankingResult> {
    let (scored, excluded) = score_candidates(query, set, predictor)?;
    rank_scores(&set.query_id, &set.target_id, scored, excluded)
}

/// Fraction of results whose target ranks within the top `k`.
pub fn recall_at_k(results: &[RankingResult], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("recall@k needs k ≥ 1".into()));
    }
    if results.is_empty() {
        return Err(Error::Evaluation("recall@k of zero queries".into()));
    }
    let hits = results.iter().filter(|r| r.rank_of_target <= k).count();
    Ok(hits as f64 / results.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub average_rank: f64,
    pub queries: usize,
}

impl RecallReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }
}

/// recall@k for each of `ks` plus the mean target rank.
pub fn build_report(results: &[RankingResult], ks: &[usize]) -> Result<RecallReport> {
    if results.is_empty() {
        return Err(Error::Evaluation("cannot report on zero queries".into()));
    }
    let recall = ks.iter().map(|&k| recall_at_k(results, k)).collect::<Result<Vec<_>>>()?;
    let average_rank = results.iter().map(|r| r.rank_of_target as f64).sum::<f64>() / results.len() as f64;
    Ok(RecallReport {
        ks: ks.to_vec(),
        recall,
        average_rank,
        queries: results.len(),
    })
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// A uniform draw in `[0, 1)` fixed by `seed`, the query and the candidate.
fn candidate_draw(seed: u64, query_id: &str, candidate_id: &str) -> f64 {
    let h = crate::chem::combine(
        crate::chem::combine(seed, fnv1a(query_id.as_bytes())),
        fnv1a(candidate_id.as_bytes()),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Keeps the target and each decoy independently with probability
/// `target_avg_size / population_avg` (capped at 1).
///
/// Each decoy's draw depends only on `seed` and the ids, so for one seed the
/// subsample at a smaller size is contained in the subsample at a larger
/// size.
pub fn subsample_candidates(
    set: &CandidateSet,
    target_avg_size: f64,
    population_avg: f64,
    seed: u64,
) -> Result<CandidateSet> {
    if !(population_avg > 0.0) || !(target_avg_size > 0.0) {
        return Err(Error::Config(format!(
            "subsampling needs positive sizes, got {target_avg_size} of {population_avg}"
        )));
    }
    let p = (target_avg_size / population_avg).min(1.0);
    Ok(set.retain(|c| candidate_draw(seed, &set.query_id, &c.id) < p))
}

/// Count Tanimoto: `Σ min(aᵢ, bᵢ) / Σ max(aᵢ, bᵢ)`, with 0/0 taken as 0.
pub fn tanimoto(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("tanimoto", &[a.len()], &[b.len()]));
    }
    let (mut lo, mut hi) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        lo += u64::from(x.min(y));
        hi += u64::from(x.max(y));
    }
    Ok(if hi == 0 { 0.0 } else { lo as f64 / hi as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stratum {
    MostSimilar,
    LeastSimilar,
}

impl Stratum {
    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::MostSimilar => "most_similar",
            Stratum::LeastSimilar => "least_similar",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stratum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most_similar" | "most" => Ok(Stratum::MostSimilar),
            "least_similar" | "least" => Ok(Stratum::LeastSimilar),
            other => Err(Error::Config(format!(
                "unknown stratum `{other}` (expected most_similar or least_similar)"
            ))),
        }
    }
}

/// Keeps the target plus the `m - 1` decoys whose circular count
/// fingerprints are most (or least) Tanimoto-similar to the target's, ties
/// broken by ascending id. Unparseable decoys are dropped.
pub fn stratify_by_similarity(set: &CandidateSet, stratum: Stratum, m: usize) -> Result<CandidateSet> {
    if m < 2 {
        return Err(Error::Config(format!("stratum size must be at least 2, got {m}")));
    }
    let fp = |smiles: &str| -> Result<Vec<u32>> {
        Ok(circular_fingerprint(&parse_smiles(smiles)?, DEFAULT_RADIUS, DEFAULT_LENGTH))
    };
    let target_fp = fp(&set.target().smiles).map_err(|e| {
        Error::Evaluation(format!("target of query `{}` does not parse: {e}", set.query_id))
    })?;
    let mut decoys = Vec::with_capacity(set.len());
    for c in set.candidates.iter().filter(|c| c.id != set.target_id) {
        match fp(&c.smiles) {
            Ok(f) => decoys.push((tanimoto(&target_fp, &f)?, c.id.as_str())),
            Err(e) => log::warn!("query `{}`: skipping candidate `{}`: {e}", set.query_id, c.id),
        }
    }
    if decoys.len() + 1 < m {
        log::warn!(
            "query `{}` has {} usable candidates, fewer than the stratum size {m}; keeping all",
            set.query_id,
            decoys.len() + 1
        );
    }
    decoys.sort_by(|a, b| {
        let by_score = match stratum {
            Stratum::MostSimilar => b.0.total_cmp(&a.0),
            Stratum::LeastSimilar => a.0.total_cmp(&b.0),
        };
        by_score.then_with(|| a.1.cmp(b.1))
    });
    let keep: HashSet<&str> = decoys.iter().take(m - 1).map(|d| d.1).collect();
    Ok(set.retain(|c| keep.contains(c.id.as_str())))
}

/// A spectrum to identify together with its candidate molecules.
#[derive(Clone, Debug)]
pub struct Query {
    pub spectrum: BinnedSpectrum,
    pub candidates: CandidateSet,
}

impl Query {
    pub fn id(&self) -> &str {
        self.candidates.query_id()
    }
}

/// How each query's candidate set is reduced before ranking.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalOptions {
    /// Subsample to this average set size.
    pub avg_size: Option<f64>,
    /// Average set size of the full population; the mean over the queries
    /// when absent.
    pub population_avg: Option<f64>,
    pub stratify: Option<(Stratum, usize)>,
    pub seed: u64,
}

/// Mean candidate-set size over `queries`.
pub fn mean_set_size(queries: &[Query]) -> f64 {
    queries.iter().map(|q| q.candidates.len() as f64).sum::<f64>() / queries.len().max(1) as f64
}

/// Ranks every query, in parallel, and returns results sorted by query id.
pub fn evaluate<P: SpectrumPredictor + ?Sized>(
    queries: &[Query],
    predictor: &P,
    options: &EvalOptions,
) -> Result<Vec<RankingResult>> {
    if queries.is_empty() {
        return Err(Error::Evaluation("no queries to evaluate".into()));
    }
    let population = options.population_avg.unwrap_or_else(|| mean_set_size(queries));
    let mut results = queries
        .par_iter()
        .map(|q| {
            let mut set = q.candidates.clone();
            if let Some((stratum, m)) = options.stratify {
                set = stratify_by_similarity(&set, stratum, m)?;
            }
            if let Some(size) = options.avg_size {
                set = subsample_candidates(&set, size, population, options.seed)?;
            }
            rank_candidates(&q.spectrum, &set, predictor)
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    Ok(results)
}

/// A predictor that looks spectra up by structure. Unknown structures
/// predict an all-zero spectrum.
#[derive(Clone, Debug)]
pub struct ReferencePredictor {
    transform: Transform,
    table: HashMap<u64, BinnedSpectrum>,
}

impl ReferencePredictor {
    pub fn new(transform: Transform) -> Self {
        ReferencePredictor {
            transform,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, graph: &MoleculeGraph, spectrum: BinnedSpectrum) -> Result<()> {
        if spectrum.transform() != self.transform {
            return Err(Error::Spectrum(format!(
                "reference table holds {} spectra, got {}",
                self.transform,
                spectrum.transform()
            )));
        }
        self.table.insert(structure_key(graph), spectrum);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl SpectrumPredictor for ReferencePredictor {
    fn transform(&self) -> Transform {
        self.transform
    }

    fn predict_many(&self, graphs: &[&MoleculeGraph]) -> Result<Vec<BinnedSpectrum>> {
        graphs
            .iter()
            .map(|g| match self.table.get(&structure_key(g)) {
                Some(s) => Ok(s.clone()),
                None => BinnedSpectrum::new(vec![0.0; crate::spectrum::NUM_BINS], self.transform, false),
            })
            .collect()
    }
}
