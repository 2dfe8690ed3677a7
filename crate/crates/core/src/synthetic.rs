//! Deterministic toy data: random small molecules, same-formula isomers, and
//! a rule-based fragmenter that turns a structure into a plausible MS/MS
//! peak list.
//!
//! The fragmenter is only a stand-in for measured spectra. Its peaks depend
//! on local structure, so a graph model can learn it.

use std::collections::HashSet;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{
    combine, identifiers, parse_smiles, ring_edge_flags, splitmix64, structure_key, to_smiles, AtomSpec, BondKind,
    Edge, Element, MoleculeGraph,
};
use crate::error::{Error, Result};
use crate::ranking::{Candidate, CandidateSet, Provenance, Query, ReferencePredictor};
use crate::spectrum::{cosine_similarity, prepare_target, BinnedSpectrum, PeakList, Transform};
use crate::training::Example;

const PROTON: f64 = 1.007_276;
const HYDROGEN: f64 = 1.007_825;
const WATER: f64 = 18.010_565;
const AMMONIA: f64 = 17.026_549;

fn atom_mass(g: &MoleculeGraph, i: usize) -> f64 {
    let a = &g.atoms()[i];
    a.element.monoisotopic_mass() + f64::from(a.hydrogens) * HYDROGEN
}

/// A weight in `[0.25, 1.75)` derived from a hash.
fn weight(h: u64) -> f64 {
    0.25 + (splitmix64(h) % 10_000) as f64 / 10_000.0 * 1.5
}

/// Atoms reachable from `start` without crossing edge `skip`.
fn side(g: &MoleculeGraph, start: usize, skip: (usize, usize)) -> Vec<usize> {
    let mut seen = vec![false; g.num_atoms()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut out = Vec::new();
    while let Some(i) = stack.pop() {
        out.push(i);
        for &(j, _) in g.neighbors(i) {
            if (i, j) == skip || (j, i) == skip || seen[j] {
                continue;
            }
            seen[j] = true;
            stack.push(j);
        }
    }
    out
}

/// Protonated precursor plus fragment ions for one molecule.
///
/// Every acyclic bond splits the molecule into two charged fragments, ring
/// bonds lose one ring unit, and O-H / N-H groups add water or ammonia loss.
/// Intensities scale with bond order and the two atoms' environments.
///
/// ```
/// use msgnn::{chem::parse_smiles, synthetic::fragment_spectrum};
/// let peaks = fragment_spectrum(&parse_smiles("CCO").unwrap()).unwrap();
/// assert!(peaks.peaks().iter().any(|p| (p.mz - 47.049).abs() < 0.01));
/// ```
pub fn fragment_spectrum(g: &MoleculeGraph) -> Result<PeakList> {
    let n = g.num_atoms();
    let env = identifiers(g, 1).pop().expect("radius-1 identifiers");
    let masses: Vec<f64> = (0..n).map(|i| atom_mass(g, i)).collect();
    let total: f64 = masses.iter().sum();
    let mut peaks = vec![(total + PROTON, 30.0)];
    let ring = ring_edge_flags(n, g.edges());
    for (e, &in_ring) in g.edges().iter().zip(&ring) {
        let base = match e.kind {
            BondKind::Single => 100.0,
            BondKind::Double => 45.0,
            BondKind::Triple => 20.0,
            BondKind::Aromatic => 35.0,
        };
        let (lo, hi) = (env[e.a].min(env[e.b]), env[e.a].max(env[e.b]));
        let w = base * weight(combine(lo, hi));
        if in_ring {
            let lost = if env[e.a] <= env[e.b] { e.a } else { e.b };
            peaks.push((total - masses[lost] + PROTON, 0.5 * w));
        } else {
            let m: f64 = side(g, e.a, (e.a, e.b)).iter().map(|&i| masses[i]).sum();
            let (big, small) = (m.max(total - m), m.min(total - m));
            peaks.push((big + PROTON, w));
            peaks.push((small + PROTON, 0.35 * w));
        }
    }
    for (i, a) in g.atoms().iter().enumerate() {
        if a.hydrogens == 0 {
            continue;
        }
        let loss = match a.element {
            Element::O => WATER,
            Element::N => AMMONIA,
            _ => continue,
        };
        if total - loss > 1.0 {
            peaks.push((total - loss + PROTON, 25.0 * weight(env[i])));
        }
    }
    PeakList::from_pairs(&peaks)
}

fn valence(e: Element) -> u8 {
    e.default_valences().map_or(4, |v| v[0])
}

/// Builds a random connected structure over `elements` with `unsaturations`
/// extra bond orders (ring closures or double bonds). Gives up with `None`
/// when the valences cannot accommodate the request.
fn assemble<R: Rng + ?Sized>(elements: &[Element], unsaturations: usize, rng: &mut R) -> Option<MoleculeGraph> {
    let n = elements.len();
    let cap: Vec<u8> = elements.iter().map(|&e| valence(e)).collect();
    let mut used = vec![0u8; n];
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    for k in 1..n {
        let open: Vec<usize> = (0..k).filter(|&j| used[j] < cap[j]).collect();
        let &parent = open.choose(rng)?;
        if cap[k] == 0 {
            return None;
        }
        bonds.push((parent, k, 1));
        used[parent] += 1;
        used[k] += 1;
    }
    for _ in 0..unsaturations {
        let mut placed = false;
        for _ in 0..40 {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if i == j || used[i] >= cap[i] || used[j] >= cap[j] {
                continue;
            }
            match bonds.iter_mut().find(|b| (b.0 == i && b.1 == j) || (b.0 == j && b.1 == i)) {
                Some(b) if b.2 == 1 => b.2 = 2,
                Some(_) => continue,
                None => bonds.push((i.min(j), i.max(j), 1)),
            }
            used[i] += 1;
            used[j] += 1;
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    let atoms: Vec<AtomSpec> = (0..n)
        .map(|i| AtomSpec {
            element: elements[i],
            charge: 0,
            hydrogens: cap[i] - used[i],
            aromatic: false,
        })
        .collect();
    let edges: Vec<Edge> = bonds
        .iter()
        .map(|&(a, b, order)| Edge {
            a,
            b,
            kind: if order == 2 { BondKind::Double } else { BondKind::Single },
        })
        .collect();
    let draft = MoleculeGraph::from_parts(&atoms, &edges, "").ok()?;
    parse_smiles(&to_smiles(&draft)).ok()
}

/// A random neutral C/N/O molecule with a heavy-atom count drawn from
/// `atoms`.
pub fn random_molecule<R: Rng + ?Sized>(rng: &mut R, atoms: RangeInclusive<usize>) -> MoleculeGraph {
    loop {
        let n = rng.gen_range(atoms.clone()).max(1);
        let elements: Vec<Element> = (0..n)
            .map(|k| match rng.gen_range(0..20) {
                _ if k == 0 => Element::C,
                0..=2 => Element::N,
                3..=5 => Element::O,
                _ => Element::C,
            })
            .collect();
        let unsaturations = rng.gen_range(0..=n.min(6) / 2);
        if let Some(g) = assemble(&elements, unsaturations, rng) {
            return g;
        }
    }
}

/// Up to `count` distinct structures sharing `template`'s molecular
/// formula, none isomorphic to it. Returns fewer when the isomer space runs
/// dry within the attempt budget.
pub fn random_isomers<R: Rng + ?Sized>(template: &MoleculeGraph, count: usize, rng: &mut R) -> Vec<MoleculeGraph> {
    let mut elements: Vec<Element> = template.atoms().iter().map(|a| a.element).collect();
    let orders: usize = template.edges().iter().map(|e| e.kind.valence_order() as usize).sum();
    let unsaturations = (orders + 1).saturating_sub(template.num_atoms());
    let formula = template.formula();
    let mut seen: HashSet<u64> = HashSet::from([structure_key(template)]);
    let mut out = Vec::new();
    let mut misses = 0;
    while out.len() < count && misses < 200 + 20 * count {
        elements.shuffle(rng);
        match assemble(&elements, unsaturations, rng) {
            Some(g) if g.formula() == formula && seen.insert(structure_key(&g)) => out.push(g),
            _ => misses += 1,
        }
    }
    out
}

/// `n` distinct random molecules with fragmenter targets, normalized in
/// `transform` space.
pub fn toy_examples(n: usize, atoms: RangeInclusive<usize>, transform: Transform, seed: u64) -> Result<Vec<Example>> {
    if transform == Transform::Raw {
        return Err(Error::Config("toy targets need the log or sqrt transform".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let graph = random_molecule(&mut rng, atoms.clone());
        if !seen.insert(structure_key(&graph)) {
            continue;
        }
        let target = prepare_target(&fragment_spectrum(&graph)?, transform)?;
        out.push(Example {
            id: format!("T{:04}", out.len()),
            graph,
            target,
        });
    }
    Ok(out)
}

/// Candidates closer than this to the target's spectrum cannot be told
/// apart from it by any predictor and are left out.
const INDISTINGUISHABLE: f64 = 1.0 - 1e-9;

/// Synthetic identification queries with fragmenter spectra as ground truth.
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub queries: Vec<Query>,
    /// Ground-truth spectra of every target and candidate.
    pub reference: ReferencePredictor,
    /// SMILES of each query's true molecule, by query.
    pub targets: Vec<String>,
}

/// Builds `n` queries, each with up to `decoys` same-formula decoys. Query
/// `Q0007` has target id `Q0007` and decoys `Q0007-0001`, ...
pub fn toy_corpus(
    n: usize,
    decoys: usize,
    atoms: RangeInclusive<usize>,
    transform: Transform,
    seed: u64,
) -> Result<ToyCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reference = ReferencePredictor::new(transform);
    let mut seen = HashSet::new();
    let mut queries = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let truth = |g: &MoleculeGraph| -> Result<BinnedSpectrum> { prepare_target(&fragment_spectrum(g)?, transform) };
    while queries.len() < n {
        let target = random_molecule(&mut rng, atoms.clone());
        if !seen.insert(structure_key(&target)) {
            continue;
        }
        let id = format!("Q{:04}", queries.len());
        let spectrum = truth(&target)?;
        let mut candidates = vec![Candidate::new(id.clone(), target.smiles())];
        reference.insert(&target, spectrum.clone())?;
        for g in random_isomers(&target, decoys, &mut rng) {
            let s = truth(&g)?;
            if cosine_similarity(&s, &spectrum)? >= INDISTINGUISHABLE {
                continue;
            }
            candidates.push(Candidate::new(format!("{id}-{:04}", candidates.len()), g.smiles()));
            reference.insert(&g, s)?;
        }
        targets.push(target.smiles().to_string());
        queries.push(Query {
            spectrum,
            candidates: CandidateSet::new(id.clone(), id, candidates, Provenance::Synthetic)?,
        });
    }
    Ok(ToyCorpus {
        queries,
        reference,
        targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethanol_fragments() {
        let g = parse_smiles("CCO").unwrap();
        let mz: Vec<i64> = fragment_spectrum(&g)
            .unwrap()
            .peaks()
            .iter()
            .map(|p| p.mz.floor() as i64)
            .collect();
        // [M+H]+, CH3 / CH2OH cleavage, C2H5 / OH cleavage, water loss
        for expected in [47, 32, 16, 30, 18, 29] {
            assert!(mz.contains(&expected), "{expected} missing from {mz:?}");
        }
    }

    #[test]
    fn random_molecules_round_trip_through_smiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let g = random_molecule(&mut rng, 4..=8);
            assert!((4..=8).contains(&g.num_atoms()));
            let again = parse_smiles(&to_smiles(&g)).unwrap();
            assert_eq!(structure_key(&g), structure_key(&again));
            assert_eq!(g.formula(), again.formula());
        }
    }

    #[test]
    fn isomers_share_the_formula_and_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let template = parse_smiles("CC(=O)NCC1CC1O").unwrap();
        let isomers = random_isomers(&template, 200, &mut rng);
        assert_eq!(isomers.len(), 200);
        let mut keys: HashSet<u64> = HashSet::from([structure_key(&template)]);
        for g in &isomers {
            assert_eq!(g.formula(), template.formula());
            assert!(keys.insert(structure_key(g)));
        }
    }

    #[test]
    fn perfect_predictor_ranks_every_target_first() {
        let corpus = toy_corpus(6, 30, 6..=8, Transform::Log, 5).unwrap();
        assert_eq!(corpus.queries.len(), 6);
        let results = crate::ranking::evaluate(&corpus.queries, &corpus.reference, &Default::default()).unwrap();
        assert!(results.iter().all(|r| r.rank_of_target == 1), "{results:?}");
        assert!(corpus.queries.iter().all(|q| q.candidates.len() > 10));
    }

    #[test]
    fn toy_examples_are_reproducible() {
        let a = toy_examples(5, 4..=8, Transform::Log, 3).unwrap();
        let b = toy_examples(5, 4..=8, Transform::Log, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.graph.smiles(), y.graph.smiles());
            assert_eq!(x.target, y.target);
            assert!((x.target.norm() - 1.0).abs() < 1e-12);
        }
    }
}
