//! Exact structural identity keys.
//!
//! Colour refinement alone cannot tell apart some non-isomorphic graphs
//! (Dewar benzene and bicyclopropenyl refine to the same colours), so the
//! keys hash a canonical form found by individualization and refinement:
//! refine to a stable partition, and while a cell holds several atoms, try
//! singling out each of them in turn and keep the smallest certificate.

use super::fingerprint::{atom_invariant, combine};
use super::graph::MoleculeGraph;

/// Search leaves explored before giving up on a canonical form. Only
/// highly symmetric cages come near it; they fall back to the refined
/// colour multiset.
const LEAF_BUDGET: usize = 20_000;

const MARK: u64 = 0x1D1D_1D1D;

/// An isomorphism-invariant 64-bit hash of the structure, including bond
/// kinds and aromatic flags. Distinct structures collide only by 64-bit
/// hash collision.
pub fn structure_key(graph: &MoleculeGraph) -> u64 {
    key(graph, true)
}

/// Like [`structure_key`] but blind to bond orders and aromatic flags, so
/// Kekulé and aromatic spellings of a molecule agree. Atoms still carry
/// their hydrogen counts, which pin down bond orders in most molecules.
pub fn skeleton_key(graph: &MoleculeGraph) -> u64 {
    key(graph, false)
}

struct Canon<'a> {
    graph: &'a MoleculeGraph,
    with_bonds: bool,
    leaves: usize,
}

impl Canon<'_> {
    fn bond(&self, kind: super::BondKind) -> u64 {
        if self.with_bonds {
            kind.index() as u64 + 1
        } else {
            0
        }
    }

    fn classes(colors: &[u64]) -> usize {
        let mut c = colors.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Refines until the number of colour classes stops growing.
    fn refine(&self, mut colors: Vec<u64>) -> Vec<u64> {
        let mut count = Self::classes(&colors);
        loop {
            let next: Vec<u64> = (0..colors.len())
                .map(|i| {
                    let mut nbrs: Vec<(u64, u64)> = self
                        .graph
                        .neighbors(i)
                        .iter()
                        .map(|&(j, kind)| (self.bond(kind), colors[j]))
                        .collect();
                    nbrs.sort_unstable();
                    nbrs.iter().fold(colors[i], |h, &(b, c)| combine(combine(h, b), c))
                })
                .collect();
            let n = Self::classes(&next);
            if n == count {
                return colors;
            }
            colors = next;
            count = n;
        }
    }

    /// Atoms ordered by colour, then each atom's colour and sorted
    /// (neighbour position, bond) list.
    fn certificate(&self, colors: &[u64]) -> Vec<u64> {
        let mut order: Vec<usize> = (0..colors.len()).collect();
        order.sort_by_key(|&i| colors[i]);
        let mut position = vec![0; colors.len()];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p as u64;
        }
        let mut cert = Vec::with_capacity(colors.len() * 4);
        for &i in &order {
            cert.push(colors[i]);
            let mut nbrs: Vec<(u64, u64)> = self
                .graph
                .neighbors(i)
                .iter()
                .map(|&(j, kind)| (position[j], self.bond(kind)))
                .collect();
            nbrs.sort_unstable();
            cert.push(nbrs.len() as u64);
            for (p, b) in nbrs {
                cert.push(p);
                cert.push(b);
            }
        }
        cert
    }

    fn search(&mut self, colors: Vec<u64>) -> Option<Vec<u64>> {
        let colors = self.refine(colors);
        let mut cells: Vec<(u64, Vec<usize>)> = Vec::new();
        let mut sorted: Vec<usize> = (0..colors.len()).collect();
        sorted.sort_by_key(|&i| (colors[i], i));
        for i in sorted {
            match cells.last_mut() {
                Some((c, members)) if *c == colors[i] => members.push(i),
                _ => cells.push((colors[i], vec![i])),
            }
        }
        let Some((_, cell)) = cells
            .iter()
            .filter(|(_, m)| m.len() > 1)
            .min_by_key(|(c, m)| (m.len(), *c))
        else {
            self.leaves += 1;
            return (self.leaves <= LEAF_BUDGET).then(|| self.certificate(&colors));
        };
        let mut best: Option<Vec<u64>> = None;
        for &v in cell {
            let mut next = colors.clone();
            next[v] = combine(next[v], MARK);
            let cert = self.search(next)?;
            if best.as_ref().is_none_or(|b| cert < *b) {
                best = Some(cert);
            }
        }
        best
    }
}

fn key(graph: &MoleculeGraph, with_bonds: bool) -> u64 {
    let mut canon = Canon {
        graph,
        with_bonds,
        leaves: 0,
    };
    let initial: Vec<u64> = graph.atoms().iter().map(|a| atom_invariant(a, with_bonds)).collect();
    let head = combine(graph.num_atoms() as u64, graph.edges().len() as u64);
    match canon.search(initial.clone()) {
        Some(cert) => cert.iter().fold(head, |h, &x| combine(h, x)),
        None => {
            log::debug!("canonical search exceeded {LEAF_BUDGET} leaves; using refined colours");
            let mut colors = canon.refine(initial);
            colors.sort_unstable();
            colors.iter().fold(combine(head, MARK), |h, &x| combine(h, x))
        }
    }
}
