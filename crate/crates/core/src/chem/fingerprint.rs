//! Circular (ECFP-style) count fingerprints.

use super::graph::{AtomRecord, MoleculeGraph};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_LENGTH: usize = 4096;

#[inline]
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
pub(crate) fn combine(seed: u64, value: u64) -> u64 {
    splitmix64(seed ^ splitmix64(value))
}

pub(super) fn atom_invariant(atom: &AtomRecord, with_bonds: bool) -> u64 {
    let fields = [
        u64::from(atom.element.atomic_number()),
        atom.degree as u64,
        u64::from(atom.hydrogens),
        (i64::from(atom.charge) + 128) as u64,
        u64::from(atom.in_ring),
        u64::from(atom.aromatic && with_bonds),
    ];
    fields.iter().fold(0x5EED, |h, &f| combine(h, f))
}

/// One identifier per atom per iteration, iterations `0..=radius`.
pub(crate) fn identifiers(graph: &MoleculeGraph, radius: usize) -> Vec<Vec<u64>> {
    let mut current: Vec<u64> = graph.atoms().iter().map(|a| atom_invariant(a, true)).collect();
    let mut all = vec![current.clone()];
    for iteration in 1..=radius {
        let next: Vec<u64> = (0..graph.num_atoms())
            .map(|i| {
                let nbrs = graph.neighbors(i);
                if nbrs.is_empty() {
                    return current[i];
                }
                let mut pairs: Vec<(u64, u64)> = nbrs
                    .iter()
                    .map(|&(j, kind)| (kind.index() as u64, current[j]))
                    .collect();
                pairs.sort_unstable();
                let mut h = combine(iteration as u64, current[i]);
                for (k, id) in pairs {
                    h = combine(combine(h, k), id);
                }
                h
            })
            .collect();
        all.push(next.clone());
        current = next;
    }
    all
}

/// Hashed count fingerprint: every intermediate identifier increments
/// bucket `identifier mod length`, so the counts sum to `N · (radius + 1)`.
pub fn circular_fingerprint(graph: &MoleculeGraph, radius: usize, length: usize) -> Vec<u32> {
    assert!(length > 0, "fingerprint length must be positive");
    let mut counts = vec![0u32; length];
    for layer in identifiers(graph, radius) {
        for id in layer {
            counts[(id % length as u64) as usize] += 1;
        }
    }
    counts
}
