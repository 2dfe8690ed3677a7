//! Node and bond encodings.
//!
//! Schema version 1 lays out each atom row as:
//!
//! | slots | content                                               |
//! |-------|-------------------------------------------------------|
//! | 1     | standard atomic weight / 100                          |
//! | 13    | one-hot element over [`ELEMENT_VOCAB`] plus OTHER     |
//! | 6     | one-hot degree 0..=5 (higher degrees share the last)  |
//! | 5     | one-hot attached hydrogens 0..=4 (same capping)       |
//! | 1     | ring membership                                       |
//! | 1     | aromatic                                              |

use super::elements::Element;
use super::graph::{AtomRecord, BondKind, Edge, MoleculeGraph};
use crate::tensor::Tensor;

pub const FEATURE_SCHEMA_VERSION: u32 = 1;

pub const ELEMENT_VOCAB: [&str; 12] = ["C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "Se"];

const MAX_DEGREE: usize = 5;
const MAX_HYDROGENS: usize = 4;

pub const FEATURE_DIM: usize = 1 + (ELEMENT_VOCAB.len() + 1) + (MAX_DEGREE + 1) + (MAX_HYDROGENS + 1) + 2;

pub const BOND_FEATURE_DIM: usize = 4;

fn element_slot(e: Element) -> usize {
    ELEMENT_VOCAB
        .iter()
        .position(|&s| s == e.symbol())
        .unwrap_or(ELEMENT_VOCAB.len())
}

pub(crate) fn atom_row(atom: &AtomRecord, row: &mut [f64]) {
    row.iter_mut().for_each(|v| *v = 0.0);
    row[0] = atom.atomic_weight / 100.0;
    let mut off = 1;
    row[off + element_slot(atom.element)] = 1.0;
    off += ELEMENT_VOCAB.len() + 1;
    row[off + atom.degree.min(MAX_DEGREE)] = 1.0;
    off += MAX_DEGREE + 1;
    row[off + usize::from(atom.hydrogens).min(MAX_HYDROGENS)] = 1.0;
    off += MAX_HYDROGENS + 1;
    row[off] = f64::from(u8::from(atom.in_ring));
    row[off + 1] = f64::from(u8::from(atom.aromatic));
}

/// Feature matrix `N × FEATURE_DIM` for a list of atoms.
pub(crate) fn featurize(atoms: &[AtomRecord]) -> Tensor {
    let mut data = vec![0.0; atoms.len() * FEATURE_DIM];
    for (atom, row) in atoms.iter().zip(data.chunks_mut(FEATURE_DIM)) {
        atom_row(atom, row);
    }
    Tensor::new(vec![atoms.len(), FEATURE_DIM], data).expect("feature matrix shape")
}

/// Recomputes the node feature matrix of a graph under the given schema.
pub fn node_feature_matrix(graph: &MoleculeGraph, schema_version: u32) -> crate::Result<Tensor> {
    if schema_version != FEATURE_SCHEMA_VERSION {
        return Err(crate::Error::Config(format!(
            "unsupported feature schema version {schema_version} (this build uses {FEATURE_SCHEMA_VERSION})"
        )));
    }
    Ok(featurize(graph.atoms()))
}

pub fn bond_features(edge: &Edge) -> [f64; BOND_FEATURE_DIM] {
    bond_kind_one_hot(edge.kind)
}

pub fn bond_kind_one_hot(kind: BondKind) -> [f64; BOND_FEATURE_DIM] {
    let mut v = [0.0; BOND_FEATURE_DIM];
    v[kind.index()] = 1.0;
    v
}

/// Index helpers for tests and documentation.
pub mod layout {
    use super::*;

    pub const WEIGHT: usize = 0;
    pub const ELEMENT: usize = 1;
    pub const DEGREE: usize = ELEMENT + ELEMENT_VOCAB.len() + 1;
    pub const HYDROGENS: usize = DEGREE + MAX_DEGREE + 1;
    pub const RING: usize = HYDROGENS + MAX_HYDROGENS + 1;
    pub const AROMATIC: usize = RING + 1;
}

#[cfg(test)]
mod tests {
    use super::layout::*;
    use super::*;
    use crate::chem::parse_smiles;

    fn one_hot_at(row: &[f64], start: usize, width: usize) -> usize {
        let slice = &row[start..start + width];
        assert_eq!(slice.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(slice.iter().filter(|&&v| v == 0.0).count(), width - 1);
        slice.iter().position(|&v| v == 1.0).unwrap()
    }

    #[test]
    fn dimension_is_fixed() {
        assert_eq!(FEATURE_DIM, 27);
        assert_eq!(AROMATIC, FEATURE_DIM - 1);
    }

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        let row = g.node_features().row(0);
        assert_eq!(one_hot_at(row, DEGREE, 6), 0);
        assert_eq!(one_hot_at(row, HYDROGENS, 5), 4);
        assert_eq!(one_hot_at(row, ELEMENT, 13), 0);
        assert_eq!(row[RING], 0.0);
        assert_eq!(row[AROMATIC], 0.0);
        assert!((row[WEIGHT] - 12.011 / 100.0).abs() < 1e-6);
    }

    #[test]
    fn benzene_carbon() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let row = g.node_features().row(3);
        assert_eq!(row[RING], 1.0);
        assert_eq!(row[AROMATIC], 1.0);
        assert_eq!(one_hot_at(row, DEGREE, 6), 2);
        assert_eq!(one_hot_at(row, HYDROGENS, 5), 1);
    }

    #[test]
    fn unknown_element_maps_to_other() {
        let g = parse_smiles("[Na+]").unwrap();
        assert_eq!(one_hot_at(g.node_features().row(0), ELEMENT, 13), 12);
    }

    #[test]
    fn degree_and_hydrogens_are_capped() {
        let g = parse_smiles("FS(F)(F)(F)(F)F").unwrap();
        assert_eq!(one_hot_at(g.node_features().row(1), DEGREE, 6), 5);
        let g = parse_smiles("[H][H]").unwrap();
        assert_eq!(g.num_atoms(), 2);
    }

    #[test]
    fn bond_one_hots() {
        assert_eq!(bond_kind_one_hot(BondKind::Single), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bond_kind_one_hot(BondKind::Aromatic), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(bond_kind_one_hot(BondKind::Triple), [0.0, 0.0, 1.0, 0.0]);
        let e = Edge {
            a: 0,
            b: 1,
            kind: BondKind::Double,
        };
        assert_eq!(bond_features(&e), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let g = parse_smiles("CC").unwrap();
        assert!(node_feature_matrix(&g, FEATURE_SCHEMA_VERSION).is_ok());
        assert!(node_feature_matrix(&g, 99).is_err());
    }
}
