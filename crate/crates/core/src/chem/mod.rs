//! Molecular graphs from SMILES, with the node, bond and fingerprint
//! encodings the models consume.

mod canon;
mod elements;
pub mod features;
mod fingerprint;
mod graph;
mod smiles;
mod writer;

pub use elements::Element;
pub use features::{bond_features, bond_kind_one_hot, BOND_FEATURE_DIM, FEATURE_DIM, FEATURE_SCHEMA_VERSION};
pub use canon::{skeleton_key, structure_key};
pub use fingerprint::{circular_fingerprint, DEFAULT_LENGTH, DEFAULT_RADIUS};
pub(crate) use fingerprint::{combine, identifiers, splitmix64};
pub(crate) use graph::ring_edge_flags;
pub use graph::{molecular_formula, AtomRecord, AtomSpec, BondKind, Edge, Formula, MoleculeGraph};
pub use smiles::{parse_smiles, SmilesError, SmilesErrorKind};
pub use writer::to_smiles;
