use std::collections::BTreeMap;
use std::fmt;

use super::elements::Element;
use super::features::{featurize, FEATURE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondKind {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondKind {
    pub const ALL: [BondKind; 4] = [
        BondKind::Single,
        BondKind::Double,
        BondKind::Triple,
        BondKind::Aromatic,
    ];

    /// Contribution to the valence sum; aromatic bonds count as one.
    pub fn valence_order(self) -> u8 {
        match self {
            BondKind::Single | BondKind::Aromatic => 1,
            BondKind::Double => 2,
            BondKind::Triple => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
}

/// Input description of one heavy (or explicit hydrogen) atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtomSpec {
    pub element: Element,
    pub charge: i8,
    pub hydrogens: u8,
    pub aromatic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomRecord {
    pub element: Element,
    pub atomic_weight: f64,
    pub degree: usize,
    pub hydrogens: u8,
    pub in_ring: bool,
    pub aromatic: bool,
    pub charge: i8,
}

/// A molecule as an atom graph with implicit hydrogens.
///
/// Edges are stored with `a < b`; the adjacency matrix is derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeGraph {
    atoms: Vec<AtomRecord>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<(usize, BondKind)>>,
    features: Tensor,
    smiles: String,
}

impl MoleculeGraph {
    /// Builds a graph and derives degrees, ring membership and features.
    pub fn from_parts(atoms: &[AtomSpec], edges: &[Edge], smiles: impl Into<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Data("molecule has no atoms".into()));
        }
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let (a, b) = (e.a.min(e.b), e.a.max(e.b));
            if b >= n || a == b {
                return Err(Error::Data(format!("invalid edge {}-{}", e.a, e.b)));
            }
            if neighbors[a].iter().any(|&(j, _)| j == b) {
                return Err(Error::Data(format!("duplicate edge {a}-{b}")));
            }
            neighbors[a].push((b, e.kind));
            neighbors[b].push((a, e.kind));
            normalized.push(Edge { a, b, kind: e.kind });
        }
        let ring_edges = ring_edge_flags(n, &normalized);
        let mut in_ring = vec![false; n];
        for (e, &ring) in normalized.iter().zip(&ring_edges) {
            if ring {
                in_ring[e.a] = true;
                in_ring[e.b] = true;
            }
        }
        let records: Vec<AtomRecord> = atoms
            .iter()
            .enumerate()
            .map(|(i, s)| AtomRecord {
                element: s.element,
                atomic_weight: s.element.atomic_weight(),
                degree: neighbors[i].len(),
                hydrogens: s.hydrogens,
                in_ring: in_ring[i],
                aromatic: s.aromatic,
                charge: s.charge,
            })
            .collect();
        let features = featurize(&records);
        Ok(MoleculeGraph {
            atoms: records,
            edges: normalized,
            neighbors,
            features,
            smiles: smiles.into(),
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[AtomRecord] {
        &self.atoms
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, BondKind)] {
        &self.neighbors[atom]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondKind> {
        self.neighbors[a].iter().find(|&&(j, _)| j == b).map(|&(_, k)| k)
    }

    /// Node feature matrix, one row per atom.
    pub fn node_features(&self) -> &Tensor {
        &self.features
    }

    pub fn schema_version(&self) -> u32 {
        FEATURE_SCHEMA_VERSION
    }

    pub fn smiles(&self) -> &str {
        &self.smiles
    }

    /// Dense symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.num_atoms();
        let mut a = vec![vec![0u8; n]; n];
        for e in &self.edges {
            a[e.a][e.b] = 1;
            a[e.b][e.a] = 1;
        }
        a
    }

    pub fn atom_specs(&self) -> Vec<AtomSpec> {
        self.atoms
            .iter()
            .map(|a| AtomSpec {
                element: a.element,
                charge: a.charge,
                hydrogens: a.hydrogens,
                aromatic: a.aromatic,
            })
            .collect()
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_atoms();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Data("not a permutation of the atom indices".into()));
        }
        let specs = self.atom_specs();
        let mut atoms = specs.clone();
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = specs[old];
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                a: perm[e.a],
                b: perm[e.b],
                kind: e.kind,
            })
            .collect();
        MoleculeGraph::from_parts(&atoms, &edges, self.smiles.clone())
    }

    /// Element counts including implicit hydrogens.
    pub fn formula(&self) -> Formula {
        let mut counts: BTreeMap<Element, u32> = BTreeMap::new();
        for a in &self.atoms {
            *counts.entry(a.element).or_default() += 1;
            if a.hydrogens > 0 {
                *counts.entry(Element::H).or_default() += u32::from(a.hydrogens);
            }
        }
        Formula { counts }
    }
}

/// Free function form of [`MoleculeGraph::formula`].
pub fn molecular_formula(graph: &MoleculeGraph) -> Formula {
    graph.formula()
}

/// Element counts; displays in Hill order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    counts: BTreeMap<Element, u32>,
}

impl Formula {
    pub fn count(&self, element: Element) -> u32 {
        self.counts.get(&element).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<Element, u32> {
        &self.counts
    }

    /// Hill order: C then H when carbon is present, everything else alphabetical.
    pub fn hill_order(&self) -> Vec<(Element, u32)> {
        let mut items: Vec<(Element, u32)> = self.counts.iter().map(|(&e, &c)| (e, c)).collect();
        let has_carbon = self.counts.contains_key(&Element::C);
        items.sort_by_key(|(e, _)| {
            let rank = match (*e, has_carbon) {
                (Element::C, true) => 0,
                (Element::H, true) => 1,
                _ => 2,
            };
            (rank, e.symbol())
        });
        items
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (e, c) in self.hill_order() {
            if c == 1 {
                write!(f, "{e}")?;
            } else {
                write!(f, "{e}{c}")?;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    /// Reads element symbols with optional counts, e.g. `C6H6` or `ClH`.
    /// Each element may appear once; counts of zero are rejected.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Data(format!("invalid formula `{s}`: {why}"));
        let bytes = s.as_bytes();
        if bytes.is_empty() {
            return Err(bad("empty"));
        }
        let mut counts = BTreeMap::new();
        let mut i = 0;
        while i < bytes.len() {
            if !bytes[i].is_ascii_uppercase() {
                return Err(bad("expected an element symbol"));
            }
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_lowercase() {
                i += 1;
            }
            let symbol = &s[start..i];
            let element = Element::from_symbol(symbol).ok_or_else(|| bad(&format!("unknown element `{symbol}`")))?;
            let digits = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let count = if digits == i {
                1
            } else {
                s[digits..i].parse::<u32>().map_err(|_| bad("count out of range"))?
            };
            if count == 0 {
                return Err(bad(&format!("zero count for `{symbol}`")));
            }
            if counts.insert(element, count).is_some() {
                return Err(bad(&format!("`{symbol}` appears twice")));
            }
        }
        Ok(Formula { counts })
    }
}

/// Flags each edge that lies on a cycle (i.e. is not a bridge).
pub(crate) fn ring_edge_flags(n: usize, edges: &[Edge]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        adj[e.a].push((e.b, i));
        adj[e.b].push((e.a, i));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; edges.len()];
    let mut timer = 0;
    // iterative DFS: (node, parent edge, next neighbor cursor)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (v, parent_edge) = (top.0, top.1);
            if top.2 < adj[v].len() {
                let (w, ei) = adj[v][top.2];
                top.2 += 1;
                if ei == parent_edge {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, ei, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|b| !b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carbon(h: u8) -> AtomSpec {
        AtomSpec {
            element: Element::C,
            charge: 0,
            hydrogens: h,
            aromatic: false,
        }
    }

    fn edge(a: usize, b: usize) -> Edge {
        Edge {
            a,
            b,
            kind: BondKind::Single,
        }
    }

    #[test]
    fn ring_detection_on_fused_and_pendant() {
        // cyclopropane with a pendant methyl
        let atoms = vec![carbon(2), carbon(2), carbon(1), carbon(3)];
        let g = MoleculeGraph::from_parts(&atoms, &[edge(0, 1), edge(1, 2), edge(2, 0), edge(2, 3)], "").unwrap();
        let rings: Vec<bool> = g.atoms().iter().map(|a| a.in_ring).collect();
        assert_eq!(rings, vec![true, true, true, false]);
    }

    #[test]
    fn rejects_bad_edges() {
        let atoms = vec![carbon(3), carbon(3)];
        assert!(MoleculeGraph::from_parts(&atoms, &[edge(0, 0)], "").is_err());
        assert!(MoleculeGraph::from_parts(&atoms, &[edge(0, 2)], "").is_err());
        assert!(MoleculeGraph::from_parts(&atoms, &[edge(0, 1), edge(1, 0)], "").is_err());
        assert!(MoleculeGraph::from_parts(&[], &[], "").is_err());
    }

    #[test]
    fn adjacency_is_symmetric_with_zero_diagonal() {
        let atoms = vec![carbon(3), carbon(2), carbon(3)];
        let g = MoleculeGraph::from_parts(&atoms, &[edge(1, 0), edge(1, 2)], "").unwrap();
        let a = g.adjacency();
        for i in 0..3 {
            assert_eq!(a[i][i], 0);
            for j in 0..3 {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
        assert!(g.edges().iter().all(|e| e.a < e.b));
    }

    #[test]
    fn permutation_moves_feature_rows() {
        let mut atoms = vec![carbon(3), carbon(2)];
        atoms.push(AtomSpec {
            element: Element::O,
            charge: 0,
            hydrogens: 1,
            aromatic: false,
        });
        let g = MoleculeGraph::from_parts(&atoms, &[edge(0, 1), edge(1, 2)], "CCO").unwrap();
        let perm = [2, 0, 1];
        let p = g.permute(&perm).unwrap();
        for (old, &new) in perm.iter().enumerate() {
            assert_eq!(g.node_features().row(old), p.node_features().row(new));
        }
        assert!(g.permute(&[0, 0, 1]).is_err());
    }
}
