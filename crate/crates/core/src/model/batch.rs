use std::sync::Arc;

use crate::chem::{bond_kind_one_hot, MoleculeGraph, BOND_FEATURE_DIM, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Several molecules packed into one disjoint-union graph.
///
/// Message edges are directed `src → dst`. The first `num_nodes` edges are
/// the self-loops (edge `i` is `i → i`), followed by both directions of
/// every bond.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub(crate) x: Tensor,
    pub(crate) src: Arc<[usize]>,
    pub(crate) dst: Arc<[usize]>,
    /// `E × 4` bond one-hots; self-loop rows are zero.
    pub(crate) bonds: Tensor,
    /// `1 / sqrt(deg(dst) · deg(src))` per edge, degrees counting the self-loop.
    pub(crate) gcn_coef: Tensor,
    pub(crate) node_graph: Arc<[usize]>,
    pub(crate) inv_counts: Tensor,
    num_graphs: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&MoleculeGraph]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Data("cannot batch zero molecules".into()));
        }
        let n: usize = graphs.iter().map(|g| g.num_atoms()).sum();
        let bonds_total: usize = graphs.iter().map(|g| g.edges().len()).sum();
        let e = n + 2 * bonds_total;

        let mut x = Vec::with_capacity(n * FEATURE_DIM);
        let mut node_graph = Vec::with_capacity(n);
        let mut degree = Vec::with_capacity(n);
        let mut inv_counts = Vec::with_capacity(graphs.len());
        for (gi, g) in graphs.iter().enumerate() {
            x.extend_from_slice(g.node_features().data());
            node_graph.extend(std::iter::repeat_n(gi, g.num_atoms()));
            degree.extend(g.atoms().iter().map(|a| (a.degree + 1) as f64));
            inv_counts.push(1.0 / g.num_atoms() as f64);
        }

        let mut src = Vec::with_capacity(e);
        let mut dst = Vec::with_capacity(e);
        let mut bond_rows = vec![0.0; e * BOND_FEATURE_DIM];
        src.extend(0..n);
        dst.extend(0..n);
        let mut offset = 0;
        for g in graphs {
            for edge in g.edges() {
                let hot = bond_kind_one_hot(edge.kind);
                for (a, b) in [(edge.a, edge.b), (edge.b, edge.a)] {
                    let k = src.len();
                    src.push(offset + a);
                    dst.push(offset + b);
                    bond_rows[k * BOND_FEATURE_DIM..(k + 1) * BOND_FEATURE_DIM].copy_from_slice(&hot);
                }
            }
            offset += g.num_atoms();
        }
        let coef: Vec<f64> = src
            .iter()
            .zip(&dst)
            .map(|(&j, &i)| 1.0 / (degree[i] * degree[j]).sqrt())
            .collect();

        Ok(GraphBatch {
            x: Tensor::new(vec![n, FEATURE_DIM], x)?,
            bonds: Tensor::new(vec![e, BOND_FEATURE_DIM], bond_rows)?,
            gcn_coef: Tensor::vector(coef),
            src: src.into(),
            dst: dst.into(),
            node_graph: node_graph.into(),
            inv_counts: Tensor::vector(inv_counts),
            num_graphs: graphs.len(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.num_graphs
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }

    /// Directed message edges, self-loops included.
    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn node_features(&self) -> &Tensor {
        &self.x
    }

    /// `(src, dst)` of every message edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.src.iter().copied().zip(self.dst.iter().copied())
    }

    pub fn gcn_coefficients(&self) -> &[f64] {
        self.gcn_coef.data()
    }

    /// Owning molecule of each node.
    pub fn node_graph(&self) -> &[usize] {
        &self.node_graph
    }
}
