//! Message-passing layers and graph readouts as tape operations.
//!
//! Weights are stored `[in, out]` and applied as `h · W`.

use super::batch::GraphBatch;
use crate::error::Result;
use crate::tensor::{Tape, Var};

fn messages(tape: &mut Tape, h: Var, batch: &GraphBatch, w: Var, use_bonds: bool) -> Result<Var> {
    let gathered = tape.gather_rows(h, batch.src.clone())?;
    let input = if use_bonds {
        let bonds = tape.constant(batch.bonds.clone());
        tape.concat_cols(gathered, bonds)?
    } else {
        gathered
    };
    tape.matmul(input, w)
}

/// `h'_i = relu(Σ_{j ∈ N(i) ∪ {i}} W h_j / c_ij + b)` with
/// `c_ij = sqrt(|N(i)| · |N(j)|)`, neighborhoods counting the self-loop.
///
/// With bond features, each neighbor row is extended by the bond one-hot
/// (zero for the self-loop) and `w` carries 4 extra input rows.
pub fn gcn_layer(tape: &mut Tape, h: Var, batch: &GraphBatch, w: Var, b: Var, use_bonds: bool) -> Result<Var> {
    let msg = messages(tape, h, batch, w, use_bonds)?;
    let coef = tape.constant(batch.gcn_coef.clone());
    let scaled = tape.scale_rows(msg, coef)?;
    let summed = tape.scatter_add_rows(scaled, batch.dst.clone(), batch.num_nodes())?;
    let biased = tape.add_row_vector(summed, b)?;
    Ok(tape.relu(biased))
}

pub struct GatOutput {
    /// `N × H'` aggregated messages, before any activation.
    pub h: Var,
    /// Attention weight per message edge, in [`GraphBatch::edges`] order.
    pub attention: Var,
}

/// `h'_i = Σ_j α_ij W h_j` with
/// `α_ij = softmax_j(leaky_relu(aᵀ [W h_i ‖ W h_j]))` over the in-neighborhood
/// of `i`, self-loop included. No bias.
///
/// `a` has shape `[2H', 1]`. With bond features the message `W [h_j ‖ e_ij]`
/// takes the place of `W h_j`, and `W h_i` is the self-loop message.
pub fn gat_layer(
    tape: &mut Tape,
    h: Var,
    batch: &GraphBatch,
    w: Var,
    a: Var,
    slope: f64,
    use_bonds: bool,
) -> Result<GatOutput> {
    let msg = messages(tape, h, batch, w, use_bonds)?;
    // the first N message rows are the self-loops, i.e. W h_i
    let own = tape.gather_rows(msg, batch.dst.clone())?;
    let pair = tape.concat_cols(own, msg)?;
    let logits = tape.matmul(pair, a)?;
    let logits = tape.leaky_relu(logits, slope);
    let attention = tape.segment_softmax(logits, batch.dst.clone(), batch.num_nodes())?;
    let weighted = tape.scale_rows(msg, attention)?;
    let h = tape.scatter_add_rows(weighted, batch.dst.clone(), batch.num_nodes())?;
    Ok(GatOutput { h, attention })
}

/// Per-molecule, per-dimension maximum over nodes.
pub fn global_max_pool(tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
    tape.segment_max_rows(h, &batch.node_graph, batch.num_graphs())
}

pub fn global_avg_pool(tape: &mut Tape, h: Var, batch: &GraphBatch) -> Result<Var> {
    let sums = tape.scatter_add_rows(h, batch.node_graph.clone(), batch.num_graphs())?;
    let inv = tape.constant(batch.inv_counts.clone());
    tape.scale_rows(sums, inv)
}

/// Gated readout `Σ_i sigmoid(h_i · w_g + b_g) · (h_i · W_f + b_f)`.
pub fn global_attention_pool(
    tape: &mut Tape,
    h: Var,
    batch: &GraphBatch,
    gate_w: Var,
    gate_b: Var,
    feat_w: Var,
    feat_b: Var,
) -> Result<Var> {
    let g = tape.matmul(h, gate_w)?;
    let g = tape.add_row_vector(g, gate_b)?;
    let g = tape.sigmoid(g);
    let f = tape.matmul(h, feat_w)?;
    let f = tape.add_row_vector(f, feat_b)?;
    let gated = tape.scale_rows(f, g)?;
    tape.scatter_add_rows(gated, batch.node_graph.clone(), batch.num_graphs())
}

pub(crate) fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row_vector(y, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, MoleculeGraph, FEATURE_DIM};
    use crate::tensor::Tensor;

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data_mut()[i * n + i] = 1.0;
        }
        t
    }

    fn with_features(g: &MoleculeGraph, rows: &[Vec<f64>]) -> (Tape, Var, GraphBatch) {
        let batch = GraphBatch::new(&[g]).unwrap();
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_rows(rows).unwrap());
        (tape, h, batch)
    }

    #[test]
    fn gcn_single_node_is_relu() {
        let g = parse_smiles("C").unwrap();
        let (mut tape, h, batch) = with_features(&g, &[vec![-1.0, 2.0]]);
        let w = tape.constant(identity(2));
        let b = tape.constant(Tensor::zeros(&[2]));
        let out = gcn_layer(&mut tape, h, &batch, w, b, false).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0, 2.0]);
    }

    #[test]
    fn gcn_two_node_path() {
        let g = parse_smiles("CC").unwrap();
        let (mut tape, h, batch) = with_features(&g, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = tape.constant(identity(2));
        let b = tape.constant(Tensor::zeros(&[2]));
        let out = gcn_layer(&mut tape, h, &batch, w, b, false).unwrap();
        assert_eq!(tape.value(out).data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn gcn_is_local() {
        let g = parse_smiles("CC.O").unwrap();
        let (mut tape, h, batch) = with_features(&g, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![7.0, 3.0]]);
        let w = tape.constant(identity(2));
        let b = tape.constant(Tensor::zeros(&[2]));
        let out = gcn_layer(&mut tape, h, &batch, w, b, false).unwrap();
        assert_eq!(&tape.value(out).data()[..4], &[0.5, 0.5, 0.5, 0.5]);
    }

    fn gat(g: &MoleculeGraph, rows: &[Vec<f64>], a: Vec<f64>) -> (Tape, GatOutput, GraphBatch) {
        let (mut tape, h, batch) = with_features(g, rows);
        let width = rows[0].len();
        let w = tape.constant(identity(width));
        let a = tape.constant(Tensor::new(vec![2 * width, 1], a).unwrap());
        let out = gat_layer(&mut tape, h, &batch, w, a, 0.2, false).unwrap();
        (tape, out, batch)
    }

    #[test]
    fn gat_uniform_attention_for_identical_features() {
        let g = parse_smiles("CC(C)C").unwrap();
        let rows = vec![vec![0.3, -0.7]; 4];
        let (tape, out, batch) = gat(&g, &rows, vec![0.4, -1.0, 2.0, 0.5]);
        let alpha = tape.value(out.attention).data();
        for (k, (_, d)) in batch.edges().enumerate() {
            let deg = g.atoms()[d].degree + 1;
            assert!((alpha[k] - 1.0 / deg as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gat_attention_sums_to_one() {
        let g = parse_smiles("c1ccccc1O").unwrap();
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3 - 1.0, (i * i) as f64 * 0.1]).collect();
        let (tape, out, batch) = gat(&g, &rows, vec![0.4, -1.0, 2.0, 0.5]);
        let alpha = tape.value(out.attention).data();
        let mut sums = vec![0.0; 7];
        for (k, (_, d)) in batch.edges().enumerate() {
            assert!(alpha[k] > 0.0);
            sums[d] += alpha[k];
        }
        for s in sums {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gat_single_node_is_projection() {
        let g = parse_smiles("O").unwrap();
        let (tape, out, _) = gat(&g, &[vec![-2.0, 5.0]], vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(tape.value(out.h).data(), &[-2.0, 5.0]);
        assert_eq!(tape.value(out.attention).data(), &[1.0]);
    }

    #[test]
    fn zero_bond_rows_match_plain_layer() {
        let g = parse_smiles("C=CC#N").unwrap();
        let batch = GraphBatch::new(&[&g]).unwrap();
        let f = FEATURE_DIM;
        let w_plain: Vec<f64> = (0..f * 3).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let mut w_bond = w_plain.clone();
        w_bond.extend(vec![0.0; 4 * 3]);
        for use_gat in [false, true] {
            let mut tape = Tape::new();
            let h = tape.constant(batch.x.clone());
            let wp = tape.constant(Tensor::new(vec![f, 3], w_plain.clone()).unwrap());
            let wb = tape.constant(Tensor::new(vec![f + 4, 3], w_bond.clone()).unwrap());
            let (p, q) = if use_gat {
                let a = tape.constant(Tensor::new(vec![6, 1], vec![0.3, -0.2, 0.5, 0.1, 0.9, -0.4]).unwrap());
                (
                    gat_layer(&mut tape, h, &batch, wp, a, 0.2, false).unwrap().h,
                    gat_layer(&mut tape, h, &batch, wb, a, 0.2, true).unwrap().h,
                )
            } else {
                let b = tape.constant(Tensor::vector(vec![0.1, 0.0, -0.1]));
                (
                    gcn_layer(&mut tape, h, &batch, wp, b, false).unwrap(),
                    gcn_layer(&mut tape, h, &batch, wb, b, true).unwrap(),
                )
            };
            assert_eq!(tape.value(p).data(), tape.value(q).data());
        }
    }

    #[test]
    fn pooling_examples() {
        let g = parse_smiles("CC").unwrap();
        let (mut tape, h, batch) = with_features(&g, &[vec![1.0, 5.0], vec![3.0, 2.0]]);
        let max = global_max_pool(&mut tape, h, &batch).unwrap();
        assert_eq!(tape.value(max).data(), &[3.0, 5.0]);
        let avg = global_avg_pool(&mut tape, h, &batch).unwrap();
        assert_eq!(tape.value(avg).data(), &[2.0, 3.5]);
    }

    #[test]
    fn single_node_pooling() {
        let g = parse_smiles("N").unwrap();
        let (mut tape, h, batch) = with_features(&g, &[vec![0.5, -1.5]]);
        let max = global_max_pool(&mut tape, h, &batch).unwrap();
        let avg = global_avg_pool(&mut tape, h, &batch).unwrap();
        assert_eq!(tape.value(max).data(), &[0.5, -1.5]);
        assert_eq!(tape.value(avg).data(), &[0.5, -1.5]);
        let gw = tape.constant(Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap());
        let gb = tape.constant(Tensor::vector(vec![0.25]));
        let fw = tape.constant(identity(2));
        let fb = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let att = global_attention_pool(&mut tape, h, &batch, gw, gb, fw, fb).unwrap();
        let gate = 1.0 / (1.0 + (-(0.5 - 1.5 + 0.25f64)).exp());
        let got = tape.value(att).data();
        assert!((got[0] - gate * 1.5).abs() < 1e-15);
        assert!((got[1] - gate * -1.5).abs() < 1e-15);
    }
}
