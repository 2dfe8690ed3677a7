use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use rand::Rng;

use super::{matmul_into, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[m×n] + [n]`, the bias broadcast over rows.
    AddRowVector(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Log1p(Var),
    Sqrt(Var),
    /// Multiplies row `r` of a matrix by entry `r` of a vector.
    ScaleRows(Var, Var),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    /// Per-segment, per-column maximum; stores the winning row for each output cell.
    SegmentMaxRows(Var, Vec<usize>),
    SegmentSoftmax(Var, Arc<[usize]>, usize),
    ConcatCols(Var, Var),
    Reshape(Var),
    Dropout(Var, Vec<f64>),
    Sum(Var),
    Mean(Var),
    SumSquares(Var),
    Mse(Var, Var),
    NormalizeRows(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so it can be differentiated in reverse.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward simply walks it from the end.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visit_order: Vec<usize>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }

    /// Node indices in the order backward rules ran.
    pub fn visit_order(&self) -> &[usize] {
        &self.visit_order
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn unary(&mut self, x: Var, value: Tensor, op: Op) -> Var {
        let rg = self.grad_any(&[x]);
        self.push(value, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, value: Tensor, op: Op) -> Var {
        let rg = self.grad_any(&[a, b]);
        self.push(value, op, rg)
    }

    fn map(&self, x: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(x);
        Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    fn matrix_dims(&self, op: &'static str, x: Var) -> Result<(usize, usize)> {
        let t = self.value(x);
        if !t.is_matrix() {
            return Err(Error::shape(op, t.shape(), &[]));
        }
        Ok((t.shape[0], t.shape[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims("matmul", a)?;
        let (k2, n) = self.matrix_dims("matmul", b)?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&self.value(a).data, &self.value(b).data, &mut out, m, k, n);
        let value = Tensor {
            shape: vec![m, n],
            data: out,
        };
        Ok(self.binary(a, b, value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.binary(a, b, value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.binary(a, b, value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.binary(a, b, value, Op::Mul(a, b)))
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row_vector(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.matrix_dims("add_row_vector", x)?;
        if self.value(bias).numel() != n {
            return Err(Error::shape(
                "add_row_vector",
                self.value(x).shape(),
                self.value(bias).shape(),
            ));
        }
        let mut value = self.value(x).clone();
        let b = &self.value(bias).data;
        for row in value.data.chunks_mut(n) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        Ok(self.binary(x, bias, value, Op::AddRowVector(x, bias)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.map(x, |v| v * factor);
        self.unary(x, value, Op::Scale(x, factor))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.map(x, |v| v.max(0.0));
        self.unary(x, value, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = self.map(x, |v| if v > 0.0 { v } else { slope * v });
        self.unary(x, value, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.map(x, sigmoid);
        self.unary(x, value, Op::Sigmoid(x))
    }

    pub fn log1p(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data.iter().find(|&&v| v <= -1.0) {
            return Err(Error::Domain {
                op: "log1p",
                detail: format!("argument {bad} is not greater than -1"),
            });
        }
        let value = self.map(x, f64::ln_1p);
        Ok(self.unary(x, value, Op::Log1p(x)))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data.iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain {
                op: "sqrt",
                detail: format!("negative argument {bad}"),
            });
        }
        let value = self.map(x, f64::sqrt);
        Ok(self.unary(x, value, Op::Sqrt(x)))
    }

    /// `out[r, c] = x[r, c] * w[r]`.
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims("scale_rows", x)?;
        if self.value(w).numel() != m {
            return Err(Error::shape(
                "scale_rows",
                self.value(x).shape(),
                self.value(w).shape(),
            ));
        }
        let mut value = self.value(x).clone();
        let wd = &self.value(w).data;
        for (row, &s) in value.data.chunks_mut(n.max(1)).zip(wd) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        Ok(self.binary(x, w, value, Op::ScaleRows(x, w)))
    }

    /// Selects rows `index[0], index[1], ...` of a matrix.
    pub fn gather_rows(&mut self, x: Var, index: Arc<[usize]>) -> Result<Var> {
        let (m, n) = self.matrix_dims("gather_rows", x)?;
        if let Some(&bad) = index.iter().find(|&&i| i >= m) {
            return Err(Error::shape("gather_rows", &[m, n], &[bad]));
        }
        let src = &self.value(x).data;
        let mut data = Vec::with_capacity(index.len() * n);
        for &i in index.iter() {
            data.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let value = Tensor {
            shape: vec![index.len(), n],
            data,
        };
        Ok(self.unary(x, value, Op::GatherRows(x, index)))
    }

    /// Sums row `e` of `x` into output row `index[e]`; the output has `rows` rows.
    pub fn scatter_add_rows(&mut self, x: Var, index: Arc<[usize]>, rows: usize) -> Result<Var> {
        let (m, n) = self.matrix_dims("scatter_add_rows", x)?;
        if index.len() != m {
            return Err(Error::shape("scatter_add_rows", &[m, n], &[index.len()]));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("scatter_add_rows", &[rows], &[bad]));
        }
        let src = &self.value(x).data;
        let mut data = vec![0.0; rows * n];
        for (e, &i) in index.iter().enumerate() {
            for c in 0..n {
                data[i * n + c] += src[e * n + c];
            }
        }
        let value = Tensor {
            shape: vec![rows, n],
            data,
        };
        Ok(self.unary(x, value, Op::ScatterAddRows(x, index)))
    }

    /// Column-wise maximum over the rows belonging to each segment.
    pub fn segment_max_rows(&mut self, x: Var, segment: &[usize], segments: usize) -> Result<Var> {
        let (m, n) = self.matrix_dims("segment_max_rows", x)?;
        if segment.len() != m {
            return Err(Error::shape("segment_max_rows", &[m, n], &[segment.len()]));
        }
        let src = &self.value(x).data;
        let mut data = vec![f64::NEG_INFINITY; segments * n];
        let mut arg = vec![usize::MAX; segments * n];
        for (r, &s) in segment.iter().enumerate() {
            if s >= segments {
                return Err(Error::shape("segment_max_rows", &[segments], &[s]));
            }
            for c in 0..n {
                let v = src[r * n + c];
                let slot = s * n + c;
                if arg[slot] == usize::MAX || v > data[slot] {
                    data[slot] = v;
                    arg[slot] = r;
                }
            }
        }
        if n > 0 && arg.contains(&usize::MAX) {
            return Err(Error::Domain {
                op: "segment_max_rows",
                detail: "empty segment".into(),
            });
        }
        let value = Tensor {
            shape: vec![segments, n],
            data,
        };
        Ok(self.unary(x, value, Op::SegmentMaxRows(x, arg)))
    }

    /// Softmax over the entries sharing a segment id.
    ///
    /// Each segment is shifted by its own maximum before exponentiation.
    pub fn segment_softmax(&mut self, scores: Var, segment: Arc<[usize]>, segments: usize) -> Result<Var> {
        let s = self.value(scores);
        if segment.is_empty() || segments == 0 {
            return Err(Error::Domain {
                op: "segment_softmax",
                detail: "no segment ids supplied".into(),
            });
        }
        if segment.len() != s.numel() {
            return Err(Error::shape("segment_softmax", s.shape(), &[segment.len()]));
        }
        if let Some(&bad) = segment.iter().find(|&&g| g >= segments) {
            return Err(Error::shape("segment_softmax", &[segments], &[bad]));
        }
        let mut max = vec![f64::NEG_INFINITY; segments];
        for (&v, &g) in s.data.iter().zip(segment.iter()) {
            max[g] = max[g].max(v);
        }
        let mut data: Vec<f64> = s
            .data
            .iter()
            .zip(segment.iter())
            .map(|(&v, &g)| (v - max[g]).exp())
            .collect();
        let mut total = vec![0.0; segments];
        for (&v, &g) in data.iter().zip(segment.iter()) {
            total[g] += v;
        }
        for (v, &g) in data.iter_mut().zip(segment.iter()) {
            *v /= total[g];
        }
        let value = Tensor {
            shape: s.shape.clone(),
            data,
        };
        Ok(self.unary(scores, value, Op::SegmentSoftmax(scores, segment, segments)))
    }

    /// `[m×a] ++ [m×b] → [m×(a+b)]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, na) = self.matrix_dims("concat_cols", a)?;
        let (mb, nb) = self.matrix_dims("concat_cols", b)?;
        if m != mb {
            return Err(Error::shape(
                "concat_cols",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let (ad, bd) = (&self.value(a).data, &self.value(b).data);
        let mut data = Vec::with_capacity(m * (na + nb));
        for r in 0..m {
            data.extend_from_slice(&ad[r * na..(r + 1) * na]);
            data.extend_from_slice(&bd[r * nb..(r + 1) * nb]);
        }
        let value = Tensor {
            shape: vec![m, na + nb],
            data,
        };
        Ok(self.binary(a, b, value, Op::ConcatCols(a, b)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if shape.iter().product::<usize>() != t.numel() {
            return Err(Error::shape("reshape", t.shape(), shape));
        }
        let value = Tensor {
            shape: shape.to_vec(),
            data: t.data.clone(),
        };
        Ok(self.unary(x, value, Op::Reshape(x)))
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let value = {
            let t = self.value(x);
            Tensor {
                shape: t.shape.clone(),
                data: t.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
            }
        };
        Ok(self.unary(x, value, Op::Dropout(x, mask)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data.iter().sum());
        self.unary(x, value, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.data.iter().sum::<f64>() / t.numel().max(1) as f64);
        self.unary(x, value, Op::Mean(x))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data.iter().map(|v| v * v).sum());
        self.unary(x, value, Op::SumSquares(x))
    }

    /// Mean over all entries of the squared difference.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse", pred, target)?;
        let (p, t) = (self.value(pred), self.value(target));
        let n = p.numel().max(1) as f64;
        let total: f64 = p.data.iter().zip(&t.data).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.binary(pred, target, Tensor::scalar(total / n), Op::Mse(pred, target)))
    }

    /// Scales every row to unit Euclidean norm: `x / (‖x‖ + eps)`.
    pub fn normalize_rows(&mut self, x: Var, eps: f64) -> Result<Var> {
        let (_, n) = self.matrix_dims("normalize_rows", x)?;
        let mut value = self.value(x).clone();
        for row in value.data.chunks_mut(n.max(1)) {
            let d = row.iter().map(|v| v * v).sum::<f64>().sqrt() + eps;
            row.iter_mut().for_each(|v| *v /= d);
        }
        Ok(self.unary(x, value, Op::NormalizeRows(x, eps)))
    }

    /// Hash of every piecewise branch taken in the forward pass: ReLU and
    /// leaky-ReLU input signs and the winning rows of segment maxima.
    ///
    /// Two evaluations with equal signatures lie on the same smooth piece.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::Relu(x) | Op::LeakyRelu(x, _) => {
                    i.hash(&mut h);
                    for v in &self.value(*x).data {
                        (*v > 0.0).hash(&mut h);
                    }
                }
                Op::SegmentMaxRows(_, arg) => {
                    i.hash(&mut h);
                    arg.hash(&mut h);
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape("backward", self.value(loss).shape(), &[1]));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut visit_order = Vec::new();
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads, visit_order });
        }
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if !matches!(node.op, Op::Leaf) {
                visit_order.push(i);
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, visit_order })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, delta: impl FnOnce(&mut [f64])) {
        let node = &self.nodes[var.0];
        if !node.requires_grad {
            return;
        }
        let slot = grads[var.0].get_or_insert_with(|| Tensor::zeros(node.value.shape()));
        delta(&mut slot.data);
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = &g.data;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
                self.accumulate(grads, *a, |da| {
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += gd[i * n + j] * bv.data[p * n + j];
                            }
                            da[i * k + p] += s;
                        }
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av.data[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += aip * gd[i * n + j];
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |d| add_assign(d, gd));
                self.accumulate(grads, *b, |d| add_assign(d, gd));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |d| add_assign(d, gd));
                self.accumulate(grads, *b, |d| d.iter_mut().zip(gd).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                self.accumulate(grads, *a, |d| {
                    for ((x, y), w) in d.iter_mut().zip(gd).zip(bv) {
                        *x += y * w;
                    }
                });
                self.accumulate(grads, *b, |d| {
                    for ((x, y), w) in d.iter_mut().zip(gd).zip(av) {
                        *x += y * w;
                    }
                });
            }
            Op::AddRowVector(x, bias) => {
                let n = self.value(*bias).numel();
                self.accumulate(grads, *x, |d| add_assign(d, gd));
                self.accumulate(grads, *bias, |d| {
                    for row in gd.chunks(n.max(1)) {
                        add_assign(d, row);
                    }
                });
            }
            Op::Scale(x, f) => {
                self.accumulate(grads, *x, |d| d.iter_mut().zip(gd).for_each(|(a, b)| *a += f * b));
            }
            Op::Relu(x) => {
                let xv = &self.value(*x).data;
                self.accumulate(grads, *x, |d| {
                    for ((a, b), v) in d.iter_mut().zip(gd).zip(xv) {
                        if *v > 0.0 {
                            *a += b;
                        }
                    }
                });
            }
            Op::LeakyRelu(x, slope) => {
                let xv = &self.value(*x).data;
                self.accumulate(grads, *x, |d| {
                    for ((a, b), v) in d.iter_mut().zip(gd).zip(xv) {
                        *a += if *v > 0.0 { *b } else { slope * b };
                    }
                });
            }
            Op::Sigmoid(x) => {
                let yv = &node.value.data;
                self.accumulate(grads, *x, |d| {
                    for ((a, b), y) in d.iter_mut().zip(gd).zip(yv) {
                        *a += b * y * (1.0 - y);
                    }
                });
            }
            Op::Log1p(x) => {
                let xv = &self.value(*x).data;
                self.accumulate(grads, *x, |d| {
                    for ((a, b), v) in d.iter_mut().zip(gd).zip(xv) {
                        *a += b / (1.0 + v);
                    }
                });
            }
            Op::Sqrt(x) => {
                let yv = &node.value.data;
                self.accumulate(grads, *x, |d| {
                    for ((a, b), y) in d.iter_mut().zip(gd).zip(yv) {
                        // subgradient 0 at the origin
                        if *y > 0.0 {
                            *a += b / (2.0 * y);
                        }
                    }
                });
            }
            Op::ScaleRows(x, w) => {
                let (xv, wv) = (self.value(*x), &self.value(*w).data);
                let n = xv.cols();
                self.accumulate(grads, *x, |d| {
                    for (r, &s) in wv.iter().enumerate() {
                        for c in 0..n {
                            d[r * n + c] += gd[r * n + c] * s;
                        }
                    }
                });
                self.accumulate(grads, *w, |d| {
                    for (r, dw) in d.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for c in 0..n {
                            s += gd[r * n + c] * xv.data[r * n + c];
                        }
                        *dw += s;
                    }
                });
            }
            Op::GatherRows(x, index) => {
                let n = node.value.cols();
                self.accumulate(grads, *x, |d| {
                    for (e, &i) in index.iter().enumerate() {
                        for c in 0..n {
                            d[i * n + c] += gd[e * n + c];
                        }
                    }
                });
            }
            Op::ScatterAddRows(x, index) => {
                let n = node.value.cols();
                self.accumulate(grads, *x, |d| {
                    for (e, &i) in index.iter().enumerate() {
                        for c in 0..n {
                            d[e * n + c] += gd[i * n + c];
                        }
                    }
                });
            }
            Op::SegmentMaxRows(x, arg) => {
                let n = node.value.cols();
                self.accumulate(grads, *x, |d| {
                    for (slot, &r) in arg.iter().enumerate() {
                        d[r * n + slot % n] += gd[slot];
                    }
                });
            }
            Op::SegmentSoftmax(x, segment, segments) => {
                let y = &node.value.data;
                let mut dot = vec![0.0; *segments];
                for ((yv, gv), &s) in y.iter().zip(gd).zip(segment.iter()) {
                    dot[s] += yv * gv;
                }
                self.accumulate(grads, *x, |d| {
                    for (e, &s) in segment.iter().enumerate() {
                        d[e] += y[e] * (gd[e] - dot[s]);
                    }
                });
            }
            Op::ConcatCols(a, b) => {
                let na = self.value(*a).cols();
                let nb = self.value(*b).cols();
                let n = na + nb;
                self.accumulate(grads, *a, |d| {
                    for (r, row) in d.chunks_mut(na.max(1)).enumerate() {
                        add_assign(row, &gd[r * n..r * n + na]);
                    }
                });
                self.accumulate(grads, *b, |d| {
                    for (r, row) in d.chunks_mut(nb.max(1)).enumerate() {
                        add_assign(row, &gd[r * n + na..(r + 1) * n]);
                    }
                });
            }
            Op::Reshape(x) => self.accumulate(grads, *x, |d| add_assign(d, gd)),
            Op::Dropout(x, mask) => {
                self.accumulate(grads, *x, |d| {
                    for ((a, b), m) in d.iter_mut().zip(gd).zip(mask) {
                        *a += b * m;
                    }
                });
            }
            Op::Sum(x) => {
                let s = gd[0];
                self.accumulate(grads, *x, |d| d.iter_mut().for_each(|a| *a += s));
            }
            Op::Mean(x) => {
                let s = gd[0] / self.value(*x).numel().max(1) as f64;
                self.accumulate(grads, *x, |d| d.iter_mut().for_each(|a| *a += s));
            }
            Op::SumSquares(x) => {
                let (s, xv) = (gd[0], &self.value(*x).data);
                self.accumulate(grads, *x, |d| {
                    for (a, v) in d.iter_mut().zip(xv) {
                        *a += 2.0 * s * v;
                    }
                });
            }
            Op::Mse(p, t) => {
                let (pv, tv) = (&self.value(*p).data, &self.value(*t).data);
                let s = 2.0 * gd[0] / pv.len().max(1) as f64;
                self.accumulate(grads, *p, |d| {
                    for ((a, x), y) in d.iter_mut().zip(pv).zip(tv) {
                        *a += s * (x - y);
                    }
                });
                self.accumulate(grads, *t, |d| {
                    for ((a, x), y) in d.iter_mut().zip(pv).zip(tv) {
                        *a -= s * (x - y);
                    }
                });
            }
            Op::NormalizeRows(x, eps) => {
                let xv = self.value(*x);
                let n = xv.cols().max(1);
                self.accumulate(grads, *x, |d| {
                    for ((drow, xrow), grow) in d.chunks_mut(n).zip(xv.data.chunks(n)).zip(gd.chunks(n)) {
                        let norm = xrow.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let denom = norm + eps;
                        let proj = if norm > 0.0 {
                            xrow.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>() / (denom * denom * norm)
                        } else {
                            0.0
                        };
                        for ((a, xi), gi) in drow.iter_mut().zip(xrow).zip(grow) {
                            *a += gi / denom - xi * proj;
                        }
                    }
                });
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}
