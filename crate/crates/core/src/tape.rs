//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive application in order; [`Tape::backward`]
//! replays them in reverse and accumulates gradients into the [`ParamStore`]
//! entries that seeded the graph. The primitive set is exactly what the model
//! needs: matrix products, elementwise maps, row gather/mean operations, and
//! softmax normalizations. There is no graph optimization and no broadcasting
//! beyond the one row-broadcast add the projection bias needs.
//!
//! Shape mismatches are programmer errors and panic. Non-finite values are
//! not policed per primitive; the training loop checks the loss and the
//! parameters once per step, which is where divergence matters.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::matrix::{matmul, matmul_nt, matmul_tn, DenseMatrix};

/// Handle to a named parameter (and its gradient accumulator).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named collection of trainable matrices, each paired with a gradient
/// accumulator of the same shape. Insertion order is stable and defines the
/// serialization order of checkpoints.
#[derive(Clone, Debug)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    by_name: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
struct ParamEntry {
    name: String,
    value: DenseMatrix,
    grad: DenseMatrix,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: DenseMatrix) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = self.entries.len();
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad,
        });
        self.by_name.insert(name.to_string(), id);
        ParamId(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].grad
    }

    /// Iterate `(name, value)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.iter_mut() {
            e.grad.fill(0.0);
        }
    }

    /// Plain SGD update: value -= lr * grad.
    pub fn sgd_step(&mut self, lr: f64) {
        for e in self.entries.iter_mut() {
            e.value.add_scaled_assign(&e.grad, -lr);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_finite())
    }

    fn accumulate_grad(&mut self, id: ParamId, g: &DenseMatrix) {
        self.entries[id.0].grad.add_assign(g);
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value produced on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValueId(usize);

enum Op {
    /// Constant or parameter leaf; parameters receive gradient on backward.
    Leaf(Option<ParamId>),
    MatMul(ValueId, ValueId),
    Transpose(ValueId),
    Add(ValueId, ValueId),
    /// (n x d) + broadcast of a (1 x d) row.
    AddRowBroadcast(ValueId, ValueId),
    /// Constant shift; the scalar is baked into the forward value and the
    /// gradient passes through unchanged.
    AddScalar(ValueId),
    Scale(ValueId, f64),
    Hadamard(ValueId, ValueId),
    ConcatCols(Vec<ValueId>),
    /// Single-column slice.
    Col(ValueId, usize),
    GatherRows(ValueId, Vec<u32>),
    /// Output row i is the mean of the input rows listed in groups[i].
    NeighborMean(ValueId, Vec<Vec<u32>>),
    MeanRows(ValueId),
    RowMeans(ValueId),
    MeanEntries(ValueId),
    Relu(ValueId),
    Tanh(ValueId),
    Sigmoid(ValueId),
    Exp(ValueId),
    Ln(ValueId),
    Clamp(ValueId, f64, f64),
    SoftmaxVec(ValueId),
    SoftmaxRows(ValueId),
    Dot(ValueId, ValueId),
}

struct Node {
    value: DenseMatrix,
    op: Op,
}

/// Records primitive applications for one forward pass.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: ValueId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "scalar() on a {}x{} node", v.rows(), v.cols());
        v.get(0, 0)
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> ValueId {
        let id = ValueId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    pub fn constant(&mut self, value: DenseMatrix) -> ValueId {
        self.push(value, Op::Leaf(None))
    }

    /// Copy the current value of a parameter onto the tape; backward will
    /// accumulate into its gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> ValueId {
        self.push(store.value(id).clone(), Op::Leaf(Some(id)))
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let v = matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let mut v = va.clone();
        v.add_assign(vb);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row_broadcast(&mut self, a: ValueId, row: ValueId) -> ValueId {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows(), 1, "broadcast operand must be a row vector");
        assert_eq!(va.cols(), vr.cols(), "broadcast width mismatch");
        let mut v = va.clone();
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(vr.row(0).iter()) {
                *x += b;
            }
        }
        self.push(v, Op::AddRowBroadcast(a, row))
    }

    pub fn add_scalar(&mut self, a: ValueId, s: f64) -> ValueId {
        let v = self.value(a).map(|x| x + s);
        self.push(v, Op::AddScalar(a))
    }

    pub fn scale(&mut self, a: ValueId, factor: f64) -> ValueId {
        let v = self.value(a).map(|x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    pub fn hadamard(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "hadamard shape mismatch");
        let mut v = va.clone();
        for (x, y) in v.data_mut().iter_mut().zip(vb.data().iter()) {
            *x *= y;
        }
        self.push(v, Op::Hadamard(a, b))
    }

    pub fn concat_cols(&mut self, parts: &[ValueId]) -> ValueId {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = DenseMatrix::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows(), rows, "concat_cols row mismatch");
            for i in 0..rows {
                let src = vp.row(i);
                v.row_mut(i)[offset..offset + src.len()].copy_from_slice(src);
            }
            offset += vp.cols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn col(&mut self, a: ValueId, j: usize) -> ValueId {
        let va = self.value(a);
        assert!(j < va.cols(), "column index out of range");
        let data: Vec<f64> = (0..va.rows()).map(|i| va.get(i, j)).collect();
        self.push(DenseMatrix::col_vector(data), Op::Col(a, j))
    }

    pub fn gather_rows(&mut self, a: ValueId, indices: &[u32]) -> ValueId {
        let va = self.value(a);
        let mut v = DenseMatrix::zeros(indices.len(), va.cols());
        for (out, &idx) in indices.iter().enumerate() {
            v.row_mut(out).copy_from_slice(va.row(idx as usize));
        }
        self.push(v, Op::GatherRows(a, indices.to_vec()))
    }

    /// Row i of the output is the mean of the input rows in `groups[i]`.
    /// Empty groups are rejected; the propagation step always includes the
    /// focal node itself.
    pub fn neighbor_mean(&mut self, a: ValueId, groups: Vec<Vec<u32>>) -> ValueId {
        let va = self.value(a);
        let mut v = DenseMatrix::zeros(groups.len(), va.cols());
        for (i, group) in groups.iter().enumerate() {
            assert!(!group.is_empty(), "neighbor_mean group {i} is empty");
            let row = v.row_mut(i);
            for &j in group {
                for (o, x) in row.iter_mut().zip(va.row(j as usize).iter()) {
                    *o += x;
                }
            }
            let inv = 1.0 / group.len() as f64;
            for o in row.iter_mut() {
                *o *= inv;
            }
        }
        self.push(v, Op::NeighborMean(a, groups))
    }

    /// Mean over all rows: (n x d) -> (1 x d).
    pub fn mean_rows(&mut self, a: ValueId) -> ValueId {
        let va = self.value(a);
        let inv = 1.0 / va.rows() as f64;
        let mut v = DenseMatrix::zeros(1, va.cols());
        for i in 0..va.rows() {
            for (o, x) in v.row_mut(0).iter_mut().zip(va.row(i).iter()) {
                *o += x;
            }
        }
        for o in v.data_mut().iter_mut() {
            *o *= inv;
        }
        self.push(v, Op::MeanRows(a))
    }

    /// Per-row mean: (n x d) -> (n x 1).
    pub fn row_means(&mut self, a: ValueId) -> ValueId {
        let va = self.value(a);
        let inv = 1.0 / va.cols() as f64;
        let data: Vec<f64> = (0..va.rows())
            .map(|i| va.row(i).iter().sum::<f64>() * inv)
            .collect();
        self.push(DenseMatrix::col_vector(data), Op::RowMeans(a))
    }

    /// Mean over every entry: (n x d) -> (1 x 1).
    pub fn mean_entries(&mut self, a: ValueId) -> ValueId {
        let va = self.value(a);
        let n = (va.rows() * va.cols()) as f64;
        let m = va.data().iter().sum::<f64>() / n;
        self.push(DenseMatrix::from_vec(1, 1, vec![m]), Op::MeanEntries(a))
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(math::relu);
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(math::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(math::sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(math::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: ValueId) -> ValueId {
        let v = self.value(a).map(math::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn clamp(&mut self, a: ValueId, lo: f64, hi: f64) -> ValueId {
        assert!(lo < hi, "clamp bounds inverted");
        let v = self.value(a).map(|x| x.max(lo).min(hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    /// Softmax over the entries of a row or column vector, computed with
    /// max-subtraction.
    pub fn softmax_vec(&mut self, a: ValueId) -> ValueId {
        let va = self.value(a);
        assert!(
            va.rows() == 1 || va.cols() == 1,
            "softmax_vec needs a vector, got {}x{}",
            va.rows(),
            va.cols()
        );
        let data = softmax_slice(va.data());
        let v = DenseMatrix::from_vec(va.rows(), va.cols(), data);
        self.push(v, Op::SoftmaxVec(a))
    }

    /// Row-wise softmax of an (n x m) matrix.
    pub fn softmax_rows(&mut self, a: ValueId) -> ValueId {
        let va = self.value(a);
        let mut v = DenseMatrix::zeros(va.rows(), va.cols());
        for i in 0..va.rows() {
            let row = softmax_slice(va.row(i));
            v.row_mut(i).copy_from_slice(&row);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Inner product of two equal-shape values: -> (1 x 1).
    pub fn dot(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "dot shape mismatch");
        let s: f64 = va.data().iter().zip(vb.data().iter()).map(|(x, y)| x * y).sum();
        self.push(DenseMatrix::from_vec(1, 1, vec![s]), Op::Dot(a, b))
    }

    /// Accumulate d(loss)/d(param) into the store for every parameter that
    /// participated in producing `loss`, which must be a 1x1 node on this
    /// tape. Gradients add onto whatever the store already holds.
    pub fn backward(&self, loss: ValueId, store: &mut ParamStore) {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward seed must be scalar"
        );
        let mut adjoints: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        adjoints[loss.0] = Some(DenseMatrix::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adjoints[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf(param) => {
                    if let Some(pid) = param {
                        store.accumulate_grad(*pid, &g);
                    }
                }
                Op::MatMul(a, b) => {
                    let da = matmul_nt(&g, self.value(*b));
                    let db = matmul_tn(self.value(*a), &g);
                    add_adjoint(&mut adjoints, *a, da);
                    add_adjoint(&mut adjoints, *b, db);
                }
                Op::Transpose(a) => {
                    add_adjoint(&mut adjoints, *a, g.transpose());
                }
                Op::Add(a, b) => {
                    add_adjoint(&mut adjoints, *a, g.clone());
                    add_adjoint(&mut adjoints, *b, g);
                }
                Op::AddRowBroadcast(a, row) => {
                    let mut drow = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, x) in drow.row_mut(0).iter_mut().zip(g.row(i).iter()) {
                            *o += x;
                        }
                    }
                    add_adjoint(&mut adjoints, *a, g);
                    add_adjoint(&mut adjoints, *row, drow);
                }
                Op::AddScalar(a) => {
                    add_adjoint(&mut adjoints, *a, g);
                }
                Op::Scale(a, factor) => {
                    add_adjoint(&mut adjoints, *a, g.map(|x| x * factor));
                }
                Op::Hadamard(a, b) => {
                    let da = elementwise_mul(&g, self.value(*b));
                    let db = elementwise_mul(&g, self.value(*a));
                    add_adjoint(&mut adjoints, *a, da);
                    add_adjoint(&mut adjoints, *b, db);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut dp = DenseMatrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + w]);
                        }
                        add_adjoint(&mut adjoints, p, dp);
                        offset += w;
                    }
                }
                Op::Col(a, j) => {
                    let va_shape = self.value(*a).shape();
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    for i in 0..g.rows() {
                        da.set(i, *j, g.get(i, 0));
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::GatherRows(a, indices) => {
                    let va_shape = self.value(*a).shape();
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    for (out, &idx) in indices.iter().enumerate() {
                        for (o, x) in da.row_mut(idx as usize).iter_mut().zip(g.row(out).iter()) {
                            *o += x;
                        }
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::NeighborMean(a, groups) => {
                    let va_shape = self.value(*a).shape();
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    for (i, group) in groups.iter().enumerate() {
                        let inv = 1.0 / group.len() as f64;
                        for &j in group {
                            for (o, x) in da.row_mut(j as usize).iter_mut().zip(g.row(i).iter()) {
                                *o += x * inv;
                            }
                        }
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::MeanRows(a) => {
                    let va_shape = self.value(*a).shape();
                    let inv = 1.0 / va_shape.0 as f64;
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    for i in 0..va_shape.0 {
                        for (o, x) in da.row_mut(i).iter_mut().zip(g.row(0).iter()) {
                            *o = x * inv;
                        }
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::RowMeans(a) => {
                    let va_shape = self.value(*a).shape();
                    let inv = 1.0 / va_shape.1 as f64;
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    for i in 0..va_shape.0 {
                        let gi = g.get(i, 0) * inv;
                        for o in da.row_mut(i).iter_mut() {
                            *o = gi;
                        }
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::MeanEntries(a) => {
                    let va_shape = self.value(*a).shape();
                    let inv = 1.0 / (va_shape.0 * va_shape.1) as f64;
                    let gi = g.get(0, 0) * inv;
                    let mut da = DenseMatrix::zeros(va_shape.0, va_shape.1);
                    da.fill(gi);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Relu(a) => {
                    let da = masked_grad(&g, self.value(*a), |x| x > 0.0);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[idx].value;
                    let da = zip_map(&g, y, |gi, yi| gi * (1.0 - yi * yi));
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[idx].value;
                    let da = zip_map(&g, y, |gi, yi| gi * yi * (1.0 - yi));
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Exp(a) => {
                    let y = &self.nodes[idx].value;
                    let da = zip_map(&g, y, |gi, yi| gi * yi);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Ln(a) => {
                    let da = zip_map(&g, self.value(*a), |gi, xi| gi / xi);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Clamp(a, lo, hi) => {
                    let da = masked_grad(&g, self.value(*a), |x| x > *lo && x < *hi);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::SoftmaxVec(a) => {
                    let y = &self.nodes[idx].value;
                    let da_data = softmax_backward(g.data(), y.data());
                    let da = DenseMatrix::from_vec(y.rows(), y.cols(), da_data);
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[idx].value;
                    let mut da = DenseMatrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let row = softmax_backward(g.row(i), y.row(i));
                        da.row_mut(i).copy_from_slice(&row);
                    }
                    add_adjoint(&mut adjoints, *a, da);
                }
                Op::Dot(a, b) => {
                    let s = g.get(0, 0);
                    let da = self.value(*b).map(|x| x * s);
                    let db = self.value(*a).map(|x| x * s);
                    add_adjoint(&mut adjoints, *a, da);
                    add_adjoint(&mut adjoints, *b, db);
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn add_adjoint(adjoints: &mut [Option<DenseMatrix>], id: ValueId, contribution: DenseMatrix) {
    match &mut adjoints[id.0] {
        Some(existing) => existing.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}

fn elementwise_mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    zip_map(a, b, |x, y| x * y)
}

fn zip_map(a: &DenseMatrix, b: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    assert_eq!(a.shape(), b.shape());
    let data = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| f(x, y))
        .collect();
    DenseMatrix::from_vec(a.rows(), a.cols(), data)
}

fn masked_grad(g: &DenseMatrix, x: &DenseMatrix, keep: impl Fn(f64) -> bool) -> DenseMatrix {
    zip_map(g, x, |gi, xi| if keep(xi) { gi } else { 0.0 })
}

fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out: Vec<f64> = x.iter().map(|&v| math::exp(v - max)).collect();
    let sum: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

/// dx_i = y_i * (g_i - sum_j g_j y_j)
fn softmax_backward(g: &[f64], y: &[f64]) -> Vec<f64> {
    let dot: f64 = g.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    g.iter().zip(y.iter()).map(|(&gi, &yi)| yi * (gi - dot)).collect()
}

/// Failure modes of [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum GradCheckError {
    /// Two evaluations at the same point returned different values, so
    /// finite differences are meaningless.
    NonDeterministicLoss { first: f64, second: f64 },
    EpsilonOutOfRange(f64),
}

impl core::fmt::Display for GradCheckError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GradCheckError::NonDeterministicLoss { first, second } => write!(
                f,
                "loss is not deterministic: {first} vs {second} at the same point"
            ),
            GradCheckError::EpsilonOutOfRange(e) => {
                write!(f, "epsilon {e} outside [1e-7, 1e-3]")
            }
        }
    }
}

impl core::error::Error for GradCheckError {}

/// Compare the analytic gradients already accumulated in `store` against
/// central finite differences of `loss_fn`, entry by entry, and return the
/// largest relative error with denominator `max(|analytic|, |numeric|, 1e-8)`.
///
/// The caller must have run forward + backward so that `store` holds the
/// analytic gradient at the current parameter values, and `loss_fn` must be
/// deterministic (fixed seeds, fixed neighbor selections); determinism is
/// verified by evaluating the base point twice.
pub fn grad_check<F>(
    store: &mut ParamStore,
    mut loss_fn: F,
    epsilon: f64,
) -> Result<f64, GradCheckError>
where
    F: FnMut(&ParamStore) -> f64,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(GradCheckError::EpsilonOutOfRange(epsilon));
    }
    let base = loss_fn(store);
    let again = loss_fn(store);
    if base.to_bits() != again.to_bits() {
        return Err(GradCheckError::NonDeterministicLoss {
            first: base,
            second: again,
        });
    }

    let mut max_rel = 0.0f64;
    for pid in store.ids().collect::<Vec<_>>() {
        let n = store.value(pid).data().len();
        for k in 0..n {
            let orig = store.value(pid).data()[k];
            store.value_mut(pid).data_mut()[k] = orig + epsilon;
            let plus = loss_fn(store);
            store.value_mut(pid).data_mut()[k] = orig - epsilon;
            let minus = loss_fn(store);
            store.value_mut(pid).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = store.grad(pid).data()[k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
