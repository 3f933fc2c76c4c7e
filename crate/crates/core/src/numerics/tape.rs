//! Reverse-mode differentiation over a linear record of primitive applications.
//!
//! Nodes are appended in evaluation order, so every input of node `k` has an
//! index below `k`. Parameters are borrowed, not copied: a tape lives no longer
//! than the [`ParamStore`] it reads from.

use std::collections::HashMap;

use super::kernels::{self, check_finite};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<'a> {
    Owned(Tensor),
    Borrowed(&'a Tensor),
}

impl Value<'_> {
    fn get(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

enum Op {
    Leaf,
    Affine { x: NodeId, w: NodeId, b: NodeId },
    MatMul { a: NodeId, b: NodeId },
    MatMulNT { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, by: f64 },
    Softmax { x: NodeId },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu { x: NodeId },
    Gather { table: NodeId, ids: Vec<usize> },
    ReplaceRows { x: NodeId, rows: Vec<usize>, with: NodeId },
    SliceCols { x: NodeId, start: usize },
    ConcatCols { parts: Vec<NodeId> },
    Row { x: NodeId, index: usize },
    SelectRows { x: NodeId, rows: Vec<usize> },
    Concat { parts: Vec<NodeId> },
    Sum { x: NodeId },
    BceWithLogits { z: NodeId, labels: Vec<f64> },
}

struct Node<'a> {
    value: Value<'a>,
    op: Op,
}

/// Record of a forward computation.
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<ParamId, NodeId>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.get()
    }

    fn push(&mut self, value: Value<'a>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, t: Tensor, op: Op, name: &str) -> Result<NodeId> {
        check_finite(&t, name)?;
        Ok(self.push(Value::Owned(t), op))
    }

    /// A constant or input leaf.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(Value::Owned(t), Op::Leaf)
    }

    /// A leaf borrowed from outside the tape.
    pub fn leaf_ref(&mut self, t: &'a Tensor) -> NodeId {
        self.push(Value::Borrowed(t), Op::Leaf)
    }

    /// Registers a parameter leaf once per tape; repeated calls return the same node.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.params.get(&id) {
            return node;
        }
        let node = self.leaf_ref(store.get(id));
        self.params.insert(id, node);
        node
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let y = kernels::affine_forward(self.value(x), self.value(w), self.value(b))?;
        self.push_checked(y, Op::Affine { x, w, b }, "affine")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.shape()[0] {
            return Err(Error::dim(format!("matmul {:?} x {:?}", av.shape(), bv.shape())));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        let y = Tensor::matrix(m, n, kernels::matmul(av.data(), bv.data(), m, k, n))?;
        self.push_checked(y, Op::MatMul { a, b }, "matmul")
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols() {
            return Err(Error::dim(format!("matmul_nt {:?} x {:?}", av.shape(), bv.shape())));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.rows());
        let y = Tensor::matrix(m, n, kernels::matmul_nt(av.data(), bv.data(), m, k, n))?;
        self.push_checked(y, Op::MatMulNT { a, b }, "matmul_nt")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(format!("add {:?} + {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let y = Tensor::new(av.shape().to_vec(), data)?;
        self.push_checked(y, Op::Add { a, b }, "add")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(format!("mul {:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let y = Tensor::new(av.shape().to_vec(), data)?;
        self.push_checked(y, Op::Mul { a, b }, "mul")
    }

    pub fn scale(&mut self, x: NodeId, by: f64) -> Result<NodeId> {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| v * by).collect();
        let y = Tensor::new(xv.shape().to_vec(), data)?;
        self.push_checked(y, Op::Scale { x, by }, "scale")
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.masked_softmax(x, None)
    }

    /// Softmax over the last axis; columns with `keep[j] == false` receive
    /// probability exactly 0 (additive −∞ before normalization).
    pub fn masked_softmax(&mut self, x: NodeId, keep: Option<&[bool]>) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(Error::dim("softmax of an empty tensor"));
        }
        if let Some(k) = keep {
            if k.len() != xv.cols() {
                return Err(Error::dim("softmax mask width mismatch"));
            }
        }
        let mut y = xv.clone();
        let c = y.cols();
        for row in y.data_mut().chunks_mut(c) {
            kernels::softmax_row(row, keep)?;
        }
        self.push_checked(y, Op::Softmax { x }, "softmax")
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let xv = self.value(x);
        let d = xv.cols();
        if d < 2 {
            return Err(Error::dim(format!("layer_norm needs width >= 2, got {d}")));
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        if g.shape() != [d] || b.shape() != [d] {
            return Err(Error::dim("layer_norm scale/shift must match row width"));
        }
        let rows = xv.rows();
        let (xhat, inv_std) = kernels::layer_norm_stats(xv.data(), rows, d, eps);
        let mut out = xhat.clone();
        for row in out.chunks_mut(d) {
            for ((o, gv), bv) in row.iter_mut().zip(g.data()).zip(b.data()) {
                *o = *o * gv + bv;
            }
        }
        let y = Tensor::new(xv.shape().to_vec(), out)?;
        self.push_checked(y, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, "layer_norm")
    }

    pub fn gelu(&mut self, x: NodeId) -> Result<NodeId> {
        let y = kernels::gelu(self.value(x));
        self.push_checked(y, Op::Gelu { x }, "gelu")
    }

    /// Rows of `table` selected by `ids`, as an `ids.len() × d` matrix.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let tv = self.value(table);
        if tv.rank() != 2 {
            return Err(Error::dim("gather needs a matrix table"));
        }
        let (v, d) = (tv.rows(), tv.cols());
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            if i >= v {
                return Err(Error::Index { index: i, extent: v });
            }
            data.extend_from_slice(tv.row(i));
        }
        let y = Tensor::matrix(ids.len(), d, data)?;
        Ok(self.push(Value::Owned(y), Op::Gather { table, ids: ids.to_vec() }))
    }

    /// Copy of `x` with each listed row replaced by the vector `with`.
    pub fn replace_rows(&mut self, x: NodeId, rows: &[usize], with: NodeId) -> Result<NodeId> {
        let (xv, wv) = (self.value(x), self.value(with));
        if xv.rank() != 2 || wv.len() != xv.cols() {
            return Err(Error::dim("replace_rows width mismatch"));
        }
        let mut y = xv.clone();
        for &r in rows {
            if r >= y.rows() {
                return Err(Error::Index { index: r, extent: y.rows() });
            }
            y.row_mut(r).copy_from_slice(wv.data());
        }
        Ok(self.push(Value::Owned(y), Op::ReplaceRows { x, rows: rows.to_vec(), with }))
    }

    /// Columns `start..start + width` of a matrix.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let xv = self.value(x);
        let c = xv.cols();
        if xv.rank() != 2 || start + width > c {
            return Err(Error::dim(format!("slice_cols {start}+{width} of {:?}", xv.shape())));
        }
        let rows = xv.rows();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&xv.row(r)[start..start + width]);
        }
        let y = Tensor::matrix(rows, width, data)?;
        Ok(self.push(Value::Owned(y), Op::SliceCols { x, start }))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or_else(|| Error::dim("concat_cols of nothing"))?;
        let rows = self.value(*first).rows();
        let mut width = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 2 || pv.rows() != rows {
                return Err(Error::dim("concat_cols row mismatch"));
            }
            width += pv.cols();
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let y = Tensor::matrix(rows, width, data)?;
        Ok(self.push(Value::Owned(y), Op::ConcatCols { parts: parts.to_vec() }))
    }

    /// Row `index` of a matrix as a vector.
    pub fn row(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::dim("row() needs a matrix"));
        }
        if index >= xv.rows() {
            return Err(Error::Index { index, extent: xv.rows() });
        }
        let y = Tensor::vector(xv.row(index).to_vec());
        Ok(self.push(Value::Owned(y), Op::Row { x, index }))
    }

    /// Matrix made of the listed rows of `x`, in order.
    pub fn select_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::dim("select_rows() needs a matrix"));
        }
        let mut data = Vec::with_capacity(rows.len() * xv.cols());
        for &r in rows {
            if r >= xv.rows() {
                return Err(Error::Index { index: r, extent: xv.rows() });
            }
            data.extend_from_slice(xv.row(r));
        }
        let y = Tensor::matrix(rows.len(), xv.cols(), data)?;
        Ok(self.push(Value::Owned(y), Op::SelectRows { x, rows: rows.to_vec() }))
    }

    /// Concatenation of flattened tensors into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::dim("concat of nothing"));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Value::Owned(Tensor::vector(data)), Op::Concat { parts: parts.to_vec() }))
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().sum();
        self.push_checked(Tensor::scalar(s), Op::Sum { x }, "sum")
    }

    /// Mean binary cross-entropy between logits and `{0,1}` labels, in the
    /// stable softplus form.
    pub fn bce_with_logits(&mut self, z: NodeId, labels: &[f64]) -> Result<NodeId> {
        let zv = self.value(z);
        if zv.len() != labels.len() || labels.is_empty() {
            return Err(Error::dim(format!(
                "{} logits vs {} labels",
                zv.len(),
                labels.len()
            )));
        }
        let n = labels.len() as f64;
        let loss: f64 = zv
            .data()
            .iter()
            .zip(labels)
            .map(|(&z, &y)| y * kernels::softplus(-z) + (1.0 - y) * kernels::softplus(z))
            .sum::<f64>()
            / n;
        self.push_checked(
            Tensor::scalar(loss),
            Op::BceWithLogits { z, labels: labels.to_vec() },
            "bce_with_logits",
        )
    }

    /// Gradient of the scalar at `loss` with respect to every leaf.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for k in (0..=loss.0).rev() {
            let Some(g) = grads[k].take() else { continue };
            match &self.nodes[k].op {
                Op::Leaf => {
                    grads[k] = Some(g);
                }
                op => self.propagate(op, k, &g, &mut grads)?,
            }
        }

        let mut leaves = HashMap::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) {
                let g = grads[k]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.get().shape()));
                leaves.insert(NodeId(k), g);
            }
        }
        let params = self.params.iter().map(|(&p, &n)| (p, n)).collect();
        Ok(Gradients { leaves, params })
    }

    fn propagate(&self, op: &Op, k: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |id: NodeId, delta: Tensor| {
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
        };
        let shaped = |like: NodeId, data: Vec<f64>| -> Tensor {
            Tensor::new(self.value(like).shape().to_vec(), data).expect("gradient shape")
        };
        match op {
            Op::Leaf => unreachable!(),
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, d_in, d_out) = (xv.rows(), wv.shape()[0], wv.shape()[1]);
                acc(*x, shaped(*x, kernels::matmul_nt(g.data(), wv.data(), n, d_out, d_in)));
                let mut gw = vec![0.0; d_in * d_out];
                kernels::matmul_tn_acc(&mut gw, xv.data(), g.data(), n, d_in, d_out);
                acc(*w, shaped(*w, gw));
                let mut gb = vec![0.0; d_out];
                for row in g.data().chunks(d_out) {
                    for (o, v) in gb.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                acc(*b, shaped(*b, gb));
            }
            Op::MatMul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, kk, n) = (av.rows(), av.cols(), bv.cols());
                acc(*a, shaped(*a, kernels::matmul_nt(g.data(), bv.data(), m, n, kk)));
                let mut gb = vec![0.0; kk * n];
                kernels::matmul_tn_acc(&mut gb, av.data(), g.data(), m, kk, n);
                acc(*b, shaped(*b, gb));
            }
            Op::MatMulNT { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, kk, n) = (av.rows(), av.cols(), bv.rows());
                acc(*a, shaped(*a, kernels::matmul(g.data(), bv.data(), m, n, kk)));
                let mut gb = vec![0.0; n * kk];
                kernels::matmul_tn_acc(&mut gb, g.data(), av.data(), m, n, kk);
                acc(*b, shaped(*b, gb));
            }
            Op::Add { a, b } => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                let gb = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                acc(*a, shaped(*a, ga));
                acc(*b, shaped(*b, gb));
            }
            Op::Scale { x, by } => {
                acc(*x, shaped(*x, g.data().iter().map(|v| v * by).collect()));
            }
            Op::Softmax { x } => {
                let y = self.nodes[k].value.get();
                let c = y.cols();
                let mut gx = vec![0.0; y.len()];
                for ((yr, gr), out) in y.data().chunks(c).zip(g.data().chunks(c)).zip(gx.chunks_mut(c)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, yv), gv) in out.iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(*x, shaped(*x, gx));
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let gam = self.value(*gamma).data();
                let d = gam.len();
                let mut gx = vec![0.0; xhat.len()];
                let mut gg = vec![0.0; d];
                let mut gbeta = vec![0.0; d];
                for (r, inv) in inv_std.iter().enumerate() {
                    let gr = &g.data()[r * d..(r + 1) * d];
                    let xr = &xhat[r * d..(r + 1) * d];
                    let mut mean_dx = 0.0;
                    let mut mean_dx_x = 0.0;
                    for j in 0..d {
                        let dxh = gr[j] * gam[j];
                        mean_dx += dxh;
                        mean_dx_x += dxh * xr[j];
                        gg[j] += gr[j] * xr[j];
                        gbeta[j] += gr[j];
                    }
                    mean_dx /= d as f64;
                    mean_dx_x /= d as f64;
                    for j in 0..d {
                        let dxh = gr[j] * gam[j];
                        gx[r * d + j] = inv * (dxh - mean_dx - xr[j] * mean_dx_x);
                    }
                }
                acc(*x, shaped(*x, gx));
                acc(*gamma, shaped(*gamma, gg));
                acc(*beta, shaped(*beta, gbeta));
            }
            Op::Gelu { x } => {
                let xv = self.value(*x);
                let gx = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, gv)| gv * kernels::gelu_grad_scalar(v))
                    .collect();
                acc(*x, shaped(*x, gx));
            }
            Op::Gather { table, ids } => {
                let tv = self.value(*table);
                let d = tv.cols();
                let mut gt = Tensor::zeros(tv.shape());
                for (r, &i) in ids.iter().enumerate() {
                    for (o, v) in gt.row_mut(i).iter_mut().zip(&g.data()[r * d..(r + 1) * d]) {
                        *o += v;
                    }
                }
                acc(*table, gt);
            }
            Op::ReplaceRows { x, rows, with } => {
                let mut gx = g.clone();
                let d = gx.cols();
                let mut gw = vec![0.0; d];
                for &r in rows {
                    for (o, v) in gw.iter_mut().zip(gx.row(r)) {
                        *o += v;
                    }
                    gx.row_mut(r).fill(0.0);
                }
                acc(*x, gx);
                acc(*with, shaped(*with, gw));
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let width = g.cols();
                let mut gx = Tensor::zeros(xv.shape());
                for r in 0..xv.rows() {
                    gx.row_mut(r)[*start..start + width].copy_from_slice(g.row(r));
                }
                acc(*x, gx);
            }
            Op::ConcatCols { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let pv = self.value(p);
                    let w = pv.cols();
                    let mut gp = Vec::with_capacity(pv.len());
                    for r in 0..pv.rows() {
                        gp.extend_from_slice(&g.row(r)[offset..offset + w]);
                    }
                    offset += w;
                    acc(p, shaped(p, gp));
                }
            }
            Op::Row { x, index } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                gx.row_mut(*index).copy_from_slice(g.data());
                acc(*x, gx);
            }
            Op::SelectRows { x, rows } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                for (i, &r) in rows.iter().enumerate() {
                    for (o, v) in gx.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                acc(*x, gx);
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    acc(p, shaped(p, g.data()[offset..offset + n].to_vec()));
                    offset += n;
                }
            }
            Op::Sum { x } => {
                let gv = g.data()[0];
                acc(*x, Tensor::filled(self.value(*x).shape(), gv));
            }
            Op::BceWithLogits { z, labels } => {
                let zv = self.value(*z);
                let gv = g.data()[0] / labels.len() as f64;
                let gz = zv
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&zz, &y)| gv * (kernels::sigmoid(zz) - y))
                    .collect();
                acc(*z, shaped(*z, gz));
            }
        }
        Ok(())
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    leaves: HashMap<NodeId, Tensor>,
    params: Vec<(ParamId, NodeId)>,
}

impl Gradients {
    /// Gradient for a leaf node; `None` if `node` is not a leaf.
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor> {
        self.leaves.get(&node)
    }

    /// Gradient for a parameter registered on the tape; `None` if the
    /// parameter never took part in the computation.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, n)| self.leaves.get(n))
    }

    /// Parameter gradients, sorted by parameter id.
    pub fn params(&self) -> Vec<(ParamId, &Tensor)> {
        let mut out: Vec<_> = self
            .params
            .iter()
            .filter_map(|(p, n)| self.leaves.get(n).map(|g| (*p, g)))
            .collect();
        out.sort_by_key(|(p, _)| *p);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn disconnected_leaf_gets_exact_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let unused = tape.leaf(Tensor::vector(vec![5.0, 6.0, 7.0]));
        let s = tape.sum(x).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.wrt(unused).unwrap().data(), &[0.0, 0.0, 0.0]);
        assert_eq!(grads.wrt(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn params_are_registered_once() {
        let mut store = ParamStore::new();
        let p = store.insert("w", Tensor::vector(vec![2.0]));
        let mut tape = Tape::new();
        let a = tape.param(&store, p);
        let b = tape.param(&store, p);
        assert_eq!(a, b);
        let y = tape.mul(a, b).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.param(p).unwrap().data(), &[4.0]);
    }

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(&[vec![1.0, 50.0, 2.0]]).unwrap());
        let y = tape.masked_softmax(x, Some(&[true, false, true])).unwrap();
        let v = tape.value(y).data().to_vec();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gather_out_of_range() {
        let mut tape = Tape::new();
        let t = tape.leaf(Tensor::zeros(&[3, 2]));
        assert!(matches!(
            tape.gather(t, &[0, 3]),
            Err(Error::Index { index: 3, extent: 3 })
        ));
    }
}
