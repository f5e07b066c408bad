//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every forward operation as a node holding its value.
//! [`Graph::backward`] walks the tape in reverse from a scalar root and
//! returns [`Gradients`] keyed by parameter and by leaf.

use std::collections::HashMap;
use std::sync::Arc;

use super::array::{gemm, gemm_view, View};
use super::{Array, ParamKey, Parameter, Scalar};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

enum Op<T> {
    Leaf,
    Constant,
    Param(ParamKey),
    MatMul(Var, Var),
    Affine(Var, Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    LayerNorm { x: Var, affine: Option<(Var, Var)>, stats: Vec<(T, T)> },
    Gelu(Var),
    Softmax(Var),
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<T> },
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, rows: Vec<usize>, probs: Vec<T> },
    L1Mean { pred: Var, target: Arc<Array<T>>, mask: Vec<bool>, count: usize },
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    MeanRows(Var),
    Sum(Var),
}

struct Node<T> {
    value: Arc<Array<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients<T> {
    params: HashMap<ParamKey, Array<T>>,
    leaves: HashMap<usize, Array<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn param(&self, key: ParamKey) -> Option<&Array<T>> {
        self.params.get(&key)
    }

    /// Gradient with respect to a leaf created by [`Graph::leaf`].
    pub fn wrt(&self, v: Var) -> Option<&Array<T>> {
        self.leaves.get(&v.0)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}

/// Recording tape of forward operations.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::with_capacity(256) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: Arc::new(value), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Array<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Differentiable input; its gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, value: Array<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Array<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Bind a parameter. Gradients are tracked when `track` is set and the
    /// parameter is trainable; otherwise the value enters as a constant.
    pub fn param(&mut self, p: &Parameter<T>, track: bool) -> Var {
        let rg = track && p.trainable;
        self.nodes.push(Node { value: p.shared(), op: Op::Param(p.key()), requires_grad: rg });
        Var(self.nodes.len() - 1)
    }

    /// Copy of a value with no gradient connection.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = Arc::clone(&self.nodes[v.0].value);
        self.nodes.push(Node { value, op: Op::Constant, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        match s.len() {
            1 => Ok((1, s[0])),
            2 => Ok((s[0], s[1])),
            _ => Err(shape_err(op, format!("expected a 1-D or 2-D operand, got {s:?}"))),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("{:?} x {:?}", self.shape(a), self.shape(b))));
        }
        let mut out = Array::zeros([m, n]);
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, out.data_mut(), false);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `x · w + b` with `x: [m, k]`, `w: [k, n]`, `b: [n]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(x, "affine")?;
        let (k2, n) = self.dims2(w, "affine")?;
        let bl = self.value(b).len();
        if k != k2 || bl != n {
            return Err(shape_err(
                "affine",
                format!("x {:?}, w {:?}, b {:?}", self.shape(x), self.shape(w), self.shape(b)),
            ));
        }
        let mut out = Array::zeros([m, n]);
        {
            let bias = self.value(b).data();
            for r in 0..m {
                out.row_mut(r).copy_from_slice(bias);
            }
        }
        gemm(m, k, n, self.value(x).data(), false, self.value(w).data(), false, out.data_mut(), true);
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Affine(x, w, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", format!("{:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Broadcast-add a row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.dims2(a, "add_row")?;
        if self.value(row).len() != n {
            return Err(shape_err("add_row", format!("{:?} + row {:?}", self.shape(a), self.shape(row))));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).data();
        for chunk in out.data_mut().chunks_mut(n) {
            for (o, &v) in chunk.iter_mut().zip(r) {
                *o += v;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("mul", format!("{:?} * {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    /// Layer normalization over the last axis, optionally followed by a
    /// per-channel gain and bias.
    pub fn layer_norm(&mut self, x: Var, affine: Option<(Var, Var)>, eps: T) -> Result<Var> {
        if eps < T::ZERO {
            return Err(Error::contract(format!("layer_norm eps must be non-negative, got {eps}")));
        }
        let (m, n) = self.dims2(x, "layer_norm")?;
        if let Some((g, b)) = affine {
            if self.value(g).len() != n || self.value(b).len() != n {
                return Err(shape_err(
                    "layer_norm",
                    format!("x {:?}, gain {:?}, bias {:?}", self.shape(x), self.shape(g), self.shape(b)),
                ));
            }
        }
        let xv = self.value(x);
        let mut out = Array::zeros(xv.shape().to_vec());
        let mut stats = Vec::with_capacity(m);
        let nf = T::of(n as f64);
        for r in 0..m {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let rstd = T::ONE / (var + eps).sqrt();
            stats.push((mean, rstd));
            let o = out.row_mut(r);
            for (o, &v) in o.iter_mut().zip(row) {
                *o = (v - mean) * rstd;
            }
        }
        let mut rg = self.rg(x);
        if let Some((g, b)) = affine {
            let (gv, bv) = (self.value(g).data(), self.value(b).data());
            for r in 0..m {
                for ((o, &gi), &bi) in out.row_mut(r).iter_mut().zip(gv).zip(bv) {
                    *o = *o * gi + bi;
                }
            }
            rg = rg || self.rg(g) || self.rg(b);
        }
        Ok(self.push(out, Op::LayerNorm { x, affine, stats }, rg))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let (c, k) = (T::of(GELU_C), T::of(GELU_K));
        // 0.5 (1 + tanh u) = sigmoid(2u)
        let two = T::of(2.0);
        let out = self.value(x).map(|v| v / (T::ONE + (-two * c * (v + k * v * v * v)).exp()));
        let rg = self.rg(x);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let (m, _) = self.dims2(x, "softmax")?;
        let mut out = self.value(x).clone();
        for r in 0..m {
            softmax_in_place(out.row_mut(r));
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::Softmax(x), rg))
    }

    /// Multi-head scaled dot-product attention.
    ///
    /// `q: [nq, d]`, `k, v: [nk, d]`; heads split the channel axis evenly.
    /// With `causal`, query `i` sees keys `j <= i + (nk - nq)`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Result<Var> {
        let (nq, d) = self.dims2(q, "attention")?;
        let (nk, dk) = self.dims2(k, "attention")?;
        let (nv, dv) = self.dims2(v, "attention")?;
        if d != dk || d != dv || nk != nv || heads == 0 || d % heads != 0 || nk == 0 {
            return Err(shape_err(
                "attention",
                format!("q {:?}, k {:?}, v {:?}, heads {heads}", self.shape(q), self.shape(k), self.shape(v)),
            ));
        }
        if causal && nk < nq {
            return Err(shape_err("attention", format!("causal needs nk >= nq, got {nk} < {nq}")));
        }
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut probs = vec![T::ZERO; heads * nq * nk];
        let mut out = Array::zeros([nq, d]);
        let offset = nk - nq;
        {
            let (qv, kv, vv) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
            for h in 0..heads {
                let p = &mut probs[h * nq * nk..(h + 1) * nq * nk];
                gemm_view(
                    scale,
                    qv,
                    View::col_block(nq, d, h * dh, dh),
                    kv,
                    View::col_block(nk, d, h * dh, dh).t(),
                    T::ZERO,
                    p,
                    View::dense(nq, nk),
                );
                for i in 0..nq {
                    let row = &mut p[i * nk..(i + 1) * nk];
                    let visible = if causal { i + offset + 1 } else { nk };
                    softmax_in_place(&mut row[..visible]);
                    row[visible..].iter_mut().for_each(|x| *x = T::ZERO);
                }
                gemm_view(
                    T::ONE,
                    p,
                    View::dense(nq, nk),
                    vv,
                    View::col_block(nk, d, h * dh, dh),
                    T::ZERO,
                    out.data_mut(),
                    View::col_block(nq, d, h * dh, dh),
                );
            }
        }
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        Ok(self.push(out, Op::Attention { q, k, v, heads, probs }, rg))
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, _) = self.dims2(table, "embedding")?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(shape_err("embedding", format!("id {bad} out of range for table {:?}", self.shape(table))));
        }
        let out = self.value(table).gather_rows(ids);
        let rg = self.rg(table);
        Ok(self.push(out, Op::Embedding { table, ids: ids.to_vec() }, rg))
    }

    /// Mean next-token cross entropy over rows where `mask` is set.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let (m, vocab) = self.dims2(logits, "cross_entropy")?;
        if targets.len() != m || mask.len() != m {
            return Err(shape_err(
                "cross_entropy",
                format!("logits {:?}, {} targets, {} mask entries", self.shape(logits), targets.len(), mask.len()),
            ));
        }
        let rows: Vec<usize> = (0..m).filter(|&r| mask[r]).collect();
        if rows.is_empty() {
            return Err(Error::contract("cross_entropy: no positions selected by the loss mask"));
        }
        if let Some(&r) = rows.iter().find(|&&r| targets[r] >= vocab) {
            return Err(shape_err("cross_entropy", format!("target {} >= vocab {vocab}", targets[r])));
        }
        let lv = self.value(logits);
        let mut probs = Vec::with_capacity(rows.len() * vocab);
        let mut total = 0.0f64;
        for &r in &rows {
            let start = probs.len();
            probs.extend_from_slice(lv.row(r));
            let row = &mut probs[start..];
            let mx = row.iter().copied().fold(row[0], Scalar::max);
            let mut z = T::ZERO;
            for x in row.iter_mut() {
                *x = (*x - mx).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
            let logp = (lv.row(r)[targets[r]] - mx) - z.ln();
            total -= logp.to_f64();
        }
        let loss = T::of(total / rows.len() as f64);
        let rg = self.rg(logits);
        Ok(self.push(Array::scalar(loss), Op::CrossEntropy { logits, targets: targets.to_vec(), rows, probs }, rg))
    }

    /// Mean absolute difference against a detached target over the rows
    /// selected by `mask` (all columns of a selected row count).
    pub fn l1_mean(&mut self, pred: Var, target: Arc<Array<T>>, mask: &[bool]) -> Result<Var> {
        let (m, n) = self.dims2(pred, "l1_mean")?;
        if target.shape() != self.shape(pred) || mask.len() != m {
            return Err(shape_err(
                "l1_mean",
                format!("pred {:?}, target {:?}, mask {}", self.shape(pred), target.shape(), mask.len()),
            ));
        }
        let count = mask.iter().filter(|&&b| b).count() * n;
        if count == 0 {
            return Err(Error::contract("l1_mean: empty mask"));
        }
        let pv = self.value(pred);
        let mut total = T::ZERO;
        for r in (0..m).filter(|&r| mask[r]) {
            for (&p, &t) in pv.row(r).iter().zip(target.row(r)) {
                total += (p - t).abs();
            }
        }
        let loss = total / T::of(count as f64);
        let rg = self.rg(pred);
        Ok(self.push(Array::scalar(loss), Op::L1Mean { pred, target, mask: mask.to_vec(), count }, rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::contract("concat_rows: no inputs"));
        }
        let n = self.dims2(parts[0], "concat_rows")?.1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows")?;
            if c != n {
                return Err(shape_err("concat_rows", format!("column mismatch {c} vs {n}")));
            }
            data.extend_from_slice(self.value(p).data());
            rows += r;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Array::new([rows, n], data)?, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (m, _) = self.dims2(x, "gather_rows")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(shape_err("gather_rows", format!("row {bad} out of range for {:?}", self.shape(x))));
        }
        let out = self.value(x).gather_rows(idx);
        let rg = self.rg(x);
        Ok(self.push(out, Op::GatherRows(x, idx.to_vec()), rg))
    }

    /// Columns `[start, start + width)`.
    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (m, n) = self.dims2(x, "slice_cols")?;
        if start + width > n {
            return Err(shape_err("slice_cols", format!("[{start}, {}) of {:?}", start + width, self.shape(x))));
        }
        let xv = self.value(x);
        let mut data = Vec::with_capacity(m * width);
        for r in 0..m {
            data.extend_from_slice(&xv.row(r)[start..start + width]);
        }
        let rg = self.rg(x);
        Ok(self.push(Array::new([m, width], data)?, Op::SliceCols(x, start), rg))
    }

    /// Column means, shape `[1, n]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "mean_rows")?;
        if m == 0 {
            return Err(Error::contract("mean_rows: no rows"));
        }
        let xv = self.value(x);
        let mut out = Array::zeros([1, n]);
        for r in 0..m {
            for (o, &v) in out.data_mut().iter_mut().zip(xv.row(r)) {
                *o += v;
            }
        }
        out.scale_assign(T::ONE / T::of(m as f64));
        let rg = self.rg(x);
        Ok(self.push(out, Op::MeanRows(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Array::scalar(s), Op::Sum(x), rg)
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(Error::contract(format!("backward needs a scalar root, got shape {:?}", rv.shape())));
        }
        let mut grads: Vec<Option<Array<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Array::full(rv.shape().to_vec(), T::ONE));
        let mut out = Gradients::default();

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backward_node(i, gy, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn acc(&self, grads: &mut [Option<Array<T>>], v: Var, g: Array<T>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// Zeroed gradient buffer for `v`, or `None` when `v` needs no gradient.
    fn buf(&self, v: Var) -> Option<Array<T>> {
        self.rg(v).then(|| Array::zeros(self.shape(v).to_vec()))
    }

    fn backward_node(&self, i: usize, gy: Array<T>, grads: &mut [Option<Array<T>>], out: &mut Gradients<T>) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Constant => {}
            Op::Leaf => {
                out.leaves.insert(i, gy);
            }
            Op::Param(key) => match out.params.get_mut(key) {
                Some(g) => g.add_assign(&gy),
                None => {
                    out.params.insert(*key, gy);
                }
            },
            Op::MatMul(a, b) => {
                let (m, k) = self.dims2(*a, "").unwrap();
                let n = self.value(*b).cols();
                if let Some(mut ga) = self.buf(*a) {
                    gemm(m, n, k, gy.data(), false, self.value(*b).data(), true, ga.data_mut(), false);
                    self.acc(grads, *a, ga);
                }
                if let Some(mut gb) = self.buf(*b) {
                    gemm(k, m, n, self.value(*a).data(), true, gy.data(), false, gb.data_mut(), false);
                    self.acc(grads, *b, gb);
                }
            }
            Op::Affine(x, w, b) => {
                let (m, k) = self.dims2(*x, "").unwrap();
                let n = self.value(*w).cols();
                if let Some(mut gx) = self.buf(*x) {
                    gemm(m, n, k, gy.data(), false, self.value(*w).data(), true, gx.data_mut(), false);
                    self.acc(grads, *x, gx);
                }
                if let Some(mut gw) = self.buf(*w) {
                    gemm(k, m, n, self.value(*x).data(), true, gy.data(), false, gw.data_mut(), false);
                    self.acc(grads, *w, gw);
                }
                if let Some(mut gb) = self.buf(*b) {
                    col_sums_into(&gy, gb.data_mut());
                    self.acc(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                if self.rg(*a) {
                    self.acc(grads, *a, gy.clone());
                }
                self.acc(grads, *b, gy);
            }
            Op::AddRow(a, row) => {
                if let Some(mut gr) = self.buf(*row) {
                    col_sums_into(&gy, gr.data_mut());
                    self.acc(grads, *row, gr);
                }
                self.acc(grads, *a, gy);
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let g = gy.zip_map(self.value(*b), |g, y| g * y);
                    self.acc(grads, *a, g);
                }
                if self.rg(*b) {
                    let g = gy.zip_map(self.value(*a), |g, x| g * x);
                    self.acc(grads, *b, g);
                }
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.acc(grads, *a, gy.map(|g| g * s));
            }
            Op::LayerNorm { x, affine, stats } => {
                let xv = self.value(*x);
                let n = xv.cols();
                let nf = T::of(n as f64);
                let mut gx = self.buf(*x);
                let (mut gg, mut gb) = match affine {
                    Some((g, b)) => (self.buf(*g), self.buf(*b)),
                    None => (None, None),
                };
                let gain = affine.map(|(g, _)| self.value(g).data());
                let mut xhat = vec![T::ZERO; n];
                let mut dxhat = vec![T::ZERO; n];
                for (r, &(mean, rstd)) in stats.iter().enumerate() {
                    let dy = gy.row(r);
                    for (h, &v) in xhat.iter_mut().zip(xv.row(r)) {
                        *h = (v - mean) * rstd;
                    }
                    if let Some(gg) = gg.as_mut() {
                        for ((a, &d), &h) in gg.data_mut().iter_mut().zip(dy).zip(&xhat) {
                            *a += d * h;
                        }
                    }
                    if let Some(gb) = gb.as_mut() {
                        for (a, &d) in gb.data_mut().iter_mut().zip(dy) {
                            *a += d;
                        }
                    }
                    if let Some(gx) = gx.as_mut() {
                        match gain {
                            Some(g) => dxhat.iter_mut().zip(dy).zip(g).for_each(|((o, &d), &g)| *o = d * g),
                            None => dxhat.copy_from_slice(dy),
                        }
                        let mean_d = dxhat.iter().copied().sum::<T>() / nf;
                        let mean_dh = dxhat.iter().zip(&xhat).map(|(&d, &h)| d * h).sum::<T>() / nf;
                        for ((o, &d), &h) in gx.row_mut(r).iter_mut().zip(&dxhat).zip(&xhat) {
                            *o = rstd * (d - mean_d - h * mean_dh);
                        }
                    }
                }
                if let Some(gx) = gx {
                    self.acc(grads, *x, gx);
                }
                if let Some((g, b)) = affine {
                    if let Some(gg) = gg {
                        self.acc(grads, *g, gg);
                    }
                    if let Some(gb) = gb {
                        self.acc(grads, *b, gb);
                    }
                }
            }
            Op::Gelu(x) => {
                let (c, k) = (T::of(GELU_C), T::of(GELU_K));
                let (two, three) = (T::of(2.0), T::of(3.0));
                let g = gy.zip_map(self.value(*x), |g, v| {
                    let s = T::ONE / (T::ONE + (-two * c * (v + k * v * v * v)).exp());
                    let d = s + two * v * s * (T::ONE - s) * c * (T::ONE + three * k * v * v);
                    g * d
                });
                self.acc(grads, *x, g);
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let mut g = Array::zeros(y.shape().to_vec());
                for r in 0..y.rows() {
                    let (yr, dr) = (y.row(r), gy.row(r));
                    let dot: T = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                    for ((o, &yv), &dv) in g.row_mut(r).iter_mut().zip(yr).zip(dr) {
                        *o = yv * (dv - dot);
                    }
                }
                self.acc(grads, *x, g);
            }
            Op::Attention { q, k, v, heads, probs, .. } => {
                self.attention_backward(*q, *k, *v, *heads, probs, &gy, grads);
            }
            Op::Embedding { table, ids } => {
                if let Some(mut gt) = self.buf(*table) {
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, &d) in gt.row_mut(id).iter_mut().zip(gy.row(r)) {
                            *o += d;
                        }
                    }
                    self.acc(grads, *table, gt);
                }
            }
            Op::CrossEntropy { logits, targets, rows, probs } => {
                if let Some(mut gl) = self.buf(*logits) {
                    let vocab = gl.cols();
                    let s = gy.item() / T::of(rows.len() as f64);
                    for (j, &r) in rows.iter().enumerate() {
                        let p = &probs[j * vocab..(j + 1) * vocab];
                        let o = gl.row_mut(r);
                        for (o, &pv) in o.iter_mut().zip(p) {
                            *o = pv * s;
                        }
                        o[targets[r]] -= s;
                    }
                    self.acc(grads, *logits, gl);
                }
            }
            Op::L1Mean { pred, target, mask, count } => {
                if let Some(mut gp) = self.buf(*pred) {
                    let s = gy.item() / T::of(*count as f64);
                    let pv = self.value(*pred);
                    for r in (0..mask.len()).filter(|&r| mask[r]) {
                        for ((o, &p), &t) in gp.row_mut(r).iter_mut().zip(pv.row(r)).zip(target.row(r)) {
                            *o = (p - t).signum0() * s;
                        }
                    }
                    self.acc(grads, *pred, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let n = gy.cols();
                let mut start = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.rg(p) {
                        let g = Array::new(self.shape(p).to_vec(), gy.data()[start..start + len].to_vec()).unwrap();
                        self.acc(grads, p, g);
                    }
                    start += len;
                }
                debug_assert_eq!(start, gy.rows() * n);
            }
            Op::GatherRows(x, idx) => {
                if let Some(mut gx) = self.buf(*x) {
                    for (r, &src) in idx.iter().enumerate() {
                        for (o, &d) in gx.row_mut(src).iter_mut().zip(gy.row(r)) {
                            *o += d;
                        }
                    }
                    self.acc(grads, *x, gx);
                }
            }
            Op::SliceCols(x, start) => {
                if let Some(mut gx) = self.buf(*x) {
                    let w = gy.cols();
                    for r in 0..gy.rows() {
                        gx.row_mut(r)[*start..*start + w].copy_from_slice(gy.row(r));
                    }
                    self.acc(grads, *x, gx);
                }
            }
            Op::MeanRows(x) => {
                let (m, n) = self.dims2(*x, "").unwrap();
                let s = T::ONE / T::of(m as f64);
                let mut gx = Array::zeros([m, n]);
                for r in 0..m {
                    for (o, &d) in gx.row_mut(r).iter_mut().zip(gy.data()) {
                        *o = d * s;
                    }
                }
                let gx = gx.reshape(self.shape(*x).to_vec()).unwrap();
                self.acc(grads, *x, gx);
            }
            Op::Sum(x) => {
                let g = Array::full(self.shape(*x).to_vec(), gy.item());
                self.acc(grads, *x, g);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        probs: &[T],
        gy: &Array<T>,
        grads: &mut [Option<Array<T>>],
    ) {
        let (nq, d) = (self.value(q).rows(), self.value(q).cols());
        let nk = self.value(k).rows();
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let (qv, kv, vv) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
        let mut gq = self.buf(q);
        let mut gk = self.buf(k);
        let mut gv = self.buf(v);
        let mut dp = vec![T::ZERO; nq * nk];
        for h in 0..heads {
            let p = &probs[h * nq * nk..(h + 1) * nq * nk];
            let qb = View::col_block(nq, d, h * dh, dh);
            let kb = View::col_block(nk, d, h * dh, dh);
            if let Some(gv) = gv.as_mut() {
                gemm_view(T::ONE, p, View::dense(nq, nk).t(), gy.data(), qb, T::ONE, gv.data_mut(), kb);
            }
            if gq.is_none() && gk.is_none() {
                continue;
            }
            gemm_view(T::ONE, gy.data(), qb, vv, kb.t(), T::ZERO, &mut dp, View::dense(nq, nk));
            for i in 0..nq {
                let pr = &p[i * nk..(i + 1) * nk];
                let dr = &mut dp[i * nk..(i + 1) * nk];
                let dot: T = pr.iter().zip(dr.iter()).map(|(&a, &b)| a * b).sum();
                for (d, &pv) in dr.iter_mut().zip(pr) {
                    *d = pv * (*d - dot) * scale;
                }
            }
            if let Some(gq) = gq.as_mut() {
                gemm_view(T::ONE, &dp, View::dense(nq, nk), kv, kb, T::ONE, gq.data_mut(), qb);
            }
            if let Some(gk) = gk.as_mut() {
                gemm_view(T::ONE, &dp, View::dense(nq, nk).t(), qv, qb, T::ONE, gk.data_mut(), kb);
            }
        }
        if let Some(g) = gq {
            self.acc(grads, q, g);
        }
        if let Some(g) = gk {
            self.acc(grads, k, g);
        }
        if let Some(g) = gv {
            self.acc(grads, v, g);
        }
    }
}

fn col_sums_into<T: Scalar>(a: &Array<T>, out: &mut [T]) {
    for r in 0..a.rows() {
        for (o, &v) in out.iter_mut().zip(a.row(r)) {
            *o += v;
        }
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    if row.is_empty() {
        return;
    }
    let mx = row.iter().copied().fold(row[0], Scalar::max);
    let mut z = T::ZERO;
    for x in row.iter_mut() {
        *x = (*x - mx).exp();
        z += *x;
    }
    for x in row.iter_mut() {
        *x /= z;
    }
}
