//! Tape of tensor operations recorded during one forward pass.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is a
//! valid reverse topological order. Parameters are borrowed from the
//! [`ParamStore`]; their gradients land in a separate [`Gradients`] buffer.

use super::kernels::{self, Conv1dDims, Conv3dDims};
use super::loss::{softmax, softmax_cross_entropy};
use super::{shape_err, Gradients, ParamId, ParamStore, Real, Tensor, TensorError};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Scale(Var, T),
    Mask(Var, Vec<T>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Row(Var, usize),
    StackRows(Vec<Var>),
    MeanRows(Var),
    Reshape(Var),
    Gather(Var, Vec<usize>),
    Conv1d(Var, Var, Var),
    Conv3d(Var, Var, Var),
    MaxPool(Var, Vec<usize>),
    Softmax(Var),
    SoftmaxXent(Var, Vec<T>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Graph<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    grad_fault: Option<(String, T)>,
}

fn dims2(shape: &[usize], op: &'static str) -> Result<(usize, usize), TensorError> {
    match *shape {
        [r, c] => Ok((r, c)),
        _ => Err(shape_err(op, "a 2-D tensor", shape)),
    }
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params, nodes: Vec::new(), grad_fault: None }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    /// Scales the reverse-mode gradient reaching every parameter whose name
    /// starts with `prefix`. Only meant for exercising the gradient checker.
    #[doc(hidden)]
    pub fn inject_grad_fault(&mut self, prefix: &str, factor: T) {
        self.grad_fault = Some((prefix.to_string(), factor));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(ParamId(id)),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; gradients are not propagated into it.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Tensor::zeros(vec![0]), Op::Param(id.0), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (n, k) = dims2(self.shape(a), "matmul")?;
        let (k2, m) = dims2(self.shape(b), "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{k}, _] right operand"), self.shape(b)));
        }
        let out = kernels::matmul(self.value(a).data(), self.value(b).data(), n, k, m);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor { shape: vec![n, m], data: out }, Op::MatMul(a, b), rg))
    }

    /// Adds a `[c]` bias to every row of an `[r, c]` tensor.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let (_, c) = dims2(self.shape(x), "add_bias")?;
        if self.value(b).numel() != c || self.shape(b).len() != 1 {
            return Err(shape_err("add_bias", format!("bias [{c}]"), self.shape(b)));
        }
        let bias = self.value(b).data();
        let mut out = self.value(x).clone();
        for row in out.data.chunks_exact_mut(c) {
            for (o, &bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        let rg = self.requires(x) || self.requires(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(op, format!("{:?}", self.shape(a)), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor { shape: self.shape(a).to_vec(), data };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor { shape: self.shape(a).to_vec(), data };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    fn map(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&e| f(e)).collect() };
        let rg = self.requires(x);
        self.push(out, op, rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, |v| T::one() / (T::one() + (-v).exp()), Op::Sigmoid(x))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        self.map(x, |v| v * s, Op::Scale(x, s))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<T>) -> Result<Var, TensorError> {
        if mask.len() != self.value(x).numel() {
            return Err(shape_err("mask", format!("{} values", self.value(x).numel()), mask.len()));
        }
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: v.data.iter().zip(&mask).map(|(&a, &m)| a * m).collect() };
        let rg = self.requires(x);
        Ok(self.push(out, Op::Mask(x, mask), rg))
    }

    /// Concatenates 2-D tensors with equal row counts along the columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or_else(|| shape_err("concat", "at least one input", 0))?;
        let (rows, _) = dims2(self.shape(*first), "concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = dims2(self.shape(p), "concat")?;
            if r != rows {
                return Err(shape_err("concat", format!("{rows} rows"), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(Tensor { shape: vec![rows, total], data }, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..start + width` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var, TensorError> {
        let (rows, cols) = dims2(self.shape(x), "slice_cols")?;
        if start + width > cols {
            return Err(shape_err("slice_cols", format!("at least {} columns", start + width), cols));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&src[r * cols + start..r * cols + start + width]);
        }
        let rg = self.requires(x);
        Ok(self.push(Tensor { shape: vec![rows, width], data }, Op::SliceCols(x, start), rg))
    }

    /// Row `i` of a 2-D tensor as a `[1, c]` tensor.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var, TensorError> {
        let (rows, cols) = dims2(self.shape(x), "row")?;
        if i >= rows {
            return Err(shape_err("row", format!("row < {rows}"), i));
        }
        let data = self.value(x).data()[i * cols..(i + 1) * cols].to_vec();
        let rg = self.requires(x);
        Ok(self.push(Tensor { shape: vec![1, cols], data }, Op::Row(x, i), rg))
    }

    /// Stacks `[1, c]` tensors into `[n, c]`.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, TensorError> {
        let first = rows.first().ok_or_else(|| shape_err("stack_rows", "at least one row", 0))?;
        let cols = self.value(*first).numel();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if self.shape(r) != [1, cols] {
                return Err(shape_err("stack_rows", format!("[1, {cols}]"), self.shape(r)));
            }
            data.extend_from_slice(self.value(r).data());
        }
        let rg = rows.iter().any(|&r| self.requires(r));
        Ok(self.push(Tensor { shape: vec![rows.len(), cols], data }, Op::StackRows(rows.to_vec()), rg))
    }

    /// Column means of a 2-D tensor, as `[1, c]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let (rows, cols) = dims2(self.shape(x), "mean_rows")?;
        if rows == 0 {
            return Err(shape_err("mean_rows", "at least one row", 0));
        }
        let mut data = vec![T::zero(); cols];
        for row in self.value(x).data().chunks_exact(cols) {
            for (d, &v) in data.iter_mut().zip(row) {
                *d += v;
            }
        }
        let inv = T::one() / T::lit(rows as f64);
        data.iter_mut().for_each(|d| *d *= inv);
        let rg = self.requires(x);
        Ok(self.push(Tensor { shape: vec![1, cols], data }, Op::MeanRows(x), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let out = self.value(x).clone().reshaped(shape)?;
        let rg = self.requires(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Rows of `table: [vocab, dim]` selected by `indices`, as `[len, dim]`.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let (rows, dim) = dims2(self.shape(table), "gather")?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(shape_err("gather", format!("index < {rows}"), bad));
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            data.extend_from_slice(&src[i * dim..(i + 1) * dim]);
        }
        let rg = self.requires(table);
        Ok(self.push(Tensor { shape: vec![indices.len(), dim], data }, Op::Gather(table, indices.to_vec()), rg))
    }

    /// `x: [len, cin]`, `w: [k, cin, cout]`, `b: [cout]`; valid, stride 1.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let d = self.conv1d_dims(x, w, b)?;
        let y = kernels::conv1d(self.value(x).data(), self.value(w).data(), self.value(b).data(), &d);
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        Ok(self.push(Tensor { shape: vec![d.out_len(), d.cout], data: y }, Op::Conv1d(x, w, b), rg))
    }

    fn conv1d_dims(&self, x: Var, w: Var, b: Var) -> Result<Conv1dDims, TensorError> {
        let (len, cin) = dims2(self.shape(x), "conv1d")?;
        let (k, wcin, cout) = match *self.shape(w) {
            [k, c, o] => (k, c, o),
            ref s => return Err(shape_err("conv1d", "kernel [k, cin, cout]", s)),
        };
        if wcin != cin || self.shape(b) != [cout] || k == 0 || k > len {
            return Err(shape_err(
                "conv1d",
                format!("input [>= {k}, {wcin}] and bias [{cout}]"),
                (self.shape(x), self.shape(b)),
            ));
        }
        Ok(Conv1dDims { len, cin, cout, k })
    }

    /// `x: [t, h, w, cin]`, `w: [kt, kh, kw, cin, cout]`, `b: [cout]`; valid, stride 1.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let d = self.conv3d_dims(x, w, b)?;
        let y = kernels::conv3d(self.value(x).data(), self.value(w).data(), self.value(b).data(), &d);
        let [ot, oh, ow] = d.out();
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        Ok(self.push(Tensor { shape: vec![ot, oh, ow, d.cout], data: y }, Op::Conv3d(x, w, b), rg))
    }

    fn conv3d_dims(&self, x: Var, w: Var, b: Var) -> Result<Conv3dDims, TensorError> {
        let (input, cin) = match *self.shape(x) {
            [t, h, ww, c] => ([t, h, ww], c),
            ref s => return Err(shape_err("conv3d", "input [t, h, w, cin]", s)),
        };
        let (kernel, wcin, cout) = match *self.shape(w) {
            [a, b2, c, ci, co] => ([a, b2, c], ci, co),
            ref s => return Err(shape_err("conv3d", "kernel [kt, kh, kw, cin, cout]", s)),
        };
        let fits = (0..3).all(|i| kernel[i] >= 1 && kernel[i] <= input[i]);
        if wcin != cin || self.shape(b) != [cout] || !fits {
            return Err(shape_err(
                "conv3d",
                format!("input at least {kernel:?} x {wcin} and bias [{cout}]"),
                (self.shape(x), self.shape(b)),
            ));
        }
        Ok(Conv3dDims { input, kernel, cin, cout })
    }

    /// Max pooling over all but the last (channel) axis; window = stride.
    pub fn max_pool(&mut self, x: Var, window: &[usize]) -> Result<Var, TensorError> {
        let dims = self.shape(x).to_vec();
        if dims.len() != window.len() + 1 || window.iter().zip(&dims).any(|(&w, &d)| w == 0 || w > d) {
            return Err(shape_err(
                "max_pool",
                format!("{} spatial axes no smaller than {window:?}", window.len()),
                dims,
            ));
        }
        let (values, argmax, shape) = kernels::max_pool(self.value(x).data(), &dims, window);
        let rg = self.requires(x);
        Ok(self.push(Tensor { shape, data: values }, Op::MaxPool(x, argmax), rg))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor { shape: v.shape.clone(), data: softmax(v.data()) };
        let rg = self.requires(x);
        self.push(out, Op::Softmax(x), rg)
    }

    /// Scalar `-log softmax(logits)[class]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var, TensorError> {
        let (loss, grad) = softmax_cross_entropy(self.value(logits).data(), class)?;
        let rg = self.requires(logits);
        Ok(self.push(Tensor { shape: vec![1], data: vec![loss] }, Op::SoftmaxXent(logits, grad), rg))
    }

    /// Reverse pass from the scalar `loss`, adding `scale · ∂loss/∂param` into `grads`.
    pub fn backward(&self, loss: Var, grads: &mut Gradients<T>, scale: T) -> Result<(), TensorError> {
        if self.value(loss).numel() != 1 {
            return Err(shape_err("backward", "a scalar loss", self.shape(loss)));
        }
        let mut adj: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(vec![scale]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut adj, grads);
        }
        Ok(())
    }

    fn slot<'a>(&self, adj: &'a mut [Option<Vec<T>>], v: Var) -> Option<&'a mut [T]> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.value(v).numel();
        Some(adj[v.0].get_or_insert_with(|| vec![T::zero(); n]).as_mut_slice())
    }

    fn propagate(&self, i: usize, g: &[T], adj: &mut [Option<Vec<T>>], grads: &mut Gradients<T>) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Input => {}
            Op::Param(id) => {
                let factor = match &self.grad_fault {
                    Some((prefix, f)) if self.params.entries()[*id].name.starts_with(prefix.as_str()) => *f,
                    _ => T::one(),
                };
                for (d, &v) in grads.slot_mut(*id).iter_mut().zip(g) {
                    *d += v * factor;
                }
            }
            Op::MatMul(a, b) => {
                let (n, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let m = self.shape(*b)[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(da) = self.slot(adj, *a) {
                    kernels::matmul_grad_a(g, bv, da, n, k, m);
                }
                if let Some(db) = self.slot(adj, *b) {
                    kernels::matmul_grad_b(av, g, db, n, k, m);
                }
            }
            Op::AddBias(x, b) => {
                if let Some(dx) = self.slot(adj, *x) {
                    add_into(dx, g);
                }
                let c = self.value(*b).numel();
                if let Some(db) = self.slot(adj, *b) {
                    for row in g.chunks_exact(c) {
                        add_into(db, row);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(d) = self.slot(adj, *v) {
                        add_into(d, g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(da) = self.slot(adj, *a) {
                    for ((d, &gv), &o) in da.iter_mut().zip(g).zip(bv) {
                        *d += gv * o;
                    }
                }
                if let Some(db) = self.slot(adj, *b) {
                    for ((d, &gv), &o) in db.iter_mut().zip(g).zip(av) {
                        *d += gv * o;
                    }
                }
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                if let Some(dx) = self.slot(adj, *x) {
                    for ((d, &gv), &yv) in dx.iter_mut().zip(g).zip(y) {
                        *d += gv * (T::one() - yv * yv);
                    }
                }
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                if let Some(dx) = self.slot(adj, *x) {
                    for ((d, &gv), &yv) in dx.iter_mut().zip(g).zip(y) {
                        *d += gv * yv * (T::one() - yv);
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(dx) = self.slot(adj, *x) {
                    for (d, &gv) in dx.iter_mut().zip(g) {
                        *d += gv * *s;
                    }
                }
            }
            Op::Mask(x, mask) => {
                if let Some(dx) = self.slot(adj, *x) {
                    for ((d, &gv), &m) in dx.iter_mut().zip(g).zip(mask) {
                        *d += gv * m;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let rows = node.value.shape[0];
                let total = node.value.shape[1];
                let mut offset = 0;
                for p in parts {
                    let w = self.shape(*p)[1];
                    if let Some(dp) = self.slot(adj, *p) {
                        for r in 0..rows {
                            add_into(&mut dp[r * w..(r + 1) * w], &g[r * total + offset..r * total + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols(x, start) => {
                let cols = self.shape(*x)[1];
                let (rows, width) = (node.value.shape[0], node.value.shape[1]);
                if let Some(dx) = self.slot(adj, *x) {
                    for r in 0..rows {
                        add_into(&mut dx[r * cols + start..r * cols + start + width], &g[r * width..(r + 1) * width]);
                    }
                }
            }
            Op::Row(x, r) => {
                let cols = node.value.shape[1];
                if let Some(dx) = self.slot(adj, *x) {
                    add_into(&mut dx[r * cols..(r + 1) * cols], g);
                }
            }
            Op::StackRows(rows) => {
                let cols = node.value.shape[1];
                for (r, v) in rows.iter().enumerate() {
                    if let Some(d) = self.slot(adj, *v) {
                        add_into(d, &g[r * cols..(r + 1) * cols]);
                    }
                }
            }
            Op::MeanRows(x) => {
                let rows = self.shape(*x)[0];
                let inv = T::one() / T::lit(rows as f64);
                if let Some(dx) = self.slot(adj, *x) {
                    for row in dx.chunks_exact_mut(g.len()) {
                        for (d, &gv) in row.iter_mut().zip(g) {
                            *d += gv * inv;
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(dx) = self.slot(adj, *x) {
                    add_into(dx, g);
                }
            }
            Op::Gather(table, indices) => {
                let dim = self.shape(*table)[1];
                if let Some(dt) = self.slot(adj, *table) {
                    for (pos, &i) in indices.iter().enumerate() {
                        add_into(&mut dt[i * dim..(i + 1) * dim], &g[pos * dim..(pos + 1) * dim]);
                    }
                }
            }
            Op::Conv1d(x, w, b) => {
                let d = self.conv1d_dims(*x, *w, *b).expect("validated on the forward pass");
                let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                let mut dx = self.slot(adj, *x).map(|s| s.to_vec());
                let mut dw = self.slot(adj, *w).map(|s| s.to_vec());
                let mut db = self.slot(adj, *b).map(|s| s.to_vec());
                kernels::conv1d_backward(xv, wv, g, &d, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                self.store(adj, [(*x, dx), (*w, dw), (*b, db)]);
            }
            Op::Conv3d(x, w, b) => {
                let d = self.conv3d_dims(*x, *w, *b).expect("validated on the forward pass");
                let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                let mut dx = self.slot(adj, *x).map(|s| s.to_vec());
                let mut dw = self.slot(adj, *w).map(|s| s.to_vec());
                let mut db = self.slot(adj, *b).map(|s| s.to_vec());
                kernels::conv3d_backward(xv, wv, g, &d, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                self.store(adj, [(*x, dx), (*w, dw), (*b, db)]);
            }
            Op::MaxPool(x, argmax) => {
                if let Some(dx) = self.slot(adj, *x) {
                    for (&src, &gv) in argmax.iter().zip(g) {
                        dx[src] += gv;
                    }
                }
            }
            Op::Softmax(x) => {
                let s = node.value.data();
                let inner: T = g.iter().zip(s).map(|(&gv, &sv)| gv * sv).sum();
                if let Some(dx) = self.slot(adj, *x) {
                    for ((d, &gv), &sv) in dx.iter_mut().zip(g).zip(s) {
                        *d += sv * (gv - inner);
                    }
                }
            }
            Op::SoftmaxXent(logits, grad) => {
                if let Some(dl) = self.slot(adj, *logits) {
                    for (d, &gv) in dl.iter_mut().zip(grad) {
                        *d += gv * g[0];
                    }
                }
            }
        }
    }

    // The conv kernels need the three adjoint buffers at once; they are
    // copied out and written back to keep the borrow checker simple.
    fn store<const N: usize>(&self, adj: &mut [Option<Vec<T>>], items: [(Var, Option<Vec<T>>); N]) {
        for (v, buf) in items {
            if let Some(buf) = buf {
                adj[v.0] = Some(buf);
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of `f` at `x`.
    fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                p[i] += h;
                let fp = f(&p);
                p[i] -= 2.0 * h;
                let fm = f(&p);
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-6);
            assert!(rel < tol, "{x} vs {y}");
        }
    }

    /// Builds a one-parameter graph ending in a scalar via a fixed linear
    /// read-out, and checks the reverse pass against finite differences.
    fn check_op(shape: Vec<usize>, build: impl Fn(&mut Graph<f64>, Var) -> Var) {
        let n: usize = shape.iter().product();
        let x0: Vec<f64> = (0..n).map(|i| ((i * 37 % 17) as f64 - 8.0) / 7.0).collect();
        let loss_of = |x: &[f64], grads: Option<&mut Gradients<f64>>| {
            let mut store = ParamStore::new();
            let id = store.add("x", Tensor::new(shape.clone(), x.to_vec()).unwrap());
            let mut g = Graph::new(&store);
            let p = g.param(id);
            let y = build(&mut g, p);
            let m = g.value(y).numel();
            let w = g.input(Tensor::new(vec![m, 1], (0..m).map(|i| 0.3 + 0.1 * (i % 5) as f64).collect()).unwrap());
            let flat = g.reshape(y, vec![1, m]).unwrap();
            let out = g.matmul(flat, w).unwrap();
            let out = g.reshape(out, vec![1]).unwrap();
            if let Some(gr) = grads {
                g.backward(out, gr, 1.0).unwrap();
            }
            g.value(out).data()[0]
        };
        let mut store = ParamStore::new();
        store.add("x", Tensor::new(shape.clone(), x0.clone()).unwrap());
        let mut grads = Gradients::zeros_like(&store);
        loss_of(&x0, Some(&mut grads));
        let numeric = numeric_grad(&x0, |x| loss_of(x, None));
        assert_close(grads.by_index(0), &numeric, 1e-6);
    }

    #[test]
    fn elementwise_ops() {
        check_op(vec![2, 3], |g, x| g.tanh(x));
        check_op(vec![2, 3], |g, x| g.sigmoid(x));
        check_op(vec![2, 3], |g, x| g.scale(x, -1.5));
        check_op(vec![2, 3], |g, x| g.mul(x, x).unwrap());
        check_op(vec![2, 3], |g, x| g.add(x, x).unwrap());
        check_op(vec![2, 3], |g, x| g.mask(x, vec![0.0, 2.0, 2.0, 0.0, 2.0, 2.0]).unwrap());
        check_op(vec![1, 5], |g, x| g.softmax(x));
    }

    #[test]
    fn structural_ops() {
        check_op(vec![3, 4], |g, x| g.slice_cols(x, 1, 2).unwrap());
        check_op(vec![3, 4], |g, x| g.row(x, 2).unwrap());
        check_op(vec![3, 4], |g, x| g.mean_rows(x).unwrap());
        check_op(vec![3, 4], |g, x| {
            let a = g.row(x, 0).unwrap();
            let b = g.row(x, 2).unwrap();
            g.stack_rows(&[b, a, b]).unwrap()
        });
        check_op(vec![2, 3], |g, x| {
            let t = g.tanh(x);
            g.concat_cols(&[x, t, x]).unwrap()
        });
        check_op(vec![4, 2], |g, x| g.gather(x, &[3, 0, 3, 1]).unwrap());
        check_op(vec![3, 4], |g, x| {
            let m = g.matmul(x, x);
            assert!(m.is_err());
            let r = g.reshape(x, vec![4, 3]).unwrap();
            g.matmul(x, r).unwrap()
        });
        check_op(vec![2, 3], |g, x| {
            let b = g.row(x, 0).unwrap();
            let b = g.reshape(b, vec![3]).unwrap();
            g.add_bias(x, b).unwrap()
        });
    }

    #[test]
    fn conv_and_pool_ops() {
        // input as the parameter
        check_op(vec![6, 2], |g, x| {
            let w = g.input(Tensor::new(vec![3, 2, 2], (0..12).map(|i| (i as f64 - 5.0) / 6.0).collect()).unwrap());
            let b = g.input(Tensor::from_vec(vec![0.1, -0.2]));
            g.conv1d(x, w, b).unwrap()
        });
        // kernel as the parameter
        check_op(vec![2, 2, 3], |g, w| {
            let x = g.input(Tensor::new(vec![5, 2], (0..10).map(|i| (i as f64).sin()).collect()).unwrap());
            let b = g.input(Tensor::from_vec(vec![0.0; 3]));
            g.conv1d(x, w, b).unwrap()
        });
        check_op(vec![3, 3, 4, 2], |g, x| {
            let w =
                g.input(Tensor::new(vec![2, 2, 2, 2, 1], (0..16).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap());
            let b = g.input(Tensor::from_vec(vec![0.3]));
            g.conv3d(x, w, b).unwrap()
        });
        check_op(vec![2, 2, 2, 2, 3], |g, w| {
            let x = g.input(Tensor::new(vec![3, 3, 3, 2], (0..54).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap());
            let b = g.input(Tensor::from_vec(vec![0.0; 3]));
            g.conv3d(x, w, b).unwrap()
        });
        check_op(vec![7, 2], |g, x| g.max_pool(x, &[2]).unwrap());
        check_op(vec![4, 4, 5, 1], |g, x| g.max_pool(x, &[2, 2, 2]).unwrap());
    }

    #[test]
    fn shape_errors() {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::zeros(vec![2, 3]));
        let b = g.input(Tensor::zeros(vec![2, 2]));
        assert!(matches!(g.matmul(a, b), Err(TensorError::Shape { .. })));
        assert!(g.add(a, b).is_err());
        let c = g.input(Tensor::zeros(vec![1, 3]));
        assert!(g.concat_cols(&[a, c]).is_err());
        assert!(g.row(a, 2).is_err());
        assert!(g.gather(a, &[2]).is_err());
        assert!(g.max_pool(a, &[3]).is_err());
        let w = g.input(Tensor::zeros(vec![4, 3, 1]));
        let bias = g.input(Tensor::zeros(vec![1]));
        assert!(g.conv1d(a, w, bias).is_err());
        assert!(g.backward(a, &mut Gradients::zeros_like(&store), 1.0).is_err());
    }

    #[test]
    fn inputs_get_no_gradient_work() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap());
        let w = g.param(id);
        let y = g.matmul(x, w).unwrap();
        let y = g.reshape(y, vec![1]).unwrap();
        let mut grads = Gradients::zeros_like(&store);
        g.backward(y, &mut grads, 2.0).unwrap();
        assert_eq!(g.value(y).data(), &[11.0]);
        assert_eq!(grads.by_index(0), &[6.0, 8.0]);
    }
}
