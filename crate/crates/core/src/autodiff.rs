//! Reverse-mode automatic differentiation over an append-only tape.
//!
//! Every primitive appends one node holding its output value and the
//! references it needs for the backward rule. Node indices are created in
//! evaluation order, so walking the tape from the end visits each node once
//! in reverse topological order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Real, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Reshape(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Dropout { input: Var, mask: Vec<T> },
    MaxOverTokens { input: Var, argmax: Vec<usize> },
    MaskedSoftmax { input: Var, mask: Vec<bool> },
    LogSoftmax(Var),
    Pick { input: Var, index: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Row { input: Var, index: usize },
    SliceCols { input: Var, start: usize, end: usize },
    ScaleRows { input: Var, weights: Var },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Single-threaded record of one forward computation.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}x{k}]·[{k2}x{n}]")));
        }
        let out = gemm(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "add", |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x + c);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::AddScalar(a), rg)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -T::one());
        self.add_scalar(neg, T::one())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.tanh());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.exp());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Exp(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.ln());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Log(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: T = self.value(a).data().iter().copied().sum();
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = T::from_usize(self.value(a).len()).expect("length fits");
        let s = self.sum(a);
        self.scale(s, T::one() / n)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Concatenation along `axis` (0 or 1 for matrices, 0 for vectors).
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or(Error::EmptySequence("concat of zero tensors"))?;
        let ndim = self.value(*first).ndim();
        let out = match (ndim, axis) {
            (1, 0) => {
                let mut data = Vec::new();
                for v in inputs {
                    let t = self.value(*v);
                    if t.ndim() != 1 {
                        return Err(Error::shape("concat", "mixed ranks"));
                    }
                    data.extend_from_slice(t.data());
                }
                Tensor::vector(data)?
            }
            (2, 0) => {
                let cols = self.value(*first).dims2("concat")?.1;
                let mut rows = 0;
                let mut data = Vec::new();
                for v in inputs {
                    let (r, c) = self.value(*v).dims2("concat")?;
                    if c != cols {
                        return Err(Error::shape("concat", format!("column count {c} != {cols}")));
                    }
                    rows += r;
                    data.extend_from_slice(self.value(*v).data());
                }
                Tensor::matrix(rows, cols, data)?
            }
            (2, 1) => {
                let rows = self.value(*first).dims2("concat")?.0;
                let mut widths = Vec::with_capacity(inputs.len());
                for v in inputs {
                    let (r, c) = self.value(*v).dims2("concat")?;
                    if r != rows {
                        return Err(Error::shape("concat", format!("row count {r} != {rows}")));
                    }
                    widths.push(c);
                }
                let cols: usize = widths.iter().sum();
                let mut data = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for (v, &w) in inputs.iter().zip(&widths) {
                        data.extend_from_slice(&self.value(*v).data()[i * w..(i + 1) * w]);
                    }
                }
                Tensor::matrix(rows, cols, data)?
            }
            _ => return Err(Error::shape("concat", format!("axis {axis} on rank {ndim}"))),
        };
        let rg = self.any_grad(inputs);
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Inverted dropout. With `rng == None` (evaluation) or `p == 0` this is
    /// the identity and returns `a` itself.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, rng: Option<&mut R>) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        let rng = match rng {
            Some(r) if p > 0.0 => r,
            _ => return Ok(a),
        };
        let keep = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect();
        let x = self.value(a);
        let out = Tensor::new(
            x.shape().to_vec(),
            x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
        )?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Dropout { input: a, mask }, rg))
    }

    /// Per-column maximum over the unmasked rows of an `[L×d]` matrix.
    /// Ties resolve to the lowest row index, which alone receives gradient.
    pub fn max_over_tokens(&mut self, h: Var, mask: &[bool]) -> Result<Var> {
        let (l, d) = self.value(h).dims2("max_over_tokens")?;
        if mask.len() != l {
            return Err(Error::shape(
                "max_over_tokens",
                format!("mask {} for {l} rows", mask.len()),
            ));
        }
        let first = mask
            .iter()
            .position(|&m| m)
            .ok_or(Error::EmptySequence("max_over_tokens with no unmasked token"))?;
        let data = self.value(h).data();
        let mut argmax = vec![first; d];
        let mut out: Vec<T> = data[first * d..(first + 1) * d].to_vec();
        for t in first + 1..l {
            if !mask[t] {
                continue;
            }
            for j in 0..d {
                let v = data[t * d + j];
                if v > out[j] {
                    out[j] = v;
                    argmax[j] = t;
                }
            }
        }
        let rg = self.any_grad(&[h]);
        Ok(self.push(Tensor::vector(out)?, Op::MaxOverTokens { input: h, argmax }, rg))
    }

    /// Softmax over the unmasked entries of a vector; masked entries are exactly 0.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[bool]) -> Result<Var> {
        let x = self.value(scores);
        if x.ndim() != 1 || mask.len() != x.len() {
            return Err(Error::shape(
                "masked_softmax",
                format!("scores {:?}, mask {}", x.shape(), mask.len()),
            ));
        }
        let out = masked_softmax_values(x.data(), mask)?;
        let rg = self.any_grad(&[scores]);
        Ok(self.push(
            Tensor::vector(out)?,
            Op::MaskedSoftmax {
                input: scores,
                mask: mask.to_vec(),
            },
            rg,
        ))
    }

    pub fn log_softmax(&mut self, logits: Var) -> Result<Var> {
        let x = self.value(logits);
        if x.ndim() != 1 {
            return Err(Error::shape("log_softmax", format!("{:?}", x.shape())));
        }
        let max = x.data().iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + x.data().iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let out = x.map(|v| v - lse);
        let rg = self.any_grad(&[logits]);
        Ok(self.push(out, Op::LogSoftmax(logits), rg))
    }

    /// Selects one element (flat index) as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let x = self.value(a);
        let v = *x
            .data()
            .get(index)
            .ok_or_else(|| Error::shape("pick", format!("index {index} of {}", x.len())))?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::scalar(v), Op::Pick { input: a, index }, rg))
    }

    /// Embedding lookup: rows `ids` of a `[V×D]` table.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.value(table).dims2("gather_rows")?;
        if ids.is_empty() {
            return Err(Error::EmptySequence("gather_rows with no ids"));
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::shape(
                    "gather_rows",
                    format!("id {id} outside table of {v} rows"),
                ));
            }
            data.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let rg = self.any_grad(&[table]);
        Ok(self.push(
            Tensor::matrix(ids.len(), d, data)?,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Row `index` of a matrix as a `[1×d]` matrix.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let (r, c) = self.value(a).dims2("row")?;
        if index >= r {
            return Err(Error::shape("row", format!("row {index} of {r}")));
        }
        let data = self.value(a).data()[index * c..(index + 1) * c].to_vec();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::matrix(1, c, data)?, Op::Row { input: a, index }, rg))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.value(a).dims2("slice_cols")?;
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", format!("[{start}, {end}) of {c} columns")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&src[i * c + start..i * c + end]);
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            Tensor::matrix(r, end - start, data)?,
            Op::SliceCols { input: a, start, end },
            rg,
        ))
    }

    /// `out[t, :] = weights[t] * h[t, :]` for `h: [L×d]`, `weights: [L]`.
    pub fn scale_rows(&mut self, h: Var, weights: Var) -> Result<Var> {
        let (l, d) = self.value(h).dims2("scale_rows")?;
        let w = self.value(weights);
        if w.ndim() != 1 || w.len() != l {
            return Err(Error::shape(
                "scale_rows",
                format!("weights {:?} for {l} rows", w.shape()),
            ));
        }
        let hv = self.value(h).data();
        let data = (0..l * d).map(|i| hv[i] * w.data()[i / d]).collect();
        let rg = self.any_grad(&[h, weights]);
        Ok(self.push(Tensor::matrix(l, d, data)?, Op::ScaleRows { input: h, weights }, rg))
    }

    /// Clears gradients so that [`Tape::backward`] may run again.
    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Tensor::new(self.value(v).shape().to_vec(), g.clone()).ok()
    }

    /// Propagates gradients from a scalar `loss` to every node that requires them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward already ran on this tape; call reset_grads first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        self.backward_done = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.backprop_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, g: &[T]) {
        // Inputs always precede `i`, so splitting the node list keeps the
        // output value borrowable while input gradients are written.
        let (nodes, grads) = (&self.nodes, &mut self.grads);
        let node = &nodes[i];
        let y = node.value.data();
        macro_rules! acc {
            ($v:expr) => {
                slot(nodes, grads, $v)
            };
        }
        let val = |v: Var| nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[a.0].value.shape()[0], nodes[a.0].value.shape()[1]);
                let n = nodes[b.0].value.shape()[1];
                let (av, bv) = (val(*a), val(*b));
                if let Some(ga) = acc!(*a) {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            let s: T = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                            ga[r * k + p] = ga[r * k + p] + s;
                        }
                    }
                }
                if let Some(gb) = acc!(*b) {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a_rp = av[r * k + p];
                            if a_rp == T::zero() {
                                continue;
                            }
                            let dst = &mut gb[p * n..(p + 1) * n];
                            for (d, &x) in dst.iter_mut().zip(grow) {
                                *d = *d + a_rp * x;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = acc!(*a) {
                    add_into(ga, g);
                }
                if let Some(gb) = acc!(*b) {
                    add_into(gb, g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = acc!(*a) {
                    add_into(ga, g);
                }
                if let Some(gb) = acc!(*b) {
                    for (d, &x) in gb.iter_mut().zip(g) {
                        *d = *d - x;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if let Some(ga) = acc!(*a) {
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(bv) {
                        *d = *d + x * o;
                    }
                }
                if let Some(gb) = acc!(*b) {
                    for ((d, &x), &o) in gb.iter_mut().zip(g).zip(av) {
                        *d = *d + x * o;
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = acc!(*a) {
                    for (d, &x) in ga.iter_mut().zip(g) {
                        *d = *d + x * *c;
                    }
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if let Some(ga) = acc!(*a) {
                    add_into(ga, g);
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + x * (T::one() - o * o);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + x * o * (T::one() - o);
                    }
                }
            }
            Op::Exp(a) => {
                if let Some(ga) = acc!(*a) {
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + x * o;
                    }
                }
            }
            Op::Log(a) => {
                let av = val(*a);
                if let Some(ga) = acc!(*a) {
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(av) {
                        *d = *d + x / o;
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = acc!(*a) {
                    for d in ga.iter_mut() {
                        *d = *d + g[0];
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let out_shape = node.value.shape();
                let mut offset = 0;
                for v in inputs {
                    let shape = nodes[v.0].value.shape().to_vec();
                    let len = nodes[v.0].value.len();
                    if let Some(gv) = acc!(*v) {
                        if *axis == 1 {
                            let (rows, w, total) = (shape[0], shape[1], out_shape[1]);
                            for r in 0..rows {
                                let src = &g[r * total + offset..r * total + offset + w];
                                add_into(&mut gv[r * w..(r + 1) * w], src);
                            }
                        } else {
                            add_into(gv, &g[offset..offset + len]);
                        }
                    }
                    offset += if *axis == 1 { shape[1] } else { len };
                }
            }
            Op::Dropout { input, mask } => {
                if let Some(ga) = acc!(*input) {
                    for ((d, &x), &m) in ga.iter_mut().zip(g).zip(mask) {
                        *d = *d + x * m;
                    }
                }
            }
            Op::MaxOverTokens { input, argmax } => {
                let d = argmax.len();
                if let Some(ga) = acc!(*input) {
                    for (j, &t) in argmax.iter().enumerate() {
                        ga[t * d + j] = ga[t * d + j] + g[j];
                    }
                }
            }
            Op::MaskedSoftmax { input, mask } => {
                if let Some(ga) = acc!(*input) {
                    let dot: T = g.iter().zip(y).map(|(&x, &o)| x * o).sum();
                    for t in 0..y.len() {
                        if mask[t] {
                            ga[t] = ga[t] + y[t] * (g[t] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(a) => {
                if let Some(ga) = acc!(*a) {
                    let gsum: T = g.iter().copied().sum();
                    for ((d, &x), &o) in ga.iter_mut().zip(g).zip(y) {
                        *d = *d + x - o.exp() * gsum;
                    }
                }
            }
            Op::Pick { input, index } => {
                if let Some(ga) = acc!(*input) {
                    ga[*index] = ga[*index] + g[0];
                }
            }
            Op::GatherRows { table, ids } => {
                let d = nodes[table.0].value.shape()[1];
                if let Some(gt) = acc!(*table) {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Row { input, index } => {
                let c = g.len();
                if let Some(ga) = acc!(*input) {
                    add_into(&mut ga[index * c..(index + 1) * c], g);
                }
            }
            Op::SliceCols { input, start, end } => {
                let c = nodes[input.0].value.shape()[1];
                let w = end - start;
                let rows = g.len() / w;
                if let Some(ga) = acc!(*input) {
                    for r in 0..rows {
                        add_into(&mut ga[r * c + start..r * c + end], &g[r * w..(r + 1) * w]);
                    }
                }
            }
            Op::ScaleRows { input, weights } => {
                let d = nodes[input.0].value.shape()[1];
                let (hv, wv) = (val(*input), val(*weights));
                if let Some(gh) = acc!(*input) {
                    for (i, (dst, &x)) in gh.iter_mut().zip(g).enumerate() {
                        *dst = *dst + x * wv[i / d];
                    }
                }
                if let Some(gw) = acc!(*weights) {
                    for (t, dst) in gw.iter_mut().enumerate() {
                        let s: T = g[t * d..(t + 1) * d]
                            .iter()
                            .zip(&hv[t * d..(t + 1) * d])
                            .map(|(&x, &h)| x * h)
                            .sum();
                        *dst = *dst + s;
                    }
                }
            }
        }
    }
}

fn slot<'a, T: Real>(nodes: &[Node<T>], grads: &'a mut [Option<Vec<T>>], v: Var) -> Option<&'a mut Vec<T>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let n = nodes[v.0].value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Max-subtracted softmax restricted to `mask`; masked entries are exactly 0.
pub fn masked_softmax_values<T: Real>(scores: &[T], mask: &[bool]) -> Result<Vec<T>> {
    if scores.len() != mask.len() {
        return Err(Error::shape(
            "masked_softmax",
            format!("{} scores, {} mask", scores.len(), mask.len()),
        ));
    }
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(None, |acc: Option<T>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or(Error::EmptySequence("masked_softmax with an all-false mask"))?;
    let mut out: Vec<T> = scores
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { T::zero() })
        .collect();
    let total: T = out.iter().copied().sum();
    for v in &mut out {
        *v = *v / total;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let mut tape = Tape::new();
        let i = tape.constant(m(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = tape.constant(m(&[&[3.0], &[4.0]]));
        let c = tape.matmul(i, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 4.0]);

        let a = tape.constant(m(&[&[1.0, 2.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::<f64>::zeros(&[2, 3]));
        let b = tape.constant(Tensor::<f64>::zeros(&[2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn masked_softmax_cases() {
        let p = masked_softmax_values(&[0.0f64, 0.0, 0.0], &[true; 3]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(
            masked_softmax_values(&[1.0f64, 1.0], &[true, false]).unwrap(),
            vec![1.0, 0.0]
        );
        assert!(matches!(
            masked_softmax_values(&[1.0f64, 2.0], &[false, false]),
            Err(Error::EmptySequence(_))
        ));
    }

    #[test]
    fn max_over_tokens_value_and_route() {
        let mut tape = Tape::new();
        let h = tape.param(m(&[&[1.0, 5.0], &[3.0, 2.0]]));
        let out = tape.max_over_tokens(h, &[true, true]).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 5.0]);
        let s = tape.sum(out);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(h).unwrap().data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn max_over_tokens_tie_goes_to_lowest_index() {
        let mut tape = Tape::new();
        let h = tape.param(m(&[&[0.0], &[2.0], &[2.0]]));
        let out = tape.max_over_tokens(h, &[true, true, true]).unwrap();
        let s = tape.sum(out);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(h).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn max_over_tokens_skips_masked_and_rejects_empty() {
        let mut tape = Tape::new();
        let h = tape.param(m(&[&[9.0], &[1.0]]));
        let out = tape.max_over_tokens(h, &[false, true]).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0]);
        assert!(matches!(
            tape.max_over_tokens(h, &[false, false]),
            Err(Error::EmptySequence(_))
        ));
    }

    #[test]
    fn dropout_zero_and_eval_are_identity() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param(m(&[&[1.0, 2.0]]));
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        assert_eq!(tape.dropout(x, 0.0, Some(&mut rng)).unwrap(), x);
        assert_eq!(tape.dropout(x, 0.3, None::<&mut ChaCha8Rng>).unwrap(), x);
        assert!(tape.dropout(x, 1.0, Some(&mut rng)).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param(Tensor::full(&[1000], 1.0));
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let y = tape.dropout(x, 0.2, Some(&mut rng)).unwrap();
        let vals = tape.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-12));
        let dropped = vals.iter().filter(|&&v| v == 0.0).count();
        assert!((150..250).contains(&dropped), "{dropped}");
    }

    #[test]
    fn backward_simple_cases() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0f64, 2.0, 3.0]).unwrap());
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);

        let mut tape = Tape::new();
        let x = tape.param(Tensor::<f64>::zeros(&[2, 3]));
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn backward_contract_errors() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0f64, 2.0]).unwrap());
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(Error::Contract(_))));
        tape.reset_grads();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0f64]).unwrap());
        let p = tape.param(Tensor::vector(vec![2.0f64]).unwrap());
        let y = tape.mul(c, p).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(p).unwrap().data(), &[1.0]);
    }
}
