//! Dense float64 tensors with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] owns every tensor created during one forward pass and records
//! the operation that produced each of them. [`Tape::backward`] walks the
//! record in reverse and accumulates gradients into every tensor that was
//! created with `requires_grad`. Tensors are addressed through copyable
//! [`TensorId`] handles; nothing on a tape is ever mutated after creation
//! except its gradient buffer.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod ops;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: shape {shape:?} does not hold {len} elements")]
    BadShape {
        op: &'static str,
        shape: Vec<usize>,
        len: usize,
    },
    #[error("{op}: axis {axis} out of range for shape {shape:?}")]
    BadAxis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: index {index} out of range ({limit})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("{op}: expected a scalar, got shape {shape:?}")]
    NotScalar { op: &'static str, shape: Vec<usize> },
    #[error("{op}: needs at least one input")]
    EmptyInput { op: &'static str },
}

/// Handle to a tensor on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

/// Elementwise binary operation selector for [`Tape::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

/// Activation selector for [`Tape::activation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

/// Reduction selector for [`Tape::reduce_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary(BinaryOp, TensorId, TensorId),
    Matmul(TensorId, TensorId),
    Activation(Activation, TensorId),
    Ln(TensorId),
    Clamp(TensorId, f64, f64),
    Scale(TensorId, f64),
    ReduceAll(Reduction, TensorId),
    MaxOverAxis(TensorId, usize, Vec<usize>),
    Concat(Vec<TensorId>, usize),
    Row(TensorId, usize),
    Reshape(TensorId),
    GatherRows(TensorId, Vec<usize>),
    Conv1d {
        input: TensorId,
        filters: TensorId,
        bias: TensorId,
    },
    MaxPool1d(TensorId, usize, Vec<usize>),
}

/// One recorded tensor: value, shape, and the operation that produced it.
#[derive(Debug)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    op: Op,
}

impl Tensor {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    /// Gradient accumulated by the last `backward` call, if any.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

fn num_elements(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Rows and columns of a tensor viewed as a matrix. Rank-1 tensors are
/// treated as a single row.
fn as_matrix(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        1 => (1, shape[0]),
        2 => (shape[0], shape[1]),
        _ => panic!("as_matrix on rank-{} tensor", shape.len()),
    }
}

/// Recording tape for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Tensor>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Op) -> TensorId {
        debug_assert_eq!(num_elements(&shape), data.len());
        self.nodes.push(Tensor {
            shape,
            data,
            requires_grad,
            grad: None,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Record an input tensor.
    pub fn leaf(
        &mut self,
        shape: &[usize],
        data: Vec<f64>,
        requires_grad: bool,
    ) -> Result<TensorId, TensorError> {
        if num_elements(shape) != data.len() {
            return Err(TensorError::BadShape {
                op: "leaf",
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(self.push(shape.to_vec(), data, requires_grad, Op::Leaf))
    }

    /// Constant leaf that never receives a gradient.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<TensorId, TensorError> {
        self.leaf(shape, data, false)
    }

    pub fn scalar(&mut self, value: f64) -> TensorId {
        self.push(vec![1], vec![value], false, Op::Leaf)
    }

    /// Elementwise add/sub/mul. Shapes must match exactly, or `b` may be a
    /// rank-1 vector matching the trailing dimension of a rank-2 `a`.
    pub fn elementwise(
        &mut self,
        op: BinaryOp,
        a: TensorId,
        b: TensorId,
    ) -> Result<TensorId, TensorError> {
        let (ashape, bshape) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let broadcast = ashape.len() == 2 && bshape.len() == 1 && bshape[0] == ashape[1];
        if ashape != bshape && !broadcast {
            return Err(TensorError::ShapeMismatch {
                op: match op {
                    BinaryOp::Add => "add",
                    BinaryOp::Sub => "sub",
                    BinaryOp::Mul => "mul",
                },
                lhs: ashape,
                rhs: bshape,
            });
        }
        let av = &self.nodes[a.0].data;
        let bv = &self.nodes[b.0].data;
        let cols = *ashape.last().unwrap_or(&1);
        let mut out = Vec::with_capacity(av.len());
        for (i, &x) in av.iter().enumerate() {
            let y = if broadcast { bv[i % cols] } else { bv[i] };
            out.push(match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
            });
        }
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(ashape, out, rg, Op::Binary(op, a, b)))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.elementwise(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.elementwise(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.elementwise(BinaryOp::Mul, a, b)
    }

    /// Matrix product of rank-2 tensors: `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (ashape, bshape) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if ashape.len() != 2 || bshape.len() != 2 || ashape[1] != bshape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: ashape,
                rhs: bshape,
            });
        }
        let (m, k, n) = (ashape[0], ashape[1], bshape[1]);
        let av = &self.nodes[a.0].data;
        let bv = &self.nodes[b.0].data;
        let out = ops::matmul(av, bv, m, k, n);
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(vec![m, n], out, rg, Op::Matmul(a, b)))
    }

    pub fn activation(&mut self, kind: Activation, x: TensorId) -> Result<TensorId, TensorError> {
        let xv = &self.nodes[x.0].data;
        let out: Vec<f64> = xv
            .iter()
            .map(|&v| match kind {
                Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
                Activation::Tanh => v.tanh(),
                Activation::Relu => v.max(0.0),
            })
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(shape, out, rg, Op::Activation(kind, x)))
    }

    pub fn sigmoid(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.activation(Activation::Tanh, x)
    }

    pub fn relu(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.activation(Activation::Relu, x)
    }

    /// Natural log, elementwise. Callers clamp first; see [`Tape::clamp`].
    pub fn ln(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        let out: Vec<f64> = self.nodes[x.0].data.iter().map(|&v| v.ln()).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(shape, out, rg, Op::Ln(x)))
    }

    /// Clamp into `[lo, hi]`. Gradient passes through wherever the output
    /// equals the input and is zero where the bound was hit.
    pub fn clamp(&mut self, x: TensorId, lo: f64, hi: f64) -> Result<TensorId, TensorError> {
        let out: Vec<f64> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| v.clamp(lo, hi))
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(shape, out, rg, Op::Clamp(x, lo, hi)))
    }

    /// Multiply every element by a compile-time constant.
    pub fn scale(&mut self, x: TensorId, c: f64) -> Result<TensorId, TensorError> {
        let out: Vec<f64> = self.nodes[x.0].data.iter().map(|&v| v * c).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(shape, out, rg, Op::Scale(x, c)))
    }

    /// Sum or mean over every element, producing a scalar of shape `[1]`.
    pub fn reduce_all(&mut self, kind: Reduction, x: TensorId) -> Result<TensorId, TensorError> {
        let xv = &self.nodes[x.0].data;
        let sum: f64 = xv.iter().sum();
        let out = match kind {
            Reduction::Sum => sum,
            Reduction::Mean => sum / xv.len() as f64,
        };
        let rg = self.needs_grad(&[x]);
        Ok(self.push(vec![1], vec![out], rg, Op::ReduceAll(kind, x)))
    }

    pub fn sum_all(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.reduce_all(Reduction::Sum, x)
    }

    pub fn mean_all(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.reduce_all(Reduction::Mean, x)
    }

    /// Max over one axis of a rank-2 tensor. Ties route the gradient to the
    /// first maximal position.
    pub fn max_over_axis(&mut self, x: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 || axis > 1 {
            return Err(TensorError::BadAxis {
                op: "max_over_axis",
                axis,
                shape,
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let xv = &self.nodes[x.0].data;
        let (out_len, reduce_len) = if axis == 0 { (cols, rows) } else { (rows, cols) };
        let mut out = vec![f64::NEG_INFINITY; out_len];
        let mut argmax = vec![0usize; out_len];
        for o in 0..out_len {
            for r in 0..reduce_len {
                let idx = if axis == 0 { r * cols + o } else { o * cols + r };
                if xv[idx] > out[o] {
                    out[o] = xv[idx];
                    argmax[o] = idx;
                }
            }
        }
        let rg = self.needs_grad(&[x]);
        Ok(self.push(vec![out_len], out, rg, Op::MaxOverAxis(x, axis, argmax)))
    }

    /// Concatenate along `axis`. All other dimensions must agree.
    pub fn concat(&mut self, tensors: &[TensorId], axis: usize) -> Result<TensorId, TensorError> {
        let first = *tensors.first().ok_or(TensorError::EmptyInput { op: "concat" })?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::BadAxis {
                op: "concat",
                axis,
                shape: base,
            });
        }
        let mut axis_total = 0usize;
        for &t in tensors {
            let s = self.shape(t);
            if s.len() != base.len()
                || s.iter()
                    .zip(&base)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = axis_total;

        let out = if base.len() == 1 || axis == 0 {
            // Row-major layout makes axis-0 concat a plain append.
            let mut out = Vec::with_capacity(num_elements(&shape));
            for &t in tensors {
                out.extend_from_slice(&self.nodes[t.0].data);
            }
            out
        } else {
            let rows = base[0];
            let mut out = Vec::with_capacity(num_elements(&shape));
            for r in 0..rows {
                for &t in tensors {
                    let cols = self.shape(t)[1];
                    let tv = &self.nodes[t.0].data;
                    out.extend_from_slice(&tv[r * cols..(r + 1) * cols]);
                }
            }
            out
        };
        let rg = self.needs_grad(tensors);
        Ok(self.push(shape, out, rg, Op::Concat(tensors.to_vec(), axis)))
    }

    /// Select row `r` of a rank-2 tensor as shape `[1, cols]`.
    pub fn row(&mut self, x: TensorId, r: usize) -> Result<TensorId, TensorError> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(TensorError::BadAxis {
                op: "row",
                axis: 0,
                shape,
            });
        }
        if r >= shape[0] {
            return Err(TensorError::IndexOutOfRange {
                op: "row",
                index: r,
                limit: shape[0],
            });
        }
        let cols = shape[1];
        let data = self.nodes[x.0].data[r * cols..(r + 1) * cols].to_vec();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(vec![1, cols], data, rg, Op::Row(x, r)))
    }

    /// Reinterpret the same elements under a new shape.
    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId, TensorError> {
        let len = self.nodes[x.0].data.len();
        if num_elements(shape) != len {
            return Err(TensorError::BadShape {
                op: "reshape",
                shape: shape.to_vec(),
                len,
            });
        }
        let data = self.nodes[x.0].data.clone();
        let rg = self.needs_grad(&[x]);
        Ok(self.push(shape.to_vec(), data, rg, Op::Reshape(x)))
    }

    /// Row lookup into `weight[v, d]`: output row `i` is `weight[indices[i]]`.
    /// Gradients accumulate into the looked-up rows only.
    pub fn gather_rows(
        &mut self,
        weight: TensorId,
        indices: &[usize],
    ) -> Result<TensorId, TensorError> {
        let shape = self.shape(weight).to_vec();
        if shape.len() != 2 {
            return Err(TensorError::BadAxis {
                op: "gather_rows",
                axis: 0,
                shape,
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &ix in indices {
            if ix >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: ix,
                    limit: rows,
                });
            }
            out.extend_from_slice(&self.nodes[weight.0].data[ix * cols..(ix + 1) * cols]);
        }
        let rg = self.needs_grad(&[weight]);
        Ok(self.push(
            vec![indices.len(), cols],
            out,
            rg,
            Op::GatherRows(weight, indices.to_vec()),
        ))
    }

    /// Valid (no padding) cross-correlation along the time axis, plus bias:
    /// `x[t, cin] * filters[k, cin, cout] -> [t-k+1, cout]`. No activation.
    pub fn conv1d(
        &mut self,
        input: TensorId,
        filters: TensorId,
        bias: TensorId,
    ) -> Result<TensorId, TensorError> {
        let xs = self.shape(input).to_vec();
        let fs = self.shape(filters).to_vec();
        let bs = self.shape(bias).to_vec();
        if xs.len() != 2 || fs.len() != 3 || xs[1] != fs[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: xs,
                rhs: fs,
            });
        }
        let (t, cin) = (xs[0], xs[1]);
        let (k, _, cout) = (fs[0], fs[1], fs[2]);
        if bs != [cout] {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: bs,
                rhs: vec![cout],
            });
        }
        if t < k {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: vec![t],
                rhs: vec![k],
            });
        }
        let xv = &self.nodes[input.0].data;
        let fv = &self.nodes[filters.0].data;
        let bv = &self.nodes[bias.0].data;
        let out_t = t - k + 1;
        let mut out = vec![0.0; out_t * cout];
        for ot in 0..out_t {
            for kk in 0..k {
                for c in 0..cin {
                    let x = xv[(ot + kk) * cin + c];
                    let frow = &fv[(kk * cin + c) * cout..(kk * cin + c + 1) * cout];
                    let orow = &mut out[ot * cout..(ot + 1) * cout];
                    for (o, &f) in orow.iter_mut().zip(frow) {
                        *o += x * f;
                    }
                }
            }
            for (o, &b) in out[ot * cout..(ot + 1) * cout].iter_mut().zip(bv) {
                *o += b;
            }
        }
        let rg = self.needs_grad(&[input, filters, bias]);
        Ok(self.push(
            vec![out_t, cout],
            out,
            rg,
            Op::Conv1d {
                input,
                filters,
                bias,
            },
        ))
    }

    /// Non-overlapping max pooling over time: `[t, c] -> [t / pool, c]`,
    /// remainder timesteps dropped. Ties keep the earliest timestep.
    pub fn maxpool1d(&mut self, x: TensorId, pool: usize) -> Result<TensorId, TensorError> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 || pool == 0 {
            return Err(TensorError::BadAxis {
                op: "maxpool1d",
                axis: pool,
                shape,
            });
        }
        let (t, c) = (shape[0], shape[1]);
        let out_t = t / pool;
        let xv = &self.nodes[x.0].data;
        let mut out = vec![f64::NEG_INFINITY; out_t * c];
        let mut argmax = vec![0usize; out_t * c];
        for ot in 0..out_t {
            for ch in 0..c {
                for p in 0..pool {
                    let idx = (ot * pool + p) * c + ch;
                    if xv[idx] > out[ot * c + ch] {
                        out[ot * c + ch] = xv[idx];
                        argmax[ot * c + ch] = idx;
                    }
                }
            }
        }
        let rg = self.needs_grad(&[x]);
        Ok(self.push(vec![out_t, c], out, rg, Op::MaxPool1d(x, pool, argmax)))
    }

    /// Reverse-topological gradient accumulation seeded with 1 at `loss`,
    /// which must hold exactly one element.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: self.shape(loss).to_vec(),
            });
        }
        for node in &mut self.nodes {
            node.grad = if node.requires_grad {
                Some(vec![0.0; node.data.len()])
            } else {
                None
            };
        }
        if !self.nodes[loss.0].requires_grad {
            // Loss does not depend on any differentiable input; all
            // gradients are legitimately zero.
            return Ok(());
        }
        self.nodes[loss.0].grad.as_mut().unwrap()[0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let g = self.nodes[i].grad.clone().unwrap();
            self.apply_backward(&op, &g, i);
        }
        Ok(())
    }

    fn add_grad(&mut self, id: TensorId, f: impl FnOnce(&mut [f64])) {
        if let Some(grad) = self.nodes[id.0].grad.as_mut() {
            f(grad);
        }
    }

    fn apply_backward(&mut self, op: &Op, g: &[f64], node_idx: usize) {
        match op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let ashape = self.shape(*a).to_vec();
                let bshape = self.shape(*b).to_vec();
                let broadcast = ashape != bshape;
                let cols = *ashape.last().unwrap_or(&1);
                match kind {
                    BinaryOp::Add | BinaryOp::Sub => {
                        let sign = if *kind == BinaryOp::Sub { -1.0 } else { 1.0 };
                        self.add_grad(*a, |ga| {
                            for (gi, &gv) in ga.iter_mut().zip(g) {
                                *gi += gv;
                            }
                        });
                        self.add_grad(*b, |gb| {
                            if broadcast {
                                for (i, &gv) in g.iter().enumerate() {
                                    gb[i % cols] += sign * gv;
                                }
                            } else {
                                for (gi, &gv) in gb.iter_mut().zip(g) {
                                    *gi += sign * gv;
                                }
                            }
                        });
                    }
                    BinaryOp::Mul => {
                        let av = self.nodes[a.0].data.clone();
                        let bv = self.nodes[b.0].data.clone();
                        self.add_grad(*a, |ga| {
                            for (i, &gv) in g.iter().enumerate() {
                                let y = if broadcast { bv[i % cols] } else { bv[i] };
                                ga[i] += gv * y;
                            }
                        });
                        self.add_grad(*b, |gb| {
                            for (i, &gv) in g.iter().enumerate() {
                                let j = if broadcast { i % cols } else { i };
                                gb[j] += gv * av[i];
                            }
                        });
                    }
                }
            }
            Op::Matmul(a, b) => {
                let (m, k) = as_matrix(self.shape(*a));
                let n = self.shape(*b)[1];
                let av = self.nodes[a.0].data.clone();
                let bv = self.nodes[b.0].data.clone();
                // dA = G . B^T
                self.add_grad(*a, |ga| ops::matmul_acc_nt(g, &bv, m, n, k, ga));
                // dB = A^T . G
                self.add_grad(*b, |gb| ops::matmul_acc_tn(&av, g, k, m, n, gb));
            }
            Op::Activation(kind, x) => {
                let out = self.nodes[node_idx].data.clone();
                let xv = self.nodes[x.0].data.clone();
                self.add_grad(*x, |gx| {
                    for i in 0..gx.len() {
                        let d = match kind {
                            Activation::Sigmoid => out[i] * (1.0 - out[i]),
                            Activation::Tanh => 1.0 - out[i] * out[i],
                            Activation::Relu => {
                                if xv[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                        gx[i] += g[i] * d;
                    }
                });
            }
            Op::Ln(x) => {
                let xv = self.nodes[x.0].data.clone();
                self.add_grad(*x, |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] / xv[i];
                    }
                });
            }
            Op::Clamp(x, lo, hi) => {
                let xv = self.nodes[x.0].data.clone();
                let (lo, hi) = (*lo, *hi);
                self.add_grad(*x, |gx| {
                    for i in 0..gx.len() {
                        if xv[i] >= lo && xv[i] <= hi {
                            gx[i] += g[i];
                        }
                    }
                });
            }
            Op::Scale(x, c) => {
                let c = *c;
                self.add_grad(*x, |gx| {
                    for (gi, &gv) in gx.iter_mut().zip(g) {
                        *gi += c * gv;
                    }
                });
            }
            Op::ReduceAll(kind, x) => {
                let n = self.nodes[x.0].data.len() as f64;
                let seed = match kind {
                    Reduction::Sum => g[0],
                    Reduction::Mean => g[0] / n,
                };
                self.add_grad(*x, |gx| {
                    for gi in gx.iter_mut() {
                        *gi += seed;
                    }
                });
            }
            Op::MaxOverAxis(x, _, argmax) => {
                self.add_grad(*x, |gx| {
                    for (o, &idx) in argmax.iter().enumerate() {
                        gx[idx] += g[o];
                    }
                });
            }
            Op::Concat(parts, axis) => {
                if *axis == 0 || self.shape(parts[0]).len() == 1 {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].data.len();
                        self.add_grad(p, |gp| {
                            for (gi, &gv) in gp.iter_mut().zip(&g[offset..offset + len]) {
                                *gi += gv;
                            }
                        });
                        offset += len;
                    }
                } else {
                    let rows = self.shape(parts[0])[0];
                    let total_cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
                    let mut col_offset = 0;
                    for &p in parts {
                        let cols = self.shape(p)[1];
                        self.add_grad(p, |gp| {
                            for r in 0..rows {
                                for c in 0..cols {
                                    gp[r * cols + c] += g[r * total_cols + col_offset + c];
                                }
                            }
                        });
                        col_offset += cols;
                    }
                }
            }
            Op::Row(x, r) => {
                let cols = self.shape(*x)[1];
                let r = *r;
                self.add_grad(*x, |gx| {
                    for c in 0..cols {
                        gx[r * cols + c] += g[c];
                    }
                });
            }
            Op::Reshape(x) => {
                self.add_grad(*x, |gx| {
                    for (gi, &gv) in gx.iter_mut().zip(g) {
                        *gi += gv;
                    }
                });
            }
            Op::GatherRows(weight, indices) => {
                let cols = self.shape(*weight)[1];
                self.add_grad(*weight, |gw| {
                    for (i, &ix) in indices.iter().enumerate() {
                        for c in 0..cols {
                            gw[ix * cols + c] += g[i * cols + c];
                        }
                    }
                });
            }
            Op::Conv1d {
                input,
                filters,
                bias,
            } => {
                let xs = self.shape(*input).to_vec();
                let fs = self.shape(*filters).to_vec();
                let (t, cin) = (xs[0], xs[1]);
                let (k, cout) = (fs[0], fs[2]);
                let out_t = t - k + 1;
                let xv = self.nodes[input.0].data.clone();
                let fv = self.nodes[filters.0].data.clone();
                self.add_grad(*input, |gx| {
                    for ot in 0..out_t {
                        for kk in 0..k {
                            for c in 0..cin {
                                let mut acc = 0.0;
                                for o in 0..cout {
                                    acc += g[ot * cout + o] * fv[(kk * cin + c) * cout + o];
                                }
                                gx[(ot + kk) * cin + c] += acc;
                            }
                        }
                    }
                });
                self.add_grad(*filters, |gf| {
                    for ot in 0..out_t {
                        for kk in 0..k {
                            for c in 0..cin {
                                let x = xv[(ot + kk) * cin + c];
                                for o in 0..cout {
                                    gf[(kk * cin + c) * cout + o] += g[ot * cout + o] * x;
                                }
                            }
                        }
                    }
                });
                self.add_grad(*bias, |gb| {
                    for ot in 0..out_t {
                        for o in 0..cout {
                            gb[o] += g[ot * cout + o];
                        }
                    }
                });
            }
            Op::MaxPool1d(x, _, argmax) => {
                self.add_grad(*x, |gx| {
                    for (o, &idx) in argmax.iter().enumerate() {
                        gx[idx] += g[o];
                    }
                });
            }
        }
    }
}
