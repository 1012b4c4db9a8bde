//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The engine is a tape: a [`Graph`] owns every tensor, each operation
//! records its inputs and output, and [`Graph::backward`] walks the tape in
//! reverse from a scalar root. It implements exactly the operations the
//! countermeasure model and Grad-CAM need, nothing more.
//!
//! Gradients accumulate across calls to [`Graph::backward`] until
//! [`Graph::zero_grads`] is called, so running backward twice from the same
//! root yields exactly twice the gradient. Each backward pass propagates
//! through private scratch buffers and only adds its result into the
//! persistent gradients, which keeps repeated passes independent.
//!
//! [`grad_check`] verifies any composite of these operations against a
//! central finite-difference approximation and is the basis for the
//! gradient-correctness tests.

use thiserror::Error;

use crate::seeds;
use rand::Rng;

/// Errors from graph construction and differentiation.
#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape {shape:?} implies {expected} values, got {actual}")]
    ValueCountMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: expected rank-{expected} input, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("conv1d: kernel size {0} must be odd")]
    EvenKernel(usize),
    #[error("pick: index {index} out of bounds for {len} elements")]
    PickOutOfBounds { index: usize, len: usize },
    #[error("backward root must be a scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("tensor id {0} does not belong to this graph")]
    UnknownTensor(usize),
}

/// Handle to a tensor inside a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

/// A dense tensor: shape, values, and an accumulated gradient of the same
/// length as `values`.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    /// `[m, k] x [k, n] -> [m, n]`
    MatMul,
    /// `[m, k] x [k] -> [m]`
    MatVec,
    /// Stride-1, zero-padded to preserve length. Inputs: signal
    /// `[c_in, t]`, kernel `[c_out, c_in, k]`, optional bias `[c_out]`.
    Conv1d,
    /// Elementwise sum of two same-shape tensors.
    Add,
    Relu,
    Sigmoid,
    /// Softmax over a rank-1 tensor.
    Softmax,
    /// `[c, t] -> [c]`, arithmetic mean over the time axis.
    MeanOverTime,
    /// Same mathematics as [`Op::MeanOverTime`]; kept distinct because the
    /// model uses it as its final pooling layer.
    GlobalAvgPoolTime,
    /// `[c, t]` scaled per channel by `[c]`.
    ChannelScale,
    /// Mean squared error between two same-shape tensors, scalar output.
    MseLoss,
    /// Extracts one element as a scalar.
    Pick { index: usize },
}

struct TapeNode {
    op: Op,
    inputs: Vec<TensorId>,
    output: TensorId,
}

/// Arena of tensors plus the operation tape recorded while building a
/// computation.
#[derive(Default)]
pub struct Graph {
    tensors: Vec<Tensor>,
    tape: Vec<TapeNode>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an input tensor. Gradient-requiring leaves are the tensors
    /// whose gradients callers typically read after [`Graph::backward`].
    pub fn leaf(
        &mut self,
        shape: &[usize],
        values: Vec<f64>,
        requires_grad: bool,
    ) -> Result<TensorId, AutodiffError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(AutodiffError::ValueCountMismatch {
                shape: shape.to_vec(),
                expected,
                actual: values.len(),
            });
        }
        Ok(self.alloc(shape.to_vec(), values, requires_grad))
    }

    /// Adds a constant input tensor.
    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> Result<TensorId, AutodiffError> {
        self.leaf(shape, values, false)
    }

    fn alloc(&mut self, shape: Vec<usize>, values: Vec<f64>, requires_grad: bool) -> TensorId {
        let grad = vec![0.0; values.len()];
        self.tensors.push(Tensor {
            shape,
            values,
            grad,
            requires_grad,
        });
        TensorId(self.tensors.len() - 1)
    }

    fn record(&mut self, op: Op, inputs: Vec<TensorId>, shape: Vec<usize>, values: Vec<f64>) -> TensorId {
        let output = self.alloc(shape, values, false);
        self.tape.push(TapeNode { op, inputs, output });
        output
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn values(&self, id: TensorId) -> &[f64] {
        &self.tensors[id.0].values
    }

    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.tensors[id.0].grad
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.tensors[id.0].shape
    }

    /// Scalar value of a single-element tensor.
    pub fn scalar(&self, id: TensorId) -> f64 {
        self.tensors[id.0].values[0]
    }

    /// Clears all accumulated gradients.
    pub fn zero_grads(&mut self) {
        for tensor in &mut self.tensors {
            tensor.grad.fill(0.0);
        }
    }

    fn check(&self, id: TensorId) -> Result<(), AutodiffError> {
        if id.0 >= self.tensors.len() {
            return Err(AutodiffError::UnknownTensor(id.0));
        }
        Ok(())
    }

    /// Matrix product. Accepts `[m, k] x [k, n] -> [m, n]` or the
    /// matrix-vector form `[m, k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        match (sa.as_slice(), sb.as_slice()) {
            (&[m, k], &[k2, n]) if k == k2 => {
                let (va, vb) = (self.values(a), self.values(b));
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for l in 0..k {
                        let ail = va[i * k + l];
                        let brow = &vb[l * n..(l + 1) * n];
                        let orow = &mut out[i * n..(i + 1) * n];
                        for (o, &b) in orow.iter_mut().zip(brow) {
                            *o += ail * b;
                        }
                    }
                }
                Ok(self.record(Op::MatMul, vec![a, b], vec![m, n], out))
            }
            (&[m, k], &[k2]) if k == k2 => {
                let (va, vb) = (self.values(a), self.values(b));
                let mut out = vec![0.0; m];
                for i in 0..m {
                    out[i] = va[i * k..(i + 1) * k]
                        .iter()
                        .zip(vb)
                        .map(|(x, y)| x * y)
                        .sum();
                }
                Ok(self.record(Op::MatVec, vec![a, b], vec![m], out))
            }
            _ => Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            }),
        }
    }

    /// 1-D convolution with stride 1 and zero padding chosen so the output
    /// length equals the input length. The kernel size must be odd.
    pub fn conv1d(
        &mut self,
        input: TensorId,
        weight: TensorId,
        bias: Option<TensorId>,
    ) -> Result<TensorId, AutodiffError> {
        self.check(input)?;
        self.check(weight)?;
        let si = self.shape(input).to_vec();
        let sw = self.shape(weight).to_vec();
        let (&[c_in, t], &[c_out, c_in2, k]) = match (si.as_slice(), sw.as_slice()) {
            (i @ &[_, _], w @ &[_, _, _]) => (
                <&[usize; 2]>::try_from(i).unwrap(),
                <&[usize; 3]>::try_from(w).unwrap(),
            ),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "conv1d",
                    left: si,
                    right: sw,
                })
            }
        };
        if c_in != c_in2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "conv1d",
                left: si,
                right: sw,
            });
        }
        if k % 2 == 0 {
            return Err(AutodiffError::EvenKernel(k));
        }
        if let Some(b) = bias {
            self.check(b)?;
            if self.shape(b) != [c_out] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "conv1d bias",
                    left: self.shape(b).to_vec(),
                    right: vec![c_out],
                });
            }
        }
        let pad = (k - 1) / 2;
        let mut out = vec![0.0; c_out * t];
        {
            let x = self.values(input);
            let w = self.values(weight);
            for o in 0..c_out {
                let orow = &mut out[o * t..(o + 1) * t];
                if let Some(b) = bias {
                    orow.fill(self.tensors[b.0].values[o]);
                }
                for c in 0..c_in {
                    let xrow = &x[c * t..(c + 1) * t];
                    for j in 0..k {
                        let wv = w[o * c_in * k + c * k + j];
                        let shift = j as isize - pad as isize;
                        let t0 = (-shift).max(0) as usize;
                        let t1 = (t as isize).min(t as isize - shift).max(0) as usize;
                        for ti in t0..t1 {
                            orow[ti] += wv * xrow[(ti as isize + shift) as usize];
                        }
                    }
                }
            }
        }
        let mut inputs = vec![input, weight];
        if let Some(b) = bias {
            inputs.push(b);
        }
        Ok(self.record(Op::Conv1d, inputs, vec![c_out, t], out))
    }

    /// Elementwise sum of two tensors of identical shape.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(a)?;
        self.check(b)?;
        if self.shape(a) != self.shape(b) {
            return Err(AutodiffError::ShapeMismatch {
                op: "add",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self
            .values(a)
            .iter()
            .zip(self.values(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.record(Op::Add, vec![a, b], shape, out))
    }

    /// Elementwise rectified linear unit. The subgradient at zero is zero.
    pub fn relu(&mut self, x: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        let out: Vec<f64> = self.values(x).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.record(Op::Relu, vec![x], shape, out))
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&mut self, x: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        let out: Vec<f64> = self
            .values(x)
            .iter()
            .map(|&v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.record(Op::Sigmoid, vec![x], shape, out))
    }

    /// Softmax over a rank-1 tensor, stabilized by subtracting the maximum.
    pub fn softmax(&mut self, x: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        let shape = self.shape(x).to_vec();
        if shape.len() != 1 {
            return Err(AutodiffError::RankMismatch {
                op: "softmax",
                expected: 1,
                shape,
            });
        }
        let v = self.values(x);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let out: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
        Ok(self.record(Op::Softmax, vec![x], shape, out))
    }

    /// Mean over the time axis: `[c, t] -> [c]`.
    pub fn mean_over_time(&mut self, x: TensorId) -> Result<TensorId, AutodiffError> {
        self.pool_time(x, Op::MeanOverTime)
    }

    /// Global average pooling over time: `[c, t] -> [c]`. Identical
    /// mathematics to [`Graph::mean_over_time`]; the model's final pooling
    /// layer uses this name.
    pub fn global_avg_pool_time(&mut self, x: TensorId) -> Result<TensorId, AutodiffError> {
        self.pool_time(x, Op::GlobalAvgPoolTime)
    }

    fn pool_time(&mut self, x: TensorId, op: Op) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        let shape = self.shape(x).to_vec();
        let (c, t) = match shape.as_slice() {
            &[c, t] => (c, t),
            _ => {
                return Err(AutodiffError::RankMismatch {
                    op: "mean_over_time",
                    expected: 2,
                    shape,
                })
            }
        };
        let v = self.values(x);
        let out: Vec<f64> = (0..c)
            .map(|ci| v[ci * t..(ci + 1) * t].iter().sum::<f64>() / t as f64)
            .collect();
        Ok(self.record(op, vec![x], vec![c], out))
    }

    /// Scales each channel of `[c, t]` by the matching element of `[c]`.
    pub fn channel_scale(&mut self, x: TensorId, scale: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        self.check(scale)?;
        let sx = self.shape(x).to_vec();
        let ss = self.shape(scale).to_vec();
        let (c, t) = match (sx.as_slice(), ss.as_slice()) {
            (&[c, t], &[c2]) if c == c2 => (c, t),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "channel_scale",
                    left: sx,
                    right: ss,
                })
            }
        };
        let xv = self.values(x);
        let sv = self.values(scale);
        let mut out = vec![0.0; c * t];
        for ci in 0..c {
            let s = sv[ci];
            for ti in 0..t {
                out[ci * t + ti] = xv[ci * t + ti] * s;
            }
        }
        Ok(self.record(Op::ChannelScale, vec![x, scale], vec![c, t], out))
    }

    /// Mean squared error between prediction and target, scalar output.
    pub fn mse_loss(&mut self, pred: TensorId, target: TensorId) -> Result<TensorId, AutodiffError> {
        self.check(pred)?;
        self.check(target)?;
        if self.shape(pred) != self.shape(target) {
            return Err(AutodiffError::ShapeMismatch {
                op: "mse_loss",
                left: self.shape(pred).to_vec(),
                right: self.shape(target).to_vec(),
            });
        }
        let n = self.tensor(pred).numel() as f64;
        let loss = self
            .values(pred)
            .iter()
            .zip(self.values(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.record(Op::MseLoss, vec![pred, target], vec![1], vec![loss]))
    }

    /// Extracts element `index` (in row-major order) as a scalar tensor.
    /// Grad-CAM uses this to select one raw logit as the backward root.
    pub fn pick(&mut self, x: TensorId, index: usize) -> Result<TensorId, AutodiffError> {
        self.check(x)?;
        let len = self.tensor(x).numel();
        if index >= len {
            return Err(AutodiffError::PickOutOfBounds { index, len });
        }
        let value = self.values(x)[index];
        Ok(self.record(Op::Pick { index }, vec![x], vec![1], vec![value]))
    }

    /// Backpropagates from a scalar root, adding this pass's gradients into
    /// every tensor's accumulated `grad`.
    pub fn backward(&mut self, root: TensorId) -> Result<(), AutodiffError> {
        self.check(root)?;
        if self.tensor(root).numel() != 1 {
            return Err(AutodiffError::NonScalarRoot {
                shape: self.shape(root).to_vec(),
            });
        }
        let mut scratch: Vec<Vec<f64>> = self
            .tensors
            .iter()
            .map(|t| vec![0.0; t.values.len()])
            .collect();
        scratch[root.0][0] = 1.0;
        for node in self.tape.iter().rev() {
            let out_idx = node.output.0;
            if scratch[out_idx].iter().all(|&g| g == 0.0) {
                continue;
            }
            // Outputs are always allocated after their inputs, so the split
            // puts the output gradient in `tail` and all inputs in `head`.
            let (head, tail) = scratch.split_at_mut(out_idx);
            let gout: &[f64] = &tail[0];
            let tensors = &self.tensors;
            let val = |id: TensorId| -> &[f64] { &tensors[id.0].values };
            match node.op {
                Op::MatMul => {
                    let (a, b) = (node.inputs[0], node.inputs[1]);
                    let (&[m, k], &[_, n]) = (
                        <&[usize; 2]>::try_from(tensors[a.0].shape.as_slice()).unwrap(),
                        <&[usize; 2]>::try_from(tensors[b.0].shape.as_slice()).unwrap(),
                    );
                    let (va, vb) = (val(a), val(b));
                    if a.0 == b.0 {
                        let ga = &mut head[a.0];
                        for i in 0..m {
                            for l in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += gout[i * n + j] * vb[l * n + j];
                                }
                                ga[i * k + l] += acc;
                            }
                        }
                        for l in 0..k {
                            for j in 0..n {
                                let mut acc = 0.0;
                                for i in 0..m {
                                    acc += va[i * k + l] * gout[i * n + j];
                                }
                                ga[l * n + j] += acc;
                            }
                        }
                    } else {
                        let (first, second) = split_two(head, a.0, b.0);
                        let (ga, gb) = if a.0 < b.0 { (first, second) } else { (second, first) };
                        for i in 0..m {
                            for l in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += gout[i * n + j] * vb[l * n + j];
                                }
                                ga[i * k + l] += acc;
                            }
                        }
                        for l in 0..k {
                            for j in 0..n {
                                let mut acc = 0.0;
                                for i in 0..m {
                                    acc += va[i * k + l] * gout[i * n + j];
                                }
                                gb[l * n + j] += acc;
                            }
                        }
                    }
                }
                Op::MatVec => {
                    let (a, b) = (node.inputs[0], node.inputs[1]);
                    let &[m, k] = <&[usize; 2]>::try_from(tensors[a.0].shape.as_slice()).unwrap();
                    let (va, vb) = (val(a), val(b));
                    let (first, second) = split_two(head, a.0, b.0);
                    let (ga, gb) = if a.0 < b.0 { (first, second) } else { (second, first) };
                    for i in 0..m {
                        let go = gout[i];
                        for l in 0..k {
                            ga[i * k + l] += go * vb[l];
                            gb[l] += va[i * k + l] * go;
                        }
                    }
                }
                Op::Conv1d => {
                    let (input, weight) = (node.inputs[0], node.inputs[1]);
                    let &[c_in, t] =
                        <&[usize; 2]>::try_from(tensors[input.0].shape.as_slice()).unwrap();
                    let &[c_out, _, k] =
                        <&[usize; 3]>::try_from(tensors[weight.0].shape.as_slice()).unwrap();
                    let pad = (k - 1) / 2;
                    let xv = val(input);
                    let wv = val(weight);
                    {
                        let (first, second) = split_two(head, input.0, weight.0);
                        let (gx, gw) = if input.0 < weight.0 {
                            (first, second)
                        } else {
                            (second, first)
                        };
                        for o in 0..c_out {
                            let grow = &gout[o * t..(o + 1) * t];
                            for c in 0..c_in {
                                let xrow = &xv[c * t..(c + 1) * t];
                                let gxrow = &mut gx[c * t..(c + 1) * t];
                                for j in 0..k {
                                    let shift = j as isize - pad as isize;
                                    let t0 = (-shift).max(0) as usize;
                                    let t1 = (t as isize).min(t as isize - shift).max(0) as usize;
                                    let w = wv[o * c_in * k + c * k + j];
                                    let mut wacc = 0.0;
                                    for ti in t0..t1 {
                                        let xi = (ti as isize + shift) as usize;
                                        gxrow[xi] += w * grow[ti];
                                        wacc += grow[ti] * xrow[xi];
                                    }
                                    gw[o * c_in * k + c * k + j] += wacc;
                                }
                            }
                        }
                    }
                    if let Some(&bias) = node.inputs.get(2) {
                        let gb = &mut head[bias.0];
                        for o in 0..c_out {
                            gb[o] += gout[o * t..(o + 1) * t].iter().sum::<f64>();
                        }
                    }
                }
                Op::Add => {
                    let (a, b) = (node.inputs[0], node.inputs[1]);
                    if a.0 == b.0 {
                        for (g, &go) in head[a.0].iter_mut().zip(gout) {
                            *g += 2.0 * go;
                        }
                    } else {
                        for (g, &go) in head[a.0].iter_mut().zip(gout) {
                            *g += go;
                        }
                        for (g, &go) in head[b.0].iter_mut().zip(gout) {
                            *g += go;
                        }
                    }
                }
                Op::Relu => {
                    let x = node.inputs[0];
                    let xv = val(x);
                    for ((g, &go), &xi) in head[x.0].iter_mut().zip(gout).zip(xv) {
                        if xi > 0.0 {
                            *g += go;
                        }
                    }
                }
                Op::Sigmoid => {
                    let x = node.inputs[0];
                    let yv = &tensors[out_idx].values;
                    for ((g, &go), &y) in head[x.0].iter_mut().zip(gout).zip(yv) {
                        *g += go * y * (1.0 - y);
                    }
                }
                Op::Softmax => {
                    let x = node.inputs[0];
                    let yv = &tensors[out_idx].values;
                    let dot: f64 = gout.iter().zip(yv).map(|(g, y)| g * y).sum();
                    for ((g, &go), &y) in head[x.0].iter_mut().zip(gout).zip(yv) {
                        *g += y * (go - dot);
                    }
                }
                Op::MeanOverTime | Op::GlobalAvgPoolTime => {
                    let x = node.inputs[0];
                    let &[c, t] = <&[usize; 2]>::try_from(tensors[x.0].shape.as_slice()).unwrap();
                    let gx = &mut head[x.0];
                    for ci in 0..c {
                        let share = gout[ci] / t as f64;
                        for g in &mut gx[ci * t..(ci + 1) * t] {
                            *g += share;
                        }
                    }
                }
                Op::ChannelScale => {
                    let (x, s) = (node.inputs[0], node.inputs[1]);
                    let &[c, t] = <&[usize; 2]>::try_from(tensors[x.0].shape.as_slice()).unwrap();
                    let xv = val(x);
                    let sv = val(s);
                    let (first, second) = split_two(head, x.0, s.0);
                    let (gx, gs) = if x.0 < s.0 { (first, second) } else { (second, first) };
                    for ci in 0..c {
                        let scale = sv[ci];
                        let mut acc = 0.0;
                        for ti in 0..t {
                            gx[ci * t + ti] += gout[ci * t + ti] * scale;
                            acc += gout[ci * t + ti] * xv[ci * t + ti];
                        }
                        gs[ci] += acc;
                    }
                }
                Op::MseLoss => {
                    let (p, tgt) = (node.inputs[0], node.inputs[1]);
                    if p.0 == tgt.0 {
                        // Zero loss with cancelling gradients.
                        continue;
                    }
                    let n = tensors[p.0].values.len() as f64;
                    let go = gout[0];
                    let pv = val(p);
                    let tv = val(tgt);
                    let (first, second) = split_two(head, p.0, tgt.0);
                    let (gp, gt) = if p.0 < tgt.0 { (first, second) } else { (second, first) };
                    for i in 0..pv.len() {
                        let d = go * 2.0 * (pv[i] - tv[i]) / n;
                        gp[i] += d;
                        gt[i] -= d;
                    }
                }
                Op::Pick { index } => {
                    head[node.inputs[0].0][index] += gout[0];
                }
            }
        }
        for (tensor, extra) in self.tensors.iter_mut().zip(scratch) {
            for (g, e) in tensor.grad.iter_mut().zip(extra) {
                *g += e;
            }
        }
        Ok(())
    }
}

/// Two disjoint mutable rows of a scratch buffer. Callers guarantee
/// `i != j`.
fn split_two(buffers: &mut [Vec<f64>], i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert_ne!(i, j);
    let (lo, hi) = (i.min(j), i.max(j));
    let (a, b) = buffers.split_at_mut(hi);
    (&mut a[lo], &mut b[0])
}

/// Compares analytic gradients against central finite differences for a
/// computation built by `build` over inputs with the given shapes.
///
/// Input values are drawn uniformly from `[-1, 1]` using the seed. If the
/// built output is not a scalar it is reduced through [`Graph::mse_loss`]
/// against a fixed pattern so there is a scalar root to differentiate.
/// Returns the maximum over all input elements of
/// `|analytic - numeric| / max(|numeric|, 1e-8)`.
pub fn grad_check<F>(build: F, shapes: &[&[usize]], seed: u64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Graph, &[TensorId]) -> Result<TensorId, AutodiffError>,
{
    let mut rng = seeds::stream(seed, "grad-check");
    let inputs: Vec<(Vec<usize>, Vec<f64>)> = shapes
        .iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            (shape.to_vec(), values)
        })
        .collect();
    grad_check_on(&build, &inputs)
}

/// [`grad_check`] with caller-supplied input values, for operations whose
/// derivative has kinks or whose domain is restricted.
pub fn grad_check_on<F>(
    build: &F,
    inputs: &[(Vec<usize>, Vec<f64>)],
) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Graph, &[TensorId]) -> Result<TensorId, AutodiffError>,
{
    const EPSILON: f64 = 1e-5;

    let evaluate = |values: &[Vec<f64>]| -> Result<(Graph, TensorId, Vec<TensorId>), AutodiffError> {
        let mut graph = Graph::new();
        let ids: Vec<TensorId> = inputs
            .iter()
            .zip(values)
            .map(|((shape, _), v)| graph.leaf(shape, v.clone(), true))
            .collect::<Result<_, _>>()?;
        let out = build(&mut graph, &ids)?;
        let root = if graph.tensor(out).numel() == 1 {
            out
        } else {
            // Fixed, input-independent target so perturbed re-evaluations
            // reduce through the same scalarization.
            let n = graph.tensor(out).numel();
            let pattern: Vec<f64> = (0..n).map(|i| ((i % 7) as f64 - 3.0) / 4.0).collect();
            let shape = graph.shape(out).to_vec();
            let target = graph.constant(&shape, pattern)?;
            graph.mse_loss(out, target)?
        };
        Ok((graph, root, ids))
    };

    let base_values: Vec<Vec<f64>> = inputs.iter().map(|(_, v)| v.clone()).collect();
    let (mut graph, root, ids) = evaluate(&base_values)?;
    graph.backward(root)?;
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| graph.grad(id).to_vec()).collect();

    let mut worst = 0.0f64;
    for (which, (_, base)) in inputs.iter().enumerate() {
        for element in 0..base.len() {
            let mut plus = base_values.clone();
            plus[which][element] += EPSILON;
            let (gp, rp, _) = evaluate(&plus)?;
            let f_plus = gp.scalar(rp);

            let mut minus = base_values.clone();
            minus[which][element] -= EPSILON;
            let (gm, rm, _) = evaluate(&minus)?;
            let f_minus = gm.scalar(rm);

            let numeric = (f_plus - f_minus) / (2.0 * EPSILON);
            let error = (analytic[which][element] - numeric).abs() / numeric.abs().max(1e-8);
            worst = worst.max(error);
        }
    }
    Ok(worst)
}
