//! Reverse-mode differentiation over a linear recording of operations.

use crate::error::{Error, Result};

use super::ops::{self, Activation, ConvShape};
use super::real::matmul;
use super::{Real, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable operation defined outside the engine. The caller
/// computes the forward value itself and registers it with
/// [`Tape::custom`]; the op supplies the vector-Jacobian product.
pub trait CustomOp<T: Real> {
    /// Gradient for every input, in input order.
    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>>;
}

enum Op<T: Real> {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        shape: ConvShape,
        cols: Vec<Vec<T>>,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        shape: ConvShape,
    },
    ChannelBias {
        input: Var,
        bias: Var,
    },
    Dense {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Act {
        input: Var,
        kind: Activation,
    },
    Symmetrize(Var),
    FillDiagonal(Var),
    Reshape(Var),
    Mul(Var, Var),
    Sum(Var),
    Mean(Var),
    LinComb(Vec<(Var, T)>),
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp<T>>,
    },
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar with respect to every leaf that requires them.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Records an input. Gradients are only propagated to leaves created
    /// with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
        let shape = ops::conv2d_shape(self.value(input), self.value(kernel), stride, pad)?;
        let (out, cols) = ops::conv2d_forward(self.value(input), self.value(kernel), &shape);
        let needs = self.needs(input) || self.needs(kernel);
        // the column buffers are only needed for the kernel gradient
        let cols = if self.needs(kernel) { cols } else { Vec::new() };
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                kernel,
                shape,
                cols,
            },
            needs,
        ))
    }

    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        pad: usize,
        out_hw: Option<(usize, usize)>,
    ) -> Result<Var> {
        let shape = ops::conv_transpose2d_shape(self.value(input), self.value(kernel), stride, pad, out_hw)?;
        let out = ops::conv_transpose2d_forward(self.value(input), self.value(kernel), &shape);
        let needs = self.needs(input) || self.needs(kernel);
        Ok(self.push(out, Op::ConvTranspose2d { input, kernel, shape }, needs))
    }

    /// Adds a per-channel bias to a B×C×H×W tensor.
    pub fn add_channel_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let (_, c, h, w) = self.value(input).dims4()?;
        if self.value(bias).shape() != [c] {
            return Err(Error::Shape(format!(
                "channel bias {:?} does not match {c} channels",
                self.value(bias).shape()
            )));
        }
        let mut out = self.value(input).clone();
        let b = self.value(bias).data().to_vec();
        for (k, plane) in out.data_mut().chunks_mut(h * w).enumerate() {
            let bk = b[k % c];
            for v in plane {
                *v += bk;
            }
        }
        let needs = self.needs(input) || self.needs(bias);
        Ok(self.push(out, Op::ChannelBias { input, bias }, needs))
    }

    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let out = ops::dense(self.value(input), self.value(weights), self.value(bias))?;
        let needs = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(out, Op::Dense { input, weights, bias }, needs))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let out = ops::activation(self.value(input), kind);
        let needs = self.needs(input);
        self.push(out, Op::Act { input, kind }, needs)
    }

    pub fn symmetrize(&mut self, input: Var) -> Result<Var> {
        let out = ops::symmetrize_tensor(self.value(input))?;
        let needs = self.needs(input);
        Ok(self.push(out, Op::Symmetrize(input), needs))
    }

    /// Overwrites the diagonal of every trailing square matrix with `value`.
    pub fn fill_diagonal(&mut self, input: Var, value: T) -> Result<Var> {
        let (lead, n) = ops::square_tail(self.value(input))?;
        let mut out = self.value(input).clone();
        let data = out.data_mut();
        for m in 0..lead {
            for i in 0..n {
                data[m * n * n + i * n + i] = value;
            }
        }
        let needs = self.needs(input);
        Ok(self.push(out, Op::FillDiagonal(input), needs))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(input).clone().reshaped(shape)?;
        let needs = self.needs(input);
        Ok(self.push(out, Op::Reshape(input), needs))
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape(format!("mul: {:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul(a, b), needs))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let out = Tensor::scalar(self.value(input).sum());
        let needs = self.needs(input);
        self.push(out, Op::Sum(input), needs)
    }

    pub fn mean(&mut self, input: Var) -> Var {
        let v = self.value(input);
        let out = Tensor::scalar(v.sum() / T::of(v.numel() as f64));
        let needs = self.needs(input);
        self.push(out, Op::Mean(input), needs)
    }

    /// Σ cᵢ·vᵢ over equally shaped tensors.
    pub fn lin_comb(&mut self, terms: &[(Var, T)]) -> Result<Var> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("lin_comb needs at least one term".into()))?;
        let shape = self.value(first.0).shape().to_vec();
        let mut out = Tensor::zeros(&shape);
        for &(v, c) in terms {
            let t = self.value(v);
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("lin_comb: {:?} vs {shape:?}", t.shape())));
            }
            for (o, &x) in out.data_mut().iter_mut().zip(t.data()) {
                *o += c * x;
            }
        }
        let needs = terms.iter().any(|&(v, _)| self.needs(v));
        Ok(self.push(out, Op::LinComb(terms.to_vec()), needs))
    }

    pub fn custom(&mut self, inputs: &[Var], output: Tensor<T>, op: Box<dyn CustomOp<T>>) -> Var {
        let needs = inputs.iter().any(|&v| self.needs(v));
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
            needs,
        )
    }

    /// Back-propagates from a scalar. Leaves that require gradients but are
    /// not reached receive no entry; [`ParamSet`](super::ParamSet) treats
    /// those as zero.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.needs(loss) {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let send = |v: Var, t: Tensor<T>, grads: &mut [Option<Tensor<T>>]| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                shape,
                cols,
            } => {
                let (dx, dk) =
                    ops::conv2d_backward(g, self.value(*kernel), cols, shape, self.needs(*input), self.needs(*kernel));
                if let Some(dx) = dx {
                    send(*input, dx, grads);
                }
                if let Some(dk) = dk {
                    send(*kernel, dk, grads);
                }
            }
            Op::ConvTranspose2d { input, kernel, shape } => {
                let (dx, dk) = ops::conv_transpose2d_backward(
                    g,
                    self.value(*input),
                    self.value(*kernel),
                    shape,
                    self.needs(*input),
                    self.needs(*kernel),
                );
                if let Some(dx) = dx {
                    send(*input, dx, grads);
                }
                if let Some(dk) = dk {
                    send(*kernel, dk, grads);
                }
            }
            Op::ChannelBias { input, bias } => {
                if self.needs(*bias) {
                    let (_, c, h, w) = g.dims4().expect("bias grad shape");
                    let mut db = vec![T::zero(); c];
                    for (k, plane) in g.data().chunks(h * w).enumerate() {
                        db[k % c] += plane.iter().copied().sum::<T>();
                    }
                    send(*bias, Tensor::new(vec![c], db).expect("bias shape"), grads);
                }
                send(*input, g.clone(), grads);
            }
            Op::Dense { input, weights, bias } => {
                let x = self.value(*input);
                let w = self.value(*weights);
                let (b, f) = x.dims2().expect("dense input");
                let gcols = w.shape()[1];
                if self.needs(*input) {
                    let mut dx = vec![T::zero(); b * f];
                    matmul(b, gcols, f, g.data(), false, w.data(), true, T::zero(), &mut dx);
                    send(*input, Tensor::new(vec![b, f], dx).expect("dense dx"), grads);
                }
                if self.needs(*weights) {
                    let mut dw = vec![T::zero(); f * gcols];
                    matmul(f, b, gcols, x.data(), true, g.data(), false, T::zero(), &mut dw);
                    send(*weights, Tensor::new(vec![f, gcols], dw).expect("dense dw"), grads);
                }
                if self.needs(*bias) {
                    let mut db = vec![T::zero(); gcols];
                    for row in g.data().chunks(gcols) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    send(*bias, Tensor::new(vec![gcols], db).expect("dense db"), grads);
                }
            }
            Op::Act { input, kind } => {
                let x = self.value(*input);
                let data = x
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .zip(g.data())
                    .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                    .collect();
                send(*input, Tensor::new(x.shape().to_vec(), data).expect("act grad"), grads);
            }
            Op::Symmetrize(input) => {
                // the map is self-adjoint
                let dx = ops::symmetrize_tensor(g).expect("symmetrize grad");
                send(*input, dx, grads);
            }
            Op::FillDiagonal(input) => {
                let mut dx = g.clone();
                let (lead, n) = ops::square_tail(&dx).expect("diag grad");
                let data = dx.data_mut();
                for m in 0..lead {
                    for i in 0..n {
                        data[m * n * n + i * n + i] = T::zero();
                    }
                }
                send(*input, dx, grads);
            }
            Op::Reshape(input) => {
                let shape = self.value(*input).shape().to_vec();
                send(*input, g.clone().reshaped(&shape).expect("reshape grad"), grads);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let d = vb.data().iter().zip(g.data()).map(|(&y, &gi)| y * gi).collect();
                    send(*a, Tensor::new(va.shape().to_vec(), d).expect("mul grad"), grads);
                }
                if self.needs(*b) {
                    let d = va.data().iter().zip(g.data()).map(|(&x, &gi)| x * gi).collect();
                    send(*b, Tensor::new(vb.shape().to_vec(), d).expect("mul grad"), grads);
                }
            }
            Op::Sum(input) => {
                let shape = self.value(*input).shape().to_vec();
                send(*input, Tensor::full(&shape, g.item()), grads);
            }
            Op::Mean(input) => {
                let v = self.value(*input);
                let scale = g.item() / T::of(v.numel() as f64);
                send(*input, Tensor::full(v.shape(), scale), grads);
            }
            Op::LinComb(terms) => {
                for &(v, c) in terms {
                    send(v, g.map(|x| x * c), grads);
                }
            }
            Op::Custom { inputs, op } => {
                let values: Vec<&Tensor<T>> = inputs.iter().map(|&v| self.value(v)).collect();
                let dxs = op.backward(&values, &node.value, g);
                for (&v, dx) in inputs.iter().zip(dxs) {
                    send(v, dx, grads);
                }
            }
        }
    }
}
