//! Reverse-mode differentiation over a recorded list of tensor operations.
//!
//! Nodes are appended in evaluation order, so node ids are already a
//! topological order and the backward pass is a single reverse sweep.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a node in a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `[m, n] + [n]` broadcast over rows.
    AddBias(NodeId, NodeId),
    Relu(NodeId),
    /// Heaviside step of the input (`x > 0`); its derivative is zero.
    ReluMask,
    Sigmoid(NodeId),
    Tanh(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    /// Division by a one-element node.
    DivScalar(NodeId, NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// The computation record: primitive operations with cached forward values.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`]: d(output)/d(node) for every node that
/// requires a gradient. Unused leaves get explicit zeros.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn wrt(&self, id: NodeId) -> Result<&Tensor> {
        self.get(id)
            .ok_or_else(|| Error::contract(format!("no gradient recorded for node {}", id.0)))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        id
    }

    fn check(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::contract(format!("node {} is not on this tape", id.0)))
    }

    fn unary(&mut self, x: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let n = self.check(x)?;
        let value = n.value.map(f);
        let rg = n.requires_grad;
        Ok(self.push(op, value, rg))
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<(bool, bool)> {
        let na = self.check(a)?;
        let nb = self.check(b)?;
        if na.value.shape() != nb.value.shape() {
            return Err(Error::contract(format!(
                "{what}: shapes {:?} and {:?} differ",
                na.value.shape(),
                nb.value.shape()
            )));
        }
        Ok((na.requires_grad, nb.requires_grad))
    }

    /// A differentiable input (parameter or example).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let va = &self.check(a)?.value;
        let vb = &self.check(b)?.value;
        let value = va.matmul(vb)?;
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.check(a)?;
        let value = n.value.transpose()?;
        let rg = n.requires_grad;
        Ok(self.push(Op::Transpose(a), value, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, rb) = self.same_shape(a, b, "add")?;
        let value = self.nodes[a.0].value.zip_map(&self.nodes[b.0].value, |x, y| x + y);
        Ok(self.push(Op::Add(a, b), value, ra || rb))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, rb) = self.same_shape(a, b, "sub")?;
        let value = self.nodes[a.0].value.zip_map(&self.nodes[b.0].value, |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), value, ra || rb))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, rb) = self.same_shape(a, b, "mul")?;
        let value = self.nodes[a.0].value.zip_map(&self.nodes[b.0].value, |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), value, ra || rb))
    }

    /// Adds a length-`n` bias to every row of an `[m, n]` matrix.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let vx = &self.check(x)?.value;
        let vb = &self.check(bias)?.value;
        let (m, n) = vx.dims2()?;
        if vb.len() != n {
            return Err(Error::contract(format!(
                "add_bias: bias of shape {:?} against matrix {:?}",
                vb.shape(),
                vx.shape()
            )));
        }
        let mut data = vx.data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, &b) in row.iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        let value = Tensor::matrix(m, n, data)?;
        let rg = self.nodes[x.0].requires_grad || self.nodes[bias.0].requires_grad;
        Ok(self.push(Op::AddBias(x, bias), value, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        // NaN propagates so divergence is never masked.
        self.unary(x, Op::Relu(x), |v| if v <= 0.0 { 0.0 } else { v })
    }

    /// `1` where `x > 0`, else `0`. Piecewise constant, so no gradient flows.
    pub fn relu_mask(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.check(x)?.value.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        Ok(self.push(Op::ReluMask, value, false))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.check(x)?;
        let value = Tensor::scalar(n.value.sum());
        let rg = n.requires_grad;
        Ok(self.push(Op::Sum(x), value, rg))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.check(x)?;
        let value = Tensor::scalar(n.value.sum() / n.value.len() as f64);
        let rg = n.requires_grad;
        Ok(self.push(Op::Mean(x), value, rg))
    }

    /// `x / s` for a one-element node `s`.
    pub fn div_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let vs = self.check(s)?.value.item()?;
        let value = self.check(x)?.value.map(|v| v / vs);
        let rg = self.nodes[x.0].requires_grad || self.nodes[s.0].requires_grad;
        Ok(self.push(Op::DivScalar(x, s), value, rg))
    }

    /// Reverse sweep from a one-element `output` node.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = self.check(output)?;
        if !out.value.is_scalar() {
            return Err(Error::contract(format!(
                "backward from non-scalar node of shape {:?}",
                out.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::ones(out.value.shape()));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[i].is_none() {
                grads[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let val = |id: NodeId| &self.nodes[id.0].value;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(a) {
                    let ga = g.matmul(&val(b).transpose()?)?;
                    self.accumulate(grads, a, ga);
                }
                if self.wants(b) {
                    let gb = val(a).transpose()?.matmul(g)?;
                    self.accumulate(grads, b, gb);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, a, g.transpose()?),
            Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.zip_map(val(b), |gv, bv| gv * bv));
                }
                if self.wants(b) {
                    self.accumulate(grads, b, g.zip_map(val(a), |gv, av| gv * av));
                }
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, x, g.clone());
                if self.wants(b) {
                    let bshape = val(b).shape().to_vec();
                    let n = val(b).len();
                    let mut col = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (c, &v) in col.iter_mut().zip(row) {
                            *c += v;
                        }
                    }
                    self.accumulate(grads, b, Tensor::new(bshape, col)?);
                }
            }
            Op::Relu(x) => {
                let gx = g.zip_map(val(x), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, x, gx);
            }
            Op::ReluMask => {}
            Op::Sigmoid(x) => {
                let gx = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y));
                self.accumulate(grads, x, gx);
            }
            Op::Tanh(x) => {
                let gx = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y));
                self.accumulate(grads, x, gx);
            }
            Op::Square(x) => {
                let gx = g.zip_map(val(x), |gv, xv| 2.0 * gv * xv);
                self.accumulate(grads, x, gx);
            }
            Op::Sum(x) => {
                let gv = g.item()?;
                self.accumulate(grads, x, Tensor::full(val(x).shape(), gv));
            }
            Op::Mean(x) => {
                let n = val(x).len() as f64;
                let gv = g.item()? / n;
                self.accumulate(grads, x, Tensor::full(val(x).shape(), gv));
            }
            Op::Scale(x, c) => self.accumulate(grads, x, g.map(|v| v * c)),
            Op::AddScalar(x) => self.accumulate(grads, x, g.clone()),
            Op::DivScalar(x, s) => {
                let sv = val(s).item()?;
                if self.wants(x) {
                    self.accumulate(grads, x, g.map(|v| v / sv));
                }
                if self.wants(s) {
                    let dot: f64 = g.data().iter().zip(val(x).data()).map(|(a, b)| a * b).sum();
                    let gs = -dot / (sv * sv);
                    let shape = val(s).shape().to_vec();
                    self.accumulate(grads, s, Tensor::new(shape, vec![gs])?);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_grad(f: impl Fn(&mut Tape, NodeId) -> NodeId, x0: f64) -> f64 {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(x0));
        let y = f(&mut t, x);
        let g = t.backward(y).unwrap();
        g.wrt(x).unwrap().item().unwrap()
    }

    #[test]
    fn square_at_three() {
        let g = scalar_grad(|t, x| t.mul(x, x).unwrap(), 3.0);
        assert_eq!(g, 6.0);
        let g = scalar_grad(|t, x| t.square(x).unwrap(), 3.0);
        assert_eq!(g, 6.0);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(scalar_grad(|t, x| t.sigmoid(x).unwrap(), 0.0), 0.25);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        assert_eq!(scalar_grad(|t, x| t.relu(x).unwrap(), 0.0), 0.0);
        assert_eq!(scalar_grad(|t, x| t.relu(x).unwrap(), 0.5), 1.0);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::ones(&[2, 2]));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(2.0));
        let unused = t.leaf(Tensor::ones(&[3]));
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(unused).unwrap(), &Tensor::zeros(&[3]));
    }

    #[test]
    fn fan_out_accumulates() {
        // y = x*x + 3x at x=2: dy/dx = 2x + 3 = 7
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(2.0));
        let sq = t.mul(x, x).unwrap();
        let lin = t.scale(x, 3.0).unwrap();
        let y = t.add(sq, lin).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x).unwrap().item().unwrap(), 7.0);
    }

    #[test]
    fn bias_gradient_sums_rows() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::matrix(3, 2, vec![0.0; 6]).unwrap());
        let b = t.leaf(Tensor::vector(vec![1.0, -1.0]).unwrap());
        let y = t.add_bias(x, b).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(b).unwrap().data(), &[3.0, 3.0]);
        assert!(g.get(x).is_none());
    }

    #[test]
    fn div_scalar_gradients() {
        // f = sum(x / s) with x = (1, 2), s = 4: df/dx = 1/4, df/ds = -3/16
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let s = t.leaf(Tensor::scalar(4.0));
        let q = t.div_scalar(x, s).unwrap();
        let f = t.sum(q).unwrap();
        let g = t.backward(f).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.25, 0.25]);
        assert_eq!(g.wrt(s).unwrap().item().unwrap(), -3.0 / 16.0);
    }

    #[test]
    fn matmul_gradients_match_hand_computation() {
        // f = sum(A·B); dA = 1·Bᵀ, dB = Aᵀ·1
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let ab = t.matmul(a, b).unwrap();
        let f = t.sum(ab).unwrap();
        let g = t.backward(f).unwrap();
        assert_eq!(g.wrt(a).unwrap().data(), &[7.0, 11.0]);
        assert_eq!(g.wrt(b).unwrap().data(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn mask_blocks_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, -1.0]).unwrap());
        let m = t.relu_mask(x).unwrap();
        let y = t.mul(m, x).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 0.0]);
    }
}
