use super::graph::Graph;
use super::kernels;
use crate::error::{arg_err, Result};
use crate::{Scalar, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, pad: usize },
    Add(Var, Var),
    Hadamard(Var, Var),
    Relu(Var),
    Sin(Var),
    Scale(Var, T),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Unfold3(Var),
    Nearest(Var),
    L1 { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    /// Only populated for trainable leaves.
    grad: Option<Tensor<T>>,
}

/// Wengert list for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the reverse of insertion order
/// is a valid reverse topological order and `backward` is a single sweep.
/// Leaf gradients accumulate across `backward` calls until [`Tape::zero_grad`].
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Conv2d { x, w, b, .. } => self.rg(*x) || self.rg(*w) || b.is_some_and(|b| self.rg(b)),
            Op::Add(a, b) | Op::Hadamard(a, b) => self.rg(*a) || self.rg(*b),
            Op::Relu(x) | Op::Sin(x) | Op::Scale(x, _) | Op::Unfold3(x) | Op::Nearest(x) => self.rg(*x),
            Op::Slice { x, .. } => self.rg(*x),
            Op::Concat(parts) => parts.iter().any(|&p| self.rg(p)),
            Op::L1 { pred, target } => self.rg(*pred) || self.rg(*target),
        };
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient of a trainable leaf.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            if let Some(g) = &mut n.grad {
                g.data_mut().fill(T::zero());
            }
        }
    }

    /// Back-propagates from the single-element tensor `loss`, adding into the
    /// gradient of every trainable leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return arg_err(format!(
                "backward needs a scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                match &mut self.nodes[i].grad {
                    Some(acc) => acc.accumulate(&g),
                    slot => *slot = Some(g),
                }
                continue;
            }
            for (v, d) in self.input_grads(&self.nodes[i].op, &g)? {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.accumulate(&d),
                    slot => *slot = Some(d),
                }
            }
        }
        // every trainable leaf ends up with a gradient, even if unreachable
        for n in &mut self.nodes {
            if n.requires_grad && matches!(n.op, Op::Leaf) && n.grad.is_none() {
                n.grad = Some(Tensor::zeros(n.value.shape()));
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of one recorded op.
    fn input_grads(&self, op: &Op<T>, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = match *op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, w, b, pad } => {
                let (dx, dw, db) = kernels::conv2d_backward(val(x), val(w), pad, g)?;
                let mut v = vec![(x, dx), (w, dw)];
                if let Some(b) = b {
                    v.push((b, db));
                }
                v
            }
            Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
            Op::Hadamard(a, b) => vec![(a, kernels::hadamard(g, val(b))?), (b, kernels::hadamard(g, val(a))?)],
            Op::Relu(x) => vec![(x, kernels::relu_backward(val(x), g))],
            Op::Sin(x) => vec![(x, kernels::sin_backward(val(x), g))],
            Op::Scale(x, f) => vec![(x, kernels::scale(g, f))],
            Op::Concat(ref parts) => {
                let mut start = 0;
                let mut v = Vec::with_capacity(parts.len());
                for &p in parts {
                    let c = val(p).shape()[1];
                    v.push((p, kernels::slice_channels(g, start, c)?));
                    start += c;
                }
                v
            }
            Op::Slice { x, start } => {
                let [b, c, h, w] = val(x).dims4()?;
                let len = g.shape()[1];
                let plane = h * w;
                let mut d = Tensor::zeros(&[b, c, h, w]);
                for bi in 0..b {
                    d.data_mut()[(bi * c + start) * plane..][..len * plane]
                        .copy_from_slice(&g.data()[bi * len * plane..][..len * plane]);
                }
                vec![(x, d)]
            }
            Op::Unfold3(x) => vec![(x, kernels::unfold3_backward(val(x).shape(), g)?)],
            Op::Nearest(x) => vec![(x, kernels::nearest_upsample_backward(val(x).shape(), g)?)],
            Op::L1 { pred, target } => {
                let dp = kernels::l1_loss_backward(val(pred), val(target), g.item());
                let dt = dp.map(|v| -v);
                vec![(pred, dp), (target, dt)]
            }
        };
        Ok(out)
    }

    /// Signs of every relu input and every L1 residual, in recording order.
    ///
    /// Two evaluations with equal signatures lie on the same smooth piece of
    /// the loss, which is what finite differences need.
    pub fn kink_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for n in &self.nodes {
            match n.op {
                Op::Relu(x) => sig.extend(self.nodes[x.0].value.data().iter().map(|&v| v > T::zero())),
                Op::L1 { pred, target } => sig.extend(
                    self.nodes[pred.0]
                        .value
                        .data()
                        .iter()
                        .zip(self.nodes[target.0].value.data())
                        .map(|(&p, &t)| p > t),
                ),
                _ => {}
            }
        }
        sig
    }

    /// Inputs of the relu nodes, in recording order.
    pub fn relu_inputs(&self) -> Vec<Var> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .collect()
    }
}

impl<T: Scalar> Graph<T> for Tape<T> {
    type Node = Var;

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].requires_grad = requires_grad;
        v
    }

    fn value<'a>(&'a self, node: &'a Var) -> &'a Tensor<T> {
        &self.nodes[node.0].value
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, pad: usize) -> Result<Var> {
        let out = kernels::conv2d(self.value(x), self.value(w), b.map(|b| &self.nodes[b.0].value), pad)?;
        Ok(self.push(out, Op::Conv2d { x: *x, w: *w, b: b.copied(), pad }))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = kernels::add(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Add(*a, *b)))
    }

    fn hadamard(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = kernels::hadamard(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Hadamard(*a, *b)))
    }

    fn relu(&mut self, x: &Var) -> Var {
        let out = kernels::relu(self.value(x));
        self.push(out, Op::Relu(*x))
    }

    fn sin(&mut self, x: &Var) -> Var {
        let out = kernels::sin(self.value(x));
        self.push(out, Op::Sin(*x))
    }

    fn scale(&mut self, x: &Var, factor: T) -> Var {
        let out = kernels::scale(self.value(x), factor);
        self.push(out, Op::Scale(*x, factor))
    }

    fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor<T>> = parts.iter().map(|p| &self.nodes[p.0].value).collect();
        let out = kernels::concat_channels(&refs)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    fn slice_channels(&mut self, x: &Var, start: usize, len: usize) -> Result<Var> {
        let out = kernels::slice_channels(self.value(x), start, len)?;
        Ok(self.push(out, Op::Slice { x: *x, start }))
    }

    fn unfold3(&mut self, x: &Var) -> Result<Var> {
        let out = kernels::unfold3(self.value(x))?;
        Ok(self.push(out, Op::Unfold3(*x)))
    }

    fn nearest_upsample(&mut self, x: &Var, out_h: usize, out_w: usize) -> Result<Var> {
        let out = kernels::nearest_upsample(self.value(x), out_h, out_w)?;
        Ok(self.push(out, Op::Nearest(*x)))
    }

    fn l1_loss(&mut self, pred: &Var, target: &Var) -> Result<Var> {
        let out = kernels::l1_loss(self.value(pred), self.value(target))?;
        Ok(self.push(out, Op::L1 { pred: *pred, target: *target }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reused_node_gradients_sum() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0), true);
        let sq = tape.hadamard(&x, &x).unwrap();
        let y = tape.add(&sq, &x).unwrap();
        tape.backward(y).unwrap();
        // d/dx (x^2 + x) = 2x + 1
        assert_eq!(tape.grad(x).unwrap().item(), 7.0);
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(2.0), true);
        let y = tape.sin(&x);
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        assert!((tape.grad(x).unwrap().item() - 2.0 * 2f64.cos()).abs() < 1e-15);
        tape.zero_grad();
        assert_eq!(tape.grad(x).unwrap().item(), 0.0);
    }

    #[test]
    fn unreachable_leaf_gets_zero_grad_and_constants_none() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::scalar(1.0), true);
        let unused = tape.leaf(Tensor::full(&[2], 1.0), true);
        let c = tape.constant(Tensor::scalar(5.0));
        let y = tape.hadamard(&a, &c).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(a).unwrap().item(), 5.0);
        assert_eq!(tape.grad(unused).unwrap().data(), &[0.0, 0.0]);
        assert!(tape.grad(c).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::<f32>::new();
        let a = tape.leaf(Tensor::full(&[3], 1.0), true);
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn operations_do_not_mutate_inputs() {
        let mut tape = Tape::<f64>::new();
        let xv = Tensor::from_fn(&[1, 2, 3, 3], |i| i as f64 - 4.0);
        let x = tape.leaf(xv.clone(), true);
        let r = tape.relu(&x);
        let s = tape.sin(&r);
        let u = tape.unfold3(&s).unwrap();
        let t = tape.constant(Tensor::zeros(&[1, 18, 3, 3]));
        let l = tape.l1_loss(&u, &t).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.value(&x), &xv);
    }
}
