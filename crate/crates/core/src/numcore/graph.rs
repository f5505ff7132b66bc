use std::sync::Arc;

use super::kernels;
use crate::error::Result;
use crate::{Scalar, Tensor};

/// Operations the model is written against.
///
/// Two executors implement it: [`Eager`] evaluates immediately and keeps
/// nothing, [`Tape`](super::Tape) additionally records every node so the
/// pass can be differentiated.
pub trait Graph<T: Scalar> {
    type Node: Clone;

    /// Registers a tensor. On a tape, `requires_grad` marks it a trainable leaf.
    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Self::Node;

    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a Tensor<T>;

    fn conv2d(&mut self, x: &Self::Node, w: &Self::Node, b: Option<&Self::Node>, pad: usize) -> Result<Self::Node>;
    fn add(&mut self, a: &Self::Node, b: &Self::Node) -> Result<Self::Node>;
    fn hadamard(&mut self, a: &Self::Node, b: &Self::Node) -> Result<Self::Node>;
    fn relu(&mut self, x: &Self::Node) -> Self::Node;
    fn sin(&mut self, x: &Self::Node) -> Self::Node;
    fn scale(&mut self, x: &Self::Node, factor: T) -> Self::Node;
    fn concat_channels(&mut self, parts: &[Self::Node]) -> Result<Self::Node>;
    fn slice_channels(&mut self, x: &Self::Node, start: usize, len: usize) -> Result<Self::Node>;
    fn unfold3(&mut self, x: &Self::Node) -> Result<Self::Node>;
    fn nearest_upsample(&mut self, x: &Self::Node, out_h: usize, out_w: usize) -> Result<Self::Node>;
    fn l1_loss(&mut self, pred: &Self::Node, target: &Self::Node) -> Result<Self::Node>;

    fn constant(&mut self, value: Tensor<T>) -> Self::Node {
        self.leaf(value, false)
    }

    /// Dense layer over the channel axis, realized as a 1x1 convolution.
    fn dense(&mut self, x: &Self::Node, w: &Self::Node, b: Option<&Self::Node>) -> Result<Self::Node> {
        self.conv2d(x, w, b, 0)
    }
}

/// Immediate-mode executor for inference. Nodes are shared tensors.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eager;

type Shared<T> = Arc<Tensor<T>>;

impl<T: Scalar> Graph<T> for Eager {
    type Node = Shared<T>;

    fn leaf(&mut self, value: Tensor<T>, _requires_grad: bool) -> Shared<T> {
        Arc::new(value)
    }

    fn value<'a>(&'a self, node: &'a Shared<T>) -> &'a Tensor<T> {
        node
    }

    fn conv2d(&mut self, x: &Shared<T>, w: &Shared<T>, b: Option<&Shared<T>>, pad: usize) -> Result<Shared<T>> {
        kernels::conv2d(x, w, b.map(|b| &**b), pad).map(Arc::new)
    }

    fn add(&mut self, a: &Shared<T>, b: &Shared<T>) -> Result<Shared<T>> {
        kernels::add(a, b).map(Arc::new)
    }

    fn hadamard(&mut self, a: &Shared<T>, b: &Shared<T>) -> Result<Shared<T>> {
        kernels::hadamard(a, b).map(Arc::new)
    }

    fn relu(&mut self, x: &Shared<T>) -> Shared<T> {
        Arc::new(kernels::relu(x))
    }

    fn sin(&mut self, x: &Shared<T>) -> Shared<T> {
        Arc::new(kernels::sin(x))
    }

    fn scale(&mut self, x: &Shared<T>, factor: T) -> Shared<T> {
        Arc::new(kernels::scale(x, factor))
    }

    fn concat_channels(&mut self, parts: &[Shared<T>]) -> Result<Shared<T>> {
        let refs: Vec<&Tensor<T>> = parts.iter().map(|p| &**p).collect();
        kernels::concat_channels(&refs).map(Arc::new)
    }

    fn slice_channels(&mut self, x: &Shared<T>, start: usize, len: usize) -> Result<Shared<T>> {
        kernels::slice_channels(x, start, len).map(Arc::new)
    }

    fn unfold3(&mut self, x: &Shared<T>) -> Result<Shared<T>> {
        kernels::unfold3(x).map(Arc::new)
    }

    fn nearest_upsample(&mut self, x: &Shared<T>, out_h: usize, out_w: usize) -> Result<Shared<T>> {
        kernels::nearest_upsample(x, out_h, out_w).map(Arc::new)
    }

    fn l1_loss(&mut self, pred: &Shared<T>, target: &Shared<T>) -> Result<Shared<T>> {
        kernels::l1_loss(pred, target).map(Arc::new)
    }
}
