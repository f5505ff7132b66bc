//! Named parameter tensors and their initialization.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::Graph;
use crate::{Scalar, Tensor};

/// Initialization rule for one convolution (weight and bias).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Weight and bias uniform in `±1/sqrt(fan_in)`.
    FanIn,
    /// First sine layer with the frequency folded into the weights:
    /// weight `±omega0/fan_in`, bias `±omega0/sqrt(fan_in)`.
    SineFirst { omega0: f64 },
    /// Later sine layers: weight `±sqrt(6/fan_in)`, bias `±omega0/sqrt(fan_in)`.
    SineHidden { omega0: f64 },
}

impl Init {
    fn bounds(self, fan_in: usize) -> (f64, f64) {
        let f = fan_in as f64;
        match self {
            Init::FanIn => (1.0 / f.sqrt(), 1.0 / f.sqrt()),
            Init::SineFirst { omega0 } => (omega0 / f, omega0 / f.sqrt()),
            Init::SineHidden { omega0 } => ((6.0 / f).sqrt(), omega0 / f.sqrt()),
        }
    }
}

/// A convolution layer `cin -> cout` with a square `kernel`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub init: Init,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, cin: usize, cout: usize, kernel: usize, init: Init) -> Self {
        Self { name: name.into(), cin, cout, kernel, init }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.cout, self.cin, self.kernel, self.kernel]
    }

    pub fn param_count(&self) -> usize {
        self.cout * self.cin * self.kernel * self.kernel + self.cout
    }

    /// `(name, shape)` pairs for the weight and the bias.
    pub fn manifest(&self) -> [(String, Vec<usize>); 2] {
        [(self.weight_name(), self.weight_shape()), (self.bias_name(), vec![self.cout])]
    }
}

/// Ordered collection of named tensors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    /// Draws every layer of `specs` from `rng`, in order.
    pub fn init(specs: &[LayerSpec], rng: &mut impl Rng) -> Self {
        let mut set = Self::new();
        for spec in specs {
            let fan_in = spec.cin * spec.kernel * spec.kernel;
            let (wb, bb) = spec.init.bounds(fan_in);
            let shape = spec.weight_shape();
            let w = Tensor::from_fn(&shape, |_| T::of(rng.gen_range(-wb..=wb)));
            let b = Tensor::from_fn(&[spec.cout], |_| T::of(rng.gen_range(-bb..=bb)));
            set.push(spec.weight_name(), w);
            set.push(spec.bias_name(), b);
        }
        set
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.names.push(name.into());
        self.tensors.push(t);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.position(name).map(|i| &mut self.tensors[i])
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet { names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }

    /// Registers every tensor with `graph`.
    pub fn bind<G: Graph<T>>(&self, graph: &mut G, trainable: bool) -> Bound<G::Node> {
        let nodes = self.tensors.iter().map(|t| graph.leaf(t.clone(), trainable)).collect();
        Bound::new(self.names.clone(), nodes)
    }
}

/// Parameter nodes registered with a graph, addressable by name.
#[derive(Clone, Debug)]
pub struct Bound<N> {
    index: HashMap<String, usize>,
    nodes: Vec<N>,
}

impl<N: Clone> Bound<N> {
    pub fn new(names: Vec<String>, nodes: Vec<N>) -> Self {
        let index = names.into_iter().enumerate().map(|(i, n)| (n, i)).collect();
        Self { index, nodes }
    }

    pub fn get(&self, name: &str) -> Result<&N> {
        self.index
            .get(name)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| Error::Argument(format!("unknown parameter `{name}`")))
    }

    /// Nodes in parameter-set order.
    pub fn nodes(&self) -> &[N] {
        &self.nodes
    }

    /// Weight and bias nodes of a layer.
    pub fn layer(&self, spec: &LayerSpec) -> Result<(N, N)> {
        Ok((self.get(&spec.weight_name())?.clone(), self.get(&spec.bias_name())?.clone()))
    }
}

/// Applies a layer spec as a convolution with "same" padding.
pub fn apply_layer<T: Scalar, G: Graph<T>>(g: &mut G, p: &Bound<G::Node>, spec: &LayerSpec, x: &G::Node) -> Result<G::Node> {
    let (w, b) = p.layer(spec)?;
    g.conv2d(x, &w, Some(&b), spec.kernel / 2)
}
