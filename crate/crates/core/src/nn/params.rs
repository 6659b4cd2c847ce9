use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::graph::{LayerSpec, NetworkGraph};
use super::NnError;
use crate::rng;

/// A named parameter tensor and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    fn zeros(name: &str, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Param { name: name.to_string(), shape, value: vec![0.0; n], grad: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Parameters of every node, in node order. `nodes[i]` belongs to node id
/// `i + 1` and is empty for parameter-free layers.
#[derive(Debug, Clone)]
pub struct ParamStore {
    pub(crate) nodes: Vec<Vec<Param>>,
    version: u64,
}

impl ParamStore {
    /// Zero-valued store laid out for `graph`.
    pub fn zeros(graph: &NetworkGraph) -> Result<Self, NnError> {
        let shapes = graph.shapes()?;
        let nodes = graph
            .nodes
            .iter()
            .map(|n| {
                n.layer
                    .param_shapes(&shapes[n.inputs[0]])
                    .into_iter()
                    .map(|(name, shape)| Param::zeros(name, shape))
                    .collect()
            })
            .collect();
        Ok(ParamStore { nodes, version: 0 })
    }

    /// Bumped on every mutable access; forward caches record it so a
    /// backward pass against changed parameters can be refused.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn total_len(&self) -> usize {
        self.iter().map(Param::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.nodes.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.version += 1;
        self.nodes.iter_mut().flatten()
    }

    pub fn get(&self, node_id: usize, name: &str) -> Option<&Param> {
        self.nodes.get(node_id.checked_sub(1)?)?.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, node_id: usize, name: &str) -> Option<&mut Param> {
        self.version += 1;
        self.nodes.get_mut(node_id.checked_sub(1)?)?.iter_mut().find(|p| p.name == name)
    }

    /// All values concatenated in node order, then parameter order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.total_len() {
            return Err(NnError::ParamLength { expected: self.total_len(), found: values.len() });
        }
        let mut offset = 0;
        for p in self.iter_mut() {
            let n = p.value.len();
            p.value.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Parameters of node `id` (empty for parameter-free layers).
    pub fn node_params(&self, id: usize) -> &[Param] {
        id.checked_sub(1).and_then(|i| self.nodes.get(i)).map_or(&[], Vec::as_slice)
    }

    pub fn zero_grads(&mut self) {
        for p in self.nodes.iter_mut().flatten() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// True when both stores have identical names and shapes.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.name == y.name && x.shape == y.shape)
            })
    }
}

/// Equal layouts and values; gradients and the version counter are scratch
/// state and do not take part.
impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other) && self.iter().zip(other.iter()).all(|(a, b)| a.value == b.value)
    }
}

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
pub fn init_network(graph: &NetworkGraph, seed: u64) -> Result<ParamStore, NnError> {
    let mut store = ParamStore::zeros(graph)?;
    let mut rng = rng::seeded(seed);
    for (node, params) in graph.nodes.iter().zip(store.nodes.iter_mut()) {
        for p in params.iter_mut() {
            if p.name == "bias" {
                if let LayerSpec::Lstm { units } = node.layer {
                    p.value[units..2 * units].iter_mut().for_each(|b| *b = 1.0);
                }
                continue;
            }
            let (fan_in, fan_out) = match p.shape.as_slice() {
                // temporal conv kernel (k, c, f)
                [k, c, f] => (k * c, k * f),
                [rows, cols] => (*rows, *cols),
                _ => unreachable!("weights are 2-D or 3-D"),
            };
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for w in &mut p.value {
                *w = rng.random_range(-limit..limit);
            }
        }
    }
    Ok(store)
}
