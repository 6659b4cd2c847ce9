use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Relu,
    Softmax,
    Linear,
}

/// One layer. Temporal convolution uses valid padding followed by ReLU; the
/// LSTM returns only its final hidden state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum LayerSpec {
    Dense { units: usize, activation: Activation },
    Dropout { rate: f64 },
    TemporalConv { filters: usize, kernel_size: usize },
    Lstm { units: usize },
    Flatten,
    Reshape { target_shape: Vec<usize> },
    Concat,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::TemporalConv { .. } => "TemporalConv",
            LayerSpec::Lstm { .. } => "Lstm",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Reshape { .. } => "Reshape",
            LayerSpec::Concat => "Concat",
        }
    }

    /// Parameter names and shapes for a layer whose input has the given
    /// per-sample shape.
    pub(crate) fn param_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { units, .. } => vec![("kernel", vec![input[0], units]), ("bias", vec![units])],
            LayerSpec::TemporalConv { filters, kernel_size } => {
                vec![("kernel", vec![kernel_size, input[1], filters]), ("bias", vec![filters])]
            }
            LayerSpec::Lstm { units } => vec![
                ("kernel", vec![input[1], 4 * units]),
                ("recurrent_kernel", vec![units, 4 * units]),
                ("bias", vec![4 * units]),
            ],
            _ => Vec::new(),
        }
    }
}

/// Node id 0 is reserved for the graph input; layer nodes are numbered from 1
/// in list order.
pub const INPUT_ID: usize = 0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node {
    pub id: usize,
    pub layer: LayerSpec,
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkGraph {
    pub input_dim: usize,
    pub nodes: Vec<Node>,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCounts {
    /// One entry per node, in node order.
    pub per_node: Vec<usize>,
    pub total: usize,
}

fn invalid(msg: String) -> NnError {
    NnError::InvalidGraph(msg)
}

impl NetworkGraph {
    pub fn new(input_dim: usize) -> Self {
        NetworkGraph { input_dim, nodes: Vec::new(), output: INPUT_ID }
    }

    /// Appends a node fed by `inputs` and makes it the output. Returns its id.
    pub fn push(&mut self, layer: LayerSpec, inputs: &[usize]) -> usize {
        let id = self.nodes.len() + 1;
        self.nodes.push(Node { id, layer, inputs: inputs.to_vec() });
        self.output = id;
        id
    }

    /// Appends a node fed by the current output.
    pub fn then(mut self, layer: LayerSpec) -> Self {
        let prev = self.output;
        self.push(layer, &[prev]);
        self
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    /// Per-sample output shape of every node, index 0 being the graph input.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        if self.input_dim == 0 {
            return Err(invalid("input_dim must be at least 1".into()));
        }
        let mut shapes: Vec<Vec<usize>> = vec![vec![self.input_dim]];
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id != pos + 1 {
                return Err(invalid(format!("node at position {pos} has id {}, expected {}", node.id, pos + 1)));
            }
            if let Some(&bad) = node.inputs.iter().find(|&&i| i >= node.id) {
                return Err(invalid(format!("node {} reads from {bad}, which does not precede it", node.id)));
            }
            let arity_ok = match node.layer {
                LayerSpec::Concat => node.inputs.len() >= 2,
                _ => node.inputs.len() == 1,
            };
            if !arity_ok {
                return Err(invalid(format!("node {} has {} inputs", node.id, node.inputs.len())));
            }
            let ins: Vec<&Vec<usize>> = node.inputs.iter().map(|&i| &shapes[i]).collect();
            let mismatch = || invalid(format!("node {} ({}) cannot take input shape {:?}", node.id, node.layer.kind(), ins));
            let out = match &node.layer {
                LayerSpec::Dense { units, .. } => {
                    if *units == 0 || ins[0].len() != 1 {
                        return Err(mismatch());
                    }
                    vec![*units]
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(invalid(format!("node {} dropout rate {rate} outside [0, 1)", node.id)));
                    }
                    ins[0].clone()
                }
                LayerSpec::TemporalConv { filters, kernel_size } => {
                    let s = ins[0];
                    if *filters == 0 || *kernel_size == 0 || s.len() != 2 || s[0] < *kernel_size {
                        return Err(mismatch());
                    }
                    vec![s[0] - kernel_size + 1, *filters]
                }
                LayerSpec::Lstm { units } => {
                    if *units == 0 || ins[0].len() != 2 {
                        return Err(mismatch());
                    }
                    vec![*units]
                }
                LayerSpec::Flatten => vec![ins[0].iter().product()],
                LayerSpec::Reshape { target_shape } => {
                    if target_shape.is_empty()
                        || target_shape.len() > 2
                        || target_shape.iter().product::<usize>() != ins[0].iter().product::<usize>()
                    {
                        return Err(mismatch());
                    }
                    target_shape.clone()
                }
                LayerSpec::Concat => {
                    if ins.iter().any(|s| s.len() != 1) {
                        return Err(mismatch());
                    }
                    vec![ins.iter().map(|s| s[0]).sum()]
                }
            };
            shapes.push(out);
        }
        if self.output == INPUT_ID || self.output > self.nodes.len() {
            return Err(invalid(format!("output id {} does not name a layer", self.output)));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.shapes().map(|_| ())
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        let mut shapes = self.shapes()?;
        Ok(shapes.swap_remove(self.output))
    }
}

/// Trainable parameter count per node: Dense `(in+1)·units`, temporal conv
/// `(kernel·channels+1)·filters`, LSTM `4·((in+units)·units + units)`.
pub fn param_count(graph: &NetworkGraph) -> Result<ParamCounts, NnError> {
    let shapes = graph.shapes()?;
    let per_node: Vec<usize> = graph
        .nodes
        .iter()
        .map(|n| {
            n.layer
                .param_shapes(&shapes[n.inputs[0]])
                .iter()
                .map(|(_, s)| s.iter().product::<usize>())
                .sum()
        })
        .collect();
    let total = per_node.iter().sum();
    Ok(ParamCounts { per_node, total })
}
