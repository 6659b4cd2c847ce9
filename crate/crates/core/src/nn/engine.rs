//! Batched forward and reverse passes over a [`NetworkGraph`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::graph::{Activation, LayerSpec, NetworkGraph};
use super::params::ParamStore;
use super::tensor::Tensor;
use super::NnError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// What `output_grad` in [`backward`] is the gradient of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradAt {
    /// The output node's activations.
    Output,
    /// The output Dense node's pre-activation (logits). Used to feed the fused
    /// softmax/cross-entropy gradient `(p − onehot)/n` straight in.
    PreActivation,
}

/// Activations recorded by [`forward`] for one [`backward`] call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    shapes: Vec<Vec<usize>>,
    /// Indexed by node id; 0 is the batch itself.
    outputs: Vec<Tensor>,
    aux: Vec<Aux>,
}

#[derive(Debug, Clone)]
enum Aux {
    None,
    Mask(Vec<f64>),
    Lstm(LstmTrace),
}

#[derive(Debug, Clone)]
struct LstmTrace {
    /// Activated gates (i, f, g, o) per step: `steps × batch × 4·units`.
    gates: Vec<f64>,
    /// Cell states including the zero initial state: `(steps+1) × batch × units`.
    cells: Vec<f64>,
    hidden: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn check_params(graph: &NetworkGraph, shapes: &[Vec<usize>], params: &ParamStore) -> Result<(), NnError> {
    if params.nodes.len() != graph.nodes.len() {
        return Err(NnError::ParamMismatch(graph.nodes.len().min(params.nodes.len()) + 1));
    }
    for (node, ps) in graph.nodes.iter().zip(&params.nodes) {
        let expected = node.layer.param_shapes(&shapes[node.inputs[0]]);
        let ok = expected.len() == ps.len()
            && expected.iter().zip(ps).all(|((name, shape), p)| {
                p.name == *name && p.shape == *shape && p.value.len() == p.grad.len()
            });
        if !ok {
            return Err(NnError::ParamMismatch(node.id));
        }
    }
    Ok(())
}

/// Runs the graph on a `(batch, input_dim)` tensor.
///
/// In `Train` mode dropout draws its masks from `seed` (mixed with the node
/// id); in `Infer` mode dropout is the identity and `seed` is unused.
pub fn forward(
    graph: &NetworkGraph,
    params: &ParamStore,
    batch: &Tensor,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor, ForwardCache), NnError> {
    let shapes = graph.shapes()?;
    check_params(graph, &shapes, params)?;
    if batch.shape().len() != 2 || batch.shape()[1] != graph.input_dim {
        return Err(NnError::ShapeMismatch(0));
    }
    if !batch.is_finite() {
        return Err(NnError::NonFinite(0));
    }
    let b = batch.batch();
    let mut outputs: Vec<Tensor> = Vec::with_capacity(graph.nodes.len() + 1);
    outputs.push(batch.clone());
    let mut aux = Vec::with_capacity(graph.nodes.len());

    for (node, ps) in graph.nodes.iter().zip(&params.nodes) {
        let x = &outputs[node.inputs[0]];
        let in_shape = &shapes[node.inputs[0]];
        let mut out_shape = vec![b];
        out_shape.extend_from_slice(&shapes[node.id]);
        let (data, a) = match node.layer {
            LayerSpec::Dense { units, activation } => {
                let out = dense_forward(x.data(), b, in_shape[0], &ps[0].value, &ps[1].value, units, activation);
                (out, Aux::None)
            }
            LayerSpec::Dropout { rate } => {
                if mode == Mode::Train && rate > 0.0 {
                    let mut rng = rng::derive(seed, node.id as u64);
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> =
                        (0..x.data().len()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
                    let out = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                    (out, Aux::Mask(mask))
                } else {
                    (x.data().to_vec(), Aux::None)
                }
            }
            LayerSpec::TemporalConv { filters, kernel_size } => {
                let out = conv_forward(x.data(), b, in_shape[0], in_shape[1], &ps[0].value, &ps[1].value, kernel_size, filters);
                (out, Aux::None)
            }
            LayerSpec::Lstm { units } => {
                let (out, trace) =
                    lstm_forward(x.data(), b, in_shape[0], in_shape[1], &ps[0].value, &ps[1].value, &ps[2].value, units);
                (out, Aux::Lstm(trace))
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => (x.data().to_vec(), Aux::None),
            LayerSpec::Concat => {
                let widths: Vec<usize> = node.inputs.iter().map(|&i| shapes[i][0]).collect();
                let total: usize = widths.iter().sum();
                let mut out = Vec::with_capacity(b * total);
                for r in 0..b {
                    for (&i, &w) in node.inputs.iter().zip(&widths) {
                        out.extend_from_slice(&outputs[i].data()[r * w..(r + 1) * w]);
                    }
                }
                (out, Aux::None)
            }
        };
        outputs.push(Tensor::new(out_shape, data).expect("shape inference agrees with layer output"));
        aux.push(a);
    }

    let out = outputs[graph.output].clone();
    if !out.is_finite() {
        return Err(NnError::NonFinite(graph.output));
    }
    Ok((out, ForwardCache { version: params.version(), shapes, outputs, aux }))
}

/// Inference-mode forward without keeping the cache.
pub fn predict(graph: &NetworkGraph, params: &ParamStore, batch: &Tensor) -> Result<Tensor, NnError> {
    forward(graph, params, batch, Mode::Infer, 0).map(|(out, _)| out)
}

/// Reverse pass. Overwrites every gradient in `params` and returns the
/// gradient with respect to the input batch.
pub fn backward(
    graph: &NetworkGraph,
    params: &mut ParamStore,
    cache: ForwardCache,
    output_grad: &Tensor,
    at: GradAt,
) -> Result<Tensor, NnError> {
    if cache.version != params.version() || cache.outputs.len() != graph.nodes.len() + 1 {
        return Err(NnError::StaleCache);
    }
    if output_grad.shape() != cache.outputs[graph.output].shape() {
        return Err(NnError::ShapeMismatch(graph.output));
    }
    if at == GradAt::PreActivation && !matches!(graph.node(graph.output).map(|n| &n.layer), Some(LayerSpec::Dense { .. })) {
        return Err(NnError::ShapeMismatch(graph.output));
    }
    for p in params.nodes.iter_mut().flatten() {
        p.grad.iter_mut().for_each(|g| *g = 0.0);
    }
    let b = cache.outputs[0].batch();
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; graph.nodes.len() + 1];
    grads[graph.output] = Some(output_grad.data().to_vec());

    for (pos, node) in graph.nodes.iter().enumerate().rev() {
        let Some(dy) = grads[node.id].take() else { continue };
        let in_id = node.inputs[0];
        let x = cache.outputs[in_id].data();
        let y = cache.outputs[node.id].data();
        let in_shape = &cache.shapes[in_id];
        let ps = &mut params.nodes[pos];
        match node.layer {
            LayerSpec::Dense { units, activation } => {
                let raw = at == GradAt::PreActivation && node.id == graph.output;
                let dz = dense_pre_grad(dy, y, units, activation, raw);
                let n = in_shape[0];
                let (w, rest) = ps.split_at_mut(1);
                let dx = dense_backward(x, b, n, &w[0].value, &dz, units, &mut w[0].grad, &mut rest[0].grad);
                route(in_id, dx, &mut grads);
            }
            LayerSpec::Dropout { .. } => {
                let dx = match &cache.aux[pos] {
                    Aux::Mask(mask) => dy.iter().zip(mask).map(|(g, m)| g * m).collect(),
                    _ => dy,
                };
                route(in_id, dx, &mut grads);
            }
            LayerSpec::TemporalConv { filters, kernel_size } => {
                let dz: Vec<f64> = dy.iter().zip(y).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                let (w, rest) = ps.split_at_mut(1);
                let dx = conv_backward(
                    x,
                    b,
                    in_shape[0],
                    in_shape[1],
                    &w[0].value,
                    &dz,
                    kernel_size,
                    filters,
                    &mut w[0].grad,
                    &mut rest[0].grad,
                );
                route(in_id, dx, &mut grads);
            }
            LayerSpec::Lstm { units } => {
                let Aux::Lstm(trace) = &cache.aux[pos] else { return Err(NnError::StaleCache) };
                let (w, rest) = ps.split_at_mut(1);
                let (r, bias) = rest.split_at_mut(1);
                let dx = lstm_backward(
                    x,
                    b,
                    in_shape[0],
                    in_shape[1],
                    &w[0].value,
                    &r[0].value,
                    trace,
                    &dy,
                    units,
                    &mut w[0].grad,
                    &mut r[0].grad,
                    &mut bias[0].grad,
                );
                route(in_id, dx, &mut grads);
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => route(in_id, dy, &mut grads),
            LayerSpec::Concat => {
                let widths: Vec<usize> = node.inputs.iter().map(|&i| cache.shapes[i][0]).collect();
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&i, &w) in node.inputs.iter().zip(&widths) {
                    let mut g = Vec::with_capacity(b * w);
                    for r in 0..b {
                        g.extend_from_slice(&dy[r * total + offset..r * total + offset + w]);
                    }
                    offset += w;
                    route(i, g, &mut grads);
                }
            }
        }
    }

    let dx = grads[0].take().unwrap_or_else(|| vec![0.0; cache.outputs[0].data().len()]);
    Ok(Tensor::matrix(b, graph.input_dim, dx))
}

/// Adds `g` into the pending gradient of node `id`; nodes with several
/// consumers accumulate.
fn route(id: usize, g: Vec<f64>, grads: &mut [Option<Vec<f64>>]) {
    match &mut grads[id] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v),
        slot => *slot = Some(g),
    }
}

fn dense_forward(x: &[f64], b: usize, n: usize, w: &[f64], bias: &[f64], u: usize, act: Activation) -> Vec<f64> {
    let mut out = vec![0.0; b * u];
    for (xr, o) in x.chunks_exact(n).zip(out.chunks_exact_mut(u)) {
        o.copy_from_slice(bias);
        for (&xi, wr) in xr.iter().zip(w.chunks_exact(u)) {
            if xi != 0.0 {
                o.iter_mut().zip(wr).for_each(|(oj, wj)| *oj += xi * wj);
            }
        }
        match act {
            Activation::Linear => {}
            Activation::Relu => o.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Softmax => softmax_in_place(o),
        }
    }
    out
}

/// Max-subtracted softmax over one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn dense_pre_grad(dy: Vec<f64>, y: &[f64], u: usize, act: Activation, raw: bool) -> Vec<f64> {
    if raw {
        return dy;
    }
    match act {
        Activation::Linear => dy,
        Activation::Relu => dy.iter().zip(y).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect(),
        Activation::Softmax => {
            let mut dz = dy;
            for (g, p) in dz.chunks_exact_mut(u).zip(y.chunks_exact(u)) {
                let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                g.iter_mut().zip(p).for_each(|(gi, pi)| *gi = pi * (*gi - dot));
            }
            dz
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    x: &[f64],
    b: usize,
    n: usize,
    w: &[f64],
    dz: &[f64],
    u: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; b * n];
    for ((xr, dzr), dxr) in x.chunks_exact(n).zip(dz.chunks_exact(u)).zip(dx.chunks_exact_mut(n)) {
        db.iter_mut().zip(dzr).for_each(|(d, g)| *d += g);
        for ((&xi, wr), (dwr, dxi)) in xr.iter().zip(w.chunks_exact(u)).zip(dw.chunks_exact_mut(u).zip(dxr.iter_mut())) {
            let mut acc = 0.0;
            for ((dwj, wj), gj) in dwr.iter_mut().zip(wr).zip(dzr) {
                *dwj += xi * gj;
                acc += wj * gj;
            }
            *dxi = acc;
        }
    }
    dx
}

/// Valid-padded 1-D convolution with ReLU. `x` is `(b, len, ch)`, the
/// kernel `(k, ch, filters)`.
#[allow(clippy::too_many_arguments)]
fn conv_forward(x: &[f64], b: usize, len: usize, ch: usize, w: &[f64], bias: &[f64], k: usize, f: usize) -> Vec<f64> {
    let out_len = len - k + 1;
    let mut out = vec![0.0; b * out_len * f];
    for r in 0..b {
        for t in 0..out_len {
            let o = &mut out[(r * out_len + t) * f..(r * out_len + t + 1) * f];
            o.copy_from_slice(bias);
            for j in 0..k {
                for c in 0..ch {
                    let xv = x[(r * len + t + j) * ch + c];
                    let wr = &w[(j * ch + c) * f..(j * ch + c + 1) * f];
                    o.iter_mut().zip(wr).for_each(|(ov, wv)| *ov += xv * wv);
                }
            }
            o.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    b: usize,
    len: usize,
    ch: usize,
    w: &[f64],
    dz: &[f64],
    k: usize,
    f: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let out_len = len - k + 1;
    let mut dx = vec![0.0; b * len * ch];
    for r in 0..b {
        for t in 0..out_len {
            let g = &dz[(r * out_len + t) * f..(r * out_len + t + 1) * f];
            db.iter_mut().zip(g).for_each(|(d, gv)| *d += gv);
            for j in 0..k {
                for c in 0..ch {
                    let xi = (r * len + t + j) * ch + c;
                    let row = (j * ch + c) * f..(j * ch + c + 1) * f;
                    let mut acc = 0.0;
                    for ((dwv, wv), gv) in dw[row.clone()].iter_mut().zip(&w[row]).zip(g) {
                        *dwv += x[xi] * gv;
                        acc += wv * gv;
                    }
                    dx[xi] += acc;
                }
            }
        }
    }
    dx
}

/// LSTM over `(b, steps, ch)` with gate order (input, forget, candidate,
/// output) and zero initial state. Returns the last hidden state `(b, units)`.
#[allow(clippy::too_many_arguments)]
fn lstm_forward(
    x: &[f64],
    b: usize,
    steps: usize,
    ch: usize,
    w: &[f64],
    rw: &[f64],
    bias: &[f64],
    u: usize,
) -> (Vec<f64>, LstmTrace) {
    let g4 = 4 * u;
    let mut gates = vec![0.0; steps * b * g4];
    let mut cells = vec![0.0; (steps + 1) * b * u];
    let mut hidden = vec![0.0; (steps + 1) * b * u];
    let mut z = vec![0.0; g4];
    for t in 0..steps {
        for r in 0..b {
            z.copy_from_slice(bias);
            for c in 0..ch {
                let xv = x[(r * steps + t) * ch + c];
                z.iter_mut().zip(&w[c * g4..(c + 1) * g4]).for_each(|(zv, wv)| *zv += xv * wv);
            }
            let h_prev = &hidden[(t * b + r) * u..(t * b + r + 1) * u];
            for (q, &hv) in h_prev.iter().enumerate() {
                if hv != 0.0 {
                    z.iter_mut().zip(&rw[q * g4..(q + 1) * g4]).for_each(|(zv, wv)| *zv += hv * wv);
                }
            }
            let gate = &mut gates[(t * b + r) * g4..(t * b + r + 1) * g4];
            for q in 0..u {
                gate[q] = sigmoid(z[q]);
                gate[u + q] = sigmoid(z[u + q]);
                gate[2 * u + q] = libm::tanh(z[2 * u + q]);
                gate[3 * u + q] = sigmoid(z[3 * u + q]);
            }
            let prev = (t * b + r) * u;
            let next = ((t + 1) * b + r) * u;
            for q in 0..u {
                let c_new = gate[u + q] * cells[prev + q] + gate[q] * gate[2 * u + q];
                cells[next + q] = c_new;
                hidden[next + q] = gate[3 * u + q] * libm::tanh(c_new);
            }
        }
    }
    let out = hidden[steps * b * u..].to_vec();
    (out, LstmTrace { gates, cells, hidden })
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward(
    x: &[f64],
    b: usize,
    steps: usize,
    ch: usize,
    w: &[f64],
    rw: &[f64],
    trace: &LstmTrace,
    dy: &[f64],
    u: usize,
    dw: &mut [f64],
    drw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let g4 = 4 * u;
    let mut dx = vec![0.0; b * steps * ch];
    let mut dh = dy.to_vec();
    let mut dc = vec![0.0; b * u];
    let mut dz = vec![0.0; g4];
    for t in (0..steps).rev() {
        let mut dh_prev = vec![0.0; b * u];
        for r in 0..b {
            let gate = &trace.gates[(t * b + r) * g4..(t * b + r + 1) * g4];
            let prev = (t * b + r) * u;
            let next = ((t + 1) * b + r) * u;
            for q in 0..u {
                let (i, f, g, o) = (gate[q], gate[u + q], gate[2 * u + q], gate[3 * u + q]);
                let tc = libm::tanh(trace.cells[next + q]);
                let dhq = dh[r * u + q];
                let dcq = dc[r * u + q] + dhq * o * (1.0 - tc * tc);
                dz[q] = dcq * g * i * (1.0 - i);
                dz[u + q] = dcq * trace.cells[prev + q] * f * (1.0 - f);
                dz[2 * u + q] = dcq * i * (1.0 - g * g);
                dz[3 * u + q] = dhq * tc * o * (1.0 - o);
                dc[r * u + q] = dcq * f;
            }
            db.iter_mut().zip(&dz).for_each(|(d, g)| *d += g);
            for c in 0..ch {
                let xi = (r * steps + t) * ch + c;
                let row = c * g4..(c + 1) * g4;
                let mut acc = 0.0;
                for ((dwv, wv), gv) in dw[row.clone()].iter_mut().zip(&w[row]).zip(&dz) {
                    *dwv += x[xi] * gv;
                    acc += wv * gv;
                }
                dx[xi] = acc;
            }
            let h_prev = &trace.hidden[prev..prev + u];
            for q in 0..u {
                let row = q * g4..(q + 1) * g4;
                let hv = h_prev[q];
                let mut acc = 0.0;
                for ((dwv, wv), gv) in drw[row.clone()].iter_mut().zip(&rw[row]).zip(&dz) {
                    *dwv += hv * gv;
                    acc += wv * gv;
                }
                dh_prev[r * u + q] = acc;
            }
        }
        dh = dh_prev;
    }
    dx
}
