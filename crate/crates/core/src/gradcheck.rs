//! Central finite-difference verification of the engine's analytic
//! gradients.

use alloc::vec::Vec;

use crate::nn::{backward, forward, GradAt, Mode, NetworkGraph, NnError, ParamStore, Tensor};
use crate::training::{cross_entropy_loss, TrainError};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients
/// from turning round-off into large relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / libm::fabs(analytic).max(libm::fabs(numeric)).max(1e-6)
}

/// Scalar objective over a network output.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `Σ projection ⊙ output`
    Projection(&'a [f64]),
    /// Cross-entropy of a softmax head against class codes.
    CrossEntropy(&'a [u8]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub max_param_err: f64,
    pub max_input_err: f64,
    /// Number of coordinates compared.
    pub checked: usize,
}

fn value(graph: &NetworkGraph, params: &ParamStore, x: &Tensor, mode: Mode, seed: u64, obj: Objective<'_>) -> Result<f64, TrainError> {
    let (out, _) = forward(graph, params, x, mode, seed)?;
    Ok(match obj {
        Objective::Projection(w) => out.data().iter().zip(w).map(|(a, b)| a * b).sum(),
        Objective::CrossEntropy(codes) => cross_entropy_loss(out.data(), out.sample_shape().iter().product(), codes)?.0,
    })
}

/// Compares analytic parameter and input gradients with central finite
/// differences of `obj`. The dropout mask is pinned by reusing `seed` for
/// every evaluation.
///
/// With `per_param = Some(m)`, only `m` evenly spaced coordinates of each
/// parameter tensor are perturbed (always including its first and last), so
/// large networks stay cheap to check.
pub fn gradient_check(
    graph: &NetworkGraph,
    params: &ParamStore,
    x: &Tensor,
    mode: Mode,
    seed: u64,
    obj: Objective<'_>,
    per_param: Option<usize>,
) -> Result<GradReport, TrainError> {
    let mut analytic = params.clone();
    let (out, cache) = forward(graph, &analytic, x, mode, seed)?;
    let (grad, at) = match obj {
        Objective::Projection(w) => (w.to_vec(), GradAt::Output),
        Objective::CrossEntropy(codes) => {
            (cross_entropy_loss(out.data(), out.sample_shape().iter().product(), codes)?.1, GradAt::PreActivation)
        }
    };
    let og = Tensor::new(out.shape().to_vec(), grad).ok_or(TrainError::ShapeMismatch)?;
    let dx = backward(graph, &mut analytic, cache, &og, at)?;
    let grads = analytic.flat_grads();

    let mut coords = Vec::new();
    let mut offset = 0;
    for p in params.iter() {
        let n = p.value.len();
        match per_param {
            Some(m) if m < n && m >= 2 => coords.extend((0..m).map(|j| offset + j * (n - 1) / (m - 1))),
            _ => coords.extend(offset..offset + n),
        }
        offset += n;
    }
    coords.dedup();

    let base = params.flat_values();
    let mut probe = params.clone();
    let mut v = base.clone();
    let mut max_param_err: f64 = 0.0;
    for &i in &coords {
        v[i] = base[i] + FD_STEP;
        probe.set_flat_values(&v)?;
        let up = value(graph, &probe, x, mode, seed, obj)?;
        v[i] = base[i] - FD_STEP;
        probe.set_flat_values(&v)?;
        let down = value(graph, &probe, x, mode, seed, obj)?;
        v[i] = base[i];
        max_param_err = max_param_err.max(rel_err(grads[i], (up - down) / (2.0 * FD_STEP)));
    }

    let mut max_input_err: f64 = 0.0;
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        xp.data_mut()[i] = x.data()[i] + FD_STEP;
        let up = value(graph, params, &xp, mode, seed, obj)?;
        xp.data_mut()[i] = x.data()[i] - FD_STEP;
        let down = value(graph, params, &xp, mode, seed, obj)?;
        xp.data_mut()[i] = x.data()[i];
        max_input_err = max_input_err.max(rel_err(dx.data()[i], (up - down) / (2.0 * FD_STEP)));
    }
    if !(max_param_err.is_finite() && max_input_err.is_finite()) {
        return Err(NnError::NonFinite(graph.output).into());
    }
    Ok(GradReport { max_param_err, max_input_err, checked: coords.len() + x.data().len() })
}
