#![allow(dead_code)]

use wqnet_core::data::{generate_synthetic, Sample, Scaler, SyntheticConfig, Task, FEATURE_NAMES};
use wqnet_core::models::{build_hybrid_regressor, build_mlp_classifier, train_pipeline, LabelCodec, ModelArtifact, PipelineConfig, TrainingSummary};
use wqnet_core::nn::ParamStore;
use wqnet_core::training::TrainConfig;

fn shell(task: Task, graph: wqnet_core::nn::NetworkGraph, params: ParamStore) -> ModelArtifact {
    ModelArtifact {
        task,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        graph,
        params,
        scaler: Scaler { means: vec![0.0; 4], stds: vec![1.0; 4] },
        target_scaler: None,
        label_codec: (task == Task::Classification).then(LabelCodec::wqi),
        training: TrainingSummary::default(),
        held_out: None,
    }
}

/// Hybrid regressor whose weights are all zero except the output bias.
pub fn constant_regressor(wqi: f64) -> ModelArtifact {
    let graph = build_hybrid_regressor(4).unwrap();
    let mut params = ParamStore::zeros(&graph).unwrap();
    params.get_mut(graph.output, "bias").unwrap().value[0] = wqi;
    shell(Task::Regression, graph, params)
}

/// Classifier with zero weights; the output biases are its logits.
pub fn constant_classifier(logits: [f64; 3]) -> ModelArtifact {
    let graph = build_mlp_classifier(4, 3).unwrap();
    let mut params = ParamStore::zeros(&graph).unwrap();
    params.get_mut(graph.output, "bias").unwrap().value.copy_from_slice(&logits);
    shell(Task::Classification, graph, params)
}

pub fn trained(task: Task, epochs: usize) -> ModelArtifact {
    let ds = generate_synthetic(&SyntheticConfig { n: 300, ..SyntheticConfig::default() }).unwrap();
    let cfg = PipelineConfig { train: TrainConfig { epochs, ..TrainConfig::default() }, ..PipelineConfig::default() };
    train_pipeline(&ds, task, &cfg).unwrap().0
}

/// Deterministic samples spread over the generator's ranges (xorshift).
pub fn samples(seed: u64, n: usize) -> Vec<Sample> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut u = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| Sample::new(10.0 + 25.0 * u(), 5.5 + 3.5 * u(), 100.0 + 1400.0 * u(), 2.0 + 8.0 * u()))
        .collect()
}
