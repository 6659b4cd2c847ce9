//! Core numerics for water-quality index (WQI) modelling.
//!
//! Everything here is allocation-only `no_std`: the data model and synthetic
//! generator, SMOTE rebalancing, a small reverse-mode network engine with the
//! layers the two WQI architectures need, Adam training with early stopping,
//! classification/regression metrics and (nested) cross-validation, and the
//! in-memory model artifact used for inference. File formats, the HTTP service
//! and the command line live in the `wqnet` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod evaluation;
pub mod gradcheck;
pub mod models;
pub mod nn;
pub mod resample;
pub mod training;

mod rng;

pub use data::{Dataset, Matrix, Sample, Scaler, Task, WqiClass};
pub use models::ModelArtifact;
pub use nn::{LayerSpec, NetworkGraph, ParamStore, Tensor};
