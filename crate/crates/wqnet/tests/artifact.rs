mod common;

use std::fs;

use wqnet::artifact::{from_parts, load_artifact, save_artifact, ArtifactError, MANIFEST_FILE, WEIGHTS_FILE};
use wqnet::io::{load_csv, write_csv};
use wqnet_core::data::{generate_synthetic, SyntheticConfig, Task};
use wqnet_core::models::{classify_sample, predict_wqi};
use wqnet_core::nn::param_count;

#[test]
fn regression_round_trip_is_bit_exact() {
    let art = common::trained(Task::Regression, 3);
    let dir = tempfile::tempdir().unwrap();
    save_artifact(&art, dir.path()).unwrap();
    let back = load_artifact(dir.path()).unwrap();
    assert_eq!(back, art);
    for s in common::samples(1, 100) {
        let (a, ca) = predict_wqi(&art, &s).unwrap();
        let (b, cb) = predict_wqi(&back, &s).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ca, cb);
    }
    let blob = fs::read(dir.path().join(WEIGHTS_FILE)).unwrap();
    assert_eq!(blob.len(), 8 * param_count(&art.graph).unwrap().total);
}

#[test]
fn classification_round_trip_is_bit_exact() {
    let art = common::trained(Task::Classification, 3);
    let dir = tempfile::tempdir().unwrap();
    save_artifact(&art, dir.path()).unwrap();
    let back = load_artifact(dir.path()).unwrap();
    for s in common::samples(2, 100) {
        let (ca, pa) = classify_sample(&art, &s).unwrap();
        let (cb, pb) = classify_sample(&back, &s).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(pa.iter().map(|p| p.to_bits()).collect::<Vec<_>>(), pb.iter().map(|p| p.to_bits()).collect::<Vec<_>>());
    }
}

fn saved(art: &wqnet_core::ModelArtifact) -> (String, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    save_artifact(art, dir.path()).unwrap();
    (fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(), fs::read(dir.path().join(WEIGHTS_FILE)).unwrap())
}

#[test]
fn truncated_blob_is_corrupt() {
    let (manifest, blob) = saved(&common::constant_regressor(80.0));
    let err = from_parts(&manifest, &blob[..blob.len() - 8]).unwrap_err();
    assert!(matches!(err, ArtifactError::CorruptBlob { expected, found } if found + 8 == expected), "{err}");
}

#[test]
fn edited_layer_width_is_a_mismatch() {
    let (manifest, blob) = saved(&common::constant_classifier([0.0; 3]));
    let mut m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    m["graph"]["nodes"][0]["layer"]["units"] = 65.into();
    let err = from_parts(&m.to_string(), &blob).unwrap_err();
    assert!(matches!(err, ArtifactError::ManifestGraphMismatch(_)), "{err}");
}

#[test]
fn unknown_version_rejected() {
    let (manifest, blob) = saved(&common::constant_regressor(80.0));
    let mut m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    m["format_version"] = 2.into();
    assert!(matches!(from_parts(&m.to_string(), &blob), Err(ArtifactError::UnknownVersion(2))));
}

#[test]
fn scaler_width_checked() {
    let (manifest, blob) = saved(&common::constant_regressor(80.0));
    let mut m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    m["scaler"]["means"] = serde_json::json!([0.0, 0.0, 0.0]);
    assert!(matches!(from_parts(&m.to_string(), &blob), Err(ArtifactError::ManifestGraphMismatch(_))));
}

#[test]
fn generated_csv_round_trips() {
    let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_csv(&path, &ds).unwrap();
    let back = load_csv(&path, Task::Regression).unwrap();
    assert_eq!((back.len(), back.dim()), (1000, 4));
    assert_eq!(back, ds);
    assert_eq!(load_csv(&path, Task::Classification).unwrap().class_codes(), ds.to_classification().unwrap().class_codes());
}
