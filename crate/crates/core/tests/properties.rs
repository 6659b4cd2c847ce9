use proptest::prelude::*;

use wqnet_core::data::{Dataset, Matrix};
use wqnet_core::evaluation::{classification_report, confusion_matrix, kfold_indices, r2, rmse, ConfusionMatrix, CvSummary};
use wqnet_core::resample::{smote_with_provenance, SmoteConfig};

fn brute_rmse(a: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - p[i]).powi(2);
    }
    (s / a.len() as f64).sqrt()
}

fn brute_r2(a: &[f64], p: &[f64]) -> f64 {
    let m = a.iter().sum::<f64>() / a.len() as f64;
    let tot: f64 = a.iter().map(|x| (x - m).powi(2)).sum();
    let res: f64 = a.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - res / tot
}

fn labelled(counts: &[usize], dim: usize, jitter: &[f64]) -> Dataset {
    let mut rows = Vec::new();
    let mut codes = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let row: Vec<f64> = (0..dim).map(|j| c as f64 * 10.0 + jitter[(i * dim + j) % jitter.len()]).collect();
            rows.push(row);
            codes.push(c as u8);
        }
    }
    Dataset::classification(Matrix::from_rows(&rows).unwrap(), &codes).unwrap()
}

proptest! {
    #[test]
    fn weighted_recall_is_accuracy(pairs in prop::collection::vec((0u8..3, 0u8..3), 1..200)) {
        let (a, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let rep = classification_report(&confusion_matrix(&a, &p, 3).unwrap()).unwrap();
        prop_assert!((rep.weighted_avg.recall - rep.accuracy).abs() < 1e-12);
        for m in &rep.classes {
            prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        prop_assert_eq!(rep.classes.iter().map(|m| m.support).sum::<u64>(), a.len() as u64);
    }

    #[test]
    fn metrics_match_brute_force(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..300)) {
        let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!((rmse(&a, &p).unwrap() - brute_rmse(&a, &p)).abs() <= 1e-12 * brute_rmse(&a, &p).max(1.0));
        if let Ok(v) = r2(&a, &p) {
            prop_assert!((v - brute_r2(&a, &p)).abs() <= 1e-12 * brute_r2(&a, &p).abs().max(1.0));
            prop_assert!(v <= 1.0);
        }
    }

    #[test]
    fn constant_offset_rmse(v in prop::collection::vec(-100f64..100.0, 1..50), c in -10f64..10.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!((rmse(&v, &shifted).unwrap() - c.abs()).abs() < 1e-9);
    }

    #[test]
    fn folds_partition_and_balance(counts in prop::collection::vec(5usize..40, 3), k in 2usize..6, seed in any::<u64>()) {
        let ds = labelled(&counts, 2, &[0.1, 0.7, 0.3]);
        let folds = kfold_indices(&ds, k, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        let codes = ds.class_codes();
        for c in 0..3u8 {
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| codes[i] == c).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(&folds, &kfold_indices(&ds, k, seed).unwrap());
    }

    #[test]
    fn summary_recomputes(scores in prop::collection::vec(0f64..1.0, 2..20)) {
        let s = CvSummary::from_scores(scores.clone()).unwrap();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let sd = (scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!((s.mean - mean).abs() <= 1e-12);
        prop_assert!((s.sample_sd - sd).abs() <= 1e-12);
    }

    #[test]
    fn smote_balances_with_convex_children(
        counts in prop::collection::vec(2usize..30, 3),
        jitter in prop::collection::vec(-3f64..3.0, 7),
        k in 1usize..7,
        seed in any::<u64>(),
    ) {
        let ds = labelled(&counts, 3, &jitter);
        let cfg = SmoteConfig { k_neighbors: k, seed };
        let out = smote_with_provenance(&ds, &cfg).unwrap();
        let max = *counts.iter().max().unwrap();
        let codes = out.dataset.class_codes();
        for c in 0..3u8 {
            prop_assert_eq!(codes.iter().filter(|&&x| x == c).count(), max);
        }
        for (j, &(p, n)) in out.parents.iter().enumerate() {
            let row = out.dataset.features.row(ds.len() + j);
            let (xp, xn) = (ds.features.row(p), ds.features.row(n));
            prop_assert_eq!(codes[ds.len() + j], ds.class_codes()[p]);
            prop_assert_eq!(ds.class_codes()[p], ds.class_codes()[n]);
            prop_assert!(convex_weight(row, xp, xn).is_some());
        }
        prop_assert_eq!(out, smote_with_provenance(&ds, &cfg).unwrap());
    }
}

/// `Some(u)` with `u ∈ [0, 1]` when `row = a + u·(b − a)` in every coordinate.
fn convex_weight(row: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let mut u = None;
    for j in 0..row.len() {
        let d = b[j] - a[j];
        if d.abs() < 1e-12 {
            if (row[j] - a[j]).abs() > 1e-9 {
                return None;
            }
            continue;
        }
        let w = (row[j] - a[j]) / d;
        match u {
            None => u = Some(w),
            Some(prev) if (prev - w).abs() > 1e-9 => return None,
            _ => {}
        }
    }
    let u = u.unwrap_or(0.0);
    (-1e-12..=1.0 + 1e-12).contains(&u).then_some(u)
}

#[test]
fn three_class_confusion_probe() {
    let cm = ConfusionMatrix::from_counts(vec![vec![39, 2, 3], vec![6, 52, 0], vec![0, 0, 51]]).unwrap();
    assert_eq!(cm.total(), 153);
    let r = classification_report(&cm).unwrap();
    assert!((r.accuracy - 142.0 / 153.0).abs() < 1e-12);
    assert_eq!(r.classes[2].recall, 1.0);
    assert!((r.classes[2].precision - 51.0 / 54.0).abs() < 1e-12);
}
