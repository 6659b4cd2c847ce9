//! SMOTE oversampling.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{Dataset, Task};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResampleError {
    #[error("SMOTE needs a classification dataset")]
    NotClassification,
    #[error("class {0} has fewer than two rows")]
    ClassTooSmall(u8),
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig { k_neighbors: 5, seed: 42 }
    }
}

/// Resampled dataset plus, for every appended row, the `(parent, neighbor)`
/// row indices in the input it was interpolated between.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub dataset: Dataset,
    pub parents: Vec<(usize, usize)>,
}

pub fn smote_resample(dataset: &Dataset, config: &SmoteConfig) -> Result<Dataset, ResampleError> {
    smote_with_provenance(dataset, config).map(|o| o.dataset)
}

/// Oversamples every minority class up to the majority count.
///
/// Minority members are used as parents in round-robin order. Each synthetic
/// row is `x + u·(x_nn − x)` with `x_nn` drawn uniformly from the
/// `min(k, count − 1)` nearest same-class rows (Euclidean, ties to the lower
/// index) and `u ~ U[0, 1)`. Original rows come first, unchanged.
pub fn smote_with_provenance(dataset: &Dataset, config: &SmoteConfig) -> Result<SmoteOutput, ResampleError> {
    if dataset.task != Task::Classification {
        return Err(ResampleError::NotClassification);
    }
    if config.k_neighbors == 0 {
        return Err(ResampleError::ZeroNeighbors);
    }
    let groups = dataset.class_indices();
    for (code, g) in groups.iter().enumerate() {
        if g.len() == 1 {
            return Err(ResampleError::ClassTooSmall(code as u8));
        }
    }
    let majority = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = rng::seeded(config.seed);
    let mut out = dataset.clone();
    let mut parents = Vec::new();
    let mut synthetic = alloc::vec![0.0; dataset.dim()];

    for (code, members) in groups.iter().enumerate() {
        if members.is_empty() || members.len() == majority {
            continue;
        }
        let k = config.k_neighbors.min(members.len() - 1);
        let mut neighbors: Vec<Option<Vec<usize>>> = alloc::vec![None; members.len()];
        for j in 0..majority - members.len() {
            let slot = j % members.len();
            let parent = members[slot];
            let nn = neighbors[slot].get_or_insert_with(|| nearest(dataset, members, parent, k));
            let chosen = nn[rng.random_range(0..nn.len())];
            let u: f64 = rng.random();
            let x = dataset.features.row(parent);
            let y = dataset.features.row(chosen);
            for ((s, a), b) in synthetic.iter_mut().zip(x).zip(y) {
                *s = a + u * (b - a);
            }
            out.features.push_row(&synthetic);
            out.targets.push(code as f64);
            parents.push((parent, chosen));
        }
    }
    Ok(SmoteOutput { dataset: out, parents })
}

fn nearest(dataset: &Dataset, members: &[usize], of: usize, k: usize) -> Vec<usize> {
    let x = dataset.features.row(of);
    let mut dist: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&m| m != of)
        .map(|&m| {
            let d = dataset.features.row(m).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d, m)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.into_iter().take(k).map(|(_, m)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn dataset(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut codes = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push([i as f64 * 1.5 + c as f64, (i * i) as f64 * 0.25 - c as f64]);
                codes.push(c as u8);
            }
        }
        Dataset::classification(Matrix::from_rows(&rows).unwrap(), &codes).unwrap()
    }

    fn histogram(ds: &Dataset) -> [usize; 3] {
        let mut h = [0; 3];
        for c in ds.class_codes() {
            h[c as usize] += 1;
        }
        h
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let ds = dataset(&[5, 5, 5]);
        assert_eq!(smote_resample(&ds, &SmoteConfig::default()).unwrap(), ds);
    }

    #[test]
    fn minority_is_filled() {
        let ds = dataset(&[10, 4, 10]);
        let out = smote_with_provenance(&ds, &SmoteConfig { k_neighbors: 3, seed: 1 }).unwrap();
        assert_eq!(histogram(&out.dataset), [10, 10, 10]);
        assert_eq!(out.parents.len(), 6);
        assert_eq!(&out.dataset.targets[24..], &[1.0; 6]);
        assert_eq!(out.dataset.subset(&(0..24).collect::<Vec<_>>()), ds);
    }

    #[test]
    fn singleton_class_rejected() {
        let ds = dataset(&[4, 1, 4]);
        assert_eq!(smote_resample(&ds, &SmoteConfig::default()), Err(ResampleError::ClassTooSmall(1)));
    }

    #[test]
    fn regression_rejected() {
        let ds = Dataset::regression(Matrix::from_rows(&[[1.0; 4], [2.0; 4]]).unwrap(), alloc::vec![1.0, 2.0]).unwrap();
        assert_eq!(smote_resample(&ds, &SmoteConfig::default()), Err(ResampleError::NotClassification));
    }

    #[test]
    fn neighbor_ties_break_low() {
        let ds = Dataset::classification(
            Matrix::from_rows(&[[0.0], [1.0], [-1.0], [2.0]]).unwrap(),
            &[0, 0, 0, 0],
        )
        .unwrap();
        assert_eq!(nearest(&ds, &[0, 1, 2, 3], 0, 2), alloc::vec![1, 2]);
    }

    #[test]
    fn two_member_class_uses_its_partner() {
        let ds = dataset(&[6, 2, 6]);
        let out = smote_with_provenance(&ds, &SmoteConfig { k_neighbors: 5, seed: 9 }).unwrap();
        for &(p, n) in &out.parents {
            assert!((p == 6 && n == 7) || (p == 7 && n == 6));
        }
    }
}
