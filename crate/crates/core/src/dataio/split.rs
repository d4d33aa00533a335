use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_counts, Dataset};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Train / validation / test fractions and the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        let fr = [train_fraction, val_fraction, test_fraction];
        if fr.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(invalid("split fractions must lie in (0, 1)"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("split fractions must sum to 1"));
        }
        Ok(Self {
            train_fraction,
            val_fraction,
            test_fraction,
            seed,
        })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            seed,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::with_seed(42)
    }
}

/// Three disjoint stratified parts together with their original row indices.
#[derive(Debug, Clone)]
pub struct Split<F: Real> {
    pub train: Dataset<F>,
    pub val: Dataset<F>,
    pub test: Dataset<F>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

pub fn stratified_split<F: Real>(d: &Dataset<F>, s: &SplitSpec) -> Result<Split<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (class, members) in members_by_class(&d.y, d.n_classes).into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            return Err(Error::ClassTooSmall {
                class,
                count: n,
                what: "a three-way split",
            });
        }
        let mut counts = [
            (n as f64 * s.train_fraction).round() as usize,
            (n as f64 * s.val_fraction).round() as usize,
            0,
        ];
        counts[1] = counts[1].min(n - counts[0].min(n));
        counts[0] = counts[0].min(n);
        counts[2] = n - counts[0] - counts[1];
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..3).max_by_key(|&i| (counts[i], 3 - i)).unwrap_or(0);
            counts[donor] -= 1;
            counts[empty] += 1;
        }
        let mut shuffled = members;
        shuffled.shuffle(&mut rng);
        let mut start = 0;
        for (part, &c) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&shuffled[start..start + c]);
            start += c;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train_idx, val_idx, test_idx] = parts;
    Ok(Split {
        train: d.subset(&train_idx),
        val: d.subset(&val_idx),
        test: d.subset(&test_idx),
        train_idx,
        val_idx,
        test_idx,
    })
}

/// One cross-validation fold: indices to fit on and to score on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold assignment. Classes are shuffled independently and then
/// dealt round-robin, so fold sizes and per-fold class counts differ by at
/// most one.
pub fn kfold_indices(n: usize, k: usize, labels: &[usize], seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(invalid(format!("{k} folds for {n} samples")));
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch(labels.len(), n));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(n);
    for mut members in members_by_class(labels, n_classes) {
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut tests = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        tests[pos % k].push(idx);
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Classes with fewer members than `k` (they cannot appear in every fold).
pub fn undersized_classes(labels: &[usize], k: usize) -> Vec<usize> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    class_counts(labels, n_classes)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0 && c < k)
        .map(|(i, _)| i)
        .collect()
}

fn members_by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        out[c].push(i);
    }
    out
}
