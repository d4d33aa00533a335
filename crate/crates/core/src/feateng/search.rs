use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_feature_pipeline, FeaturePipelineConfig, N_COMPONENTS, PERCENTILES, VARIANCE_THRESHOLDS};
use crate::bayesopt::{optimize, ConfigurationSpace, Dimension, OptimizeOptions, OptimizeResult};
use crate::classifiers::{Forest, MaxFeatures, TreeParams};
use crate::dataio::{kfold_indices, Dataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::accuracy;
use crate::scalar::{argmax, Real};

pub const SURROGATE_TREES: usize = 25;
pub const SURROGATE_DEPTH: usize = 8;
const SURROGATE_FOLDS: usize = 5;
const MIN_ROWS: usize = 10;

/// Randomized-threshold trees on the full sample with `sqrt(d)` candidate
/// features per split.
pub fn surrogate_params() -> TreeParams {
    TreeParams {
        max_depth: Some(SURROGATE_DEPTH),
        min_leaf: 1,
        max_features: MaxFeatures::Sqrt,
        random_thresholds: true,
    }
}

fn surrogate_accuracy<F: Real>(train: &Dataset<F>, test_x: &Matrix<F>, test_y: &[usize], seed: u64) -> Result<f64> {
    let forest = Forest::fit(&train.x, &train.y, train.n_classes, SURROGATE_TREES, false, &surrogate_params(), seed);
    let mut buf = vec![F::zero(); train.n_classes];
    let pred: Vec<usize> = test_x
        .iter_rows()
        .map(|r| {
            forest.scores_into(r, &mut buf);
            argmax(&buf)
        })
        .collect();
    accuracy(&pred, test_y)
}

/// Stratified 5-fold CV accuracy of the surrogate with the pipeline refit on
/// each fold's training part. A fold whose pipeline or fit fails scores 0.
pub fn surrogate_score<F: Real>(cfg: &FeaturePipelineConfig, train: &Dataset<F>, seed: u64) -> Result<f64> {
    cfg.validate()?;
    if train.len() < MIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "surrogate scoring needs {MIN_ROWS} rows, got {}",
            train.len()
        )));
    }
    let folds = kfold_indices(train.len(), SURROGATE_FOLDS, &train.y, seed)?;
    let scores: Vec<f64> = folds
        .par_iter()
        .map(|f| {
            let tr = train.subset(&f.train);
            let te = train.subset(&f.test);
            fit_feature_pipeline(cfg, &tr)
                .and_then(|p| {
                    let xtr = p.transform_dataset(&tr)?;
                    let xte = p.transform(&te.x)?;
                    surrogate_accuracy(&xtr, &xte, &te.y, seed)
                })
                .unwrap_or(0.0)
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Seven categorical slots: scaler, generator, decomposition, component
/// count, selector, variance threshold and percentile.
pub fn feateng_space() -> ConfigurationSpace {
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>();
    let dims = vec![
        Dimension::categorical("scaler", &["none", "standard", "maxabs", "robust"]),
        Dimension::categorical("generator", &["none", "polynomial2", "kbins"]),
        Dimension::categorical("decomposition", &["none", "pca", "truncated_svd"]),
        Dimension::categorical("n_components", &N_COMPONENTS.map(|n| n.to_string())),
        Dimension::categorical("selector", &["none", "variance", "percentile"]),
        Dimension::categorical("variance_threshold", &fmt(&VARIANCE_THRESHOLDS)),
        Dimension::categorical("percentile", &fmt(&PERCENTILES)),
    ];
    ConfigurationSpace::new(dims).expect("static feature space is valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSearch {
    pub config: FeaturePipelineConfig,
    pub score: f64,
    pub search: OptimizeResult,
}

/// Minimises `1 - surrogate_score` with the identity pipeline evaluated
/// first.
pub fn search_feature_pipeline<F: Real>(
    train: &Dataset<F>,
    budget: usize,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<FeatureSearch> {
    if train.len() < MIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "feature search needs {MIN_ROWS} rows, got {}",
            train.len()
        )));
    }
    let space = feateng_space();
    let objective = |c: &crate::bayesopt::Config| {
        let cfg = FeaturePipelineConfig::from_config(c)?;
        Ok(1.0 - surrogate_score(&cfg, train, seed)?)
    };
    let opts = OptimizeOptions::default()
        .with_initial(FeaturePipelineConfig::identity().to_config()?)
        .with_deadline(deadline);
    let r = optimize(&space, objective, budget, seed, &opts)?;
    Ok(FeatureSearch {
        config: FeaturePipelineConfig::from_config(&r.best)?,
        score: 1.0 - r.best_value,
        search: r,
    })
}
