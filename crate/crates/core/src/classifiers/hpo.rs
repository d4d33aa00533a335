use std::time::Instant;

use super::{fit_base, ClassifierSpec};
use crate::bayesopt::{optimize, OptimizeOptions, OptimizeResult};
use crate::dataio::{kfold_indices, Dataset, Fold};
use crate::error::Result;
use crate::metrics::accuracy;
use crate::scalar::Real;

/// Mean accuracy over the given folds. A fold whose fit fails scores 0.
pub fn cv_accuracy<F: Real>(spec: &ClassifierSpec, data: &Dataset<F>, folds: &[Fold], seed: u64) -> f64 {
    let total: f64 = folds
        .iter()
        .map(|f| {
            let tr = data.subset(&f.train);
            let te = data.subset(&f.test);
            match fit_base(spec, &tr, seed).and_then(|m| m.predict(&te.x)) {
                Ok(pred) => accuracy(&pred, &te.y).unwrap_or(0.0),
                Err(_) => 0.0,
            }
        })
        .sum();
    total / folds.len().max(1) as f64
}

/// Tunes `spec`'s hyperparameters by maximizing 5-fold stratified CV
/// accuracy with [`optimize`]. The input setting is evaluated first. Budget 0
/// returns the input unchanged.
pub fn hpo_classifier<F: Real>(spec: &ClassifierSpec, train: &Dataset<F>, budget: usize, seed: u64) -> Result<ClassifierSpec> {
    hpo_search(spec, train, budget, seed, None).map(|(s, _)| s)
}

/// [`hpo_classifier`] that also returns the search history.
pub fn hpo_search<F: Real>(
    spec: &ClassifierSpec,
    train: &Dataset<F>,
    budget: usize,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<(ClassifierSpec, Option<OptimizeResult>)> {
    spec.validate()?;
    if budget == 0 {
        return Ok((spec.clone(), None));
    }
    let folds = kfold_indices(train.len(), 5.min(train.len()), &train.y, seed)?;
    let kind = spec.kind;
    let objective = |cfg: &crate::bayesopt::Config| {
        let s = ClassifierSpec::from_config(kind, cfg)?;
        Ok(1.0 - cv_accuracy(&s, train, &folds, seed))
    };
    let opts = OptimizeOptions::default()
        .with_initial(spec.to_config()?)
        .with_deadline(deadline);
    let r = optimize(&kind.space(), objective, budget, seed, &opts)?;
    Ok((ClassifierSpec::from_config(kind, &r.best)?, Some(r)))
}
