use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_cross_fitted, PoolMember};
use crate::classifiers::{fit_base, Logistic, LOGISTIC_MAX_ITER};
use crate::dataio::{kfold_indices, Dataset};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::{argmax, Real};

const META_L2: f64 = 1.0;
const STACK_FOLDS: usize = 5;
const CALIBRATION_FOLDS: usize = 3;

/// Out-of-fold probabilities of every pool member on its training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StackingCache<F: Real> {
    pub oof: Vec<Matrix<F>>,
    pub y: Vec<usize>,
    pub x: Matrix<F>,
    pub n_classes: usize,
}

impl<F: Real> StackingCache<F> {
    /// Refits each member's spec on 5 stratified folds of `train`
    /// (calibrating inside the fold when the member is calibrated) and
    /// records its probabilities on the held-out fold.
    pub fn build(pool: &[PoolMember<F>], train: &Dataset<F>, seed: u64) -> Result<Self> {
        let folds = kfold_indices(train.len(), STACK_FOLDS.min(train.len()), &train.y, seed)?;
        let oof = pool
            .par_iter()
            .map(|member| {
                let mut out = Matrix::zeros(train.len(), train.n_classes);
                for f in &folds {
                    let tr = train.subset(&f.train);
                    let te = train.x.select_rows(&f.test);
                    let p = if member.is_calibrated() {
                        let folds = CALIBRATION_FOLDS.min(tr.len());
                        match calibrate_cross_fitted(member.spec(), &tr, folds, seed) {
                            Ok(c) => c.predict_proba(&te)?,
                            Err(_) => fallback_proba(member, &tr, &te, seed)?,
                        }
                    } else {
                        fit_base(member.spec(), &tr, seed)?.decision_scores(&te)?
                    };
                    for (r, &i) in f.test.iter().enumerate() {
                        out.row_mut(i).copy_from_slice(p.row(r));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            oof,
            y: train.y.clone(),
            x: train.x.clone(),
            n_classes: train.n_classes,
        })
    }
}

/// One-hot votes when an inner fold lacks a class needed for calibration.
fn fallback_proba<F: Real>(member: &PoolMember<F>, tr: &Dataset<F>, te: &Matrix<F>, seed: u64) -> Result<Matrix<F>> {
    let m = fit_base(member.spec(), tr, seed)?;
    let pred = m.predict(te)?;
    Ok(Matrix::from_fn(te.rows(), tr.n_classes, |i, c| if pred[i] == c { F::one() } else { F::zero() }))
}

/// Logistic meta-learner over the concatenated probabilities of the
/// selected members (and optionally the original features).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StackedModel<F: Real> {
    pub members: Vec<usize>,
    pub pass_through: bool,
    pub n_classes: usize,
    meta: Logistic<F>,
}

/// Width of the meta-feature vector.
pub fn meta_width(n_members: usize, n_classes: usize, n_features: usize, pass_through: bool) -> usize {
    n_members * n_classes + if pass_through { n_features } else { 0 }
}

pub fn fit_stacked<F: Real>(flags: &[bool], cache: &StackingCache<F>, pass_through: bool) -> Result<StackedModel<F>> {
    let members: Vec<usize> = (0..flags.len()).filter(|&j| flags[j]).collect();
    if members.len() < 2 {
        return Err(invalid("stacking needs at least two members"));
    }
    if flags.len() != cache.oof.len() {
        return Err(crate::error::Error::LengthMismatch(flags.len(), cache.oof.len()));
    }
    let n = cache.y.len();
    let rows: Vec<Vec<F>> = (0..n)
        .map(|i| {
            let probs: Vec<&[F]> = members.iter().map(|&j| cache.oof[j].row(i)).collect();
            meta_row(&probs, cache.x.row(i), pass_through)
        })
        .collect();
    let z = Matrix::from_rows(&rows)?;
    let meta = Logistic::fit(&z, &cache.y, cache.n_classes, F::lit(META_L2), LOGISTIC_MAX_ITER);
    Ok(StackedModel {
        members,
        pass_through,
        n_classes: cache.n_classes,
        meta,
    })
}

pub(crate) fn meta_row<F: Real>(probs: &[&[F]], x: &[F], pass_through: bool) -> Vec<F> {
    let mut row: Vec<F> = probs.iter().flat_map(|p| p.iter().copied()).collect();
    if pass_through {
        row.extend_from_slice(x);
    }
    row
}

impl<F: Real> StackedModel<F> {
    /// `probs[j]` is member `j`'s probability row for the query, for every
    /// pool member.
    pub fn predict_row(&self, probs: &[&[F]], x: &[F]) -> usize {
        let sel: Vec<&[F]> = self.members.iter().map(|&j| probs[j]).collect();
        let z = meta_row(&sel, x, self.pass_through);
        let mut s = vec![F::zero(); self.n_classes];
        self.meta.scores_into(&z, &mut s);
        argmax(&s)
    }
}
