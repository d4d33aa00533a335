use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::competence::{region_excluding, CompetenceSet, MemberOutputs, RegionOfCompetence};
use super::selection::{dcs_competence, des_select, dfp_prune, majority_vote};
use super::stacking::StackedModel;
use super::{EnsembleConfiguration, Strategy};
use crate::calibration::PoolMember;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Best flagged member by global competence-set accuracy, ties to the lower
/// index.
fn single_best<F: Real>(flags: &[bool], cs: &CompetenceSet<F>) -> usize {
    let mut best = None;
    for j in (0..flags.len()).filter(|&j| flags[j]) {
        if best.is_none_or(|b: usize| cs.global_accuracy[j] > cs.global_accuracy[b]) {
            best = Some(j);
        }
    }
    best.unwrap_or(0)
}

/// Predicts every row of `x` given the pool's cached outputs on those rows.
/// With `leave_one_out`, `x` must be the competence set itself and each
/// query's own sample is kept out of its region and cluster statistics.
pub fn predict_with_outputs<F: Real>(
    cfg: &EnsembleConfiguration,
    cs: &CompetenceSet<F>,
    stacked: Option<&StackedModel<F>>,
    x: &Matrix<F>,
    out: &MemberOutputs<F>,
    leave_one_out: bool,
) -> Result<Vec<usize>> {
    cfg.validate(cs.n_members())?;
    if out.n_members() != cs.n_members() || out.len() != x.rows() {
        return Err(Error::LengthMismatch(out.len(), x.rows()));
    }
    if x.cols() != cs.x.cols() {
        return Err(Error::DimensionMismatch {
            expected: cs.x.cols(),
            got: x.cols(),
        });
    }
    if leave_one_out && x.rows() != cs.len() {
        return Err(invalid("leave-one-out prediction needs the competence set rows"));
    }
    let flags = &cfg.members;
    let active: Vec<usize> = (0..flags.len()).filter(|&j| flags[j]).collect();
    if active.len() == 1 {
        return Ok((0..x.rows()).map(|i| out.pred(i, active[0])).collect());
    }
    match cfg.strategy {
        Strategy::SingleBest => {
            let j = single_best(flags, cs);
            return Ok((0..x.rows()).map(|i| out.pred(i, j)).collect());
        }
        Strategy::StackedGeneralization => {
            let model = stacked.ok_or_else(|| invalid("stacked strategy without a fitted meta-learner"))?;
            if model.members != active {
                return Err(invalid("meta-learner was fitted for a different member subset"));
            }
            return Ok((0..x.rows())
                .map(|i| {
                    let probs: Vec<&[F]> = (0..flags.len()).map(|j| out.proba(i, j)).collect();
                    model.predict_row(&probs, x.row(i))
                })
                .collect());
        }
        _ => {}
    }
    (0..x.rows())
        .into_par_iter()
        .with_min_len(32)
        .map(|i| {
            let exclude = leave_one_out.then_some(i);
            predict_one(cfg, cs, x.row(i), out.row_preds(i), exclude)
        })
        .collect()
}

fn predict_one<F: Real>(
    cfg: &EnsembleConfiguration,
    cs: &CompetenceSet<F>,
    q: &[F],
    qp: &[usize],
    exclude: Option<usize>,
) -> Result<usize> {
    let flags = &cfg.members;
    let vote = |sel: &[bool], w: &[f64]| {
        let js: Vec<usize> = (0..sel.len()).filter(|&j| sel[j]).collect();
        let preds: Vec<usize> = js.iter().map(|&j| qp[j]).collect();
        let ws: Vec<f64> = js.iter().map(|&j| w[j]).collect();
        majority_vote(&preds, &ws, cs.n_classes)
    };
    if cfg.strategy == Strategy::StaticSelection {
        return vote(flags, &vec![1.0; flags.len()]);
    }
    let roc = if cfg.strategy.uses_region() {
        region_excluding(cs, q, cfg.k, exclude)
    } else {
        RegionOfCompetence {
            indices: vec![],
            distances: vec![],
        }
    };
    let pruned;
    let flags: &[bool] = if cfg.dfp && cfg.strategy.uses_region() {
        pruned = dfp_prune(flags, cs, &roc);
        &pruned
    } else {
        flags
    };
    if let Some(measure) = cfg.strategy.dcs_measure() {
        let mut best: Option<(f64, usize)> = None;
        for j in (0..flags.len()).filter(|&j| flags[j]) {
            let c = dcs_competence(measure, j, flags, cs, &roc, qp);
            let better = match best {
                None => true,
                Some((bc, bj)) => c > bc || (c == bc && cs.global_accuracy[j] > cs.global_accuracy[bj]),
            };
            if better {
                best = Some((c, j));
            }
        }
        return Ok(qp[best.map_or(0, |b| b.1)]);
    }
    let rule = cfg
        .strategy
        .des_rule()
        .ok_or_else(|| invalid(format!("{} is not a per-query strategy", cfg.strategy)))?;
    let (sel, w) = des_select(rule, flags, cs, &roc, q, exclude)?;
    vote(&sel, &w)
}

/// Predicts `x` with a fitted pool.
pub fn ensemble_predict<F: Real>(
    cfg: &EnsembleConfiguration,
    pool: &[PoolMember<F>],
    cs: &CompetenceSet<F>,
    stacked: Option<&StackedModel<F>>,
    x: &Matrix<F>,
) -> Result<Vec<usize>> {
    let out = MemberOutputs::compute(pool, x)?;
    predict_with_outputs(cfg, cs, stacked, x, &out, false)
}

/// Leave-one-out predictions on the competence set itself.
pub fn predict_competence_set<F: Real>(
    cfg: &EnsembleConfiguration,
    cs: &CompetenceSet<F>,
    stacked: Option<&StackedModel<F>>,
) -> Result<Vec<usize>> {
    predict_with_outputs(cfg, cs, stacked, &cs.x, &cs.outputs, true)
}

/// A complete fitted ensemble: configuration, pool, competence set and
/// (for stacking) the meta-learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnsembleModel<F: Real> {
    pub config: EnsembleConfiguration,
    pub pool: Vec<PoolMember<F>>,
    pub competence: CompetenceSet<F>,
    pub stacked: Option<StackedModel<F>>,
}

impl<F: Real> EnsembleModel<F> {
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<usize>> {
        ensemble_predict(&self.config, &self.pool, &self.competence, self.stacked.as_ref(), x)
    }
}
