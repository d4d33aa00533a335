use serde::{Deserialize, Serialize};

use super::competence::{CompetenceSet, RegionOfCompetence};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Fraction of the pool that must agree for two output profiles to match
/// under MCB.
pub const MCB_SIMILARITY: f64 = 0.7;

/// Dynamic frienemy pruning. A flagged member survives when it classifies
/// both samples of at least one cross-class pair in the region correctly.
/// With no survivors the input flags come back unchanged.
pub fn dfp_prune<F: Real>(flags: &[bool], cs: &CompetenceSet<F>, roc: &RegionOfCompetence<F>) -> Vec<bool> {
    let idx = &roc.indices;
    let mut out = vec![false; flags.len()];
    let mut any = false;
    for (j, o) in out.iter_mut().enumerate() {
        if !flags[j] {
            continue;
        }
        'pairs: for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let (p, q) = (idx[a], idx[b]);
                if cs.y[p] != cs.y[q] && cs.correct(p, j) && cs.correct(q, j) {
                    *o = true;
                    any = true;
                    break 'pairs;
                }
            }
        }
    }
    if any {
        out
    } else {
        flags.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DcsMeasure {
    Ola,
    Lca,
    Mcb,
    Rank,
    APriori,
    APosteriori,
}

/// Local competence of member `j`. `query_preds` holds every member's
/// prediction for the query; MCB compares profiles over the members flagged
/// in `flags`.
pub fn dcs_competence<F: Real>(
    measure: DcsMeasure,
    j: usize,
    flags: &[bool],
    cs: &CompetenceSet<F>,
    roc: &RegionOfCompetence<F>,
    query_preds: &[usize],
) -> f64 {
    let idx = &roc.indices;
    let frac = |set: &mut dyn Iterator<Item = usize>| {
        let (mut hit, mut n) = (0usize, 0usize);
        for i in set {
            n += 1;
            hit += usize::from(cs.correct(i, j));
        }
        if n == 0 {
            None
        } else {
            Some(hit as f64 / n as f64)
        }
    };
    match measure {
        DcsMeasure::Ola => frac(&mut idx.iter().copied()).unwrap_or(0.0),
        DcsMeasure::Lca => {
            let target = query_preds[j];
            frac(&mut idx.iter().copied().filter(|&i| cs.y[i] == target)).unwrap_or(0.0)
        }
        DcsMeasure::Mcb => {
            let active: Vec<usize> = (0..flags.len()).filter(|&m| flags[m]).collect();
            let similar = |i: usize| {
                let same = active.iter().filter(|&&m| cs.outputs.pred(i, m) == query_preds[m]).count();
                same as f64 >= MCB_SIMILARITY * active.len() as f64
            };
            frac(&mut idx.iter().copied().filter(|&i| similar(i)))
                .or_else(|| frac(&mut idx.iter().copied()))
                .unwrap_or(0.0)
        }
        DcsMeasure::Rank => idx.iter().take_while(|&&i| cs.correct(i, j)).count() as f64,
        DcsMeasure::APriori => weighted_true_proba(cs, j, idx.iter().copied().enumerate()),
        DcsMeasure::APosteriori => {
            let target = query_preds[j];
            weighted_true_proba(
                cs,
                j,
                idx.iter().copied().enumerate().filter(|&(_, i)| cs.y[i] == target),
            )
        }
    }
}

/// `Σ P_j(y_i | x_i) w_i / Σ w_i` with `w = 1 / (rank + 1)`; 0 when empty.
fn weighted_true_proba<F: Real>(cs: &CompetenceSet<F>, j: usize, items: impl Iterator<Item = (usize, usize)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (rank, i) in items {
        let w = 1.0 / (rank + 1) as f64;
        num += w * cs.outputs.proba(i, j)[cs.y[i]].as_f64();
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesRule {
    KnoraE,
    KnoraU,
    DesKnn,
    DesClustering,
}

/// Orders flagged members by `key` descending, then global accuracy
/// descending, then index.
fn ranked<F: Real>(flags: &[bool], cs: &CompetenceSet<F>, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..flags.len()).filter(|&j| flags[j]).collect();
    ids.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(cs.global_accuracy[b].partial_cmp(&cs.global_accuracy[a]).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    });
    ids
}

fn uniform(flags: &[bool], chosen: &[usize]) -> (Vec<bool>, Vec<f64>) {
    let mut sel = vec![false; flags.len()];
    let mut w = vec![0.0; flags.len()];
    for &j in chosen {
        sel[j] = true;
        w[j] = 1.0;
    }
    (sel, w)
}

/// DES selection over the flagged members. Returns the selected flags and
/// vote weights (zero for unselected members). `exclude` leaves one
/// competence sample out of cluster statistics.
pub fn des_select<F: Real>(
    rule: DesRule,
    flags: &[bool],
    cs: &CompetenceSet<F>,
    roc: &RegionOfCompetence<F>,
    query: &[F],
    exclude: Option<usize>,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let active: Vec<usize> = (0..flags.len()).filter(|&j| flags[j]).collect();
    if active.is_empty() {
        return Err(invalid("no member selected"));
    }
    let n_act = active.len();
    Ok(match rule {
        DesRule::KnoraE => {
            for k in (1..=roc.len()).rev() {
                let oracles: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&j| roc.indices[..k].iter().all(|&i| cs.correct(i, j)))
                    .collect();
                if !oracles.is_empty() {
                    return Ok(uniform(flags, &oracles));
                }
            }
            uniform(flags, &active)
        }
        DesRule::KnoraU => {
            let mut w = vec![0.0; flags.len()];
            for &j in &active {
                w[j] = roc.indices.iter().filter(|&&i| cs.correct(i, j)).count() as f64;
            }
            if w.iter().sum::<f64>() == 0.0 {
                uniform(flags, &active)
            } else {
                (w.iter().map(|&v| v > 0.0).collect(), w)
            }
        }
        DesRule::DesKnn => {
            let ola = |j: usize| {
                if roc.is_empty() {
                    0.0
                } else {
                    roc.indices.iter().filter(|&&i| cs.correct(i, j)).count() as f64 / roc.len() as f64
                }
            };
            let top: Vec<usize> = ranked(flags, cs, ola).into_iter().take(n_act.div_ceil(2)).collect();
            let keep = n_act.div_ceil(3);
            let double_fault = |a: usize, b: usize| {
                if roc.is_empty() {
                    0.0
                } else {
                    roc.indices.iter().filter(|&&i| !cs.correct(i, a) && !cs.correct(i, b)).count() as f64
                        / roc.len() as f64
                }
            };
            let mean_df = |j: usize| {
                let others: Vec<usize> = top.iter().copied().filter(|&o| o != j).collect();
                if others.is_empty() {
                    0.0
                } else {
                    others.iter().map(|&o| double_fault(j, o)).sum::<f64>() / others.len() as f64
                }
            };
            let mut in_top = vec![false; flags.len()];
            top.iter().for_each(|&j| in_top[j] = true);
            // Lower double-fault means more diverse.
            let diverse: Vec<usize> = ranked(&in_top, cs, |j| -mean_df(j)).into_iter().take(keep).collect();
            uniform(flags, &diverse)
        }
        DesRule::DesClustering => {
            let a = cs.clusters.nearest(query);
            let best: Vec<usize> = ranked(flags, cs, |j| cs.cluster_accuracy(a, j, exclude))
                .into_iter()
                .take(n_act.div_ceil(2))
                .collect();
            uniform(flags, &best)
        }
    })
}

/// Label with the largest summed weight, ties to the lowest label. All-zero
/// weights count as uniform.
pub fn majority_vote(predictions: &[usize], weights: &[f64], n_classes: usize) -> Result<usize> {
    if predictions.is_empty() {
        return Err(invalid("majority vote over no predictions"));
    }
    if predictions.len() != weights.len() {
        return Err(crate::error::Error::LengthMismatch(predictions.len(), weights.len()));
    }
    let uniform = weights.iter().all(|&w| w == 0.0);
    let k = n_classes.max(predictions.iter().max().map_or(0, |m| m + 1));
    let mut tally = vec![0.0; k];
    for (&p, &w) in predictions.iter().zip(weights) {
        tally[p] += if uniform { 1.0 } else { w };
    }
    Ok(crate::scalar::argmax(&tally))
}
