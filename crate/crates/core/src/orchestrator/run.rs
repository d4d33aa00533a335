use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    BudgetPlan, EnsembleReport, Histories, Metric, PipelineReport, PoolEntry, RunOptions, RunReport, StageHistory,
    TestMetrics, Timings, REPORT_VERSION,
};
use crate::bayesopt::{optimize, Config, ConfigurationSpace, Dimension, HedgeState, Observation, OptimizeOptions, OptimizeResult, Source, Value};
use crate::calibration::{calibrate_cross_fitted, PoolMember};
use crate::classifiers::{fit_base, hpo_search, ClassifierKind, ClassifierSpec};
use crate::dataio::{stratified_split, Dataset, Split};
use crate::ensemble::{
    ensemble_predict, fit_stacked, predict_competence_set, CompetenceSet, EnsembleConfiguration, EnsembleModel,
    StackedModel, StackingCache, Strategy,
};
use crate::error::{invalid, Result};
use crate::feateng::{fit_feature_pipeline, search_feature_pipeline, FeaturePipelineConfig, FittedFeaturePipeline};
use crate::linalg::Matrix;
use crate::scalar::Real;

const K_RANGE: (i64, i64) = (3, 15);
const DEFAULT_K: usize = 7;
const MIN_FEATENG_ROWS: usize = 10;

/// Feature pipeline plus fitted ensemble; predicts raw feature rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AutodessModel<F: Real> {
    pub kinds: Vec<ClassifierKind>,
    pub pipeline: FittedFeaturePipeline<F>,
    pub ensemble: EnsembleModel<F>,
}

impl<F: Real> AutodessModel<F> {
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<usize>> {
        self.ensemble.predict(&self.pipeline.transform(x)?)
    }
}

pub struct RunOutcome<F: Real> {
    pub report: RunReport,
    pub model: AutodessModel<F>,
    pub split: Split<F>,
}

fn sub_seed(seed: u64, stage: u64, i: usize) -> u64 {
    seed.wrapping_add(stage.wrapping_mul(0xA076_1D64_78BD_642F))
        .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn deadline(plan: &BudgetPlan, evals: usize, pool_size: usize) -> Option<Instant> {
    plan.stage_seconds(evals, pool_size)
        .map(|s| Instant::now() + Duration::from_secs_f64(s))
}

/// One boolean per pool member, then `strategy`, `k` and `dfp`. Pinned
/// strategy or dfp values drop their dimension.
pub fn ensemble_space(kinds: &[ClassifierKind], strategy: Option<Strategy>, dfp: Option<bool>) -> Result<ConfigurationSpace> {
    let mut dims: Vec<Dimension> = kinds.iter().map(|k| Dimension::boolean(k.name())).collect();
    if strategy.is_none() {
        dims.push(Dimension::categorical("strategy", &Strategy::ALL.map(|s| s.name())));
    }
    dims.push(Dimension::integer("k", K_RANGE.0, K_RANGE.1));
    if dfp.is_none() {
        dims.push(Dimension::boolean("dfp"));
    }
    ConfigurationSpace::new(dims)
}

fn encode_ensemble(cfg: &EnsembleConfiguration, strategy: Option<Strategy>, dfp: Option<bool>) -> Config {
    let mut c: Config = cfg.members.iter().map(|&b| Value::Bool(b)).collect();
    if strategy.is_none() {
        c.push(Value::Cat(cfg.strategy.name().to_string()));
    }
    c.push(Value::Int(cfg.k as i64));
    if dfp.is_none() {
        c.push(Value::Bool(cfg.dfp));
    }
    c
}

fn decode_ensemble(c: &Config, m: usize, strategy: Option<Strategy>, dfp: Option<bool>) -> Result<EnsembleConfiguration> {
    let bad = || invalid("malformed ensemble configuration");
    let members = c[..m].iter().map(|v| v.as_bool().ok_or_else(bad)).collect::<Result<Vec<_>>>()?;
    let mut at = m;
    let strategy = match strategy {
        Some(s) => s,
        None => {
            at += 1;
            c[at - 1].as_str().ok_or_else(bad)?.parse()?
        }
    };
    let k = c[at].as_i64().ok_or_else(bad)? as usize;
    let dfp = match dfp {
        Some(d) => d,
        None => c[at + 1].as_bool().ok_or_else(bad)?,
    };
    Ok(EnsembleConfiguration {
        members,
        strategy,
        k,
        dfp,
    })
}

/// Switches on the member with the best competence-set accuracy (lowest
/// index on ties) when nothing is selected. Returns whether it did.
pub fn repair_members<F: Real>(cfg: &mut EnsembleConfiguration, cs: &CompetenceSet<F>) -> bool {
    if cfg.n_selected() > 0 {
        return false;
    }
    let mut best = 0;
    for j in 1..cs.global_accuracy.len() {
        if cs.global_accuracy[j] > cs.global_accuracy[best] {
            best = j;
        }
    }
    cfg.members[best] = true;
    true
}

/// `1 - metric` of the leave-one-out ensemble predictions on the competence
/// set. An empty member selection is repaired first.
pub fn objective_ensemble<F: Real>(
    cfg: &EnsembleConfiguration,
    cs: &CompetenceSet<F>,
    stacked: Option<&StackedModel<F>>,
    metric: Metric,
) -> Result<f64> {
    let mut cfg = cfg.clone();
    repair_members(&mut cfg, cs);
    cfg.validate(cs.n_members())?;
    let pred = predict_competence_set(&cfg, cs, stacked)?;
    Ok(1.0 - metric.score(&pred, &cs.y)?)
}

/// Stage-three evaluator with lazily built stacking state.
struct EnsembleStage<'a, F: Real> {
    pool: &'a [PoolMember<F>],
    train: &'a Dataset<F>,
    cs: &'a CompetenceSet<F>,
    metric: Metric,
    pass_through: bool,
    seed: u64,
    cache: Option<StackingCache<F>>,
    stacked: HashMap<Vec<bool>, StackedModel<F>>,
}

impl<'a, F: Real> EnsembleStage<'a, F> {
    fn stacked_for(&mut self, cfg: &EnsembleConfiguration) -> Result<Option<&StackedModel<F>>> {
        if cfg.strategy != Strategy::StackedGeneralization || cfg.n_selected() < 2 {
            return Ok(None);
        }
        if !self.stacked.contains_key(&cfg.members) {
            if self.cache.is_none() {
                self.cache = Some(StackingCache::build(self.pool, self.train, self.seed)?);
            }
            let cache = self.cache.as_ref().ok_or_else(|| invalid("stacking cache missing"))?;
            let m = fit_stacked(&cfg.members, cache, self.pass_through)?;
            self.stacked.insert(cfg.members.clone(), m);
        }
        Ok(self.stacked.get(&cfg.members))
    }

    fn evaluate(&mut self, cfg: &EnsembleConfiguration) -> Result<f64> {
        let mut cfg = cfg.clone();
        repair_members(&mut cfg, self.cs);
        let (cs, metric) = (self.cs, self.metric);
        let stacked = self.stacked_for(&cfg)?;
        objective_ensemble(&cfg, cs, stacked, metric)
    }
}

/// Splits `data` and runs all three stages; see [`run_autodess_on_split`].
pub fn run_autodess<F: Real>(data: &Dataset<F>, opts: &RunOptions) -> Result<RunOutcome<F>> {
    opts.validate()?;
    let split = stratified_split(data, &opts.split_spec()?)?;
    run_autodess_on_split(split, opts)
}

/// Runs the three stages on a given split. Test rows are read once, after
/// every choice has been made.
pub fn run_autodess_on_split<F: Real>(split: Split<F>, opts: &RunOptions) -> Result<RunOutcome<F>> {
    opts.validate()?;
    let t0 = Instant::now();
    let plan = opts.plan;
    let seed = opts.seed;
    let kinds = opts.pool.clone();
    let m = kinds.len();

    // Stage one.
    let t_fe = Instant::now();
    let (fe_cfg, fe_search) = if plan.feateng_evals > 0 && split.train.len() >= MIN_FEATENG_ROWS {
        let s = search_feature_pipeline(&split.train, plan.feateng_evals, sub_seed(seed, 1, 0), deadline(&plan, plan.feateng_evals, m))?;
        (s.config, Some(s))
    } else {
        (FeaturePipelineConfig::identity(), None)
    };
    let pipeline = fit_feature_pipeline(&fe_cfg, &split.train)?;
    let train = pipeline.transform_dataset(&split.train)?;
    let val = pipeline.transform_dataset(&split.val)?;
    let mut warnings = pipeline.warnings.clone();
    if plan.feateng_evals > 0 && fe_search.is_none() {
        warnings.push(format!("feature search skipped: fewer than {MIN_FEATENG_ROWS} training rows"));
    }
    let fe_time = t_fe.elapsed().as_secs_f64();

    // Stage two.
    let t_hpo = Instant::now();
    let hpo_deadline = deadline(&plan, plan.hpo_evals_per_classifier * m, m);
    let tuned = kinds
        .par_iter()
        .enumerate()
        .map(|(i, &kind)| {
            let s = sub_seed(seed, 2, i);
            let (spec, res) = hpo_search(&ClassifierSpec::new(kind), &train, plan.hpo_evals_per_classifier, s, hpo_deadline)?;
            let member = fit_member(&spec, &train, opts.calibration_folds, opts.calibrate_all, s)?;
            Ok((spec, res, member))
        })
        .collect::<Result<Vec<_>>>()?;
    let hpo_time = t_hpo.elapsed().as_secs_f64();

    let mut specs = Vec::with_capacity(m);
    let mut pool = Vec::with_capacity(m);
    let mut hpo_hist = BTreeMap::new();
    let mut cv = Vec::with_capacity(m);
    for (kind, (spec, res, member)) in kinds.iter().zip(tuned) {
        hpo_hist.insert(kind.name().to_string(), StageHistory::from_result(plan.hpo_evals_per_classifier, res.as_ref()));
        cv.push(res.as_ref().map(|r| 1.0 - r.best_value));
        specs.push(spec);
        pool.push(member);
    }

    // Stage three.
    let t_ens = Instant::now();
    let cs = CompetenceSet::build(&pool, &val, sub_seed(seed, 3, 0))?;
    let mut stage = EnsembleStage {
        pool: &pool,
        train: &train,
        cs: &cs,
        metric: opts.metric,
        pass_through: opts.pass_through,
        seed: sub_seed(seed, 3, 1),
        cache: None,
        stacked: HashMap::new(),
    };
    let (fs, fd) = (opts.force_strategy, opts.force_dfp);
    let result = if plan.ensemble_evals > 0 {
        let space = ensemble_space(&kinds, fs, fd)?;
        let start = EnsembleConfiguration {
            members: vec![true; m],
            strategy: fs.unwrap_or(Strategy::SingleBest),
            k: DEFAULT_K,
            dfp: fd.unwrap_or(false),
        };
        let o = OptimizeOptions::default()
            .with_initial(encode_ensemble(&start, fs, fd))
            .with_deadline(deadline(&plan, plan.ensemble_evals, m));
        optimize(
            &space,
            |c: &Config| stage.evaluate(&decode_ensemble(c, m, fs, fd)?),
            plan.ensemble_evals,
            sub_seed(seed, 3, 2),
            &o,
        )?
    } else {
        strategy_sweep(&mut stage, m, fs, fd)?
    };
    let mut winner = decode_ensemble(&result.best, m, fs, fd)?;
    repair_members(&mut winner, &cs);
    let stacked = stage.stacked_for(&winner)?.cloned();
    let ens_time = t_ens.elapsed().as_secs_f64();

    // Single evaluation on the test split.
    let test_x = pipeline.transform(&split.test.x)?;
    let pred = ensemble_predict(&winner, &pool, &cs, stacked.as_ref(), &test_x)?;
    let metrics = TestMetrics::compute(&pred, &split.test.y)?;

    let report = RunReport {
        report_version: REPORT_VERSION,
        seed,
        pipeline: PipelineReport {
            config: fe_cfg,
            input_width: pipeline.input_width,
            output_width: pipeline.output_width(),
            surrogate_score: fe_search.as_ref().map(|s| s.score),
            warnings,
        },
        pool: specs
            .iter()
            .zip(&pool)
            .zip(&cv)
            .zip(&cs.global_accuracy)
            .map(|(((spec, member), &cv), &va)| PoolEntry {
                spec: spec.clone(),
                calibrated: member.is_calibrated(),
                cv_accuracy: cv,
                validation_accuracy: va,
            })
            .collect(),
        ensemble: EnsembleReport::from_config(&winner, &kinds, opts.metric, 1.0 - result.best_value),
        history: Histories {
            plan,
            feateng: StageHistory::from_result(plan.feateng_evals, fe_search.as_ref().map(|s| &s.search)),
            hpo: hpo_hist,
            ensemble: StageHistory {
                budget: plan.ensemble_evals,
                evaluations: result.history,
            },
        },
        metrics,
        timings: Timings {
            feateng: fe_time,
            hpo: hpo_time,
            ensemble: ens_time,
            total: t0.elapsed().as_secs_f64(),
        },
    };
    let model = AutodessModel {
        kinds,
        pipeline,
        ensemble: EnsembleModel {
            config: winner,
            pool,
            competence: cs,
            stacked,
        },
    };
    Ok(RunOutcome { report, model, split })
}

fn fit_member<F: Real>(
    spec: &ClassifierSpec,
    train: &Dataset<F>,
    folds: usize,
    calibrate_all: bool,
    seed: u64,
) -> Result<PoolMember<F>> {
    if spec.probabilistic() && !calibrate_all {
        PoolMember::raw(fit_base(spec, train, seed)?)
    } else {
        let folds = folds.min(train.len());
        Ok(PoolMember::Calibrated(calibrate_cross_fitted(spec, train, folds, seed)?))
    }
}

/// Zero-budget default: every strategy with all members, k = 7 and no dfp.
fn strategy_sweep<F: Real>(
    stage: &mut EnsembleStage<'_, F>,
    m: usize,
    fs: Option<Strategy>,
    fd: Option<bool>,
) -> Result<OptimizeResult> {
    let strategies: Vec<Strategy> = match fs {
        Some(s) => vec![s],
        None => Strategy::ALL.to_vec(),
    };
    let mut history = Vec::with_capacity(strategies.len());
    for (it, s) in strategies.into_iter().enumerate() {
        let cfg = EnsembleConfiguration {
            members: vec![true; m],
            strategy: s,
            k: DEFAULT_K,
            dfp: fd.unwrap_or(false),
        };
        let (objective, error) = match stage.evaluate(&cfg) {
            Ok(v) => (v, None),
            Err(e) => (1.0, Some(e.to_string())),
        };
        history.push(Observation {
            iteration: it,
            config: encode_ensemble(&cfg, fs, fd),
            objective,
            acquisition: Source::Initial,
            error,
        });
    }
    let best_iteration = (0..history.len())
        .min_by(|&a, &b| history[a].objective.total_cmp(&history[b].objective).then(a.cmp(&b)))
        .unwrap_or(0);
    Ok(OptimizeResult {
        best: history[best_iteration].config.clone(),
        best_value: history[best_iteration].objective,
        best_iteration,
        history,
        hedge: HedgeState::default(),
    })
}
