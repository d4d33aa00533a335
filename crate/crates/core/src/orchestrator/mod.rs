//! Three-stage search: feature pipeline, per-classifier tuning and ensemble
//! strategy selection, followed by a single evaluation on the test split.

mod run;

pub use run::{ensemble_space, objective_ensemble, repair_members, run_autodess, run_autodess_on_split, AutodessModel, RunOutcome};

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayesopt::{Observation, OptimizeResult};
use crate::classifiers::{ClassifierKind, ClassifierSpec};
use crate::dataio::SplitSpec;
use crate::ensemble::{EnsembleConfiguration, Strategy};
use crate::error::{invalid, Error, Result};
use crate::feateng::FeaturePipelineConfig;

pub const REPORT_VERSION: u32 = 1;

/// Evaluation counts per stage and an optional wall-clock cap in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub feateng_evals: usize,
    pub hpo_evals_per_classifier: usize,
    pub ensemble_evals: usize,
    pub wall_clock_cap: Option<f64>,
}

impl Default for BudgetPlan {
    fn default() -> Self {
        Self {
            feateng_evals: 20,
            hpo_evals_per_classifier: 15,
            ensemble_evals: 50,
            wall_clock_cap: None,
        }
    }
}

impl BudgetPlan {
    pub fn new(feateng_evals: usize, hpo_evals_per_classifier: usize, ensemble_evals: usize) -> Self {
        Self {
            feateng_evals,
            hpo_evals_per_classifier,
            ensemble_evals,
            wall_clock_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feateng_evals + self.hpo_evals_per_classifier + self.ensemble_evals == 0 {
            return Err(invalid("budget plan has no evaluations in any stage"));
        }
        if let Some(c) = self.wall_clock_cap {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("wall-clock cap {c} must be positive")));
            }
        }
        Ok(())
    }

    fn total(&self, pool_size: usize) -> usize {
        self.feateng_evals + self.hpo_evals_per_classifier * pool_size + self.ensemble_evals
    }

    /// Share of the wall-clock cap granted to a stage with `evals` evaluations.
    pub(crate) fn stage_seconds(&self, evals: usize, pool_size: usize) -> Option<f64> {
        let cap = self.wall_clock_cap?;
        Some(cap * evals as f64 / self.total(pool_size).max(1) as f64)
    }
}

/// Validation metric minimised in stage three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    F1Macro,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::F1Macro => "f1_macro",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn score(self, pred: &[usize], truth: &[usize]) -> Result<f64> {
        match self {
            Metric::F1Macro => crate::metrics::f1(pred, truth, crate::metrics::F1Mode::Macro),
            Metric::Accuracy => crate::metrics::accuracy(pred, truth),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1_macro" => Ok(Metric::F1Macro),
            "accuracy" => Ok(Metric::Accuracy),
            o => Err(invalid(format!("unknown metric `{o}` (expected f1_macro or accuracy)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub plan: BudgetPlan,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub pool: Vec<ClassifierKind>,
    pub metric: Metric,
    pub calibration_folds: usize,
    /// Calibrates probabilistic members too, not only score-based ones.
    #[serde(default)]
    pub calibrate_all: bool,
    pub pass_through: bool,
    /// Pins stage three to one strategy.
    pub force_strategy: Option<Strategy>,
    /// Pins the dfp flag in stage three.
    pub force_dfp: Option<bool>,
}

impl RunOptions {
    pub fn new(plan: BudgetPlan, seed: u64) -> Self {
        Self {
            plan,
            seed,
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            pool: ClassifierKind::ALL.to_vec(),
            metric: Metric::F1Macro,
            calibration_folds: 5,
            calibrate_all: false,
            pass_through: false,
            force_strategy: None,
            force_dfp: None,
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.train_fraction, self.val_fraction, self.test_fraction, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.split_spec()?;
        if self.pool.is_empty() {
            return Err(invalid("classifier pool is empty"));
        }
        let mut seen = self.pool.clone();
        seen.sort_by_key(|k| k.name());
        seen.dedup();
        if seen.len() != self.pool.len() {
            return Err(invalid("classifier pool lists a kind twice"));
        }
        if self.calibration_folds < 2 {
            return Err(invalid("calibration needs at least 2 folds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: FeaturePipelineConfig,
    pub input_width: usize,
    pub output_width: usize,
    /// Surrogate CV accuracy of the chosen pipeline; absent without a search.
    pub surrogate_score: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub spec: ClassifierSpec,
    pub calibrated: bool,
    /// Best stage-two CV accuracy; absent with a zero tuning budget.
    pub cv_accuracy: Option<f64>,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub members: Vec<String>,
    pub strategy: Strategy,
    pub k: usize,
    pub dfp: bool,
    pub metric: Metric,
    /// Validation score of the chosen configuration under `metric`.
    pub validation_score: f64,
}

impl EnsembleReport {
    pub fn from_config(cfg: &EnsembleConfiguration, kinds: &[ClassifierKind], metric: Metric, score: f64) -> Self {
        Self {
            members: cfg
                .members
                .iter()
                .zip(kinds)
                .filter(|(&on, _)| on)
                .map(|(_, k)| k.name().to_string())
                .collect(),
            strategy: cfg.strategy,
            k: cfg.k,
            dfp: cfg.dfp,
            metric,
            validation_score: score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageHistory {
    pub budget: usize,
    pub evaluations: Vec<Observation>,
}

impl StageHistory {
    fn from_result(budget: usize, r: Option<&OptimizeResult>) -> Self {
        Self {
            budget,
            evaluations: r.map(|r| r.history.clone()).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histories {
    pub plan: BudgetPlan,
    pub feateng: StageHistory,
    pub hpo: BTreeMap<String, StageHistory>,
    pub ensemble: StageHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub n_test: usize,
}

impl TestMetrics {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self> {
        use crate::metrics::{accuracy, f1, F1Mode};
        Ok(Self {
            accuracy: accuracy(pred, truth)?,
            f1_macro: f1(pred, truth, F1Mode::Macro)?,
            f1_weighted: f1(pred, truth, F1Mode::Weighted)?,
            n_test: pred.len(),
        })
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub feateng: f64,
    pub hpo: f64,
    pub ensemble: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub seed: u64,
    pub pipeline: PipelineReport,
    pub pool: Vec<PoolEntry>,
    pub ensemble: EnsembleReport,
    pub history: Histories,
    pub metrics: TestMetrics,
    pub timings: Timings,
}

impl RunReport {
    /// Every field that records a choice made by the search.
    pub fn chosen(&self) -> (FeaturePipelineConfig, Vec<ClassifierSpec>, EnsembleReport) {
        (
            self.pipeline.config,
            self.pool.iter().map(|p| p.spec.clone()).collect(),
            self.ensemble.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
