use std::fmt;

use serde::{Deserialize, Serialize};

use super::{aggregate_comparison, wilcoxon_signed_rank, ComparisonSummary, ComparisonTable, PairedSamples, RankMethod, WilcoxonResult};
use crate::error::{invalid, Result};

/// Bundled per-dataset results: accuracy and F1 of five tools on 42 datasets.
pub const RESULTS_RAW: &str = include_str!("../../fixtures/benchmark_results.csv");
/// Rows where a tool failed and its entry is a placeholder.
pub const RESULTS_FAILURES: &str = include_str!("../../fixtures/benchmark_failures.csv");

pub const ID_COLUMN: &str = "dataset_name";
pub const OURS: &str = "Ours";
pub const BASELINES: [&str; 4] = ["mljarsupervised", "TPOT", "auto-sklearn", "flaml"];

pub fn bundled_table(masked: bool) -> Result<ComparisonTable> {
    let t = ComparisonTable::from_csv(RESULTS_RAW.as_bytes(), ID_COLUMN)?;
    if masked {
        t.with_failure_mask_csv(RESULTS_FAILURES.as_bytes(), ID_COLUMN)
    } else {
        Ok(t)
    }
}

/// One recomputed value against its published target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn near(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} {:>9.5}  target {:.5} ± {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub baseline: String,
    pub metric: String,
    pub result: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub masked: bool,
    pub accuracy: ComparisonSummary,
    pub f1: ComparisonSummary,
    pub tests: Vec<PairTest>,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn test(&self, baseline: &str, metric: &str) -> Option<&WilcoxonResult> {
        self.tests
            .iter()
            .find(|t| t.baseline == baseline && t.metric == metric)
            .map(|t| &t.result)
    }
}

/// Means and competition ranks over the (optionally masked) table, and
/// Wilcoxon tests of every baseline against `Ours` over all rows.
pub fn reproduce(table: &ComparisonTable, masked: bool) -> Result<Reproduction> {
    let acc = table.select_suffix("_acc");
    let f1 = table.select_suffix("_f1");
    let sa = aggregate_comparison(&acc, RankMethod::Competition)?;
    let sf = aggregate_comparison(&f1, RankMethod::Competition)?;
    let mut tests = Vec::new();
    for (metric, t) in [("acc", &acc), ("f1", &f1)] {
        let ours = t.column(OURS).ok_or_else(|| invalid(format!("no `{OURS}_{metric}` column")))?;
        for b in BASELINES {
            let other = t.column(b).ok_or_else(|| invalid(format!("no `{b}_{metric}` column")))?;
            let p = PairedSamples::named(ours.clone(), other, OURS, b)?;
            tests.push(PairTest {
                baseline: b.to_string(),
                metric: metric.to_string(),
                result: wilcoxon_signed_rank(&p)?,
            });
        }
    }
    let ours_f = sf.method_index(OURS).ok_or_else(|| invalid("no Ours column"))?;
    let ours_a = sa.method_index(OURS).ok_or_else(|| invalid("no Ours column"))?;
    let z = |b: &str, m: &str| {
        tests
            .iter()
            .find(|t| t.baseline == b && t.metric == m)
            .map_or(f64::NAN, |t| t.result.z)
    };
    let asl = tests
        .iter()
        .find(|t| t.baseline == "auto-sklearn" && t.metric == "acc")
        .map_or(f64::NAN, |t| t.result.p_value);
    let best_rank = sf.mean_ranks.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Check::near("Ours mean accuracy", sa.means[ours_a], 0.83804, 5e-4),
        Check::near("Ours mean F1", sf.means[ours_f], 0.77722, 5e-4),
        Check::near("Ours mean F1 rank", sf.mean_ranks[ours_f], 2.04762, 0.05),
        Check::near("Wilcoxon z, Ours vs TPOT (F1)", z("TPOT", "f1"), 3.315, 0.15),
        Check::near("Wilcoxon z, Ours vs mljar (F1)", z("mljarsupervised", "f1"), 2.777, 0.15),
        Check::near("Wilcoxon z, Ours vs auto-sklearn (acc)", z("auto-sklearn", "acc"), 1.83, 0.15),
    ];
    checks.push(Check {
        name: "Ours mean F1 rank is the best".into(),
        value: sf.mean_ranks[ours_f],
        target: best_rank,
        tolerance: 0.0,
        pass: sf.mean_ranks[ours_f] <= best_rank,
    });
    checks.push(Check {
        name: "Ours vs auto-sklearn (acc) p > 0.05".into(),
        value: asl,
        target: 0.05,
        tolerance: 0.0,
        pass: asl > 0.05,
    });
    Ok(Reproduction {
        masked,
        accuracy: sa,
        f1: sf,
        tests,
        checks,
    })
}
