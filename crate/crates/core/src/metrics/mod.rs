//! Scoring and statistics: accuracy, F1, imbalance ratio, the Wilcoxon
//! signed-rank test and method-comparison summaries.

mod classification;
mod comparison;
pub mod reproduce;
mod wilcoxon;

pub use classification::{accuracy, f1, imbalance_ratio, ConfusionCounts, F1Mode};
pub use comparison::{aggregate_comparison, ComparisonSummary, ComparisonTable, RankMethod};
pub use wilcoxon::{wilcoxon_exact_p, wilcoxon_signed_rank, PairedSamples, WilcoxonResult};
