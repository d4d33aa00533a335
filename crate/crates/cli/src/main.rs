//! `autodess` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or data failure, 2 usage error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use autodess::dataio::{load_table, FeatureColumn, LoadOptions, Preprocessor, RawTable};
use autodess::ensemble::Strategy;
use autodess::metrics::reproduce::{reproduce, Reproduction, BASELINES, ID_COLUMN, OURS, RESULTS_FAILURES, RESULTS_RAW};
use autodess::metrics::ComparisonTable;
use autodess::orchestrator::{Metric, TestMetrics, REPORT_VERSION};
use autodess::{run_autodess, AutodessModel, BudgetPlan, RunOptions, RunReport};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "autodess", version, about = "Staged AutoML search over feature pipelines, tuned classifiers and ensembles")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "AUTODESS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the search on a CSV file and write a report plus a model file
    Fit(FitArgs),
    /// Score a saved model on a CSV file with the same schema
    Evaluate(EvaluateArgs),
    /// Recompute the comparison statistics from the bundled result table
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Report path; the model goes next to it as `<stem>.model.json`
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    feateng_evals: usize,
    #[arg(long, default_value_t = 15)]
    hpo_evals: usize,
    #[arg(long, default_value_t = 50)]
    ensemble_evals: usize,
    /// Soft wall-clock cap in seconds, shared across stages
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value = "f1_macro")]
    metric: Metric,
    /// Pin the ensemble strategy (e.g. KNORA-E, StackedGeneralization)
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Pin frienemy pruning on or off
    #[arg(long)]
    dfp: Option<bool>,
    /// Calibrate probabilistic members as well
    #[arg(long)]
    calibrate_all: bool,
    /// Feed the original features to the stacking meta-learner too
    #[arg(long)]
    pass_through: bool,
    #[arg(long)]
    missing_token: Option<String>,
    /// Also write the held-out test rows as CSV
    #[arg(long)]
    export_test: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Report written by `fit`
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Model file; defaults to the sibling of the report
    #[arg(long)]
    model: Option<PathBuf>,
    /// Must match the label the model was fitted with
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    missing_token: Option<String>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Result table CSV (defaults to the bundled one)
    #[arg(long)]
    table: Option<PathBuf>,
    /// Failure mask CSV (defaults to the bundled one)
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Keep failed entries in the means and ranks and report the difference
    #[arg(long)]
    no_mask: bool,
    /// Print the full result as JSON instead of text
    #[arg(long)]
    json: bool,
}

/// Everything `evaluate` needs to score raw CSV rows.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    report_version: u32,
    preprocessor: Preprocessor,
    model: AutodessModel,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<autodess::Error> for Failure {
    fn from(e: autodess::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn require_file(p: &Path, flag: &str) -> CmdResult {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag} {}: no such file", p.display())))
    }
}

fn load_options(label: &str, missing: &Option<String>) -> LoadOptions {
    let o = LoadOptions::new(label);
    match missing {
        Some(t) => o.with_missing_token(t.clone()),
        None => o,
    }
}

fn model_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    report.with_file_name(format!("{stem}.model.json"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_table(path: &Path, t: &RawTable) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    t.write_csv(BufWriter::new(f))?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    require_file(&a.data, "--data")?;
    let mut plan = BudgetPlan::new(a.feateng_evals, a.hpo_evals, a.ensemble_evals);
    plan.wall_clock_cap = a.time_limit;
    let mut opts = RunOptions::new(plan, a.seed);
    opts.metric = a.metric;
    opts.force_strategy = a.strategy;
    opts.force_dfp = a.dfp;
    opts.calibrate_all = a.calibrate_all;
    opts.pass_through = a.pass_through;
    opts.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let table = load_table(&a.data, &load_options(&a.label, &a.missing_token))
        .with_context(|| format!("reading {}", a.data.display()))?;
    let (pre, data) = Preprocessor::fit::<f64>(&table, &a.label)?;
    let out = run_autodess(&data, &opts)?;

    write_json(&a.out, &out.report)?;
    let mp = model_path(&a.out);
    write_json(
        &mp,
        &ModelFile {
            report_version: REPORT_VERSION,
            preprocessor: pre,
            model: out.model,
        },
    )?;
    if let Some(p) = &a.export_test {
        write_table(p, &table.select_rows(&out.split.test_idx))?;
    }
    print_fit_summary(&out.report, &a.out, &mp);
    Ok(())
}

fn print_fit_summary(r: &RunReport, report: &Path, model: &Path) {
    let e = &r.ensemble;
    let members: Vec<&str> = e.members.iter().map(String::as_str).collect();
    println!("pipeline   {}", r.pipeline.config);
    println!("ensemble   {} (k={}, dfp={}) over [{}]", e.strategy, e.k, e.dfp, members.join(", "));
    println!("validation {} {:.4}", e.metric.name(), e.validation_score);
    println!(
        "test       accuracy {:.4}  f1_macro {:.4}  f1_weighted {:.4}  (n={})",
        r.metrics.accuracy, r.metrics.f1_macro, r.metrics.f1_weighted, r.metrics.n_test
    );
    println!("wrote {} and {}", report.display(), model.display());
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    require_file(&a.report, "--report")?;
    require_file(&a.data, "--data")?;
    let mp = a.model.clone().unwrap_or_else(|| model_path(&a.report));
    require_file(&mp, "--model")?;

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&a.report).context("reading report")?)
        .context("report is not valid JSON")?;
    let mf: ModelFile = serde_json::from_str(&fs::read_to_string(&mp).context("reading model")?)
        .with_context(|| format!("{} is not a model file", mp.display()))?;
    if report.get("report_version").and_then(|v| v.as_u64()) != Some(u64::from(mf.report_version))
        || mf.report_version != REPORT_VERSION
    {
        return Err(anyhow!("report and model versions do not match this build (expected {REPORT_VERSION})").into());
    }
    let label = a.label.as_deref().unwrap_or(&mf.preprocessor.label_column);
    if label != mf.preprocessor.label_column {
        return Err(anyhow!("model was fitted with label `{}`, not `{label}`", mf.preprocessor.label_column).into());
    }
    let table = load_table(&a.data, &load_options(label, &a.missing_token))
        .with_context(|| format!("reading {}", a.data.display()))?;
    check_schema(&mf.preprocessor, &table)?;
    let data = mf.preprocessor.apply::<f64>(&table).context("schema mismatch")?;
    let pred = mf.model.predict(&data.x).context("schema mismatch")?;
    let m = TestMetrics::compute(&pred, &data.y)?;
    println!("accuracy {}", m.accuracy);
    println!("f1_macro {}", m.f1_macro);
    println!("f1_weighted {}", m.f1_weighted);
    println!("n {}", m.n_test);
    Ok(())
}

/// Column names must match the fitted schema exactly, ignoring order.
fn check_schema(pre: &Preprocessor, t: &RawTable) -> anyhow::Result<()> {
    let mut want: Vec<String> = pre
        .features
        .iter()
        .map(|f| match f {
            FeatureColumn::Numeric { name, .. } | FeatureColumn::Categorical { name, .. } => name.clone(),
        })
        .collect();
    want.push(pre.label_column.clone());
    let mut have: Vec<String> = t.columns.iter().map(|c| c.name.clone()).collect();
    want.sort();
    have.sort();
    if want != have {
        bail!("schema mismatch: expected columns [{}], found [{}]", want.join(", "), have.join(", "));
    }
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> CmdResult {
    let raw = match &a.table {
        Some(p) => fs::read_to_string(p).with_context(|| format!("result table {}", p.display()))?,
        None => RESULTS_RAW.to_string(),
    };
    let mask = match &a.mask {
        Some(p) => fs::read_to_string(p).with_context(|| format!("failure mask {}", p.display()))?,
        None => RESULTS_FAILURES.to_string(),
    };
    let table = ComparisonTable::from_csv(raw.as_bytes(), ID_COLUMN)?;
    let masked = table.clone().with_failure_mask_csv(mask.as_bytes(), ID_COLUMN)?;
    let r = if a.no_mask { reproduce(&table, false)? } else { reproduce(&masked, true)? };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).map_err(anyhow::Error::from)?);
        return Ok(());
    }
    print_reproduction(&r);
    if a.no_mask {
        print_mask_effect(&reproduce(&masked, true)?, &r);
    }
    Ok(())
}

/// Lists how the means move when failed entries are kept.
fn print_mask_effect(masked: &Reproduction, unmasked: &Reproduction) {
    println!();
    println!("failed entries included; change against the masked table:");
    let mut any = false;
    for (name, m, u) in [("acc", &masked.accuracy, &unmasked.accuracy), ("f1", &masked.f1, &unmasked.f1)] {
        for (i, method) in u.methods.iter().enumerate() {
            let Some(j) = m.method_index(method) else { continue };
            let extra = u.counts[i].saturating_sub(m.counts[j]);
            if extra > 0 {
                any = true;
                println!(
                    "  {:<18} {:<4} mean {:.5} -> {:.5} ({:+.5}) with {} failed rows",
                    method,
                    name,
                    m.means[j],
                    u.means[i],
                    u.means[i] - m.means[j],
                    extra
                );
            }
        }
    }
    if !any {
        println!("  none; the mask removes no entries");
    }
}

fn print_reproduction(r: &Reproduction) {
    println!("failure mask: {}", if r.masked { "applied" } else { "not applied" });
    println!();
    println!("{:<18} {:>9} {:>9} {:>9} {:>9}", "method", "mean acc", "rank acc", "mean f1", "rank f1");
    for (i, m) in r.accuracy.methods.iter().enumerate() {
        let j = r.f1.method_index(m).unwrap_or(i);
        println!(
            "{:<18} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            m, r.accuracy.means[i], r.accuracy.mean_ranks[i], r.f1.means[j], r.f1.mean_ranks[j]
        );
    }
    println!();
    println!("Wilcoxon signed-rank, {OURS} against each baseline");
    println!("{:<18} {:<6} {:>8} {:>9} {:>5}", "baseline", "metric", "z", "p", "n");
    for metric in ["acc", "f1"] {
        for b in BASELINES {
            if let Some(t) = r.test(b, metric) {
                println!("{:<18} {:<6} {:>8.3} {:>9.5} {:>5}", b, metric, t.z, t.p_value, t.n_used);
            }
        }
    }
    println!();
    for c in &r.checks {
        println!("{c}");
    }
    let failed = r.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks within tolerance", r.checks.len());
    } else {
        println!("{failed} of {} checks outside tolerance", r.checks.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn model_sits_next_to_report() {
        assert_eq!(model_path(Path::new("out/run.json")), PathBuf::from("out/run.model.json"));
        assert_eq!(model_path(Path::new("r")), PathBuf::from("r.model.json"));
    }

    #[test]
    fn fit_defaults() {
        let cli = Cli::try_parse_from(["autodess", "fit", "--data", "d.csv", "--label", "y"]).unwrap();
        let Command::Fit(a) = cli.command else { panic!("not fit") };
        assert_eq!(a.seed, 42);
        assert_eq!((a.feateng_evals, a.hpo_evals, a.ensemble_evals), (20, 15, 50));
        assert_eq!(a.metric, Metric::F1Macro);
        assert!(a.strategy.is_none() && a.dfp.is_none());
    }

    #[test]
    fn strategy_and_metric_parse() {
        let cli = Cli::try_parse_from([
            "autodess", "fit", "--data", "d", "--label", "y", "--strategy", "knora-e", "--metric", "accuracy", "--dfp", "false",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else { panic!("not fit") };
        assert_eq!(a.strategy, Some(Strategy::KnoraE));
        assert_eq!(a.metric, Metric::Accuracy);
        assert_eq!(a.dfp, Some(false));
    }
}
