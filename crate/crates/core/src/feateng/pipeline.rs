use serde::{Deserialize, Serialize};

use super::{Decomposition, FeaturePipelineConfig, Generator, Scaler, Selector, KBINS};
use crate::dataio::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Per-column `(x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Affine<F: Real> {
    pub offset: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Real> Affine<F> {
    pub fn fit(kind: Scaler, x: &Matrix<F>) -> Self {
        let d = x.cols();
        let nonzero = |s: F| if s > F::zero() && s.is_finite() { s } else { F::one() };
        let (offset, scale) = match kind {
            Scaler::None => (vec![F::zero(); d], vec![F::one(); d]),
            Scaler::Standard => {
                let sd = x.column_variances().into_iter().map(|v| nonzero(v.sqrt())).collect();
                (x.column_means(), sd)
            }
            Scaler::MaxAbs => {
                let m = (0..d)
                    .map(|j| nonzero(x.column(j).into_iter().fold(F::zero(), |a, v| a.max(v.abs()))))
                    .collect();
                (vec![F::zero(); d], m)
            }
            Scaler::Robust => {
                let mut med = Vec::with_capacity(d);
                let mut iqr = Vec::with_capacity(d);
                for j in 0..d {
                    let mut c = x.column(j);
                    c.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                    med.push(quantile_sorted(&c, 0.5));
                    iqr.push(nonzero(quantile_sorted(&c, 0.75) - quantile_sorted(&c, 0.25)));
                }
                (med, iqr)
            }
        };
        Self { offset, scale }
    }

    pub fn apply(&self, x: &Matrix<F>) -> Matrix<F> {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.offset[j]) / self.scale[j])
    }

    pub fn invert(&self, z: &Matrix<F>) -> Matrix<F> {
        Matrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] * self.scale[j] + self.offset[j])
    }
}

/// Linear-interpolated quantile of sorted values.
fn quantile_sorted<F: Real>(v: &[F], q: f64) -> F {
    if v.is_empty() {
        return F::zero();
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = F::lit(pos - lo as f64);
    v[lo] + (v[hi] - v[lo]) * t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "lowercase")]
pub enum GeneratorState<F: Real> {
    /// Originals, squares, then pairwise products `i < j`.
    Polynomial2,
    /// Interior quantile edges per column; the code is the number of edges
    /// at or below the value.
    KBins { edges: Vec<Vec<F>> },
    None,
}

impl<F: Real> GeneratorState<F> {
    fn fit(kind: Generator, x: &Matrix<F>) -> Self {
        match kind {
            Generator::None => GeneratorState::None,
            Generator::Polynomial2 => GeneratorState::Polynomial2,
            Generator::KBins => {
                let edges = (0..x.cols())
                    .map(|j| {
                        let mut c = x.column(j);
                        c.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                        let mut e: Vec<F> = (1..KBINS).map(|b| quantile_sorted(&c, b as f64 / KBINS as f64)).collect();
                        e.dedup();
                        // edges equal to the column minimum would never split anything
                        e.retain(|&v| c.first().is_none_or(|&lo| v > lo));
                        e
                    })
                    .collect();
                GeneratorState::KBins { edges }
            }
        }
    }

    pub fn width(&self, d: usize) -> usize {
        match self {
            GeneratorState::Polynomial2 => 2 * d + d * d.saturating_sub(1) / 2,
            _ => d,
        }
    }

    fn apply(&self, x: &Matrix<F>) -> Matrix<F> {
        let d = x.cols();
        match self {
            GeneratorState::None => x.clone(),
            GeneratorState::KBins { edges } => Matrix::from_fn(x.rows(), d, |i, j| {
                F::of_usize(edges[j].iter().filter(|&&e| e <= x[(i, j)]).count())
            }),
            GeneratorState::Polynomial2 => {
                let w = self.width(d);
                let mut out = Matrix::zeros(x.rows(), w);
                for i in 0..x.rows() {
                    let r = x.row(i);
                    let o = out.row_mut(i);
                    o[..d].copy_from_slice(r);
                    for j in 0..d {
                        o[d + j] = r[j] * r[j];
                    }
                    let mut at = 2 * d;
                    for a in 0..d {
                        for b in a + 1..d {
                            o[at] = r[a] * r[b];
                            at += 1;
                        }
                    }
                }
                out
            }
        }
    }

    fn names(&self, base: &[String]) -> Vec<String> {
        match self {
            GeneratorState::None => base.to_vec(),
            GeneratorState::KBins { .. } => base.iter().map(|n| format!("{n}_bin")).collect(),
            GeneratorState::Polynomial2 => {
                let mut out = base.to_vec();
                out.extend(base.iter().map(|n| format!("{n}^2")));
                for a in 0..base.len() {
                    for b in a + 1..base.len() {
                        out.push(format!("{}*{}", base[a], base[b]));
                    }
                }
                out
            }
        }
    }
}

/// `(x - mean) · components`; the components are matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Projection<F: Real> {
    pub mean: Vec<F>,
    pub components: Matrix<F>,
    pub prefix: String,
}

impl<F: Real> Projection<F> {
    /// PCA centres the data; truncated SVD does not.
    fn fit(x: &Matrix<F>, n: usize, centre: bool, prefix: &str) -> Self {
        let d = x.cols();
        let mean = if centre { x.column_means() } else { vec![F::zero(); d] };
        let mut g = Matrix::zeros(d, d);
        for r in x.iter_rows() {
            for a in 0..d {
                let va = r[a] - mean[a];
                for b in a..d {
                    g[(a, b)] = g[(a, b)] + va * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        let (_, vecs) = symmetric_eigen(&g);
        let idx: Vec<usize> = (0..n).collect();
        Self {
            mean,
            components: vecs.select_cols(&idx),
            prefix: prefix.to_string(),
        }
    }

    pub fn apply(&self, x: &Matrix<F>) -> Matrix<F> {
        let n = self.components.cols();
        let d = self.components.rows();
        Matrix::from_fn(x.rows(), n, |i, k| {
            (0..d).fold(F::zero(), |acc, j| acc + (x[(i, j)] - self.mean[j]) * self.components[(j, k)])
        })
    }

    /// Maps component scores back to the input space.
    pub fn reconstruct(&self, z: &Matrix<F>) -> Matrix<F> {
        let d = self.components.rows();
        Matrix::from_fn(z.rows(), d, |i, j| {
            self.mean[j] + (0..z.cols()).fold(F::zero(), |acc, k| acc + z[(i, k)] * self.components[(j, k)])
        })
    }
}

/// A fitted pipeline. Every statistic comes from the training matrix given
/// to [`fit_feature_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FittedFeaturePipeline<F: Real> {
    pub config: FeaturePipelineConfig,
    pub input_width: usize,
    pub scaler: Affine<F>,
    pub generator: GeneratorState<F>,
    pub decomposition: Option<Projection<F>>,
    /// Kept columns of the union, ascending.
    pub selected: Vec<usize>,
    pub union_width: usize,
    pub feature_names: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn fit_feature_pipeline<F: Real>(cfg: &FeaturePipelineConfig, train: &Dataset<F>) -> Result<FittedFeaturePipeline<F>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("cannot fit a feature pipeline on no rows".into()));
    }
    let d = train.n_features();
    if d == 0 {
        return Err(invalid("cannot fit a feature pipeline on zero columns"));
    }
    let mut warnings = Vec::new();
    let scaler = Affine::fit(cfg.scaler, &train.x);
    let scaled = scaler.apply(&train.x);
    let generator = GeneratorState::fit(cfg.generator, &scaled);
    let mut union = generator.apply(&scaled);
    let mut names = generator.names(&train.feature_names);

    let decomposition = match cfg.decomposition {
        Decomposition::None => None,
        Decomposition::Pca { n } | Decomposition::TruncatedSvd { n } => {
            let eff = n.min(d);
            if eff < n {
                warnings.push(format!("{} clamped to {eff} components for {d} input columns", cfg.decomposition));
            }
            let (centre, prefix) = match cfg.decomposition {
                Decomposition::Pca { .. } => (true, "pc"),
                _ => (false, "svd"),
            };
            let p = Projection::fit(&scaled, eff, centre, prefix);
            union = union.hstack(&p.apply(&scaled))?;
            names.extend((0..eff).map(|k| format!("{prefix}{k}")));
            Some(p)
        }
    };

    let union_width = union.cols();
    let (selected, fallback) = select_columns(cfg.selector, &union, &train.y, train.n_classes);
    if fallback {
        warnings.push("no column passed the variance threshold; kept the most variable one".into());
    }
    let feature_names = selected.iter().map(|&j| names[j].clone()).collect();
    Ok(FittedFeaturePipeline {
        config: *cfg,
        input_width: d,
        scaler,
        generator,
        decomposition,
        selected,
        union_width,
        feature_names,
        warnings,
    })
}

/// Kept union columns, and whether the variance selector had to fall back
/// to the single most variable column.
fn select_columns<F: Real>(sel: Selector, u: &Matrix<F>, y: &[usize], n_classes: usize) -> (Vec<usize>, bool) {
    let w = u.cols();
    match sel {
        Selector::None => ((0..w).collect(), false),
        Selector::Variance { threshold } => {
            let var = u.column_variances();
            let keep: Vec<usize> = (0..w).filter(|&j| var[j].as_f64() > threshold).collect();
            if keep.is_empty() {
                (vec![crate::scalar::argmax(&var)], true)
            } else {
                (keep, false)
            }
        }
        Selector::Percentile { percentile } => {
            let n_keep = ((percentile / 100.0 * w as f64).ceil() as usize).clamp(1, w);
            let f: Vec<f64> = (0..w)
                .map(|j| {
                    let v = anova_f(&u.column(j), y, n_classes);
                    if v.is_nan() {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            let mut order: Vec<usize> = (0..w).collect();
            order.sort_by(|&a, &b| f[b].partial_cmp(&f[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            let mut keep = order[..n_keep].to_vec();
            keep.sort_unstable();
            (keep, false)
        }
    }
}

/// One-way ANOVA F statistic of a column grouped by class label. Classes
/// with no rows are ignored. A column with zero within-class spread scores
/// infinity if the class means differ and 0 otherwise.
pub fn anova_f<F: Real>(col: &[F], y: &[usize], n_classes: usize) -> f64 {
    let n = col.len();
    let mut sum = vec![0.0; n_classes];
    let mut cnt = vec![0usize; n_classes];
    for (&v, &c) in col.iter().zip(y) {
        sum[c] += v.as_f64();
        cnt[c] += 1;
    }
    let groups: Vec<usize> = (0..n_classes).filter(|&c| cnt[c] > 0).collect();
    let k = groups.len();
    if k < 2 || n <= k {
        return 0.0;
    }
    let grand = sum.iter().sum::<f64>() / n as f64;
    let mean: Vec<f64> = (0..n_classes).map(|c| if cnt[c] > 0 { sum[c] / cnt[c] as f64 } else { 0.0 }).collect();
    let ssb: f64 = groups.iter().map(|&c| cnt[c] as f64 * (mean[c] - grand).powi(2)).sum();
    let ssw: f64 = col.iter().zip(y).map(|(&v, &c)| (v.as_f64() - mean[c]).powi(2)).sum();
    let scale = 1e-12 * (1.0 + col.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>());
    if ssw <= scale {
        return if ssb > scale { f64::INFINITY } else { 0.0 };
    }
    (ssb / (k - 1) as f64) / (ssw / (n - k) as f64)
}

impl<F: Real> FittedFeaturePipeline<F> {
    pub fn output_width(&self) -> usize {
        self.selected.len()
    }

    pub fn transform(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        if x.cols() != self.input_width {
            return Err(Error::DimensionMismatch {
                expected: self.input_width,
                got: x.cols(),
            });
        }
        if self.config.is_identity() {
            return Ok(x.clone());
        }
        let scaled = self.scaler.apply(x);
        let mut union = self.generator.apply(&scaled);
        if let Some(p) = &self.decomposition {
            union = union.hstack(&p.apply(&scaled))?;
        }
        if self.selected.len() == union.cols() {
            return Ok(union);
        }
        Ok(union.select_cols(&self.selected))
    }

    /// Transforms the features of `d` and keeps its labels.
    pub fn transform_dataset(&self, d: &Dataset<F>) -> Result<Dataset<F>> {
        let x = self.transform(&d.x)?;
        d.with_features(x, self.feature_names.clone())
    }
}
