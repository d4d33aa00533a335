//! Platt scaling of decision scores, one-vs-rest for multiclass.

use serde::{Deserialize, Serialize};

use crate::classifiers::{fit_base, ClassifierSpec, FittedClassifier};
use crate::dataio::{class_counts, kfold_indices, Dataset};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{argmax, Real};

const P_MIN: f64 = 1e-12;
const MAX_ITER: usize = 10_000;
const GRAD_TOL: f64 = 1e-6;

/// Sigmoid `1 / (1 + exp(a·f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
    /// Set when the fit came out with `a > 0`, i.e. larger scores mean the
    /// class is less likely.
    #[serde(default)]
    pub anti_correlated: bool,
}

impl PlattParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            anti_correlated: a > 0.0,
        }
    }
}

pub fn platt_prob(p: &PlattParams, f: f64) -> f64 {
    let z = (p.a * f + p.b).clamp(-500.0, 500.0);
    (1.0 / (1.0 + z.exp())).clamp(P_MIN, 1.0 - P_MIN)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
fn targets(labels: &[bool]) -> Vec<f64> {
    let np = labels.iter().filter(|&&l| l).count() as f64;
    let nn = labels.len() as f64 - np;
    let (hi, lo) = ((np + 1.0) / (np + 2.0), 1.0 / (nn + 2.0));
    labels.iter().map(|&l| if l { hi } else { lo }).collect()
}

/// Mean cross-entropy of the smoothed targets against the sigmoid.
fn objective(f: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    let n = f.len() as f64;
    f.iter()
        .zip(t)
        .map(|(&fi, &ti)| {
            let z = a * fi + b;
            // -log p = softplus(z), -log(1-p) = softplus(-z)
            ti * softplus(z) + (1.0 - ti) * softplus(-z)
        })
        .sum::<f64>()
        / n
}

fn gradient(f: &[f64], t: &[f64], a: f64, b: f64) -> (f64, f64) {
    let n = f.len() as f64;
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&fi, &ti) in f.iter().zip(t) {
        let z = a * fi + b;
        let p = if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        };
        ga += (ti - p) * fi;
        gb += ti - p;
    }
    (ga / n, gb / n)
}

/// Platt's mean negative log-likelihood over smoothed targets, the quantity
/// [`fit_platt`] minimizes.
pub fn platt_objective(scores: &[f64], labels: &[bool], p: &PlattParams) -> f64 {
    objective(scores, &targets(labels), p.a, p.b)
}

/// Maximum-likelihood sigmoid fit by gradient descent with backtracking,
/// started at `(0, log((N- + 1)/(N+ + 1)))`. Stops when the gradient norm
/// drops to 1e-6 or after 10 000 iterations.
pub fn fit_platt(scores: &[f64], labels: &[bool]) -> Result<PlattParams> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|f| !f.is_finite()) {
        return Err(invalid("calibration scores must be finite"));
    }
    let np = labels.iter().filter(|&&l| l).count();
    let nn = labels.len() - np;
    if np == 0 || nn == 0 {
        return Err(Error::SingleClass(1));
    }
    let t = targets(labels);
    let (mut a, mut b) = (0.0, ((nn as f64 + 1.0) / (np as f64 + 1.0)).ln());
    let mut loss = objective(scores, &t, a, b);
    let mut step = 1.0;
    for _ in 0..MAX_ITER {
        let (ga, gb) = gradient(scores, &t, a, b);
        let g2 = ga * ga + gb * gb;
        if g2.sqrt() <= GRAD_TOL {
            break;
        }
        step *= 2.0;
        loop {
            let (na, nb) = (a - step * ga, b - step * gb);
            let l = objective(scores, &t, na, nb);
            if l <= loss - 1e-4 * step * g2 {
                a = na;
                b = nb;
                loss = l;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return Ok(PlattParams::new(a, b));
            }
        }
    }
    Ok(PlattParams::new(a, b))
}

/// A base classifier with one sigmoid per class; outputs are normalized to
/// sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CalibratedClassifier<F: Real> {
    pub base: FittedClassifier<F>,
    pub params: Vec<PlattParams>,
}

impl<F: Real> CalibratedClassifier<F> {
    pub fn n_classes(&self) -> usize {
        self.base.n_classes
    }

    pub fn proba_row(&self, x: &[F]) -> Result<Vec<F>> {
        let s = self.base.scores_row(x)?;
        Ok(normalize(&self.params, &s))
    }

    pub fn predict_proba(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        let s = self.base.decision_scores(x)?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&normalize(&self.params, s.row(i)));
        }
        Ok(out)
    }
}

fn normalize<F: Real>(params: &[PlattParams], scores: &[F]) -> Vec<F> {
    let p: Vec<f64> = params.iter().zip(scores).map(|(pp, &s)| platt_prob(pp, s.as_f64())).collect();
    let total: f64 = p.iter().sum();
    p.into_iter().map(|v| F::lit(v / total)).collect()
}

fn fit_per_class<F: Real>(scores: &Matrix<F>, y: &[usize], k: usize) -> Result<Vec<PlattParams>> {
    (0..k)
        .map(|c| {
            let f: Vec<f64> = scores.column(c).into_iter().map(Real::as_f64).collect();
            let l: Vec<bool> = y.iter().map(|&v| v == c).collect();
            fit_platt(&f, &l)
        })
        .collect()
}

fn require_all_classes(y: &[usize], k: usize) -> Result<()> {
    if let Some(c) = class_counts(y, k).iter().position(|&n| n == 0) {
        return Err(Error::ClassTooSmall {
            class: c,
            count: 0,
            what: "calibration set",
        });
    }
    Ok(())
}

/// One-vs-rest Platt scaling of `base` on a held-out calibration set.
pub fn calibrate_multiclass<F: Real>(base: FittedClassifier<F>, cal: &Dataset<F>) -> Result<CalibratedClassifier<F>> {
    require_all_classes(&cal.y, base.n_classes)?;
    let scores = base.decision_scores(&cal.x)?;
    let params = fit_per_class(&scores, &cal.y, base.n_classes)?;
    Ok(CalibratedClassifier { base, params })
}

/// Fits `spec` on all of `train` and calibrates it on out-of-fold scores
/// from a stratified `folds`-fold split of `train`.
pub fn calibrate_cross_fitted<F: Real>(
    spec: &ClassifierSpec,
    train: &Dataset<F>,
    folds: usize,
    seed: u64,
) -> Result<CalibratedClassifier<F>> {
    let k = train.n_classes;
    require_all_classes(&train.y, k)?;
    let mut oof = Matrix::zeros(train.len(), k);
    for fold in kfold_indices(train.len(), folds, &train.y, seed)? {
        let m = fit_base(spec, &train.subset(&fold.train), seed)?;
        let s = m.decision_scores(&train.x.select_rows(&fold.test))?;
        for (r, &i) in fold.test.iter().enumerate() {
            oof.row_mut(i).copy_from_slice(s.row(r));
        }
    }
    let params = fit_per_class(&oof, &train.y, k)?;
    Ok(CalibratedClassifier {
        base: fit_base(spec, train, seed)?,
        params,
    })
}

/// A pool member: a probabilistic base model used as is, or a calibrated
/// model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", tag = "type", rename_all = "snake_case")]
pub enum PoolMember<F: Real> {
    Raw(FittedClassifier<F>),
    Calibrated(CalibratedClassifier<F>),
}

impl<F: Real> PoolMember<F> {
    /// Wraps a probabilistic model; non-probabilistic kinds must be
    /// calibrated first.
    pub fn raw(m: FittedClassifier<F>) -> Result<Self> {
        if !m.probabilistic() {
            return Err(invalid(format!("{} must be calibrated to join the pool", m.spec.kind)));
        }
        Ok(PoolMember::Raw(m))
    }

    pub fn base(&self) -> &FittedClassifier<F> {
        match self {
            PoolMember::Raw(m) => m,
            PoolMember::Calibrated(c) => &c.base,
        }
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.base().spec
    }

    pub fn is_calibrated(&self) -> bool {
        matches!(self, PoolMember::Calibrated(_))
    }

    pub fn n_classes(&self) -> usize {
        self.base().n_classes
    }

    pub fn n_features(&self) -> usize {
        self.base().n_features
    }

    pub fn proba_row(&self, x: &[F]) -> Result<Vec<F>> {
        match self {
            PoolMember::Raw(m) => m.scores_row(x),
            PoolMember::Calibrated(c) => c.proba_row(x),
        }
    }

    pub fn predict_proba(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        match self {
            PoolMember::Raw(m) => m.decision_scores(x),
            PoolMember::Calibrated(c) => c.predict_proba(x),
        }
    }

    /// Argmax of the member's probabilities, ties to the lowest label.
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter_rows().map(argmax).collect())
    }
}
