//! Base classifier pool: seven from-scratch learners behind one
//! fit / predict / score interface, plus per-classifier hyperparameter search.

mod hpo;
mod knn;
mod linear;
mod logistic;
mod naive_bayes;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hpo::{cv_accuracy, hpo_classifier, hpo_search};
pub use knn::Knn;
pub(crate) use knn::nearest as knn_nearest;
pub use linear::{Perceptron, Ridge, Standardizer};
pub use logistic::Logistic;
pub use naive_bayes::GaussianNb;
pub use tree::{DecisionTree, Forest, MaxFeatures, TreeParams};

use crate::bayesopt::{Config, ConfigurationSpace, Dimension, Value};
use crate::dataio::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{argmax, Real};

pub(crate) const LOGISTIC_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    GaussianNb,
    LogisticRegression,
    DecisionTree,
    BaggedTrees,
    Perceptron,
    RidgeClassifier,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Knn,
        ClassifierKind::GaussianNb,
        ClassifierKind::LogisticRegression,
        ClassifierKind::DecisionTree,
        ClassifierKind::BaggedTrees,
        ClassifierKind::Perceptron,
        ClassifierKind::RidgeClassifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::BaggedTrees => "bagged_trees",
            ClassifierKind::Perceptron => "perceptron",
            ClassifierKind::RidgeClassifier => "ridge_classifier",
        }
    }

    /// Whether decision scores are probability rows.
    pub fn probabilistic(self) -> bool {
        !matches!(self, ClassifierKind::Perceptron | ClassifierKind::RidgeClassifier)
    }

    /// Declared hyperparameter space.
    pub fn space(self) -> ConfigurationSpace {
        let dims = match self {
            ClassifierKind::Knn => vec![Dimension::integer("k", 1, 15)],
            ClassifierKind::GaussianNb => vec![Dimension::log_real("var_smoothing", 1e-9, 1e-3)],
            ClassifierKind::LogisticRegression => vec![Dimension::log_real("l2", 1e-4, 10.0)],
            ClassifierKind::DecisionTree => vec![Dimension::integer("max_depth", 1, 12), Dimension::integer("min_leaf", 1, 8)],
            ClassifierKind::BaggedTrees => vec![Dimension::integer("n", 5, 50)],
            ClassifierKind::Perceptron => vec![Dimension::integer("epochs", 5, 100)],
            ClassifierKind::RidgeClassifier => vec![Dimension::log_real("alpha", 1e-3, 10.0)],
        };
        ConfigurationSpace::new(dims).expect("declared spaces are valid")
    }

    pub fn default_params(self) -> BTreeMap<String, Value> {
        let pairs: Vec<(&str, Value)> = match self {
            ClassifierKind::Knn => vec![("k", Value::Int(5))],
            ClassifierKind::GaussianNb => vec![("var_smoothing", Value::Real(1e-9))],
            ClassifierKind::LogisticRegression => vec![("l2", Value::Real(1.0))],
            ClassifierKind::DecisionTree => vec![("max_depth", Value::Int(12)), ("min_leaf", Value::Int(1))],
            ClassifierKind::BaggedTrees => vec![("n", Value::Int(10))],
            ClassifierKind::Perceptron => vec![("epochs", Value::Int(20))],
            ClassifierKind::RidgeClassifier => vec![("alpha", Value::Real(1.0))],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown classifier kind {s:?}")))
    }
}

/// A classifier kind with concrete hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub params: BTreeMap<String, Value>,
}

impl ClassifierSpec {
    /// Spec with the kind's default hyperparameters.
    pub fn new(kind: ClassifierKind) -> Self {
        Self {
            kind,
            params: kind.default_params(),
        }
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn probabilistic(&self) -> bool {
        self.kind.probabilistic()
    }

    /// Checks names and ranges against the kind's declared space.
    pub fn validate(&self) -> Result<()> {
        let space = self.kind.space();
        if self.params.len() != space.len() {
            return Err(invalid(format!(
                "{} expects parameters {:?}",
                self.kind,
                space.dims().iter().map(Dimension::name).collect::<Vec<_>>()
            )));
        }
        self.to_config().map(|_| ())
    }

    /// Values in the order of the kind's space.
    pub fn to_config(&self) -> Result<Config> {
        let space = self.kind.space();
        let cfg = space
            .dims()
            .iter()
            .map(|d| {
                self.params
                    .get(d.name())
                    .cloned()
                    .ok_or_else(|| invalid(format!("{} is missing parameter {}", self.kind, d.name())))
            })
            .collect::<Result<Config>>()?;
        space.encode(&cfg)?;
        Ok(cfg)
    }

    pub fn from_config(kind: ClassifierKind, cfg: &[Value]) -> Result<Self> {
        let space = kind.space();
        space.encode(cfg)?;
        Ok(Self {
            kind,
            params: space.dims().iter().map(|d| d.name().to_string()).zip(cfg.iter().cloned()).collect(),
        })
    }

    fn int(&self, name: &str) -> Result<usize> {
        self.params
            .get(name)
            .and_then(Value::as_i64)
            .map(|v| v as usize)
            .ok_or_else(|| invalid(format!("{} parameter {name} must be an integer", self.kind)))
    }

    fn real(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| invalid(format!("{} parameter {name} must be a number", self.kind)))
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", tag = "type", rename_all = "snake_case")]
pub enum Model<F: Real> {
    Knn(Knn<F>),
    GaussianNb(GaussianNb<F>),
    Logistic(Logistic<F>),
    Tree(DecisionTree<F>),
    Forest(Forest<F>),
    Perceptron(Perceptron<F>),
    Ridge(Ridge<F>),
}

impl<F: Real> Model<F> {
    fn scores_into(&self, x: &[F], out: &mut [F]) {
        match self {
            Model::Knn(m) => m.scores_into(x, out),
            Model::GaussianNb(m) => m.scores_into(x, out),
            Model::Logistic(m) => m.scores_into(x, out),
            Model::Tree(m) => m.scores_into(x, out),
            Model::Forest(m) => m.scores_into(x, out),
            Model::Perceptron(m) => m.scores_into(x, out),
            Model::Ridge(m) => m.scores_into(x, out),
        }
    }
}

/// A trained base model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FittedClassifier<F: Real> {
    pub spec: ClassifierSpec,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub model: Model<F>,
}

/// Fits `spec` on `train`. Deterministic for a fixed seed.
pub fn fit_base<F: Real>(spec: &ClassifierSpec, train: &Dataset<F>, seed: u64) -> Result<FittedClassifier<F>> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("cannot fit on an empty training set".into()));
    }
    let (x, y, k) = (&train.x, &train.y, train.n_classes);
    let model = match spec.kind {
        ClassifierKind::Knn => Model::Knn(Knn::fit(x, y, k, spec.int("k")?)),
        ClassifierKind::GaussianNb => Model::GaussianNb(GaussianNb::fit(x, y, k, spec.real("var_smoothing")?)),
        ClassifierKind::LogisticRegression => {
            Model::Logistic(Logistic::fit(x, y, k, F::lit(spec.real("l2")?), LOGISTIC_MAX_ITER))
        }
        ClassifierKind::DecisionTree => {
            let params = TreeParams {
                max_depth: Some(spec.int("max_depth")?),
                min_leaf: spec.int("min_leaf")?,
                ..TreeParams::default()
            };
            let all: Vec<usize> = (0..train.len()).collect();
            Model::Tree(DecisionTree::fit(x, y, &all, k, &params, &mut ChaCha8Rng::seed_from_u64(seed)))
        }
        ClassifierKind::BaggedTrees => {
            Model::Forest(Forest::fit(x, y, k, spec.int("n")?, true, &TreeParams::default(), seed))
        }
        ClassifierKind::Perceptron => Model::Perceptron(Perceptron::fit(x, y, k, spec.int("epochs")?, seed)),
        ClassifierKind::RidgeClassifier => Model::Ridge(Ridge::fit(x, y, k, F::lit(spec.real("alpha")?))?),
    };
    Ok(FittedClassifier {
        spec: spec.clone(),
        n_classes: k,
        n_features: train.n_features(),
        n_train: train.len(),
        model,
    })
}

impl<F: Real> FittedClassifier<F> {
    pub fn probabilistic(&self) -> bool {
        self.spec.probabilistic()
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: cols,
            });
        }
        Ok(())
    }

    /// Scores for a single row: probabilities for probabilistic kinds, raw
    /// margins otherwise.
    pub fn scores_row(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_width(x.len())?;
        let mut out = vec![F::zero(); self.n_classes];
        self.model.scores_into(x, &mut out);
        Ok(out)
    }

    /// `n × K` score matrix.
    pub fn decision_scores(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        self.check_width(x.cols())?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for i in 0..x.rows() {
            self.model.scores_into(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    /// Row-wise argmax of the decision scores, ties to the lowest label.
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<usize>> {
        Ok(labels_from_scores(&self.decision_scores(x)?))
    }
}

/// Row-wise argmax with ties to the lowest index.
pub fn labels_from_scores<F: Real>(scores: &Matrix<F>) -> Vec<usize> {
    scores.iter_rows().map(argmax).collect()
}


#[cfg(test)]
mod tests {
    use super::testdata::{blobs, uniform};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn probabilistic_flags() {
        let non: Vec<_> = ClassifierKind::ALL.iter().filter(|k| !k.probabilistic()).collect();
        assert_eq!(non, [&ClassifierKind::Perceptron, &ClassifierKind::RidgeClassifier]);
    }

    #[test]
    fn defaults_are_valid_and_round_trip() {
        for k in ClassifierKind::ALL {
            let s = ClassifierSpec::new(k);
            s.validate().unwrap();
            assert_eq!(ClassifierSpec::from_config(k, &s.to_config().unwrap()).unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<ClassifierSpec>(&json).unwrap(), s);
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
        }
    }

    #[test]
    fn spec_json_shape() {
        let s = ClassifierSpec::new(ClassifierKind::Knn);
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"knn","params":{"k":5}}"#);
    }

    #[test]
    fn invalid_specs_rejected() {
        let d = uniform(20, 2, 2, 1);
        let bad = ClassifierSpec::new(ClassifierKind::Knn).with("k", Value::Int(99));
        assert!(fit_base(&bad, &d, 0).is_err());
        let extra = ClassifierSpec::new(ClassifierKind::Knn).with("z", Value::Int(1));
        assert!(extra.validate().is_err());
        let wrong_type = ClassifierSpec::new(ClassifierKind::RidgeClassifier).with("alpha", Value::Cat("x".into()));
        assert!(wrong_type.validate().is_err());
    }

    #[test]
    fn argmax_labels() {
        let s = Matrix::from_rows(&[[0.2, 0.8], [0.5, 0.5]]).unwrap();
        assert_eq!(labels_from_scores(&s), vec![1, 0]);
    }

    #[test]
    fn labels_match_bruteforce_argmax() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Matrix::from_fn(10, 3, |_, _| rng.gen_range(0..4) as f64 / 4.0);
        for (i, &l) in labels_from_scores(&s).iter().enumerate() {
            let r = s.row(i);
            let mut best = 0;
            for j in 0..3 {
                if r[j] > r[best] {
                    best = j;
                }
            }
            assert_eq!(l, best);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let d = uniform(20, 2, 2, 1);
        for k in ClassifierKind::ALL {
            let m = fit_base(&ClassifierSpec::new(k), &d, 0).unwrap();
            assert!(m.predict(&Matrix::zeros(3, 3)).is_err());
            assert!(m.scores_row(&[0.0]).is_err());
        }
    }

    #[test]
    fn every_kind_learns_blobs() {
        let d = blobs(&[[0.0, 0.0], [4.0, 4.0], [0.0, 4.0]], 20, 0.5, 7);
        for k in ClassifierKind::ALL {
            let m = fit_base(&ClassifierSpec::new(k), &d, 1).unwrap();
            let acc = crate::metrics::accuracy(&m.predict(&d.x).unwrap(), &d.y).unwrap();
            assert!(acc >= 0.95, "{k}: {acc}");
        }
    }

    #[test]
    fn single_precision_fit() {
        let d = blobs(&[[0.0, 0.0], [4.0, 4.0]], 15, 0.5, 2);
        let d32 = Dataset::<f32>::from_matrix(d.x.cast(), d.y.clone(), 2).unwrap();
        for k in ClassifierKind::ALL {
            let m = fit_base(&ClassifierSpec::new(k), &d32, 1).unwrap();
            assert!(crate::metrics::accuracy(&m.predict(&d32.x).unwrap(), &d32.y).unwrap() >= 0.95, "{k}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn predict_is_argmax_and_probabilities_normalized(seed in 0u64..1000, kind in 0usize..7) {
            let kind = ClassifierKind::ALL[kind];
            let d = uniform(40, 3, 3, seed);
            let q = uniform(15, 3, 3, seed + 1);
            let m = fit_base(&ClassifierSpec::new(kind), &d, seed).unwrap();
            let s = m.decision_scores(&q.x).unwrap();
            prop_assert_eq!(s.cols(), 3);
            prop_assert_eq!(m.predict(&q.x).unwrap(), labels_from_scores(&s));
            if kind.probabilistic() {
                for r in s.iter_rows() {
                    prop_assert!(r.iter().all(|&p| (0.0..=1.0).contains(&p)));
                    prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn fit_is_deterministic(seed in 0u64..1000, kind in 0usize..7) {
            let kind = ClassifierKind::ALL[kind];
            let d = uniform(30, 2, 2, seed);
            let a = fit_base(&ClassifierSpec::new(kind), &d, seed).unwrap();
            let b = fit_base(&ClassifierSpec::new(kind), &d, seed).unwrap();
            let (sa, sb) = (a.decision_scores(&d.x).unwrap(), b.decision_scores(&d.x).unwrap());
            prop_assert!(sa.as_slice().iter().zip(sb.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
