use serde::{Deserialize, Serialize};

use crate::dataio::class_counts;
use crate::linalg::Matrix;
use crate::scalar::{softmax_in_place, Real};

/// Gaussian naive Bayes. Classes absent from training get probability 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianNb<F: Real> {
    log_prior: Vec<F>,
    means: Matrix<F>,
    vars: Matrix<F>,
}

impl<F: Real> GaussianNb<F> {
    /// Per-class variances are floored by `var_smoothing` times the largest
    /// feature variance (or `var_smoothing` itself when every feature is
    /// constant).
    pub fn fit(x: &Matrix<F>, y: &[usize], n_classes: usize, var_smoothing: f64) -> Self {
        let d = x.cols();
        let counts = class_counts(y, n_classes);
        let max_var = x.column_variances().into_iter().fold(F::zero(), F::max);
        let eps = F::lit(var_smoothing) * if max_var > F::zero() { max_var } else { F::one() };
        let mut means = Matrix::zeros(n_classes, d);
        let mut vars = Matrix::zeros(n_classes, d);
        for (r, &c) in x.iter_rows().zip(y) {
            for j in 0..d {
                means[(c, j)] = means[(c, j)] + r[j];
            }
        }
        for c in 0..n_classes {
            if counts[c] > 0 {
                let n = F::of_usize(counts[c]);
                means.row_mut(c).iter_mut().for_each(|m| *m = *m / n);
            }
        }
        for (r, &c) in x.iter_rows().zip(y) {
            for j in 0..d {
                let t = r[j] - means[(c, j)];
                vars[(c, j)] = vars[(c, j)] + t * t;
            }
        }
        for c in 0..n_classes {
            let n = F::of_usize(counts[c].max(1));
            vars.row_mut(c).iter_mut().for_each(|v| *v = *v / n + eps);
        }
        let total = F::of_usize(y.len());
        let log_prior = counts
            .iter()
            .map(|&n| if n == 0 { F::neg_infinity() } else { (F::of_usize(n) / total).ln() })
            .collect();
        Self { log_prior, means, vars }
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        let half = F::lit(0.5);
        let log_two_pi = F::lit((2.0 * std::f64::consts::PI).ln());
        for (c, o) in out.iter_mut().enumerate() {
            if !self.log_prior[c].is_finite() {
                *o = F::neg_infinity();
                continue;
            }
            let (m, v) = (self.means.row(c), self.vars.row(c));
            let ll: F = x
                .iter()
                .zip(m.iter().zip(v))
                .map(|(&xi, (&mi, &vi))| {
                    let t = xi - mi;
                    -(log_two_pi + vi.ln() + t * t / vi) * half
                })
                .sum();
            *o = self.log_prior[c] + ll;
        }
        softmax_in_place(out);
    }
}
