use serde::{Deserialize, Serialize};

use super::linear::Standardizer;
use crate::linalg::{dot, Matrix};
use crate::scalar::{softmax_in_place, Real};

/// Multinomial logistic regression with an L2 penalty on the weights (not
/// the intercepts), fitted by gradient descent on standardized inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Logistic<F: Real> {
    std: Standardizer<F>,
    /// `K × (d + 1)`, bias last.
    w: Matrix<F>,
    iterations: usize,
}

impl<F: Real> Logistic<F> {
    /// Minimizes `(Σ -log p(y_i|x_i) + l2/2 ‖W‖²) / n`. The step starts at 1
    /// and halves whenever a step would increase the loss.
    pub fn fit(x: &Matrix<F>, y: &[usize], n_classes: usize, l2: F, max_iter: usize) -> Self {
        let std = Standardizer::fit(x);
        let xs = std.apply(x);
        let d = x.cols();
        let mut w = Matrix::zeros(n_classes, d + 1);
        let (mut loss, mut grad) = loss_grad(&xs, y, &w, l2);
        let mut lr = F::one();
        let tol = F::lit(1e-6);
        let mut iterations = 0;
        'outer: for _ in 0..max_iter {
            let gnorm = grad.as_slice().iter().map(|&g| g * g).sum::<F>().sqrt();
            if gnorm < tol {
                break;
            }
            loop {
                let mut cand = w.clone();
                for (c, g) in cand.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *c = *c - lr * *g;
                }
                let (l, g) = loss_grad(&xs, y, &cand, l2);
                if l <= loss {
                    w = cand;
                    loss = l;
                    grad = g;
                    break;
                }
                lr = lr * F::lit(0.5);
                if lr < F::lit(1e-12) {
                    break 'outer;
                }
            }
            iterations += 1;
        }
        Self { std, w, iterations }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        let d = x.len();
        let mut aug = vec![F::one(); d + 1];
        self.std.apply_row(x, &mut aug[..d]);
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.w.row(c), &aug);
        }
        softmax_in_place(out);
    }
}

fn loss_grad<F: Real>(xs: &Matrix<F>, y: &[usize], w: &Matrix<F>, l2: F) -> (F, Matrix<F>) {
    let (n, d) = (xs.rows(), xs.cols());
    let k = w.rows();
    let mut grad = Matrix::zeros(k, d + 1);
    let mut loss = F::zero();
    let mut p = vec![F::zero(); k];
    let tiny = F::min_positive_value();
    for i in 0..n {
        let r = xs.row(i);
        for (c, pc) in p.iter_mut().enumerate() {
            let wr = w.row(c);
            *pc = dot(&wr[..d], r) + wr[d];
        }
        softmax_in_place(&mut p);
        loss = loss - p[y[i]].max(tiny).ln();
        for c in 0..k {
            let e = p[c] - if c == y[i] { F::one() } else { F::zero() };
            let g = grad.row_mut(c);
            for j in 0..d {
                g[j] = g[j] + e * r[j];
            }
            g[d] = g[d] + e;
        }
    }
    let nf = F::of_usize(n.max(1));
    let half = F::lit(0.5);
    for c in 0..k {
        for j in 0..d {
            let wv = w[(c, j)];
            loss = loss + half * l2 * wv * wv;
            grad[(c, j)] = grad[(c, j)] + l2 * wv;
        }
    }
    grad.as_mut_slice().iter_mut().for_each(|g| *g = *g / nf);
    (loss / nf, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testdata::blobs;
    use crate::scalar::argmax;

    #[test]
    fn separable_blobs_fit_perfectly() {
        let d = blobs(&[[0.0, 0.0], [3.0, 3.0]], 10, 0.3, 3);
        let m = Logistic::fit(&d.x, &d.y, 2, 1.0, 500);
        for i in 0..d.len() {
            let mut s = [0.0; 2];
            m.scores_into(d.x.row(i), &mut s);
            assert_eq!(argmax(&s), d.y[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = blobs(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 5, 0.5, 1);
        let w = Matrix::from_fn(3, 3, |i, j| 0.1 * (i as f64) - 0.2 * (j as f64) + 0.05);
        let (_, g) = loss_grad(&d.x, &d.y, &w, 0.3);
        let h = 1e-6;
        for c in 0..3 {
            for j in 0..3 {
                let mut wp = w.clone();
                wp[(c, j)] += h;
                let mut wm = w.clone();
                wm[(c, j)] -= h;
                let num = (loss_grad(&d.x, &d.y, &wp, 0.3).0 - loss_grad(&d.x, &d.y, &wm, 0.3).0) / (2.0 * h);
                assert!((num - g[(c, j)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn stronger_penalty_shrinks_confidence() {
        let d = blobs(&[[0.0, 0.0], [2.0, 2.0]], 10, 0.8, 5);
        let weak = Logistic::fit(&d.x, &d.y, 2, 1e-4, 500);
        let strong = Logistic::fit(&d.x, &d.y, 2, 10.0, 500);
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        weak.scores_into(&[3.0, 3.0], &mut a);
        strong.scores_into(&[3.0, 3.0], &mut b);
        assert!(a[1] > b[1] && b[1] > 0.5);
    }
}
