use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{dot, solve_linear, Matrix};
use crate::scalar::{argmax, Real};

/// Per-column centring and scaling; constant columns keep scale 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<F: Real> {
    pub mean: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Real> Standardizer<F> {
    pub fn fit(x: &Matrix<F>) -> Self {
        let mean = x.column_means();
        let scale = x
            .column_variances()
            .into_iter()
            .map(|v| if v > F::zero() { v.sqrt() } else { F::one() })
            .collect();
        Self { mean, scale }
    }

    pub fn apply_row(&self, x: &[F], out: &mut [F]) {
        for j in 0..x.len() {
            out[j] = (x[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn apply(&self, x: &Matrix<F>) -> Matrix<F> {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.apply_row(x.row(i), out.row_mut(i));
        }
        out
    }
}

/// Averaged multiclass perceptron on standardized inputs. Scores are raw
/// margins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Perceptron<F: Real> {
    std: Standardizer<F>,
    /// `K × (d + 1)`, bias last.
    w: Matrix<F>,
}

impl<F: Real> Perceptron<F> {
    pub fn fit(x: &Matrix<F>, y: &[usize], n_classes: usize, epochs: usize, seed: u64) -> Self {
        let std = Standardizer::fit(x);
        let xs = std.apply(x);
        let d = x.cols();
        let mut w = Matrix::zeros(n_classes, d + 1);
        let mut avg = Matrix::zeros(n_classes, d + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut steps = 0usize;
        let mut aug = vec![F::one(); d + 1];
        let mut s = vec![F::zero(); n_classes];
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                aug[..d].copy_from_slice(xs.row(i));
                for (c, v) in s.iter_mut().enumerate() {
                    *v = dot(w.row(c), &aug);
                }
                let p = argmax(&s);
                if p != y[i] {
                    for j in 0..=d {
                        w[(y[i], j)] = w[(y[i], j)] + aug[j];
                        w[(p, j)] = w[(p, j)] - aug[j];
                    }
                }
                for (a, b) in avg.as_mut_slice().iter_mut().zip(w.as_slice()) {
                    *a = *a + *b;
                }
                steps += 1;
            }
        }
        if steps > 0 {
            let n = F::of_usize(steps);
            avg.as_mut_slice().iter_mut().for_each(|v| *v = *v / n);
        }
        Self { std, w: avg }
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        let d = x.len();
        let mut aug = vec![F::one(); d + 1];
        self.std.apply_row(x, &mut aug[..d]);
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.w.row(c), &aug);
        }
    }
}

/// One-vs-rest ridge regression on ±1 targets with an unpenalized
/// intercept. Scores are raw margins, one column per class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Ridge<F: Real> {
    /// `d × K`.
    w: Matrix<F>,
    b: Vec<F>,
}

impl<F: Real> Ridge<F> {
    pub fn fit(x: &Matrix<F>, y: &[usize], n_classes: usize, alpha: F) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        let xm = x.column_means();
        let targets = Matrix::from_fn(n, n_classes, |i, c| if y[i] == c { F::one() } else { -F::one() });
        let ym = targets.column_means();
        let xc = Matrix::from_fn(n, d, |i, j| x[(i, j)] - xm[j]);
        let yc = Matrix::from_fn(n, n_classes, |i, c| targets[(i, c)] - ym[c]);
        let xt = xc.transpose();
        let mut a = xt.matmul(&xc)?;
        for j in 0..d {
            a[(j, j)] = a[(j, j)] + alpha;
        }
        let w = solve_linear(&a, &xt.matmul(&yc)?)?;
        let b = (0..n_classes)
            .map(|c| ym[c] - (0..d).map(|j| xm[j] * w[(j, c)]).sum::<F>())
            .collect();
        Ok(Self { w, b })
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.b[c] + (0..x.len()).map(|j| x[j] * self.w[(j, c)]).sum::<F>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eliminate(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn ridge_matches_normal_equations() {
        let rows = [[1.0, 2.0], [2.0, 0.5], [3.0, 3.0], [0.5, 1.0], [4.0, 2.5]];
        let y = [0, 1, 1, 0, 1];
        let alpha = 0.7;
        let x = Matrix::from_rows(&rows).unwrap();
        let m = Ridge::fit(&x, &y, 2, alpha).unwrap();

        // Augmented system with the intercept left unpenalized.
        for c in 0..2 {
            let t: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let mut a = vec![vec![0.0; 3]; 3];
            let mut rhs = vec![0.0; 3];
            for (r, tv) in rows.iter().zip(&t) {
                let z = [r[0], r[1], 1.0];
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] += z[i] * z[j];
                    }
                    rhs[i] += z[i] * tv;
                }
            }
            a[0][0] += alpha;
            a[1][1] += alpha;
            let beta = eliminate(a, rhs);
            for r in &rows {
                let mut s = [0.0f64; 2];
                m.scores_into(r, &mut s);
                let want = beta[0] * r[0] + beta[1] * r[1] + beta[2];
                assert!((s[c] - want).abs() < 1e-10, "{} vs {}", s[c], want);
            }
        }
    }

    #[test]
    fn standardizer_constant_column() {
        let x: Matrix<f64> = Matrix::new(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.scale[1], 1.0);
        let t = s.apply(&x);
        assert_eq!(t.column(1), vec![0.0; 3]);
        assert!((t.column_variances()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perceptron_separates_line() {
        let x = Matrix::new(6, 1, vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let m = Perceptron::fit(&x, &y, 2, 10, 1);
        for (i, &l) in y.iter().enumerate() {
            let mut s = [0.0; 2];
            m.scores_into(x.row(i), &mut s);
            assert_eq!(argmax(&s), l);
        }
    }
}
