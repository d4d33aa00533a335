use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{squared_distance, Cholesky, Matrix};
use crate::scalar::Real;

/// Matérn-5/2 kernel hyperparameters, in standardized-target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KernelParams<F: Real> {
    pub length_scale: F,
    pub signal_variance: F,
    pub noise_variance: F,
}

impl<F: Real> KernelParams<F> {
    /// Kernel value at Euclidean distance `r`.
    pub fn kernel(&self, r: F) -> F {
        let s = F::lit(5.0f64.sqrt()) * r / self.length_scale;
        self.signal_variance * (F::one() + s + s * s / F::lit(3.0)) * (-s).exp()
    }

    /// The 5 × 5 × 3 search grid: log-spaced length-scales in [0.05, 2],
    /// log-spaced signal variances in [0.25, 4], three noise levels.
    pub fn grid() -> Vec<Self> {
        let logspace = |lo: f64, hi: f64| -> Vec<f64> {
            (0..5)
                .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / 4.0).exp())
                .collect()
        };
        let mut out = Vec::with_capacity(75);
        for &l in &logspace(0.05, 2.0) {
            for &s in &logspace(0.25, 4.0) {
                for &n in &[1e-6, 1e-4, 1e-2] {
                    out.push(Self {
                        length_scale: F::lit(l),
                        signal_variance: F::lit(s),
                        noise_variance: F::lit(n),
                    });
                }
            }
        }
        out
    }
}

/// Gaussian-process regressor with zero prior mean over standardized
/// targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianProcess<F: Real> {
    x: Matrix<F>,
    y: Vec<F>,
    y_mean: F,
    y_scale: F,
    params: KernelParams<F>,
    jitter: F,
    chol: Cholesky<F>,
    alpha: Vec<F>,
}

impl<F: Real> GaussianProcess<F> {
    /// Fits with hyperparameters chosen by maximum log marginal likelihood
    /// over [`KernelParams::grid`]. Ties keep the first grid cell.
    pub fn fit(x: &Matrix<F>, y: &[F]) -> Result<Self> {
        let mut best: Option<Self> = None;
        for p in KernelParams::grid() {
            let gp = Self::fit_with(x, y, p)?;
            if best
                .as_ref()
                .is_none_or(|b| gp.log_marginal_likelihood() > b.log_marginal_likelihood())
            {
                best = Some(gp);
            }
        }
        Ok(best.expect("grid is nonempty"))
    }

    /// Fits with fixed hyperparameters.
    pub fn fit_with(x: &Matrix<F>, y: &[F], params: KernelParams<F>) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::InsufficientData("GP needs at least one observation".into()));
        }
        if y.len() != n {
            return Err(Error::LengthMismatch(n, y.len()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("GP inputs must be finite"));
        }
        let nf = F::of_usize(n);
        let y_mean = y.iter().copied().sum::<F>() / nf;
        let var = y.iter().map(|&v| (v - y_mean) * (v - y_mean)).sum::<F>() / nf;
        let y_scale = if var > F::zero() { var.sqrt() } else { F::one() };
        let ys: Vec<F> = y.iter().map(|&v| (v - y_mean) / y_scale).collect();

        let mut k = Matrix::from_fn(n, n, |i, j| params.kernel(squared_distance(x.row(i), x.row(j)).sqrt()));
        let base = params.noise_variance;
        let mut jitter = F::zero();
        let step = F::lit(1e-10).max(F::epsilon()) * params.signal_variance;
        let chol = loop {
            for i in 0..n {
                k[(i, i)] = params.signal_variance + base + jitter;
            }
            match Cholesky::factor(&k) {
                Ok(c) => break c,
                Err(_) if jitter < params.signal_variance * F::lit(1e6) => {
                    jitter = if jitter == F::zero() { step } else { jitter * F::lit(10.0) };
                }
                Err(e) => return Err(e),
            }
        };
        let alpha = chol.solve(&ys);
        Ok(Self {
            x: x.clone(),
            y: ys,
            y_mean,
            y_scale,
            params,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn params(&self) -> KernelParams<F> {
        self.params
    }

    /// Diagonal jitter that was needed on top of the noise variance.
    pub fn jitter(&self) -> F {
        self.jitter
    }

    pub fn n_observations(&self) -> usize {
        self.x.rows()
    }

    /// Standard deviation used to standardize the targets (1 for constant
    /// targets).
    pub fn y_scale(&self) -> F {
        self.y_scale
    }

    pub fn y_mean(&self) -> F {
        self.y_mean
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> F {
        let n = F::of_usize(self.y.len());
        let fit: F = self.y.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum();
        -F::lit(0.5) * fit - F::lit(0.5) * self.chol.log_det()
            - F::lit(0.5) * n * F::lit((2.0 * std::f64::consts::PI).ln())
    }

    /// Posterior mean and standard deviation of the latent function, in the
    /// original target units.
    pub fn posterior(&self, x: &[F]) -> Result<(F, F)> {
        let (m, s) = self.posterior_standardized(x)?;
        Ok((self.y_mean + self.y_scale * m, self.y_scale * s))
    }

    /// Posterior in standardized units (prior mean 0, prior variance equal to
    /// the signal variance).
    pub fn posterior_standardized(&self, x: &[F]) -> Result<(F, F)> {
        if x.len() != self.x.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.cols(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("GP query must be finite"));
        }
        let ks: Vec<F> = self
            .x
            .iter_rows()
            .map(|r| self.params.kernel(squared_distance(r, x).sqrt()))
            .collect();
        let mean = ks.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum();
        let v = self.chol.solve_lower(&ks);
        let var = self.params.signal_variance - v.iter().map(|&t| t * t).sum::<F>();
        Ok((mean, var.max(F::zero()).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn noiseless() -> KernelParams<f64> {
        KernelParams {
            length_scale: 0.3,
            signal_variance: 1.0,
            noise_variance: 1e-12,
        }
    }

    fn col(xs: &[f64]) -> Matrix<f64> {
        Matrix::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn matern(r: f64, l: f64, s2: f64) -> f64 {
        let a = 5f64.sqrt() * r / l;
        s2 * (1.0 + a + a * a / 3.0) * (-a).exp()
    }

    fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
            }
        }
        inv
    }

    #[test]
    fn interpolates_observations() {
        let xs = [0.1, 0.4, 0.55, 0.9];
        let ys = [1.0, -2.0, 0.5, 3.0];
        let gp = GaussianProcess::fit_with(&col(&xs), &ys, noiseless()).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            let (m, s) = gp.posterior(&[*x]).unwrap();
            assert_abs_diff_eq!(m, y, epsilon = 1e-6);
            assert!(s <= 1e-3);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let gp = GaussianProcess::fit_with(&col(&[0.1, 0.2, 0.3]), &[1.0, 2.0, 4.0], noiseless()).unwrap();
        let (m, s) = gp.posterior_standardized(&[50.0]).unwrap();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-9);
        assert!((s * s - 1.0).abs() < 0.01);
        let (m, _) = gp.posterior(&[50.0]).unwrap();
        assert_abs_diff_eq!(m, 7.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn matches_dense_three_point_solve() {
        let p = KernelParams {
            length_scale: 0.5,
            signal_variance: 1.5,
            noise_variance: 1e-4,
        };
        let xs = [0.0, 0.3, 1.0];
        let ys = [0.2, 1.0, -0.4];
        let gp = GaussianProcess::fit_with(&col(&xs), &ys, p).unwrap();

        let mean = ys.iter().sum::<f64>() / 3.0;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let yz: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = matern((xs[i] - xs[j]).abs(), 0.5, 1.5) + if i == j { 1e-4 } else { 0.0 };
            }
        }
        let kinv = inverse3(k);
        for q in [0.15, 0.6, 2.0] {
            let ks: Vec<f64> = xs.iter().map(|x| matern((x - q).abs(), 0.5, 1.5)).collect();
            let mut mu = 0.0;
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    mu += ks[i] * kinv[i][j] * yz[j];
                    quad += ks[i] * kinv[i][j] * ks[j];
                }
            }
            let (m, s) = gp.posterior_standardized(&[q]).unwrap();
            assert_abs_diff_eq!(m, mu, epsilon = 1e-8);
            assert_abs_diff_eq!(s, (1.5 - quad).max(0.0).sqrt(), epsilon = 1e-8);
        }
    }

    #[test]
    fn single_observation() {
        let gp = GaussianProcess::fit(&col(&[0.5]), &[3.0]).unwrap();
        let (m, _) = gp.posterior(&[0.5]).unwrap();
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-9);
        let (m, s) = gp.posterior_standardized(&[40.0]).unwrap();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-9);
        assert!(s > 0.4);
    }

    #[test]
    fn constant_targets_give_constant_mean() {
        let gp = GaussianProcess::fit(&col(&[0.1, 0.5, 0.8]), &[2.5, 2.5, 2.5]).unwrap();
        for q in [0.0, 0.3, 0.5, 7.0] {
            assert_abs_diff_eq!(gp.posterior(&[q]).unwrap().0, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicate_rows_are_absorbed() {
        let p = KernelParams {
            length_scale: 0.5,
            signal_variance: 1.0,
            noise_variance: 0.0,
        };
        let gp = GaussianProcess::fit_with(&col(&[0.2, 0.2, 0.7]), &[1.0, 1.0, 0.0], p).unwrap();
        assert!(gp.jitter() > 0.0);
        assert!(gp.posterior(&[0.2]).unwrap().0.is_finite());
    }

    #[test]
    fn grid_choice_maximizes_likelihood() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin() + 0.5 * x).collect();
        let x = col(&xs);
        let gp = GaussianProcess::fit(&x, &ys).unwrap();

        let mean = ys.iter().sum::<f64>() / 8.0;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
        let yz: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
        let lml = |p: &KernelParams<f64>| {
            let k = Matrix::from_fn(8, 8, |i, j| {
                matern((xs[i] - xs[j]).abs(), p.length_scale, p.signal_variance)
                    + if i == j { p.noise_variance } else { 0.0 }
            });
            let alpha = crate::linalg::solve_linear(&k, &Matrix::new(8, 1, yz.clone()).unwrap()).unwrap();
            let fit: f64 = (0..8).map(|i| yz[i] * alpha[(i, 0)]).sum();
            let logdet = Cholesky::factor(&k).unwrap().log_det();
            -0.5 * fit - 0.5 * logdet - 4.0 * (2.0 * std::f64::consts::PI).ln()
        };
        let best = KernelParams::grid().iter().map(lml).fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(lml(&gp.params()), best, epsilon = 1e-9);
        assert_abs_diff_eq!(gp.log_marginal_likelihood(), best, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GaussianProcess::fit(&col(&[]), &[]).is_err());
        assert!(GaussianProcess::fit(&col(&[0.1]), &[f64::NAN]).is_err());
        let gp = GaussianProcess::fit(&col(&[0.1]), &[1.0]).unwrap();
        assert!(gp.posterior(&[f64::INFINITY]).is_err());
        assert!(gp.posterior(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x = Matrix::<f32>::new(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let gp = GaussianProcess::fit(&x, &[1.0f32, 0.0, 1.0]).unwrap();
        let (m, s) = gp.posterior(&[0.5]).unwrap();
        assert!((m - 0.0).abs() < 0.05 && s >= 0.0);
    }

    proptest! {
        #[test]
        fn adding_a_point_shrinks_its_variance(
            xs in proptest::collection::vec(0.0f64..1.0, 2..6),
            q in 0.0f64..1.0,
        ) {
            prop_assume!(xs.iter().all(|x| (x - q).abs() > 0.02));
            let p = noiseless();
            let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let before = GaussianProcess::fit_with(&col(&xs), &ys, p).unwrap();
            let mut xs2 = xs.clone();
            xs2.push(q);
            let mut ys2 = ys.clone();
            ys2.push(q * q);
            let after = GaussianProcess::fit_with(&col(&xs2), &ys2, p).unwrap();
            let s0 = before.posterior_standardized(&[q]).unwrap().1;
            let s1 = after.posterior_standardized(&[q]).unwrap().1;
            prop_assert!(s1 < s0);
        }

        #[test]
        fn mean_shifts_with_targets(
            ys in proptest::collection::vec(-5.0f64..5.0, 4),
            shift in -100.0f64..100.0,
            q in 0.0f64..1.0,
        ) {
            let x = col(&[0.0, 0.3, 0.6, 0.9]);
            let a = GaussianProcess::fit(&x, &ys).unwrap();
            let shifted: Vec<f64> = ys.iter().map(|y| y + shift).collect();
            let b = GaussianProcess::fit(&x, &shifted).unwrap();
            let (ma, sa) = a.posterior(&[q]).unwrap();
            let (mb, sb) = b.posterior(&[q]).unwrap();
            prop_assert!((mb - ma - shift).abs() < 1e-6 * (1.0 + shift.abs()));
            prop_assert!((sa - sb).abs() < 1e-6);
        }
    }
}
