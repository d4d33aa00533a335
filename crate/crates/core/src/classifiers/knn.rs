use serde::{Deserialize, Serialize};

use crate::linalg::{squared_distance, Matrix};
use crate::scalar::Real;

/// k-nearest-neighbour vote fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Knn<F: Real> {
    k: usize,
    x: Matrix<F>,
    y: Vec<usize>,
}

impl<F: Real> Knn<F> {
    pub fn fit(x: &Matrix<F>, y: &[usize], _n_classes: usize, k: usize) -> Self {
        Self {
            k: k.max(1),
            x: x.clone(),
            y: y.to_vec(),
        }
    }

    /// Indices of the `k` nearest training rows, nearest first; distance ties
    /// go to the lower index.
    pub fn neighbours(&self, q: &[F]) -> Vec<usize> {
        nearest(&self.x, q, self.k)
    }

    pub(crate) fn scores_into(&self, q: &[F], out: &mut [F]) {
        out.iter_mut().for_each(|v| *v = F::zero());
        let nn = self.neighbours(q);
        let w = F::one() / F::of_usize(nn.len());
        for i in nn {
            out[self.y[i]] = out[self.y[i]] + w;
        }
    }
}

/// The `k` rows of `x` closest to `q` in Euclidean distance, ascending, with
/// ties broken by row index. `k` is clamped to the row count.
pub(crate) fn nearest<F: Real>(x: &Matrix<F>, q: &[F], k: usize) -> Vec<usize> {
    let mut d: Vec<(F, usize)> = x.iter_rows().enumerate().map(|(i, r)| (squared_distance(r, q), i)).collect();
    let k = k.min(d.len());
    let cmp = |a: &(F, usize), b: &(F, usize)| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1));
    if k < d.len() && k > 0 {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.truncate(k);
    d.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testdata::uniform;

    #[test]
    fn one_nn_recovers_training_labels() {
        let d = uniform(30, 3, 3, 4);
        let m = Knn::fit(&d.x, &d.y, 3, 1);
        for i in 0..d.len() {
            let mut s = [0.0; 3];
            m.scores_into(d.x.row(i), &mut s);
            assert_eq!(crate::scalar::argmax(&s), d.y[i]);
        }
    }

    #[test]
    fn vote_fractions() {
        let x = Matrix::new(4, 1, vec![0.0, 0.1, 0.2, 5.0]).unwrap();
        let m = Knn::fit(&x, &[0, 0, 1, 1], 2, 3);
        let mut s = [0.0f64; 2];
        m.scores_into(&[0.05], &mut s);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15 && (s[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_matches_full_sort() {
        let d = uniform(50, 4, 2, 9);
        let q = [0.1, -0.2, 0.3, 0.0];
        let mut all: Vec<(f64, usize)> = (0..50).map(|i| (squared_distance(d.x.row(i), &q), i)).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle: Vec<usize> = all[..7].iter().map(|p| p.1).collect();
        assert_eq!(nearest(&d.x, &q, 7), oracle);
    }

    #[test]
    fn ties_go_to_lower_index_and_k_is_clamped() {
        let x = Matrix::new(4, 1, vec![1.0, -1.0, 1.0, 3.0]).unwrap();
        assert_eq!(nearest(&x, &[0.0], 3), vec![0, 1, 2]);
        assert_eq!(nearest(&x, &[0.0], 10).len(), 4);
    }
}
