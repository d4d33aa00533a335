use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::PoolMember;
use crate::classifiers::knn_nearest;
use crate::dataio::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::scalar::{argmax, Real};

/// Predictions and probabilities of every pool member on a batch of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MemberOutputs<F: Real> {
    n_members: usize,
    /// Row-major `n × members`.
    preds: Vec<usize>,
    /// One `n × K` matrix per member.
    proba: Vec<Matrix<F>>,
}

impl<F: Real> MemberOutputs<F> {
    pub fn compute(pool: &[PoolMember<F>], x: &Matrix<F>) -> Result<Self> {
        let proba = pool.iter().map(|m| m.predict_proba(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_proba(proba, x.rows()))
    }

    fn from_proba(proba: Vec<Matrix<F>>, n: usize) -> Self {
        let m = proba.len();
        let mut preds = vec![0; n * m];
        for (j, p) in proba.iter().enumerate() {
            for i in 0..n {
                preds[i * m + j] = argmax(p.row(i));
            }
        }
        Self {
            n_members: m,
            preds,
            proba,
        }
    }

    /// Builds outputs from per-sample predictions (`preds[i][j]`); missing
    /// probabilities become one-hot rows.
    pub fn from_predictions(preds: &[Vec<usize>], n_classes: usize, proba: Option<Vec<Matrix<F>>>) -> Result<Self> {
        let n = preds.len();
        let m = preds.first().map_or(0, Vec::len);
        if m == 0 || preds.iter().any(|r| r.len() != m) {
            return Err(invalid("every sample needs one prediction per member"));
        }
        if preds.iter().flatten().any(|&c| c >= n_classes) {
            return Err(invalid("prediction outside the label range"));
        }
        let proba = match proba {
            Some(p) => {
                if p.len() != m || p.iter().any(|q| q.rows() != n || q.cols() != n_classes) {
                    return Err(invalid("probability shapes do not match the predictions"));
                }
                p
            }
            None => (0..m)
                .map(|j| Matrix::from_fn(n, n_classes, |i, c| if preds[i][j] == c { F::one() } else { F::zero() }))
                .collect(),
        };
        Ok(Self {
            n_members: m,
            preds: preds.iter().flatten().copied().collect(),
            proba,
        })
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn len(&self) -> usize {
        self.preds.len().checked_div(self.n_members).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn pred(&self, i: usize, j: usize) -> usize {
        self.preds[i * self.n_members + j]
    }

    /// Predictions of all members on row `i`.
    pub fn row_preds(&self, i: usize) -> &[usize] {
        &self.preds[i * self.n_members..(i + 1) * self.n_members]
    }

    pub fn proba(&self, i: usize, j: usize) -> &[F] {
        self.proba[j].row(i)
    }

    pub fn member_proba(&self, j: usize) -> &Matrix<F> {
        &self.proba[j]
    }
}

/// Lloyd's k-means with random restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KMeans<F: Real> {
    pub centroids: Matrix<F>,
    pub assignment: Vec<usize>,
}

impl<F: Real> KMeans<F> {
    /// `clusters` is clamped to the row count. The restart with the lowest
    /// within-cluster sum of squares wins; earlier restarts win ties.
    pub fn fit(x: &Matrix<F>, clusters: usize, restarts: usize, seed: u64) -> Self {
        let n = x.rows();
        let c = clusters.clamp(1, n.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(F, Self)> = None;
        for _ in 0..restarts.max(1) {
            let init: Vec<usize> = if n == 0 { vec![] } else { sample(&mut rng, n, c).into_vec() };
            let mut km = Self {
                centroids: x.select_rows(&init),
                assignment: vec![0; n],
            };
            for _ in 0..100 {
                let changed = km.assign(x);
                km.update(x);
                if !changed {
                    break;
                }
            }
            km.assign(x);
            let inertia = (0..n)
                .map(|i| squared_distance(x.row(i), km.centroids.row(km.assignment[i])))
                .fold(F::zero(), |a, b| a + b);
            if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
                best = Some((inertia, km));
            }
        }
        best.map(|(_, k)| k).unwrap_or(Self {
            centroids: Matrix::zeros(0, x.cols()),
            assignment: vec![],
        })
    }

    fn assign(&mut self, x: &Matrix<F>) -> bool {
        let mut changed = false;
        for i in 0..x.rows() {
            let a = self.nearest(x.row(i));
            if a != self.assignment[i] {
                self.assignment[i] = a;
                changed = true;
            }
        }
        changed
    }

    fn update(&mut self, x: &Matrix<F>) {
        let (c, d) = (self.centroids.rows(), x.cols());
        let mut sums: Matrix<F> = Matrix::zeros(c, d);
        let mut counts = vec![0usize; c];
        for i in 0..x.rows() {
            let a = self.assignment[i];
            counts[a] += 1;
            for j in 0..d {
                sums[(a, j)] = sums[(a, j)] + x[(i, j)];
            }
        }
        for a in 0..c {
            if counts[a] > 0 {
                let n = F::of_usize(counts[a]);
                for j in 0..d {
                    self.centroids[(a, j)] = sums[(a, j)] / n;
                }
            }
        }
    }

    /// Closest centroid, ties to the lower index.
    pub fn nearest(&self, q: &[F]) -> usize {
        let mut best = 0;
        let mut bd = F::infinity();
        for (a, c) in self.centroids.iter_rows().enumerate() {
            let d = squared_distance(c, q);
            if d < bd {
                bd = d;
                best = a;
            }
        }
        best
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.rows()
    }
}

/// Number of k-means clusters used by DES-Clustering.
pub const N_CLUSTERS: usize = 5;
const KMEANS_RESTARTS: usize = 10;

/// Held-out labelled data with every pool member's outputs cached.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CompetenceSet<F: Real> {
    pub x: Matrix<F>,
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub outputs: MemberOutputs<F>,
    pub global_accuracy: Vec<f64>,
    pub clusters: KMeans<F>,
    /// `clusters × members` counts of correct predictions.
    cluster_correct: Vec<Vec<usize>>,
    cluster_size: Vec<usize>,
}

impl<F: Real> CompetenceSet<F> {
    pub fn build(pool: &[PoolMember<F>], dsel: &Dataset<F>, seed: u64) -> Result<Self> {
        if pool.is_empty() {
            return Err(invalid("empty classifier pool"));
        }
        let outputs = MemberOutputs::compute(pool, &dsel.x)?;
        Self::from_outputs(dsel.x.clone(), dsel.y.clone(), dsel.n_classes, outputs, seed)
    }

    pub fn from_outputs(x: Matrix<F>, y: Vec<usize>, n_classes: usize, outputs: MemberOutputs<F>, seed: u64) -> Result<Self> {
        let n = y.len();
        if x.rows() != n || outputs.len() != n {
            return Err(Error::LengthMismatch(x.rows(), n));
        }
        if n == 0 {
            return Err(Error::InsufficientData("empty competence set".into()));
        }
        let m = outputs.n_members();
        let global_accuracy = (0..m)
            .map(|j| (0..n).filter(|&i| outputs.pred(i, j) == y[i]).count() as f64 / n as f64)
            .collect();
        let clusters = KMeans::fit(&x, N_CLUSTERS, KMEANS_RESTARTS, seed);
        let mut cluster_correct = vec![vec![0; m]; clusters.n_clusters()];
        let mut cluster_size = vec![0; clusters.n_clusters()];
        for i in 0..n {
            let a = clusters.assignment[i];
            cluster_size[a] += 1;
            for j in 0..m {
                if outputs.pred(i, j) == y[i] {
                    cluster_correct[a][j] += 1;
                }
            }
        }
        Ok(Self {
            x,
            y,
            n_classes,
            outputs,
            global_accuracy,
            clusters,
            cluster_correct,
            cluster_size,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_members(&self) -> usize {
        self.outputs.n_members()
    }

    #[inline]
    pub fn correct(&self, i: usize, j: usize) -> bool {
        self.outputs.pred(i, j) == self.y[i]
    }

    /// Accuracy of member `j` inside cluster `a`, optionally leaving one
    /// competence sample out. 0 for an empty cluster.
    pub fn cluster_accuracy(&self, a: usize, j: usize, exclude: Option<usize>) -> f64 {
        let (mut hits, mut size) = (self.cluster_correct[a][j], self.cluster_size[a]);
        if let Some(e) = exclude {
            if self.clusters.assignment[e] == a {
                size -= 1;
                if self.correct(e, j) {
                    hits -= 1;
                }
            }
        }
        if size == 0 {
            0.0
        } else {
            hits as f64 / size as f64
        }
    }
}

/// The k competence samples nearest to a query, ascending by distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RegionOfCompetence<F: Real> {
    pub indices: Vec<usize>,
    pub distances: Vec<F>,
}

impl<F: Real> RegionOfCompetence<F> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The nearest `k` entries.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            indices: self.indices[..k.min(self.len())].to_vec(),
            distances: self.distances[..k.min(self.len())].to_vec(),
        }
    }
}

/// Euclidean k-nearest competence samples, distance ties to the lower index.
pub fn region_of_competence<F: Real>(cs: &CompetenceSet<F>, query: &[F], k: usize) -> Result<RegionOfCompetence<F>> {
    if k == 0 || k > cs.len() {
        return Err(invalid(format!("k = {k} outside 1..={}", cs.len())));
    }
    if query.len() != cs.x.cols() {
        return Err(Error::DimensionMismatch {
            expected: cs.x.cols(),
            got: query.len(),
        });
    }
    Ok(region_excluding(cs, query, k, None))
}

/// Region with `k` clamped to what is available, optionally skipping one
/// competence sample (the query itself when scoring on the competence set).
pub(crate) fn region_excluding<F: Real>(cs: &CompetenceSet<F>, query: &[F], k: usize, exclude: Option<usize>) -> RegionOfCompetence<F> {
    let want = k + usize::from(exclude.is_some());
    let mut indices = knn_nearest(&cs.x, query, want);
    if let Some(e) = exclude {
        indices.retain(|&i| i != e);
    }
    indices.truncate(k);
    let distances = indices.iter().map(|&i| squared_distance(cs.x.row(i), query).sqrt()).collect();
    RegionOfCompetence { indices, distances }
}
