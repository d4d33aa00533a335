use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).clamp(1, d.max(1)),
            MaxFeatures::Count(m) => m.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    /// Draw one uniform threshold per feature instead of scanning all cut
    /// points.
    pub random_thresholds: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::All,
            random_thresholds: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
enum Node<F: Real> {
    Leaf { dist: Vec<F> },
    Split { feature: usize, threshold: F, left: usize, right: usize },
}

/// CART classification tree with Gini impurity. Rows with
/// `x[feature] <= threshold` go left; leaves hold class frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<F: Real> {
    nodes: Vec<Node<F>>,
}

struct Candidate<F> {
    feature: usize,
    threshold: F,
    impurity: f64,
}

fn gini_weighted(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let s: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - s / n as f64
}

impl<F: Real> DecisionTree<F> {
    /// Fits on the rows listed in `sample` (repeats allowed).
    pub fn fit<R: Rng + ?Sized>(
        x: &Matrix<F>,
        y: &[usize],
        sample: &[usize],
        n_classes: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow(x, y, sample.to_vec(), 0, n_classes, params, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng + ?Sized>(
        &mut self,
        x: &Matrix<F>,
        y: &[usize],
        idx: Vec<usize>,
        depth: usize,
        k: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> usize {
        let at = self.nodes.len();
        let mut counts = vec![0usize; k];
        idx.iter().for_each(|&i| counts[y[i]] += 1);
        let n = idx.len();
        let dist: Vec<F> = counts
            .iter()
            .map(|&c| if n == 0 { F::zero() } else { F::of_usize(c) / F::of_usize(n) })
            .collect();
        self.nodes.push(Node::Leaf { dist });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let min_leaf = params.min_leaf.max(1);
        if pure || n < 2 * min_leaf || params.max_depth.is_some_and(|m| depth >= m) {
            return at;
        }
        let Some(best) = self.best_split(x, y, &idx, &counts, params, rng) else {
            return at;
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[(i, best.feature)] <= best.threshold);
        let left = self.grow(x, y, li, depth + 1, k, params, rng);
        let right = self.grow(x, y, ri, depth + 1, k, params, rng);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split<R: Rng + ?Sized>(
        &self,
        x: &Matrix<F>,
        y: &[usize],
        idx: &[usize],
        counts: &[usize],
        params: &TreeParams,
        rng: &mut R,
    ) -> Option<Candidate<F>> {
        let d = x.cols();
        let m = params.max_features.resolve(d);
        let mut features: Vec<usize> = (0..d).collect();
        if m < d {
            features.partial_shuffle(rng, m);
            features.truncate(m);
        }
        let min_leaf = params.min_leaf.max(1);
        let n = idx.len();
        let k = counts.len();
        let mut best: Option<Candidate<F>> = None;
        let mut consider = |c: Candidate<F>| {
            if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                best = Some(c);
            }
        };
        for &f in &features {
            if params.random_thresholds {
                let (lo, hi) = idx
                    .iter()
                    .map(|&i| x[(i, f)])
                    .fold((F::infinity(), F::neg_infinity()), |(a, b), v| (a.min(v), b.max(v)));
                if !(lo < hi) {
                    continue;
                }
                let t = lo + (hi - lo) * F::lit(rng.gen::<f64>());
                let t = if t >= hi { lo } else { t };
                let mut left = vec![0usize; k];
                let mut nl = 0;
                for &i in idx {
                    if x[(i, f)] <= t {
                        left[y[i]] += 1;
                        nl += 1;
                    }
                }
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(a, b)| a - b).collect();
                consider(Candidate {
                    feature: f,
                    threshold: t,
                    impurity: gini_weighted(&left, nl) + gini_weighted(&right, n - nl),
                });
            } else {
                let mut order: Vec<usize> = idx.to_vec();
                order.sort_by(|&a, &b| {
                    x[(a, f)]
                        .partial_cmp(&x[(b, f)])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                let mut left = vec![0usize; k];
                let mut right = counts.to_vec();
                for p in 0..n - 1 {
                    let c = y[order[p]];
                    left[c] += 1;
                    right[c] -= 1;
                    let nl = p + 1;
                    let (v, w) = (x[(order[p], f)], x[(order[p + 1], f)]);
                    if !(v < w) || nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let mid = (v + w) * F::lit(0.5);
                    consider(Candidate {
                        feature: f,
                        threshold: if mid < w { mid } else { v },
                        impurity: gini_weighted(&left, nl) + gini_weighted(&right, n - nl),
                    });
                }
            }
        }
        best
    }

    fn leaf(&self, x: &[F]) -> &[F] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Number of nodes visited from the root to the leaf reached by `x`.
    pub fn path_length(&self, x: &[F]) -> usize {
        let mut at = 0;
        let mut len = 1;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x[*feature] <= *threshold { *left } else { *right };
            len += 1;
        }
        len
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        out.copy_from_slice(self.leaf(x));
    }
}

/// Averaged tree ensemble. Member `t` draws from its own generator seeded
/// by `member_seed(seed, t)`; member 0 uses `seed` unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<F: Real> {
    trees: Vec<DecisionTree<F>>,
}

pub(crate) fn member_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl<F: Real> Forest<F> {
    pub fn fit(
        x: &Matrix<F>,
        y: &[usize],
        n_classes: usize,
        n_trees: usize,
        bootstrap: bool,
        params: &TreeParams,
        seed: u64,
    ) -> Self {
        let n = x.rows();
        let all: Vec<usize> = (0..n).collect();
        let trees = (0..n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(member_seed(seed, t));
                let sample: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    all.clone()
                };
                DecisionTree::fit(x, y, &sample, n_classes, params, &mut rng)
            })
            .collect();
        Self { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub(crate) fn scores_into(&self, x: &[F], out: &mut [F]) {
        out.iter_mut().for_each(|v| *v = F::zero());
        for t in &self.trees {
            for (o, &p) in out.iter_mut().zip(t.leaf(x)) {
                *o = *o + p;
            }
        }
        let m = F::of_usize(self.trees.len());
        out.iter_mut().for_each(|v| *v = *v / m);
    }
}
