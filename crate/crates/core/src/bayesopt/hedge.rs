use rand::Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::Acquisition;

/// Portfolio gains over the three acquisitions, in [`Acquisition::ALL`]
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    pub gains: [f64; 3],
    pub eta: f64,
}

impl Default for HedgeState {
    fn default() -> Self {
        Self {
            gains: [0.0; 3],
            eta: 1.0,
        }
    }
}

impl HedgeState {
    /// `softmax(eta * gains)`.
    pub fn probabilities(&self) -> [f64; 3] {
        let s: Vec<f64> = self.gains.iter().map(|g| self.eta * g).collect();
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        [e[0] / z, e[1] / z, e[2] / z]
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Acquisition {
        let p = self.probabilities();
        let u: f64 = rng.gen();
        if u < p[0] {
            Acquisition::Ei
        } else if u < p[0] + p[1] {
            Acquisition::Lcb
        } else {
            Acquisition::Pi
        }
    }

    /// Accumulates `-mu_i`, the refitted posterior mean at each proposal.
    pub fn reward(&mut self, posterior_means: [f64; 3]) {
        for (g, m) in self.gains.iter_mut().zip(posterior_means) {
            *g -= m;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.gains.iter().all(|g| g.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gains_are_uniform() {
        assert_eq!(HedgeState::default().probabilities(), [1.0 / 3.0; 3]);
    }

    #[test]
    fn dominant_gain() {
        let h = HedgeState {
            gains: [10.0, 0.0, 0.0],
            eta: 1.0,
        };
        let e10 = 10f64.exp();
        assert_abs_diff_eq!(h.probabilities()[0], e10 / (e10 + 2.0), epsilon = 1e-15);
        assert!((h.probabilities()[0] - 0.99991).abs() < 1e-5);
    }

    #[test]
    fn empirical_frequencies() {
        let h = HedgeState {
            gains: [1.0, 0.0, 0.0],
            eta: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let a = h.choose(&mut rng);
            counts[Acquisition::ALL.iter().position(|&b| b == a).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(h.probabilities()) {
            assert!((*c as f64 / 10_000.0 - p).abs() < 0.02);
        }
    }

    #[test]
    fn reward_accumulates() {
        let mut h = HedgeState::default();
        h.reward([0.5, -1.0, 0.0]);
        h.reward([0.5, 0.0, 2.0]);
        assert_eq!(h.gains, [-1.0, 1.0, -2.0]);
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one_and_ignore_shift(
            g in proptest::array::uniform3(-50.0f64..50.0),
            c in -100.0f64..100.0,
        ) {
            let a = HedgeState { gains: g, eta: 1.0 };
            let b = HedgeState { gains: [g[0] + c, g[1] + c, g[2] + c], eta: 1.0 };
            let (pa, pb) = (a.probabilities(), b.probabilities());
            prop_assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..3 {
                prop_assert!((pa[i] - pb[i]).abs() < 1e-9);
            }
        }
    }
}
