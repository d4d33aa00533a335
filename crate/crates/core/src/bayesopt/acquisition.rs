use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Exploration constant used by LCB and PI.
pub const KAPPA: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Acquisition {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "LCB")]
    Lcb,
    #[serde(rename = "PI")]
    Pi,
}

impl Acquisition {
    pub const ALL: [Acquisition; 3] = [Acquisition::Ei, Acquisition::Lcb, Acquisition::Pi];

    pub fn name(self) -> &'static str {
        match self {
            Acquisition::Ei => "EI",
            Acquisition::Lcb => "LCB",
            Acquisition::Pi => "PI",
        }
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[max(best - Y, 0)]` for `Y ~ N(mu, sigma²)`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let gap = best - mu;
    if sigma <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// `Φ((best - mu)/sigma - kappa)`; a step function when `sigma = 0`.
pub fn probability_of_improvement(mu: f64, sigma: f64, best: f64, kappa: f64) -> f64 {
    if sigma <= 0.0 {
        return if best - mu > 0.0 { 1.0 } else { 0.0 };
    }
    normal_cdf((best - mu) / sigma - kappa)
}

pub fn lower_confidence_bound(mu: f64, sigma: f64, kappa: f64) -> f64 {
    mu - kappa * sigma
}

/// Proposal score, lower is better: `-EI`, `mu - kappa*sigma`, `-PI`.
pub fn acquisition_score(kind: Acquisition, mu: f64, sigma: f64, best: f64, kappa: f64) -> f64 {
    match kind {
        Acquisition::Ei => -expected_improvement(mu, sigma, best),
        Acquisition::Lcb => lower_confidence_bound(mu, sigma, kappa),
        Acquisition::Pi => -probability_of_improvement(mu, sigma, best, kappa),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn ei_without_uncertainty() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(2.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(0.25, 0.0, 1.0), 0.75);
    }

    #[test]
    fn lcb_formula() {
        assert_abs_diff_eq!(acquisition_score(Acquisition::Lcb, 1.0, 2.0, 0.0, KAPPA), -2.92, epsilon = 1e-12);
    }

    #[test]
    fn pi_values() {
        assert_abs_diff_eq!(probability_of_improvement(0.0, 1.0, 0.0, 0.0), 0.5, epsilon = 1e-15);
        assert_eq!(probability_of_improvement(0.0, 0.0, 1.0, KAPPA), 1.0);
        assert_eq!(probability_of_improvement(1.0, 0.0, 1.0, KAPPA), 0.0);
    }

    #[test]
    fn ei_matches_monte_carlo() {
        let (mu, sigma, best): (f64, f64, f64) = (0.5, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(mu, sigma).unwrap();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let v: f64 = (best - normal.sample(&mut rng)).max(0.0);
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((expected_improvement(mu, sigma, best) - mean).abs() < 3.0 * se);
    }

    #[test]
    fn cdf_reference_points() {
        assert_abs_diff_eq!(normal_cdf(1.96), 0.9750021048517795, epsilon = 1e-10);
        assert_abs_diff_eq!(normal_pdf(0.0), 0.3989422804014327, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn ei_nonnegative(mu in -10.0f64..10.0, sigma in 0.0f64..5.0, best in -10.0f64..10.0) {
            prop_assert!(expected_improvement(mu, sigma, best) >= 0.0);
        }

        #[test]
        fn ei_zero_without_uncertainty_or_gain(mu in -10.0f64..10.0, d in 0.0f64..5.0) {
            prop_assert_eq!(expected_improvement(mu, 0.0, mu - d), 0.0);
        }
    }
}
