//! Stage-one feature engineering: a scaler feeding a generator branch and a
//! decomposition branch, their column union, and a feature selector. Slot
//! choices are searched by the cross-validated accuracy of a randomized-tree
//! surrogate.

mod pipeline;
mod search;

pub use pipeline::{anova_f, fit_feature_pipeline, Affine, FittedFeaturePipeline, GeneratorState, Projection};
pub use search::{
    feateng_space, search_feature_pipeline, surrogate_params, surrogate_score, FeatureSearch, SURROGATE_DEPTH, SURROGATE_TREES,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bayesopt::{Config, Value};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scaler {
    Standard,
    MaxAbs,
    Robust,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Polynomial2,
    KBins,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decomposition {
    Pca { n: usize },
    TruncatedSvd { n: usize },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    /// Keeps columns whose training variance exceeds the threshold.
    Variance { threshold: f64 },
    /// Keeps the top percentile of columns by one-way ANOVA F.
    Percentile { percentile: f64 },
    None,
}

pub const KBINS: usize = 5;
pub const N_COMPONENTS: [usize; 3] = [2, 4, 8];
pub const VARIANCE_THRESHOLDS: [f64; 3] = [0.0, 0.01, 0.05];
pub const PERCENTILES: [f64; 3] = [25.0, 50.0, 75.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipelineConfig {
    pub scaler: Scaler,
    pub generator: Generator,
    pub decomposition: Decomposition,
    pub selector: Selector,
}

impl Default for FeaturePipelineConfig {
    fn default() -> Self {
        Self::identity()
    }
}

impl FeaturePipelineConfig {
    /// Every slot empty: the transform returns its input.
    pub fn identity() -> Self {
        Self {
            scaler: Scaler::None,
            generator: Generator::None,
            decomposition: Decomposition::None,
            selector: Selector::None,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self) -> Result<()> {
        match self.decomposition {
            Decomposition::Pca { n: 0 } | Decomposition::TruncatedSvd { n: 0 } => {
                return Err(invalid("decomposition needs at least one component"))
            }
            _ => {}
        }
        match self.selector {
            Selector::Variance { threshold } if !(threshold >= 0.0 && threshold.is_finite()) => {
                Err(invalid(format!("variance threshold {threshold} must be finite and >= 0")))
            }
            Selector::Percentile { percentile } if !(percentile > 0.0 && percentile <= 100.0) => {
                Err(invalid(format!("percentile {percentile} outside (0, 100]")))
            }
            _ => Ok(()),
        }
    }

    /// Encodes into the point of [`feateng_space`]. Parameters of inactive
    /// slots take their first level.
    pub fn to_config(&self) -> Result<Config> {
        let cat = |s: &str| Value::Cat(s.to_string());
        let level = |v: f64, levels: &[f64], what: &str| {
            levels
                .iter()
                .position(|&l| l == v)
                .map(|i| fmt_level(levels[i]))
                .ok_or_else(|| invalid(format!("{what} {v} is not a searchable level")))
        };
        let (decomp, n) = match self.decomposition {
            Decomposition::None => ("none", N_COMPONENTS[0]),
            Decomposition::Pca { n } => ("pca", n),
            Decomposition::TruncatedSvd { n } => ("truncated_svd", n),
        };
        if !N_COMPONENTS.contains(&n) {
            return Err(invalid(format!("{n} components is not a searchable level")));
        }
        let (sel, theta, pct) = match self.selector {
            Selector::None => ("none", VARIANCE_THRESHOLDS[0], PERCENTILES[0]),
            Selector::Variance { threshold } => ("variance", threshold, PERCENTILES[0]),
            Selector::Percentile { percentile } => ("percentile", VARIANCE_THRESHOLDS[0], percentile),
        };
        Ok(vec![
            cat(self.scaler.name()),
            cat(self.generator.name()),
            cat(decomp),
            cat(&n.to_string()),
            cat(sel),
            cat(&level(theta, &VARIANCE_THRESHOLDS, "variance threshold")?),
            cat(&level(pct, &PERCENTILES, "percentile")?),
        ])
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        if c.len() != 7 {
            return Err(invalid(format!("feature pipeline config has {} values, expected 7", c.len())));
        }
        let s = |i: usize| c[i].as_str().ok_or_else(|| invalid(format!("slot {i} is not categorical")));
        let num = |i: usize| -> Result<f64> {
            s(i)?.parse::<f64>().map_err(|_| invalid(format!("slot {i} is not numeric")))
        };
        let scaler = match s(0)? {
            "standard" => Scaler::Standard,
            "maxabs" => Scaler::MaxAbs,
            "robust" => Scaler::Robust,
            "none" => Scaler::None,
            o => return Err(invalid(format!("unknown scaler `{o}`"))),
        };
        let generator = match s(1)? {
            "polynomial2" => Generator::Polynomial2,
            "kbins" => Generator::KBins,
            "none" => Generator::None,
            o => return Err(invalid(format!("unknown generator `{o}`"))),
        };
        let n = num(3)? as usize;
        let decomposition = match s(2)? {
            "pca" => Decomposition::Pca { n },
            "truncated_svd" => Decomposition::TruncatedSvd { n },
            "none" => Decomposition::None,
            o => return Err(invalid(format!("unknown decomposition `{o}`"))),
        };
        let selector = match s(4)? {
            "variance" => Selector::Variance { threshold: num(5)? },
            "percentile" => Selector::Percentile { percentile: num(6)? },
            "none" => Selector::None,
            o => return Err(invalid(format!("unknown selector `{o}`"))),
        };
        let cfg = Self {
            scaler,
            generator,
            decomposition,
            selector,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_level(v: f64) -> String {
    format!("{v}")
}

impl Scaler {
    pub const ALL: [Scaler; 4] = [Scaler::Standard, Scaler::MaxAbs, Scaler::Robust, Scaler::None];

    pub fn name(self) -> &'static str {
        match self {
            Scaler::Standard => "standard",
            Scaler::MaxAbs => "maxabs",
            Scaler::Robust => "robust",
            Scaler::None => "none",
        }
    }
}

impl Generator {
    pub const ALL: [Generator; 3] = [Generator::Polynomial2, Generator::KBins, Generator::None];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Polynomial2 => "polynomial2",
            Generator::KBins => "kbins",
            Generator::None => "none",
        }
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decomposition::Pca { n } => write!(f, "pca({n})"),
            Decomposition::TruncatedSvd { n } => write!(f, "truncated_svd({n})"),
            Decomposition::None => f.write_str("none"),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Variance { threshold } => write!(f, "variance({threshold})"),
            Selector::Percentile { percentile } => write!(f, "percentile({percentile})"),
            Selector::None => f.write_str("none"),
        }
    }
}

impl fmt::Display for FeaturePipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> [{} | {}] -> {}",
            self.scaler.name(),
            self.generator.name(),
            self.decomposition,
            self.selector
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_round_trips() {
        let id = FeaturePipelineConfig::identity();
        let c = id.to_config().unwrap();
        assert!(feateng_space().contains(&c));
        assert_eq!(FeaturePipelineConfig::from_config(&c).unwrap(), id);
    }

    #[test]
    fn sampled_configs_round_trip() {
        let space = feateng_space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = space.sample(&mut rng);
            let cfg = FeaturePipelineConfig::from_config(&c).unwrap();
            let back = FeaturePipelineConfig::from_config(&cfg.to_config().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn json_is_slot_records() {
        let cfg = FeaturePipelineConfig {
            scaler: Scaler::MaxAbs,
            generator: Generator::KBins,
            decomposition: Decomposition::Pca { n: 4 },
            selector: Selector::Percentile { percentile: 50.0 },
        };
        let j = serde_json::to_value(cfg).unwrap();
        assert_eq!(j["scaler"]["kind"], "maxabs");
        assert_eq!(j["decomposition"]["n"], 4);
        assert_eq!(j["selector"]["percentile"], 50.0);
        assert_eq!(serde_json::from_value::<FeaturePipelineConfig>(j).unwrap(), cfg);
        assert_eq!(cfg.to_string(), "maxabs -> [kbins | pca(4)] -> percentile(50)");
    }

    #[test]
    fn validation() {
        let mut c = FeaturePipelineConfig::identity();
        c.selector = Selector::Percentile { percentile: 0.0 };
        assert!(c.validate().is_err());
        c.selector = Selector::Variance { threshold: -1.0 };
        assert!(c.validate().is_err());
        c.selector = Selector::None;
        c.decomposition = Decomposition::Pca { n: 0 };
        assert!(c.validate().is_err());
    }
}
