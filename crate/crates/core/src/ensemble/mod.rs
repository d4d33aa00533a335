//! Ensemble strategies: single best, static selection, stacking, dynamic
//! classifier selection and dynamic ensemble selection, with optional
//! frienemy pruning of the region of competence.

mod competence;
mod predict;
mod selection;
mod stacking;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use competence::{region_of_competence, CompetenceSet, KMeans, MemberOutputs, RegionOfCompetence, N_CLUSTERS};
pub use predict::{ensemble_predict, predict_competence_set, predict_with_outputs, EnsembleModel};
pub use selection::{dcs_competence, des_select, dfp_prune, majority_vote, DcsMeasure, DesRule, MCB_SIMILARITY};
pub use stacking::{fit_stacked, meta_width, StackedModel, StackingCache};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    SingleBest,
    StaticSelection,
    StackedGeneralization,
    #[serde(rename = "OLA")]
    Ola,
    #[serde(rename = "LCA")]
    Lca,
    #[serde(rename = "MCB")]
    Mcb,
    Rank,
    APriori,
    APosteriori,
    #[serde(rename = "KNORA-E")]
    KnoraE,
    #[serde(rename = "KNORA-U")]
    KnoraU,
    #[serde(rename = "DES-KNN")]
    DesKnn,
    #[serde(rename = "DES-Clustering")]
    DesClustering,
}

impl Strategy {
    pub const ALL: [Strategy; 13] = [
        Strategy::SingleBest,
        Strategy::StaticSelection,
        Strategy::StackedGeneralization,
        Strategy::Ola,
        Strategy::Lca,
        Strategy::Mcb,
        Strategy::Rank,
        Strategy::APriori,
        Strategy::APosteriori,
        Strategy::KnoraE,
        Strategy::KnoraU,
        Strategy::DesKnn,
        Strategy::DesClustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SingleBest => "SingleBest",
            Strategy::StaticSelection => "StaticSelection",
            Strategy::StackedGeneralization => "StackedGeneralization",
            Strategy::Ola => "OLA",
            Strategy::Lca => "LCA",
            Strategy::Mcb => "MCB",
            Strategy::Rank => "Rank",
            Strategy::APriori => "APriori",
            Strategy::APosteriori => "APosteriori",
            Strategy::KnoraE => "KNORA-E",
            Strategy::KnoraU => "KNORA-U",
            Strategy::DesKnn => "DES-KNN",
            Strategy::DesClustering => "DES-Clustering",
        }
    }

    pub fn dcs_measure(self) -> Option<DcsMeasure> {
        Some(match self {
            Strategy::Ola => DcsMeasure::Ola,
            Strategy::Lca => DcsMeasure::Lca,
            Strategy::Mcb => DcsMeasure::Mcb,
            Strategy::Rank => DcsMeasure::Rank,
            Strategy::APriori => DcsMeasure::APriori,
            Strategy::APosteriori => DcsMeasure::APosteriori,
            _ => return None,
        })
    }

    pub fn des_rule(self) -> Option<DesRule> {
        Some(match self {
            Strategy::KnoraE => DesRule::KnoraE,
            Strategy::KnoraU => DesRule::KnoraU,
            Strategy::DesKnn => DesRule::DesKnn,
            Strategy::DesClustering => DesRule::DesClustering,
            _ => return None,
        })
    }

    /// Whether the strategy looks at a region of competence (and so whether
    /// frienemy pruning applies).
    pub fn uses_region(self) -> bool {
        self.dcs_measure().is_some() || matches!(self, Strategy::KnoraE | Strategy::KnoraU | Strategy::DesKnn)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown strategy {s:?}")))
    }
}

/// The stage-3 decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleConfiguration {
    pub members: Vec<bool>,
    pub strategy: Strategy,
    pub k: usize,
    pub dfp: bool,
}

impl EnsembleConfiguration {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.members.len() != pool_size {
            return Err(Error::LengthMismatch(self.members.len(), pool_size));
        }
        if !self.members.iter().any(|&m| m) {
            return Err(invalid("ensemble configuration selects no member"));
        }
        if self.k == 0 {
            return Err(invalid("region size k must be at least 1"));
        }
        Ok(())
    }

    pub fn n_selected(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }
}
