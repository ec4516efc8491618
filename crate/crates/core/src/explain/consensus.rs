use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Attribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusFeature {
    pub feature: String,
    /// 1-based ranks within each method's top-K.
    pub shap_rank: usize,
    pub lime_rank: usize,
}

/// Features in the top-K of both explainers for one class, in SHAP rank
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSet {
    pub class: String,
    pub k: usize,
    pub features: Vec<ConsensusFeature>,
}

impl ConsensusSet {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.feature.as_str()).collect()
    }

    pub fn describe(&self) -> String {
        if self.is_empty() {
            "no consensus features".to_string()
        } else {
            self.names().join(", ")
        }
    }
}

/// Intersection of the two top-K lists (non-zero scores only, ranked by
/// |score| then feature name).
pub fn consensus(shap: &Attribution, lime: &Attribution, k: usize, class: &str) -> ConsensusSet {
    let s = shap.top_k(k);
    let l = lime.top_k(k);
    let features = s
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            l.iter().position(|x| x == name).map(|j| ConsensusFeature { feature: name.to_string(), shap_rank: i + 1, lime_rank: j + 1 })
        })
        .collect();
    ConsensusSet { class: class.to_string(), k, features }
}

/// `class,feature,shap_rank,lime_rank` rows.
pub fn write_consensus_csv<W: Write>(writer: W, sets: &[ConsensusSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "feature", "shap_rank", "lime_rank"])?;
    for set in sets {
        for f in &set.features {
            w.write_record([set.class.as_str(), f.feature.as_str(), &f.shap_rank.to_string(), &f.lime_rank.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("consensus csv", e))?;
    Ok(())
}
