//! Pipeline configuration, echoed into every output file.

use serde::{Deserialize, Serialize};

use crate::centrality::PageRankConfig;
use crate::hierarchy::Linkage;
use crate::ingest::IngestConfig;

/// Version of every JSON file layout this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ingest: IngestConfig,
    /// Louvain resolution; 1.0 is classical modularity.
    pub resolution: f64,
    /// Cluster count for spectral clustering; `None` uses the Louvain count.
    pub spectral_k: Option<usize>,
    pub embedding_dim: usize,
    pub linkage: Linkage,
    /// Divide dendrogram heights by their maximum. Off by default so heights
    /// stay comparable across cohorts.
    pub normalize_heights: bool,
    pub pagerank: PageRankConfig,
    /// How many top PageRank nodes a cohort report lists.
    pub top_k: usize,
    pub exact_max_n: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ingest: IngestConfig::default(),
            resolution: 1.0,
            spectral_k: None,
            embedding_dim: 3,
            linkage: Linkage::Average,
            normalize_heights: false,
            pagerank: PageRankConfig::default(),
            top_k: 5,
            exact_max_n: crate::community::DEFAULT_EXACT_LIMIT,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }
}
