//! JSON documents exchanged between pipeline stages. Every document carries
//! the schema version and, when written by the pipeline, its configuration.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::centrality::PageRankScores;
use crate::community::{ModularityScore, Partition};
use crate::config::{PipelineConfig, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    #[serde(default = "current_schema")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
    #[serde(flatten)]
    pub body: T,
}

fn current_schema() -> u32 {
    SCHEMA_VERSION
}

impl<T: Serialize + DeserializeOwned> Document<T> {
    pub fn new(body: T, config: &PipelineConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: Some(config.clone()),
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("documents always serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Louvain,
    Spectral,
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Louvain => "louvain",
            Method::Spectral => "spectral",
            Method::Exact => "exact",
        }
    }
}

/// `{"communities": [[node ids]...], "q": float, "method": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub communities: Vec<Vec<usize>>,
    pub q: f64,
    pub method: Method,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl PartitionFile {
    pub fn new(
        partition: &Partition,
        q: ModularityScore,
        method: Method,
        params: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        Self {
            communities: partition.communities(),
            q: q.value(),
            method,
            params,
        }
    }

    pub fn partition(&self) -> Result<Partition, crate::community::CommunityError> {
        let n = self.communities.iter().map(Vec::len).sum();
        Partition::from_communities(n, &self.communities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub id: usize,
    pub score: f64,
}

/// `{"damping":0.85,"scores":[{"id":0,"score":0.031}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub damping: f64,
    pub scores: Vec<NodeScore>,
}

impl From<&PageRankScores> for ScoresFile {
    fn from(pr: &PageRankScores) -> Self {
        Self {
            damping: pr.damping,
            scores: pr
                .scores
                .iter()
                .enumerate()
                .map(|(id, &score)| NodeScore { id, score })
                .collect(),
        }
    }
}

impl ScoresFile {
    /// Scores indexed by node id; `None` if ids are not exactly `0..n`.
    pub fn dense(&self) -> Option<Vec<f64>> {
        let mut out = vec![f64::NAN; self.scores.len()];
        for s in &self.scores {
            *out.get_mut(s.id)? = s.score;
        }
        out.iter().all(|x| !x.is_nan()).then_some(out)
    }
}
