//! Co-occurrence graph analysis for operator logs.
//!
//! Records are grouped by experience cohort and turned into weighted graphs
//! over a fixed parameter universe ([`ingest`], [`graph`]). Each graph is then
//! partitioned into communities ([`community`]), ranked with PageRank
//! ([`centrality`]) and organized hierarchically from a spectral embedding
//! ([`hierarchy`]); [`compare`] puts cohorts side by side.
//!
//! All algorithms are deterministic: identical inputs produce bit-identical
//! outputs.

pub mod centrality;
pub mod community;
pub mod compare;
pub mod config;
pub mod export;
pub mod graph;
pub mod hierarchy;
pub mod ingest;
pub mod io;
pub mod numerics;
pub mod synth;

pub use centrality::{pagerank, PageRankConfig, PageRankScores};
pub use community::{
    brute_force_best_partition, classify_strength, louvain, modularity, spectral_communities,
    ModularityScore, Partition, StrengthLabel,
};
pub use compare::{ari, cohort_report, nmi, search_space_stats, CohortReport};
pub use config::PipelineConfig;
pub use graph::{Graph, GraphError};
pub use hierarchy::{agglomerative, cut, spectral_embedding, Dendrogram, Linkage};
pub use ingest::{build_cohort_graph, Cohort, IngestConfig, LogRecord};
