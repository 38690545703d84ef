//! Cross-cohort comparison: partition similarity, per-cohort structure
//! summaries, and exact search-space sizes.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::pagerank;
use crate::community::{classify_strength, louvain, Partition, StrengthLabel};
use crate::config::{PipelineConfig, SCHEMA_VERSION};
use crate::graph::Graph;
use crate::hierarchy::{agglomerative, height_stats, pairwise_distances, spectral_embedding, HeightStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("partitions cover different node sets ({0} vs {1} nodes)")]
    UniverseMismatch(usize, usize),
    #[error("ARI undefined: both partitions are degenerate and differ")]
    AriUndefined,
    #[error("ARI needs at least 2 nodes")]
    TooFewNodes,
    #[error("search space size is supported for 0 <= n <= 64, got {0}")]
    SearchSpaceRange(usize),
    #[error("need ≥ 2 cohorts, got {0}")]
    TooFewCohorts(usize),
}

/// Rows are communities of `p1`, columns communities of `p2`.
fn contingency(p1: &Partition, p2: &Partition) -> Result<Vec<Vec<u64>>, CompareError> {
    if p1.len() != p2.len() {
        return Err(CompareError::UniverseMismatch(p1.len(), p2.len()));
    }
    let mut table = vec![vec![0u64; p2.community_count()]; p1.community_count()];
    for (&a, &b) in p1.assignment().iter().zip(p2.assignment()) {
        table[a][b] += 1;
    }
    Ok(table)
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let s = s as f64;
            (s / n) * ((n * s) / (s * s)).ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization,
/// `I(p1; p2) / ((H(p1) + H(p2)) / 2)`, natural logs. Two trivial partitions
/// score 1.
pub fn nmi(p1: &Partition, p2: &Partition) -> Result<f64, CompareError> {
    let table = contingency(p1, p2)?;
    let n = p1.len() as f64;
    if p1.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..p2.community_count())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let h1 = entropy(&rows, n);
    let h2 = entropy(&cols, n);
    if h1 == 0.0 && h2 == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += (nij / n) * ((n * nij) / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / ((h1 + h2) / 2.0)).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index by pair counting.
pub fn ari(p1: &Partition, p2: &Partition) -> Result<f64, CompareError> {
    let table = contingency(p1, p2)?;
    let n = p1.len() as u64;
    if n < 2 {
        return Err(CompareError::TooFewNodes);
    }
    let index: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let a: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let b: f64 = (0..p2.community_count())
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = a * b / choose2(n);
    let max = (a + b) / 2.0;
    if max == expected {
        return if p1 == p2 {
            Ok(1.0)
        } else {
            Err(CompareError::AriUndefined)
        };
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpaceStats {
    pub n: usize,
    /// `n!` orderings.
    pub sequences: BigUint,
    /// Bell number `B(n)` set partitions.
    pub partitions: BigUint,
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, k| acc * k)
}

/// `B(0..=n)` from the Bell triangle: each row starts with the last entry of
/// the previous row, and each entry adds its left neighbour to the entry
/// above that neighbour.
pub fn bell_numbers(n: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    let mut row = vec![BigUint::one()];
    for _ in 1..=n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().expect("rows are non-empty").clone());
        for above in &row {
            let value = next.last().expect("row started") + above;
            next.push(value);
        }
        out.push(next[0].clone());
        row = next;
    }
    out
}

pub fn search_space_stats(n: usize) -> Result<SearchSpaceStats, CompareError> {
    if n > 64 {
        return Err(CompareError::SearchSpaceRange(n));
    }
    Ok(SearchSpaceStats {
        n,
        sequences: factorial(n),
        partitions: bell_numbers(n).pop().expect("B(0) always present"),
    })
}

/// `d.ddde<exp>` with `significant` digits, rounding half up on the decimal
/// expansion.
pub fn to_scientific(value: &BigUint, significant: usize) -> String {
    let digits = value.to_str_radix(10);
    let significant = significant.max(1);
    let mut exponent = digits.len() as i64 - 1;
    let mut kept: Vec<u8> = digits
        .bytes()
        .take(significant)
        .map(|b| b - b'0')
        .collect();
    while kept.len() < significant {
        kept.push(0);
    }
    let round_up = digits.as_bytes().get(significant).is_some_and(|&b| b >= b'5');
    if round_up {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, 1);
                kept.pop();
                exponent += 1;
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    out.push((b'0' + kept[0]) as char);
    if kept.len() > 1 {
        out.push('.');
        out.extend(kept[1..].iter().map(|&d| (b'0' + d) as char));
    }
    out.push_str(&format!("e{exponent}"));
    out
}

/// Like [`to_scientific`] but truncating instead of rounding.
pub fn to_scientific_truncated(value: &BigUint, significant: usize) -> String {
    let digits = value.to_str_radix(10);
    let exponent = digits.len() - 1;
    let mut kept: String = digits.chars().take(significant.max(1)).collect();
    while kept.len() < significant {
        kept.push('0');
    }
    if kept.len() > 1 {
        kept.insert(1, '.');
    }
    format!("{kept}e{exponent}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub id: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub modularity: f64,
    pub community_count: usize,
    pub communities: Vec<Vec<usize>>,
    pub strength: StrengthLabel,
    pub pagerank_top: Vec<RankedNode>,
    pub heights: HeightStats,
    #[serde(skip)]
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CohortOutcome {
    Ok(CohortSummary),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSimilarity {
    pub a: String,
    pub b: String,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub schema_version: u32,
    pub nmi_normalization: String,
    pub embedding: String,
    pub config: PipelineConfig,
    pub cohorts: BTreeMap<String, CohortOutcome>,
    pub pairwise: Vec<PairwiseSimilarity>,
}

impl CohortReport {
    pub fn summary(&self, cohort: &str) -> Option<&CohortSummary> {
        match self.cohorts.get(cohort)? {
            CohortOutcome::Ok(s) => Some(s),
            CohortOutcome::Failed { .. } => None,
        }
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairwiseSimilarity> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

fn analyse_cohort(g: &Graph, config: &PipelineConfig) -> Result<CohortSummary, String> {
    let communities = louvain(g, config.resolution).map_err(|e| e.to_string())?;
    let q = communities.modularity.value();
    let strength = classify_strength(q).map_err(|e| e.to_string())?;
    let scores = pagerank(g, config.pagerank).map_err(|e| e.to_string())?;
    let pagerank_top = scores
        .ranking()
        .into_iter()
        .take(config.top_k)
        .map(|id| RankedNode {
            id,
            label: g.labels()[id].clone(),
            score: scores.scores[id],
        })
        .collect();
    let embedding = spectral_embedding(g, config.embedding_dim).map_err(|e| e.to_string())?;
    let mut tree = agglomerative(&pairwise_distances(&embedding), config.linkage)
        .map_err(|e| e.to_string())?;
    if config.normalize_heights {
        tree = tree.normalized();
    }
    let heights = height_stats(&tree).map_err(|e| e.to_string())?;
    Ok(CohortSummary {
        modularity: q,
        community_count: communities.partition.community_count(),
        communities: communities.partition.communities(),
        strength,
        pagerank_top,
        heights,
        partition: communities.partition,
    })
}

/// Runs the per-cohort pipeline (Louvain, strength label, PageRank, spectral
/// embedding + agglomerative clustering) and pairwise NMI/ARI between cohort
/// partitions. A cohort whose analysis fails is reported as failed.
pub fn cohort_report(
    graphs: &BTreeMap<String, Graph>,
    config: &PipelineConfig,
) -> Result<CohortReport, CompareError> {
    if graphs.len() < 2 {
        return Err(CompareError::TooFewCohorts(graphs.len()));
    }
    let cohorts: BTreeMap<String, CohortOutcome> = graphs
        .iter()
        .map(|(name, g)| {
            let outcome = match analyse_cohort(g, config) {
                Ok(s) => CohortOutcome::Ok(s),
                Err(error) => CohortOutcome::Failed { error },
            };
            (name.clone(), outcome)
        })
        .collect();

    let names: Vec<&String> = cohorts.keys().collect();
    let mut pairwise = Vec::new();
    for (x, a) in names.iter().enumerate() {
        for b in &names[x + 1..] {
            let mut entry = PairwiseSimilarity {
                a: (*a).clone(),
                b: (*b).clone(),
                nmi: None,
                ari: None,
                note: None,
            };
            match (&cohorts[*a], &cohorts[*b]) {
                (CohortOutcome::Ok(sa), CohortOutcome::Ok(sb)) => {
                    match nmi(&sa.partition, &sb.partition) {
                        Ok(v) => entry.nmi = Some(v),
                        Err(e) => entry.note = Some(e.to_string()),
                    }
                    match ari(&sa.partition, &sb.partition) {
                        Ok(v) => entry.ari = Some(v),
                        Err(e) => entry.note = Some(e.to_string()),
                    }
                }
                _ => entry.note = Some("cohort analysis failed".to_string()),
            }
            pairwise.push(entry);
        }
    }

    Ok(CohortReport {
        schema_version: SCHEMA_VERSION,
        nmi_normalization: "arithmetic".to_string(),
        embedding: crate::hierarchy::SPECTRAL_EMBEDDING_METHOD.to_string(),
        config: config.clone(),
        cohorts,
        pairwise,
    })
}
