//! Weighted PageRank on the undirected co-occurrence graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::numerics::{power_iteration, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralityError {
    #[error("pagerank needs at least one node")]
    Empty,
    #[error("damping must lie in (0, 1), got {0}")]
    Damping(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tolerance: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankScores {
    pub scores: Vec<f64>,
    pub damping: f64,
    pub tolerance: f64,
}

impl PageRankScores {
    /// Node indices by descending score, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        order
    }
}

/// Power iteration on `P[i→j] = w_ij / k_i`, with isolated nodes linking
/// uniformly to every node, starting from the uniform vector.
pub fn pagerank(g: &Graph, config: PageRankConfig) -> Result<PageRankScores, CentralityError> {
    let n = g.node_count();
    if n == 0 {
        return Err(CentralityError::Empty);
    }
    let d = config.damping;
    if !(d > 0.0 && d < 1.0) {
        return Err(CentralityError::Damping(d));
    }
    let strengths = g.strengths();
    let teleport = (1.0 - d) / n as f64;

    let step = |x: &[f64]| {
        let dangling: f64 = (0..n).filter(|&i| strengths[i] == 0.0).map(|i| x[i]).sum();
        let mut next = vec![teleport + d * dangling / n as f64; n];
        for i in 0..n {
            let k = strengths[i];
            if k > 0.0 {
                let share = d * x[i] / k;
                for (j, w) in g.neighbors(i) {
                    next[j] += share * w;
                }
            }
        }
        next
    };

    let scores = power_iteration(
        step,
        vec![1.0 / n as f64; n],
        config.tolerance,
        config.max_iter,
    )?;
    Ok(PageRankScores {
        scores,
        damping: d,
        tolerance: config.tolerance,
    })
}
