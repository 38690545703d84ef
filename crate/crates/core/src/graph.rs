//! Weighted undirected graph over a fixed node universe.
//!
//! Weights are stored densely: the graphs this crate targets have a few dozen
//! nodes, and every numerical consumer (Laplacians, PageRank, modularity)
//! wants random access to `w_ij`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::SymmetricMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) has invalid weight {w}")]
    InvalidWeight { u: usize, v: usize, w: f64 },
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: usize, v: usize, n: usize },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),
    #[error("node ids must be dense 0..n-1; found id {found} at position {position}")]
    NonDenseIds { position: usize, found: usize },
}

/// A node of the graph: dense index plus a unique label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeId {
    pub id: usize,
    pub label: String,
}

/// An undirected edge listed once, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    weights: Vec<f64>,
    strengths: Vec<f64>,
    total_weight: f64,
}

impl Graph {
    /// Builds a graph from labels and an edge list. Duplicate pairs, in either
    /// orientation, are summed.
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(GraphError::DuplicateLabel(label.clone()));
            }
        }

        let n = labels.len();
        let mut weights = vec![0.0; n * n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(GraphError::InvalidWeight { u, v, w });
            }
            weights[u * n + v] += w;
            weights[v * n + u] += w;
        }

        let strengths = (0..n)
            .map(|i| weights[i * n..(i + 1) * n].iter().sum())
            .collect();
        let mut total_weight = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total_weight += weights[i * n + j];
            }
        }

        Ok(Self {
            labels,
            weights,
            strengths,
            total_weight,
        })
    }

    /// Edgeless graph whose nodes are labelled `Parameter 0`, `Parameter 1`, ...
    pub fn anonymous(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        Self::new((0..n).map(|k| format!("Parameter {k}")), edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.get(i).map(String::as_str)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.labels
            .iter()
            .enumerate()
            .map(|(id, label)| NodeId {
                id,
                label: label.clone(),
            })
            .collect()
    }

    /// `w_ij`; zero for absent pairs and on the diagonal. Panics on out-of-range
    /// indices like slice indexing does.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let n = self.node_count();
        assert!(i < n && j < n, "node index out of range");
        self.weights[i * n + j]
    }

    /// Row `i` of the adjacency matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.node_count();
        &self.weights[i * n..(i + 1) * n]
    }

    /// Nodes sharing a positive-weight edge with `i`, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(i)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, w)| w > 0.0)
    }

    pub fn strength(&self, i: usize) -> Result<f64, GraphError> {
        self.strengths
            .get(i)
            .copied()
            .ok_or(GraphError::UnknownNode(i))
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// `m = Σ_{i<j} w_ij`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Positive-weight edges, each listed once with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<Edge> {
        let n = self.node_count();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let w = self.weights[u * n + v];
                if w > 0.0 {
                    out.push(Edge { u, v, w });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn adjacency_matrix(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_row_major(self.node_count(), self.weights.clone())
            .expect("graph weights are symmetric by construction")
    }

    /// Same nodes, every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GraphError> {
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|e| (e.u, e.v, e.w * factor))
            .collect();
        Self::new(self.labels.clone(), &edges)
    }

    /// Component id per node, numbered by first appearance over node index.
    pub fn connected_components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self.nodes(),
            edges: self.edges(),
        }
    }

    pub fn from_file(file: &GraphFile) -> Result<Self, GraphError> {
        for (position, node) in file.nodes.iter().enumerate() {
            if node.id != position {
                return Err(GraphError::NonDenseIds {
                    position,
                    found: node.id,
                });
            }
        }
        let edges: Vec<_> = file.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
        Self::new(file.nodes.iter().map(|n| n.label.clone()), &edges)
    }
}

/// On-disk graph: `{"nodes":[{"id":0,"label":"..."}],"edges":[{"u":0,"v":1,"w":12.0}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}
