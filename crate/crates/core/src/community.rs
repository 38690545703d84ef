//! Partitions, weighted modularity and community detection (Louvain, spectral
//! clustering, and an exhaustive oracle for small graphs).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::numerics::{self, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommunityError {
    #[error("modularity undefined on edgeless graph")]
    Edgeless,
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    SizeMismatch { partition: usize, graph: usize },
    #[error("node {0} is missing from the partition or listed twice")]
    NotAPartition(usize),
    #[error("node {node} out of range for a graph of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("community count k = {k} is out of range 1..={n}")]
    ClusterCount { k: usize, n: usize },
    #[error("exhaustive search refused: n = {n} exceeds the limit of {max_n}")]
    TooLarge { n: usize, max_n: usize },
    #[error("modularity {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("resolution must be positive and finite")]
    Resolution,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Assignment of every node to one community, stored canonically: community
/// ids are renumbered by first appearance over node index, which makes the
/// assignment vector a restricted-growth string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    assignment: Vec<usize>,
}

impl Partition {
    /// Canonicalizes an arbitrary labelling.
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut relabel = std::collections::HashMap::new();
        let assignment = raw
            .iter()
            .map(|label| {
                let next = relabel.len();
                *relabel.entry(*label).or_insert(next)
            })
            .collect();
        Self { assignment }
    }

    /// Builds a partition of `0..n` from explicit blocks.
    pub fn from_communities(n: usize, blocks: &[Vec<usize>]) -> Result<Self, CommunityError> {
        let mut raw = vec![usize::MAX; n];
        for (c, block) in blocks.iter().enumerate() {
            for &node in block {
                if node >= n {
                    return Err(CommunityError::NodeOutOfRange { node, n });
                }
                if raw[node] != usize::MAX {
                    return Err(CommunityError::NotAPartition(node));
                }
                raw[node] = c;
            }
        }
        if let Some(node) = raw.iter().position(|&c| c == usize::MAX) {
            return Err(CommunityError::NotAPartition(node));
        }
        Ok(Self::from_assignment(&raw))
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |&c| c + 1)
    }

    /// Member lists ordered by community id, members ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// Applies `perm` to node indices: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut raw = vec![0; self.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            raw[perm[i]] = c;
        }
        Self::from_assignment(&raw)
    }
}

/// Modularity value, always within [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModularityScore(f64);

impl ModularityScore {
    pub fn new(q: f64) -> Result<Self, CommunityError> {
        if (-1.0..=1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(CommunityError::OutOfRange(q))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for ModularityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0)
    }
}

/// Qualitative reading of a modularity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrengthLabel {
    RandomLike,
    Moderate,
    Strong,
    NearPerfect,
}

impl fmt::Display for StrengthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrengthLabel::RandomLike => "RandomLike",
            StrengthLabel::Moderate => "Moderate",
            StrengthLabel::Strong => "Strong",
            StrengthLabel::NearPerfect => "NearPerfect",
        };
        f.write_str(s)
    }
}

/// `q < 0.1` random-like, `[0.1, 0.3)` moderate, `[0.3, 0.7]` strong, above
/// that near-perfect.
pub fn classify_strength(q: f64) -> Result<StrengthLabel, CommunityError> {
    let q = ModularityScore::new(q)?.value();
    Ok(if q < 0.1 {
        StrengthLabel::RandomLike
    } else if q < 0.3 {
        StrengthLabel::Moderate
    } else if q <= 0.7 {
        StrengthLabel::Strong
    } else {
        StrengthLabel::NearPerfect
    })
}

fn check_partition(g: &Graph, p: &Partition) -> Result<(), CommunityError> {
    if p.len() != g.node_count() {
        return Err(CommunityError::SizeMismatch {
            partition: p.len(),
            graph: g.node_count(),
        });
    }
    if !(g.total_weight() > 0.0) {
        return Err(CommunityError::Edgeless);
    }
    Ok(())
}

/// Generalized modularity `Σ_c [in_c / 2m − γ (tot_c / 2m)²]`.
pub fn modularity_with_resolution(
    g: &Graph,
    p: &Partition,
    resolution: f64,
) -> Result<f64, CommunityError> {
    check_partition(g, p)?;
    let n = g.node_count();
    let c = p.community_count();
    let two_m = 2.0 * g.total_weight();
    let mut internal = vec![0.0; c];
    let mut totals = vec![0.0; c];
    for i in 0..n {
        let ci = p.community_of(i);
        totals[ci] += g.strengths()[i];
        for (j, w) in g.neighbors(i) {
            if p.community_of(j) == ci {
                internal[ci] += w;
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&totals)
        .map(|(inn, tot)| inn / two_m - resolution * (tot / two_m) * (tot / two_m))
        .sum())
}

/// Classical weighted modularity
/// `Q = (1/2m) Σ_ij [w_ij − k_i k_j / 2m] δ(c_i, c_j)`.
pub fn modularity(g: &Graph, p: &Partition) -> Result<ModularityScore, CommunityError> {
    ModularityScore::new(modularity_with_resolution(g, p, 1.0)?)
}

/// Dense weighted graph that may carry self-loops; the working representation
/// for every Louvain level. `adj[i][i]` holds the weight internal to a
/// collapsed community, counted twice, so strengths still sum to 2m.
#[derive(Debug, Clone)]
struct Level {
    n: usize,
    adj: Vec<f64>,
    strength: Vec<f64>,
    two_m: f64,
}

impl Level {
    fn from_graph(g: &Graph) -> Self {
        let n = g.node_count();
        let adj: Vec<f64> = (0..n).flat_map(|i| g.row(i).to_vec()).collect();
        Self::from_dense(n, adj)
    }

    fn from_dense(n: usize, adj: Vec<f64>) -> Self {
        let strength: Vec<f64> = (0..n).map(|i| adj[i * n..(i + 1) * n].iter().sum()).collect();
        let two_m = strength.iter().sum();
        Self {
            n,
            adj,
            strength,
            two_m,
        }
    }

    #[inline]
    fn w(&self, i: usize, j: usize) -> f64 {
        self.adj[i * self.n + j]
    }

    /// Collapses each community into one node.
    fn aggregate(&self, assignment: &[usize], count: usize) -> Self {
        let mut adj = vec![0.0; count * count];
        for i in 0..self.n {
            let ci = assignment[i];
            for j in 0..self.n {
                let w = self.w(i, j);
                if w != 0.0 {
                    adj[ci * count + assignment[j]] += w;
                }
            }
        }
        Self::from_dense(count, adj)
    }
}

/// Node-to-community assignment with cached community strength totals, on
/// which single-node moves can be scored and applied.
#[derive(Debug, Clone)]
pub struct MoveState {
    level: Level,
    assignment: Vec<usize>,
    totals: Vec<f64>,
    resolution: f64,
}

impl MoveState {
    /// State over `g` with the given starting partition. Community ids are the
    /// partition's canonical ids; any id below `n` may later be used as a
    /// move target, including currently empty ones.
    pub fn new(g: &Graph, start: &Partition, resolution: f64) -> Result<Self, CommunityError> {
        check_partition(g, start)?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(CommunityError::Resolution);
        }
        Ok(Self::from_level(
            Level::from_graph(g),
            start.assignment().to_vec(),
            resolution,
        ))
    }

    fn from_level(level: Level, assignment: Vec<usize>, resolution: f64) -> Self {
        let mut totals = vec![0.0; level.n];
        for (i, &c) in assignment.iter().enumerate() {
            totals[c] += level.strength[i];
        }
        Self {
            level,
            assignment,
            totals,
            resolution,
        }
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn partition(&self) -> Partition {
        Partition::from_assignment(&self.assignment)
    }

    /// Weight from `node` into community `c`, excluding any self-loop.
    fn link_weight(&self, node: usize, c: usize) -> f64 {
        (0..self.level.n)
            .filter(|&j| j != node && self.assignment[j] == c)
            .map(|j| self.level.w(node, j))
            .sum()
    }

    fn gain(&self, node: usize, target: usize, to_target: f64, to_own: f64) -> f64 {
        let own = self.assignment[node];
        if own == target {
            return 0.0;
        }
        let two_m = self.level.two_m;
        let k = self.level.strength[node];
        2.0 * (to_target - to_own) / two_m
            - self.resolution * 2.0 * k * (self.totals[target] - self.totals[own] + k)
                / (two_m * two_m)
    }

    /// Change in modularity if `node` moved to `target`.
    pub fn delta_modularity(&self, node: usize, target: usize) -> f64 {
        let own = self.assignment[node];
        if own == target {
            return 0.0;
        }
        self.gain(
            node,
            target,
            self.link_weight(node, target),
            self.link_weight(node, own),
        )
    }

    pub fn move_node(&mut self, node: usize, target: usize) {
        let k = self.level.strength[node];
        let own = self.assignment[node];
        self.totals[own] -= k;
        self.totals[target] += k;
        self.assignment[node] = target;
    }

    /// One local-moving phase: sweep nodes in ascending order, moving each to
    /// the neighbouring community with the largest gain when that gain exceeds
    /// 1e-12, until a sweep changes nothing. Returns whether anything moved.
    fn local_moving(&mut self) -> bool {
        let n = self.level.n;
        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut improved = false;
        loop {
            let mut moved = false;
            for node in 0..n {
                for j in 0..n {
                    let w = self.level.w(node, j);
                    if j != node && w > 0.0 {
                        let c = self.assignment[j];
                        if links[c] == 0.0 {
                            touched.push(c);
                        }
                        links[c] += w;
                    }
                }
                touched.sort_unstable();
                let own = self.assignment[node];
                let to_own = links[own];
                let mut best = own;
                let mut best_gain = 0.0;
                for &c in &touched {
                    if c == own {
                        continue;
                    }
                    let gain = self.gain(node, c, links[c], to_own);
                    if gain > best_gain {
                        best_gain = gain;
                        best = c;
                    }
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
                if best != own && best_gain > MIN_GAIN {
                    self.move_node(node, best);
                    moved = true;
                    improved = true;
                }
            }
            if !moved {
                return improved;
            }
        }
    }
}

/// Free-function form of [`MoveState::delta_modularity`].
pub fn delta_modularity(state: &MoveState, node: usize, target: usize) -> f64 {
    state.delta_modularity(node, target)
}

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LouvainResult {
    pub partition: Partition,
    /// Classical (resolution 1) modularity of `partition`.
    pub modularity: ModularityScore,
    pub resolution: f64,
    /// Flat partition of the original nodes after each aggregation level.
    pub levels: Vec<Partition>,
}

/// Two-phase Louvain: local moving followed by aggregation, repeated while
/// local moving improves the objective. Deterministic.
pub fn louvain(g: &Graph, resolution: f64) -> Result<LouvainResult, CommunityError> {
    let n = g.node_count();
    let mut state = MoveState::new(g, &Partition::singletons(n), resolution)?;
    // original node -> node of the current level
    let mut membership: Vec<usize> = (0..n).collect();
    let mut levels = Vec::new();

    loop {
        if !state.local_moving() {
            break;
        }
        let collapsed = Partition::from_assignment(&state.assignment);
        let count = collapsed.community_count();
        for m in membership.iter_mut() {
            *m = collapsed.community_of(*m);
        }
        levels.push(Partition::from_assignment(&membership));
        if count == state.level.n {
            break;
        }
        let next = state.level.aggregate(collapsed.assignment(), count);
        state = MoveState::from_level(next, (0..count).collect(), resolution);
    }

    if levels.is_empty() {
        levels.push(Partition::singletons(n));
    }
    let partition = levels.last().cloned().expect("at least one level");
    let modularity = modularity(g, &partition)?;
    Ok(LouvainResult {
        partition,
        modularity,
        resolution,
        levels,
    })
}

/// Symmetric normalized Laplacian `I − D^{-1/2} W D^{-1/2}`; isolated nodes get
/// a zero `D^{-1/2}` entry, so their row is the unit vector.
pub fn normalized_laplacian(g: &Graph) -> numerics::SymmetricMatrix {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = g
        .strengths()
        .iter()
        .map(|&k| if k > 0.0 { 1.0 / k.sqrt() } else { 0.0 })
        .collect();
    let mut lap = numerics::SymmetricMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = g.weight(i, j);
            if w != 0.0 {
                lap.set(i, j, -w * inv_sqrt[i] * inv_sqrt[j]);
            }
        }
    }
    lap
}

/// Ascending eigenvalues of the normalized Laplacian.
pub fn laplacian_spectrum(g: &Graph) -> Result<Vec<f64>, CommunityError> {
    Ok(numerics::symmetric_eigen(&normalized_laplacian(g))?.values)
}

/// `gaps[i] = λ_{i+1} − λ_i` over the first `max_k + 1` Laplacian eigenvalues;
/// a large gap after index `k − 1` suggests `k` clusters.
pub fn eigengaps(g: &Graph, max_k: usize) -> Result<Vec<f64>, CommunityError> {
    let values = laplacian_spectrum(g)?;
    let upto = (max_k + 1).min(values.len());
    Ok(values[..upto].windows(2).map(|w| w[1] - w[0]).collect())
}

/// Spectral clustering on the `k` lowest normalized-Laplacian eigenvectors with
/// row-normalized embedding and deterministic k-means.
pub fn spectral_communities(g: &Graph, k: usize) -> Result<Partition, CommunityError> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(CommunityError::ClusterCount { k, n });
    }
    if !(g.total_weight() > 0.0) {
        return Err(CommunityError::Edgeless);
    }
    let eig = numerics::symmetric_eigen(&normalized_laplacian(g))?;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = eig.vectors[..k].iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
            row
        })
        .collect();
    let km = numerics::kmeans(&rows, k)?;
    Ok(Partition::from_assignment(&km.assignment))
}

pub const DEFAULT_EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub partition: Partition,
    pub modularity: ModularityScore,
    /// Number of set partitions examined (the Bell number B(n)).
    pub evaluated: u64,
}

/// Calls `visit` with every restricted-growth string of length `n`, in
/// lexicographic order. Each string is one set partition of `0..n`.
pub fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut rgs = vec![0usize; n];
    // prefix_max[i] = max(rgs[0..=i])
    let mut prefix_max = vec![0usize; n];
    loop {
        visit(&rgs);
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if rgs[i] <= prefix_max[i - 1] {
                break;
            }
            i -= 1;
        }
        rgs[i] += 1;
        prefix_max[i] = prefix_max[i - 1].max(rgs[i]);
        for j in (i + 1)..n {
            rgs[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
}

/// Exhaustive modularity maximization over all set partitions. Partitions whose
/// modularity is within 1e-12 of the incumbent count as ties; the
/// lexicographically smallest restricted-growth string wins.
pub fn brute_force_best_partition(g: &Graph, max_n: usize) -> Result<ExactResult, CommunityError> {
    let n = g.node_count();
    if n > max_n {
        return Err(CommunityError::TooLarge { n, max_n });
    }
    if !(g.total_weight() > 0.0) {
        return Err(CommunityError::Edgeless);
    }
    let two_m = 2.0 * g.total_weight();
    let strengths = g.strengths();
    let mut internal = vec![0.0; n];
    let mut totals = vec![0.0; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0u64;

    for_each_set_partition(n, |rgs| {
        evaluated += 1;
        internal.iter_mut().for_each(|x| *x = 0.0);
        totals.iter_mut().for_each(|x| *x = 0.0);
        let mut count = 0;
        for i in 0..n {
            let ci = rgs[i];
            count = count.max(ci + 1);
            totals[ci] += strengths[i];
            for j in (i + 1)..n {
                if rgs[j] == ci {
                    internal[ci] += 2.0 * g.weight(i, j);
                }
            }
        }
        let q: f64 = (0..count)
            .map(|c| internal[c] / two_m - (totals[c] / two_m) * (totals[c] / two_m))
            .sum();
        match &best {
            Some((_, incumbent)) if q <= incumbent + MIN_GAIN => {}
            _ => best = Some((rgs.to_vec(), q)),
        }
    });

    let (rgs, _) = best.expect("at least one partition");
    let partition = Partition::from_assignment(&rgs);
    let modularity = modularity(g, &partition)?;
    Ok(ExactResult {
        partition,
        modularity,
        evaluated,
    })
}
