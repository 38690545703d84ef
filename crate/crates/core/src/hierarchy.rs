//! Spectral node embedding and agglomerative clustering into dendrograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::{normalized_laplacian, Partition};
use crate::graph::Graph;
use crate::numerics::{self, NumericsError, SymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("embedding dimension d = {d} is out of range 1..={max}")]
    Dimension { d: usize, max: usize },
    #[error("embedding undefined on edgeless graph")]
    Edgeless,
    #[error("cannot cluster zero points")]
    NoPoints,
    #[error("distance matrix is invalid: {0}")]
    InvalidDistances(String),
    #[error("cut size k = {k} is out of range 1..={n}")]
    CutSize { k: usize, n: usize },
    #[error("height statistics need at least 2 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("malformed dendrogram: {0}")]
    Malformed(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Per-node coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<Vec<f64>>,
    pub dim: usize,
    pub method: String,
}

pub const SPECTRAL_EMBEDDING_METHOD: &str = "normalized-laplacian/inv-sqrt-eigenvalue";

/// Eigenvalues at or below this are treated as zero and left unscaled.
const ZERO_EIGENVALUE: f64 = 1e-10;

/// Embeds nodes with the normalized-Laplacian eigenvectors `1..=d` (the first,
/// trivial one is skipped), each scaled by `1/√λ` when `λ > 1e-10`.
pub fn spectral_embedding(g: &Graph, d: usize) -> Result<Embedding, HierarchyError> {
    let n = g.node_count();
    let max = n.saturating_sub(1);
    if d == 0 || d > max {
        return Err(HierarchyError::Dimension { d, max });
    }
    if !(g.total_weight() > 0.0) {
        return Err(HierarchyError::Edgeless);
    }
    let eig = numerics::symmetric_eigen(&normalized_laplacian(g))?;
    let scales: Vec<f64> = eig.values[1..=d]
        .iter()
        .map(|&l| if l > ZERO_EIGENVALUE { 1.0 / l.sqrt() } else { 1.0 })
        .collect();
    let coords = (0..n)
        .map(|i| {
            (1..=d)
                .zip(&scales)
                .map(|(k, s)| eig.vectors[k][i] * s)
                .collect()
        })
        .collect();
    Ok(Embedding {
        coords,
        dim: d,
        method: SPECTRAL_EMBEDDING_METHOD.to_string(),
    })
}

/// Euclidean distance matrix between embedding rows.
pub fn pairwise_distances(e: &Embedding) -> SymmetricMatrix {
    let n = e.coords.len();
    let mut out = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = e.coords[i]
                .iter()
                .zip(&e.coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out.set(i, j, d);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Ward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }
}

impl std::str::FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            other => Err(format!("unknown linkage {other:?}")),
        }
    }
}

/// One merge. Ids `0..n` are leaves, `n + t` is the cluster created by merge `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    #[serde(rename = "h")]
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validates a merge list against `leaves` leaves.
    pub fn from_merges(leaves: usize, merges: Vec<Merge>) -> Result<Self, HierarchyError> {
        if leaves == 0 {
            return Err(HierarchyError::NoPoints);
        }
        if merges.len() != leaves - 1 {
            return Err(HierarchyError::Malformed(format!(
                "{} merges for {leaves} leaves",
                merges.len()
            )));
        }
        let mut sizes: Vec<usize> = vec![1; leaves];
        let mut used = vec![false; 2 * leaves - 1];
        for (t, m) in merges.iter().enumerate() {
            let id = leaves + t;
            for c in [m.a, m.b] {
                if c >= id || used[c] {
                    return Err(HierarchyError::Malformed(format!(
                        "merge {t} references unavailable cluster {c}"
                    )));
                }
                used[c] = true;
            }
            if m.a == m.b || !(m.height >= 0.0) {
                return Err(HierarchyError::Malformed(format!("merge {t} is invalid")));
            }
            let size = sizes[m.a] + sizes[m.b];
            if size != m.size {
                return Err(HierarchyError::Malformed(format!(
                    "merge {t} has size {} but joins {size} leaves",
                    m.size
                )));
            }
            sizes.push(size);
        }
        Ok(Self { leaves, merges })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Leaves under each cluster id, ascending.
    fn members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = (0..self.leaves).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut joined = members[m.a].clone();
            joined.extend_from_slice(&members[m.b]);
            joined.sort_unstable();
            members.push(joined);
        }
        members
    }

    /// Copy with every height divided by the largest one (no-op when all are 0).
    pub fn normalized(&self) -> Self {
        let max = self.heights().into_iter().fold(0.0, f64::max);
        let mut out = self.clone();
        if max > 0.0 {
            out.merges.iter_mut().for_each(|m| m.height /= max);
        }
        out
    }

    /// Newick string; branch length of each child is parent height minus the
    /// child's own height (leaves sit at height 0).
    pub fn to_newick(&self, labels: &[String]) -> String {
        fn escape(label: &str) -> String {
            let plain = label
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-');
            if plain && !label.is_empty() {
                label.to_string()
            } else {
                format!("'{}'", label.replace('\'', "''"))
            }
        }

        let n = self.leaves;
        let height_of = |id: usize| if id < n { 0.0 } else { self.merges[id - n].height };
        let mut out = String::new();
        if self.merges.is_empty() {
            out.push_str(&escape(&labels[0]));
            out.push(';');
            return out;
        }
        // iterative post-order over the binary tree rooted at the last merge
        enum Step {
            Visit(usize, f64),
            Close(usize, f64),
            Comma,
        }
        let root = 2 * n - 2;
        let mut stack = vec![Step::Visit(root, f64::NAN)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Visit(id, parent_h) => {
                    if id < n {
                        out.push_str(&escape(&labels[id]));
                        if !parent_h.is_nan() {
                            let _ = write!(out, ":{}", parent_h - height_of(id));
                        }
                    } else {
                        let m = self.merges[id - n];
                        out.push('(');
                        stack.push(Step::Close(id, parent_h));
                        stack.push(Step::Visit(m.b, m.height));
                        stack.push(Step::Comma);
                        stack.push(Step::Visit(m.a, m.height));
                    }
                }
                Step::Comma => out.push(','),
                Step::Close(id, parent_h) => {
                    out.push(')');
                    if !parent_h.is_nan() {
                        let _ = write!(out, ":{}", parent_h - height_of(id));
                    }
                }
            }
        }
        out.push(';');
        out
    }

    pub fn to_file(&self, labels: &[String]) -> DendrogramFile {
        DendrogramFile {
            leaves: labels.to_vec(),
            merges: self.merges.clone(),
        }
    }

    pub fn from_file(file: &DendrogramFile) -> Result<Self, HierarchyError> {
        Self::from_merges(file.leaves.len(), file.merges.clone())
    }
}

/// `{"leaves":[labels], "merges":[{"a":id,"b":id,"h":float,"size":int}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramFile {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Agglomerative clustering with Lance–Williams updates.
///
/// Each step merges the closest pair of active clusters; equal distances are
/// resolved by the smaller minimum leaf id of the first cluster, then of the
/// second. Ward heights follow the usual form on unsquared inputs:
/// `d(k, i∪j)² = [(n_i+n_k) d_ki² + (n_j+n_k) d_kj² − n_k d_ij²] / (n_i+n_j+n_k)`.
pub fn agglomerative(dist: &SymmetricMatrix, linkage: Linkage) -> Result<Dendrogram, HierarchyError> {
    let n = dist.order();
    if n == 0 {
        return Err(HierarchyError::NoPoints);
    }
    for i in 0..n {
        if dist.get(i, i) != 0.0 {
            return Err(HierarchyError::InvalidDistances(format!(
                "diagonal entry {i} is nonzero"
            )));
        }
        for j in 0..n {
            let d = dist.get(i, j);
            if !(d >= 0.0) || !d.is_finite() {
                return Err(HierarchyError::InvalidDistances(format!(
                    "entry ({i}, {j}) = {d}"
                )));
            }
        }
    }

    // slot i holds the active cluster whose smallest leaf is i
    let mut d: Vec<f64> = dist.as_slice().to_vec();
    if linkage == Linkage::Ward {
        d.iter_mut().for_each(|x| *x *= *x);
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for t in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let dij = d[i * n + j];
                if best.map_or(true, |(_, _, b)| dij < b) {
                    best = Some((i, j, dij));
                }
            }
        }
        let (i, j, dij) = best.expect("at least two active clusters");
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dki, dkj) = (d[k * n + i], d[k * n + j]);
            let nk = size[k] as f64;
            let updated = match linkage {
                Linkage::Single => dki.min(dkj),
                Linkage::Complete => dki.max(dkj),
                Linkage::Average => (ni * dki + nj * dkj) / (ni + nj),
                Linkage::Ward => {
                    ((ni + nk) * dki + (nj + nk) * dkj - nk * dij) / (ni + nj + nk)
                }
            };
            d[k * n + i] = updated;
            d[i * n + k] = updated;
        }
        let height = if linkage == Linkage::Ward {
            dij.max(0.0).sqrt()
        } else {
            dij
        };
        merges.push(Merge {
            a: cluster_id[i],
            b: cluster_id[j],
            height,
            size: size[i] + size[j],
        });
        size[i] += size[j];
        active[j] = false;
        cluster_id[i] = n + t;
    }

    Dendrogram::from_merges(n, merges)
}

/// Partition into `k` clusters by undoing the last `k − 1` merges.
pub fn cut(d: &Dendrogram, k: usize) -> Result<Partition, HierarchyError> {
    let n = d.leaf_count();
    if k == 0 || k > n {
        return Err(HierarchyError::CutSize { k, n });
    }
    let members = d.members();
    let mut raw = (0..n).collect::<Vec<_>>();
    for id in n..(2 * n - k) {
        let label = members[id][0];
        for &leaf in &members[id] {
            raw[leaf] = label;
        }
    }
    Ok(Partition::from_assignment(&raw))
}

/// `coph[i][j]` is the height of the lowest merge joining leaves `i` and `j`.
pub fn cophenetic_matrix(d: &Dendrogram) -> SymmetricMatrix {
    let n = d.leaf_count();
    let members = d.members();
    let mut out = SymmetricMatrix::zeros(n);
    for m in d.merges() {
        for &i in &members[m.a] {
            for &j in &members[m.b] {
                out.set(i, j, m.height);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightStats {
    pub max: f64,
    pub mean: f64,
    pub heights: Vec<f64>,
}

pub fn height_stats(d: &Dendrogram) -> Result<HeightStats, HierarchyError> {
    if d.leaf_count() < 2 {
        return Err(HierarchyError::TooFewLeaves(d.leaf_count()));
    }
    let heights = d.heights();
    let max = heights.iter().copied().fold(f64::MIN, f64::max);
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    Ok(HeightStats { max, mean, heights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn two_triangles() -> Graph {
        Graph::anonymous(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
        .unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Embedding {
        Embedding {
            coords: (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            dim,
            method: "random".into(),
        }
    }

    #[test]
    fn distances() {
        let e = |coords: Vec<Vec<f64>>| Embedding {
            dim: coords[0].len(),
            coords,
            method: "test".into(),
        };
        let same = pairwise_distances(&e(vec![vec![1.0, 2.0], vec![1.0, 2.0]]));
        assert!(same.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(pairwise_distances(&e(vec![vec![0.0], vec![3.0]])).get(0, 1), 3.0);
        assert_eq!(
            pairwise_distances(&e(vec![vec![0.0, 0.0], vec![3.0, 4.0]])).get(1, 0),
            5.0
        );
    }

    #[test]
    fn hand_example_equal_far_point() {
        let dist = matrix(&[&[0.0, 1.0, 5.0], &[1.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]);
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let d = agglomerative(&dist, linkage).unwrap();
            assert_eq!(d.merges()[0], Merge { a: 0, b: 1, height: 1.0, size: 2 });
            assert_eq!(d.merges()[1], Merge { a: 3, b: 2, height: 5.0, size: 3 });
        }
    }

    #[test]
    fn hand_example_lance_williams() {
        let dist = matrix(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 4.0], &[2.0, 4.0, 0.0]]);
        for (linkage, h) in [
            (Linkage::Single, 2.0),
            (Linkage::Complete, 4.0),
            (Linkage::Average, 3.0),
        ] {
            let d = agglomerative(&dist, linkage).unwrap();
            assert_eq!(d.heights(), vec![1.0, h], "{linkage:?}");
        }
        let stats = height_stats(&agglomerative(&dist, Linkage::Complete).unwrap()).unwrap();
        assert_eq!(stats.max, 4.0);
        assert_eq!(stats.mean, 2.5);
    }

    #[test]
    fn ward_matches_centroid_variance_increase() {
        // points on a line: 0, 1, 5. Ward height for merging clusters A, B is
        // sqrt(2 |A||B| / (|A|+|B|)) · ‖centroid_A − centroid_B‖
        let e = Embedding {
            coords: vec![vec![0.0], vec![1.0], vec![5.0]],
            dim: 1,
            method: "test".into(),
        };
        let d = agglomerative(&pairwise_distances(&e), Linkage::Ward).unwrap();
        assert!((d.heights()[0] - 1.0).abs() < 1e-12);
        let expected = (2.0 * 2.0 * 1.0 / 3.0f64).sqrt() * 4.5;
        assert!((d.heights()[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn single_point_and_errors() {
        let d = agglomerative(&SymmetricMatrix::zeros(1), Linkage::Average).unwrap();
        assert!(d.merges().is_empty());
        assert_eq!(cophenetic_matrix(&d).as_slice(), &[0.0]);
        assert_eq!(cut(&d, 1).unwrap(), Partition::trivial(1));
        assert!(matches!(height_stats(&d), Err(HierarchyError::TooFewLeaves(1))));
        assert!(matches!(
            agglomerative(&SymmetricMatrix::zeros(0), Linkage::Single),
            Err(HierarchyError::NoPoints)
        ));
        let bad = matrix(&[&[0.0, -1.0], &[-1.0, 0.0]]);
        assert!(agglomerative(&bad, Linkage::Single).is_err());
    }

    #[test]
    fn height_stats_basic() {
        let d = Dendrogram::from_merges(
            3,
            vec![
                Merge { a: 0, b: 1, height: 1.0, size: 2 },
                Merge { a: 3, b: 2, height: 5.0, size: 3 },
            ],
        )
        .unwrap();
        let s = height_stats(&d).unwrap();
        assert_eq!((s.max, s.mean), (5.0, 3.0));
        let one = Dendrogram::from_merges(2, vec![Merge { a: 0, b: 1, height: 0.7, size: 2 }])
            .unwrap();
        let s = height_stats(&one).unwrap();
        assert_eq!((s.max, s.mean), (0.7, 0.7));
    }

    #[test]
    fn cophenetic_hand_example() {
        let dist = matrix(&[&[0.0, 1.0, 5.0], &[1.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]);
        let c = cophenetic_matrix(&agglomerative(&dist, Linkage::Average).unwrap());
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(0, 2), 5.0);
        assert_eq!(c.get(1, 2), 5.0);
        assert_eq!(c.get(2, 2), 0.0);
    }

    #[test]
    fn malformed_dendrograms_rejected() {
        assert!(Dendrogram::from_merges(3, vec![]).is_err());
        assert!(Dendrogram::from_merges(
            3,
            vec![
                Merge { a: 0, b: 1, height: 1.0, size: 2 },
                Merge { a: 0, b: 2, height: 2.0, size: 3 },
            ]
        )
        .is_err());
        assert!(Dendrogram::from_merges(2, vec![Merge { a: 0, b: 1, height: 1.0, size: 3 }]).is_err());
    }

    #[test]
    fn embedding_shape_and_errors() {
        let g = Graph::anonymous(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (0, 3, 0.5)]).unwrap();
        let e = spectral_embedding(&g, 1).unwrap();
        assert_eq!(e.coords.len(), 4);
        assert!(e.coords.iter().all(|r| r.len() == 1 && r[0].is_finite()));
        assert!(matches!(
            spectral_embedding(&g, 4),
            Err(HierarchyError::Dimension { d: 4, max: 3 })
        ));
        assert!(matches!(spectral_embedding(&g, 0), Err(HierarchyError::Dimension { .. })));
        let edgeless = Graph::anonymous(3, &[]).unwrap();
        assert_eq!(spectral_embedding(&edgeless, 1), Err(HierarchyError::Edgeless));
    }

    #[test]
    fn fiedler_coordinate_splits_path_halves() {
        // dense pair {0,1} and dense pair {2,3} joined weakly
        let g = Graph::anonymous(4, &[(0, 1, 5.0), (1, 2, 0.2), (2, 3, 5.0)]).unwrap();
        let e = spectral_embedding(&g, 1).unwrap();
        let x: Vec<f64> = e.coords.iter().map(|r| r[0]).collect();
        assert_eq!(x[0].signum(), x[1].signum());
        assert_eq!(x[2].signum(), x[3].signum());
        assert_ne!(x[0].signum(), x[2].signum());
    }

    #[test]
    fn disjoint_triangles_embed_to_two_constants() {
        let e = spectral_embedding(&two_triangles(), 1).unwrap();
        let x: Vec<f64> = e.coords.iter().map(|r| r[0]).collect();
        let spread = |s: &[f64]| {
            s.iter().copied().fold(f64::MIN, f64::max) - s.iter().copied().fold(f64::MAX, f64::min)
        };
        assert!(spread(&x[..3]) < 1e-8);
        assert!(spread(&x[3..]) < 1e-8);
        assert!((x[0] - x[3]).abs() > 0.1);

        let d = agglomerative(&pairwise_distances(&e), Linkage::Average).unwrap();
        assert_eq!(cut(&d, 2).unwrap().assignment(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn embedding_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 9;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j, rng.gen_range(0.1..3.0)));
            }
        }
        let g = Graph::anonymous(n, &edges).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted_edges: Vec<_> = edges.iter().map(|&(u, v, w)| (perm[u], perm[v], w)).collect();
        let h = Graph::anonymous(n, &permuted_edges).unwrap();
        let e1 = spectral_embedding(&g, 3).unwrap();
        let e2 = spectral_embedding(&h, 3).unwrap();
        for i in 0..n {
            for k in 0..3 {
                assert!((e1.coords[i][k] - e2.coords[perm[i]][k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn newick_branch_lengths() {
        let dist = matrix(&[&[0.0, 1.0, 5.0], &[1.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]);
        let d = agglomerative(&dist, Linkage::Average).unwrap();
        let labels = vec!["A".to_string(), "B".to_string(), "C d".to_string()];
        assert_eq!(d.to_newick(&labels), "((A:1,B:1):4,'C d':5);");
        let single = agglomerative(&SymmetricMatrix::zeros(1), Linkage::Average).unwrap();
        assert_eq!(single.to_newick(&labels[..1]), "A;");
    }

    #[test]
    fn normalization_flag() {
        let dist = matrix(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 4.0], &[2.0, 4.0, 0.0]]);
        let d = agglomerative(&dist, Linkage::Complete).unwrap();
        assert_eq!(d.normalized().heights(), vec![0.25, 1.0]);
    }

    fn random_distances(seed: u64, n: usize) -> SymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairwise_distances(&random_points(&mut rng, n, 3))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn heights_monotone(seed in 0u64..100_000, n in 1usize..21) {
            let dist = random_distances(seed, n);
            for linkage in Linkage::ALL {
                let d = agglomerative(&dist, linkage).unwrap();
                prop_assert_eq!(d.merges().len(), n - 1);
                if n > 1 {
                    prop_assert_eq!(d.merges().last().unwrap().size, n);
                }
                for w in d.heights().windows(2) {
                    prop_assert!(w[0] <= w[1] + 1e-12, "{:?}: {:?}", linkage, w);
                }
            }
        }

        #[test]
        fn single_linkage_cophenetic_bounded(seed in 0u64..100_000, n in 2usize..21) {
            let dist = random_distances(seed, n);
            let c = cophenetic_matrix(&agglomerative(&dist, Linkage::Single).unwrap());
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(c.get(i, j) <= dist.get(i, j));
                }
            }
        }

        #[test]
        fn cophenetic_is_ultrametric(seed in 0u64..100_000, n in 2usize..15) {
            let dist = random_distances(seed, n);
            for linkage in Linkage::ALL {
                let c = cophenetic_matrix(&agglomerative(&dist, linkage).unwrap());
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            prop_assert!(c.get(i, k) <= c.get(i, j).max(c.get(j, k)) + 1e-12);
                        }
                    }
                }
            }
        }

        #[test]
        fn cuts_form_refinement_chain(seed in 0u64..100_000, n in 1usize..16) {
            let d = agglomerative(&random_distances(seed, n), Linkage::Average).unwrap();
            prop_assert_eq!(cut(&d, n).unwrap(), Partition::singletons(n));
            prop_assert_eq!(cut(&d, 1).unwrap(), Partition::trivial(n));
            for k in (2..=n).rev() {
                let fine = cut(&d, k).unwrap();
                let coarse = cut(&d, k - 1).unwrap();
                prop_assert_eq!(fine.community_count(), k);
                prop_assert_eq!(coarse.community_count(), k - 1);
                for block in fine.communities() {
                    let c = coarse.community_of(block[0]);
                    prop_assert!(block.iter().all(|&v| coarse.community_of(v) == c));
                }
            }
        }

        #[test]
        fn dendrogram_permutation_invariant(seed in 0u64..100_000, n in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_points(&mut rng, n, 2);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut coords = vec![vec![]; n];
            for i in 0..n {
                coords[perm[i]] = e.coords[i].clone();
            }
            let shuffled = Embedding { coords, dim: 2, method: "random".into() };
            for linkage in Linkage::ALL {
                let c1 = cophenetic_matrix(&agglomerative(&pairwise_distances(&e), linkage).unwrap());
                let c2 = cophenetic_matrix(&agglomerative(&pairwise_distances(&shuffled), linkage).unwrap());
                for i in 0..n {
                    for j in 0..n {
                        prop_assert!((c1.get(i, j) - c2.get(perm[i], perm[j])).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
