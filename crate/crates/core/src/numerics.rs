//! Dense kernels shared by the spectral, hierarchical and centrality code:
//! a cyclic Jacobi eigensolver, deterministic k-means and a generic power
//! iteration driver. Everything here assumes small matrices (n ≤ a few hundred).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("expected {expected} entries for an order-{n} matrix, got {got}")]
    Shape { n: usize, expected: usize, got: usize },
    #[error("matrix must have order at least 1")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("jacobi sweeps did not converge (off-diagonal norm {off:e})")]
    EigenNotConverged { off: f64 },
    #[error("k = {k} is out of range 1..={points}")]
    ClusterCount { k: usize, points: usize },
    #[error("points have inconsistent dimensions")]
    Ragged,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("tolerance must be positive")]
    Tolerance,
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Square symmetric matrix stored row-major. The two triangles are bitwise
/// equal once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Accepts entries symmetric to within 1e-12 (relative to the largest
    /// entry) and stores the averaged, exactly symmetric matrix.
    pub fn from_row_major(n: usize, mut data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != n * n {
            return Err(NumericsError::Shape {
                n,
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        let scale = data.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                let gap = (a - b).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NotSymmetric { i, j, gap });
                }
                let avg = if a == b { a } else { 0.5 * (a + b) };
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(NumericsError::Ragged);
        }
        Self::from_row_major(n, rows.concat())
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Writes both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector paired with `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenResult {
    /// `V · diag(λ) · Vᵀ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut out = vec![0.0; n * n];
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                let vi = lambda * v[i];
                for j in 0..n {
                    out[i * n + j] += vi * v[j];
                }
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
///
/// Output is deterministic: eigenpairs are sorted by value (ties keep the
/// diagonal position they converged to) and every eigenvector is flipped so
/// that its largest-magnitude entry, first one on ties, is positive.
pub fn symmetric_eigen(m: &SymmetricMatrix) -> Result<EigenResult, NumericsError> {
    let n = m.order();
    if n == 0 {
        return Err(NumericsError::Empty);
    }
    let mut a = m.as_slice().to_vec();
    let mut v = SymmetricMatrix::identity(n).data;

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = f64::EPSILON * frob.max(f64::MIN_POSITIVE);

    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off = off_norm(&a);
        if off > 1e-10 * frob.max(1.0) {
            return Err(NumericsError::EigenNotConverged { off });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &col in &order {
        values.push(a[col * n + col]);
        let mut vec: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
        orient(&mut vec);
        vectors.push(vec);
    }
    Ok(EigenResult { values, vectors })
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

const KMEANS_MAX_ITER: usize = 500;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with farthest-point seeding.
///
/// The first center is the point of largest norm; each further center is the
/// point farthest from its nearest chosen center. Ties always go to the lowest
/// index, so the result depends only on the input.
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<KMeans, NumericsError> {
    let count = points.len();
    if k == 0 || k > count {
        return Err(NumericsError::ClusterCount { k, points: count });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(NumericsError::Ragged);
    }

    let mut chosen = Vec::with_capacity(k);
    let mut first = 0;
    let mut best_norm = -1.0;
    for (i, p) in points.iter().enumerate() {
        let norm = p.iter().map(|x| x * x).sum::<f64>();
        if norm > best_norm {
            best_norm = norm;
            first = i;
        }
    }
    chosen.push(first);
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while chosen.len() < k {
        let mut pick = None;
        let mut far = -1.0;
        for (i, &d) in nearest.iter().enumerate() {
            if d > far && !chosen.contains(&i) {
                far = d;
                pick = Some(i);
            }
        }
        let pick = pick.expect("k ≤ number of points");
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[pick]));
        }
    }
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].clone()).collect();

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(p, center);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignment = assign(&centers);
    let mut cost_history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sizes[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        cost_history.push(
            points
                .iter()
                .zip(&assignment)
                .map(|(p, &c)| sq_dist(p, &centers[c]))
                .sum(),
        );

        let next = assign(&centers);
        if next == assignment || iterations >= KMEANS_MAX_ITER {
            break;
        }
        assignment = next;
    }

    Ok(KMeans {
        assignment,
        centers,
        cost_history,
        iterations,
    })
}

/// Applies `step` from `start` until `‖step(x) − x‖₁ ≤ tol` and returns that `x`.
pub fn power_iteration<F>(
    mut step: F,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if !(tol > 0.0) {
        return Err(NumericsError::Tolerance);
    }
    let mut x = start;
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iter {
        let next = step(&x);
        residual = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return Ok(x);
        }
        x = next;
    }
    Err(NumericsError::NotConverged {
        iterations: max_iter,
        residual,
    })
}
