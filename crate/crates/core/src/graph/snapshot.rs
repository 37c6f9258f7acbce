use nalgebra::DMatrix;

use super::GraphError;
use crate::linalg::{max_abs, SortedEigen};

/// Weighted undirected graph at one instant: a symmetric weight matrix with
/// zero diagonal. Negative weights are allowed (signed networks).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    weights: DMatrix<f64>,
}

impl GraphSnapshot {
    pub fn new(weights: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(GraphError::InvalidSnapshot(format!(
                "weight matrix must be square and non-empty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(GraphError::InvalidSnapshot(format!(
                    "nonzero diagonal entry {} at node {}",
                    weights[(i, i)],
                    i + 1
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (weights[(i, j)], weights[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(GraphError::InvalidSnapshot(format!(
                        "non-finite weight on edge {{{},{}}}",
                        i + 1,
                        j + 1
                    )));
                }
                if a != b {
                    return Err(GraphError::InvalidSnapshot(format!(
                        "asymmetric weights a_{}{}={} a_{}{}={}",
                        i + 1,
                        j + 1,
                        a,
                        j + 1,
                        i + 1,
                        b
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Empty graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n, n),
        }
    }

    /// Build from 0-based `(i, j, w)` triples; each unordered pair at most once.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut weights = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(GraphError::InvalidSnapshot(format!(
                    "edge {{{},{}}} out of range for {n} nodes",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(GraphError::InvalidSnapshot(format!("self-loop at node {}", i + 1)));
            }
            let (lo, hi) = (i.min(j), i.max(j));
            if seen[lo * n + hi] {
                return Err(GraphError::InvalidSnapshot(format!(
                    "duplicate edge {{{},{}}}",
                    lo + 1,
                    hi + 1
                )));
            }
            seen[lo * n + hi] = true;
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Self::new(weights)
    }

    pub fn complete(n: usize, w: f64) -> Self {
        let mut weights = DMatrix::from_element(n, n, w);
        weights.fill_diagonal(0.0);
        Self { weights }
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn max_abs_weight(&self) -> f64 {
        max_abs(&self.weights)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: &self.weights * c,
        }
    }
}

/// Symmetric graph Laplacian `D − A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    /// Laplacian of an arbitrary symmetric weight matrix (diagonal ignored).
    pub(crate) fn from_weights(weights: &DMatrix<f64>) -> Self {
        let n = weights.nrows();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                if i != j {
                    entries[(i, j)] = -weights[(i, j)];
                    degree += weights[(i, j)];
                }
            }
            entries[(i, i)] = degree;
        }
        Self(entries)
    }

    /// Wrap a matrix that is already a Laplacian (symmetric, zero row sums).
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(GraphError::Shape(format!("{}x{} is not square", n, m.ncols())));
        }
        let scale = 1e-12 * n as f64 * max_abs(&m).max(1.0);
        if max_abs(&(&m - m.transpose())) > scale {
            return Err(GraphError::InvalidSnapshot("Laplacian is not symmetric".into()));
        }
        if m.row_iter().any(|row| row.sum().abs() > scale) {
            return Err(GraphError::InvalidSnapshot("Laplacian row sums are not zero".into()));
        }
        Ok(Self(m))
    }

    pub fn node_count(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Fixed lexicographic edge order `{1,2}, {1,3}, …, {N−1,N}` (0-based here).
pub fn edge_order(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Weighted incidence matrix `H` with all `N(N−1)/2` columns retained.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    entries: DMatrix<f64>,
    edge_order: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn edge_order(&self) -> &[(usize, usize)] {
        &self.edge_order
    }

    pub fn edge_count(&self) -> usize {
        self.edge_order.len()
    }
}

pub fn laplacian(g: &GraphSnapshot) -> LaplacianMatrix {
    LaplacianMatrix::from_weights(g.weights())
}

/// Column `{i,j}` (i < j) holds `−√a_ij` at row i and `+√a_ij` at row j.
pub fn incidence(g: &GraphSnapshot) -> Result<IncidenceMatrix, GraphError> {
    let n = g.node_count();
    let edge_order = edge_order(n);
    let mut entries = DMatrix::zeros(n, edge_order.len());
    for (col, &(i, j)) in edge_order.iter().enumerate() {
        let w = g.weight(i, j);
        if w < 0.0 {
            return Err(GraphError::SignedGraph {
                i: i + 1,
                j: j + 1,
                weight: w,
            });
        }
        let root = w.sqrt();
        entries[(i, col)] = -root;
        entries[(j, col)] = root;
    }
    Ok(IncidenceMatrix { entries, edge_order })
}

/// Symmetric PSD square root of a symmetric matrix. Eigenvalues in
/// `[−tol, 0)` are clamped to zero; anything lower is an error.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, GraphError> {
    let eig = SortedEigen::new(m);
    let min = eig.min();
    if min < -tol {
        return Err(GraphError::NegativeLinkViolated { eigenvalue: min });
    }
    Ok(eig.map(|l| l.max(0.0).sqrt()))
}

/// `√L` for a PSD (possibly signed) Laplacian, so that `√L·√L = L`.
pub fn sqrt_laplacian_factor(l: &LaplacianMatrix, tol: f64) -> Result<DMatrix<f64>, GraphError> {
    psd_sqrt(l.as_matrix(), tol)
}

/// Second-smallest eigenvalue, multiplicity counted.
pub fn lambda2(m: &DMatrix<f64>) -> Result<f64, GraphError> {
    if m.nrows() != m.ncols() {
        return Err(GraphError::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.nrows() < 2 {
        return Err(GraphError::Shape("lambda2 needs at least two nodes".into()));
    }
    Ok(SortedEigen::new(m).values[1])
}
