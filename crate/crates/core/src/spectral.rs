//! Affinity construction and normalized-cut spectral clustering.
//!
//! Spectral clustering uses the symmetric normalized Laplacian
//! `L = I − D^{-1/2} A D^{-1/2}`: the eigenvectors of its L smallest
//! eigenvalues are stacked row-wise per point, each row is scaled to unit
//! length, and the rows are clustered by seeded k-means. Nodes of zero
//! degree are given `D_ii = 1`, which makes them isolated identity rows.

use thiserror::Error;

use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::{smallest_eigenpairs, CsrMatrix, EigenError};
use crate::types::CoeffMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(#[from] EigenError),

    #[error("cannot form {clusters} clusters from {n} points")]
    TooManyClusters { clusters: usize, n: usize },

    #[error("affinity must be symmetric, nonnegative, with a zero diagonal")]
    InvalidAffinity,
}

/// Symmetric, nonnegative, zero-diagonal sparse affinity.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(CsrMatrix);

impl AffinityMatrix {
    /// Validates a hand-built matrix.
    pub fn new(m: CsrMatrix) -> Result<Self, SpectralError> {
        let ok = m.is_symmetric()
            && m.values().iter().all(|&v| v >= 0.0)
            && (0..m.n()).all(|i| m.get(i, i) == 0.0);
        if ok {
            Ok(Self(m))
        } else {
            Err(SpectralError::InvalidAffinity)
        }
    }

    /// Undirected graph from an edge list; weights of repeated edges add up.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, SpectralError> {
        let triplets = edges
            .iter()
            .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
            .collect();
        Self::new(CsrMatrix::from_triplets(n, triplets))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.0.row_sum(i)
    }

    /// Subgraph induced by `nodes`, renumbered in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &i) in nodes.iter().enumerate() {
            for (j, v) in self.0.row(i) {
                if local[j] != usize::MAX {
                    triplets.push((k, local[j], v));
                }
            }
        }
        Self(CsrMatrix::from_triplets(nodes.len(), triplets))
    }

    /// Number of connected components (edges with positive weight).
    pub fn connected_components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for (j, v) in self.0.row(i) {
                    if v > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        components
    }
}

/// `A = |C| + |Cᵀ|`.
pub fn build_affinity(c: &CoeffMatrix) -> AffinityMatrix {
    let n = c.n();
    let mut triplets = Vec::with_capacity(2 * c.nnz());
    for (j, col) in c.columns().iter().enumerate() {
        for &(i, v) in col.entries() {
            if i != j && v != 0.0 {
                triplets.push((i, j, v.abs()));
                triplets.push((j, i, v.abs()));
            }
        }
    }
    // Each coordinate receives at most the two terms |C_ij| and |C_ji|, so the
    // sums are bit-for-bit symmetric.
    AffinityMatrix(CsrMatrix::from_triplets(n, triplets))
}

/// `L = I − D^{-1/2} A D^{-1/2}`, with zero degrees replaced by 1.
pub fn normalized_laplacian(a: &AffinityMatrix) -> CsrMatrix {
    let n = a.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut triplets = Vec::with_capacity(a.matrix().nnz() + n);
    for (i, &si) in inv_sqrt.iter().enumerate() {
        triplets.push((i, i, 1.0));
        for (j, v) in a.matrix().row(i) {
            triplets.push((i, j, -si * v * inv_sqrt[j]));
        }
    }
    CsrMatrix::from_triplets(n, triplets)
}

/// Row-normalized spectral embedding: one row of length `k` per point.
pub fn spectral_embedding(a: &AffinityMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>, SpectralError> {
    let n = a.n();
    if k > n {
        return Err(SpectralError::TooManyClusters { clusters: k, n });
    }
    let lap = normalized_laplacian(a);
    let pairs = smallest_eigenpairs(&lap, k, seed)?;
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| pairs.vectors.iter().map(|v| v[i]).collect())
        .collect();
    for row in &mut rows {
        let nrm = crate::linalg::norm(row);
        if nrm > 0.0 {
            row.iter_mut().for_each(|x| *x /= nrm);
        }
    }
    Ok(rows)
}

/// Labels in `0..clusters` from normalized-cut spectral clustering of `a`.
pub fn spectral_clustering(a: &AffinityMatrix, clusters: usize, seed: u64) -> Result<Vec<usize>, SpectralError> {
    let n = a.n();
    if clusters == 0 || clusters > n {
        return Err(SpectralError::TooManyClusters { clusters, n });
    }
    let rows = spectral_embedding(a, clusters, seed)?;
    Ok(kmeans(&rows, &KMeansConfig::new(clusters, seed)).labels)
}
