//! Shared domain types: the data matrix, run parameters, subset plans and
//! sparse coefficient vectors.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ResidualDiagnostics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("matrix must have at least one row and one column (got {dim}x{n})")]
    Empty { dim: usize, n: usize },

    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate index {0} in sparse vector")]
    DuplicateIndex(usize),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("column {0} has a nonzero diagonal entry")]
    NonzeroDiagonal(usize),
}

/// Dense real matrix stored column-major: `dim` rows (ambient dimension D) by
/// `n` columns (points). Column `i` is the point `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    dim: usize,
    n: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn from_column_major(dim: usize, n: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if dim == 0 || n == 0 {
            return Err(DataError::Empty { dim, n });
        }
        if data.len() != dim * n {
            return Err(DataError::ShapeMismatch {
                expected: dim * n,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: pos % dim,
                col: pos / dim,
            });
        }
        Ok(Self { dim, n, data })
    }

    /// Builds a matrix from a list of equally sized columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, DataError> {
        let dim = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * columns.len());
        for col in columns {
            if col.len() != dim {
                return Err(DataError::ShapeMismatch {
                    expected: dim,
                    got: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Self::from_column_major(dim, columns.len(), data)
    }

    /// Builds a matrix from rows (each row is one ambient coordinate across all points).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let dim = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut data = vec![0.0; dim * n];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(DataError::ShapeMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                data[c * dim + r] = v;
            }
        }
        Self::from_column_major(dim, n, data)
    }

    /// Ambient dimension D.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points N.
    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.dim + row]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.n {
                return Err(DataError::IndexOutOfRange {
                    index: i,
                    len: self.n,
                });
            }
            data.extend_from_slice(self.column(i));
        }
        Self::from_column_major(self.dim, indices.len(), data)
    }

    /// Column-normalized copy; zero columns stay zero.
    pub fn normalized(&self) -> Self {
        let mut data = self.data.clone();
        for col in data.chunks_exact_mut(self.dim) {
            let norm = crate::linalg::norm(col);
            if norm > 0.0 {
                col.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Self {
            dim: self.dim,
            n: self.n,
            data,
        }
    }
}

/// How subset weights evolve between subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingScheme {
    /// Proportional sampling; each selected point's weight is multiplied by 0.1
    /// before the next subset is drawn.
    #[default]
    Weighted,
    /// Every subset is an independent uniform draw.
    Uniform,
}

impl SamplingScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingScheme::Weighted => "weighted",
            SamplingScheme::Uniform => "uniform",
        }
    }
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SamplingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(SamplingScheme::Weighted),
            "uniform" => Ok(SamplingScheme::Uniform),
            other => Err(format!("unknown sampling scheme `{other}` (expected weighted|uniform)")),
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Parameters of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Number of subsets T.
    pub num_subsets: usize,
    /// Sampling rate δ in (0, 1].
    pub sampling_rate: f64,
    /// Maximum support size s of the per-subset pursuit.
    pub sparsity: usize,
    /// Residual threshold ε of both pursuits.
    pub epsilon: f64,
    /// Number of clusters L.
    pub num_clusters: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub threads: usize,
    #[serde(default)]
    pub sampling: SamplingScheme,
}

impl Params {
    /// Defaults of the synthetic experiments: T = 16, δ = 0.3, s = 6, ε = 1e-6.
    pub fn new(num_clusters: usize) -> Self {
        Self {
            num_subsets: 16,
            sampling_rate: 0.3,
            sparsity: 6,
            epsilon: DEFAULT_EPSILON,
            num_clusters,
            seed: 0,
            threads: 0,
            sampling: SamplingScheme::Weighted,
        }
    }

    /// The single-subset, full-sample configuration (plain SSC-OMP).
    pub fn ssc_omp(&self) -> Self {
        Self {
            num_subsets: 1,
            sampling_rate: 1.0,
            ..self.clone()
        }
    }

    pub fn is_ssc_omp_equivalent(&self) -> bool {
        self.num_subsets == 1 && self.sampling_rate == 1.0
    }

    /// `⌈δN⌉`, clamped to `1..=N`.
    pub fn subset_size(&self, n: usize) -> usize {
        subset_size(self.sampling_rate, n)
    }
}

/// `⌈δN⌉`, clamped to `1..=N`. Products within 1e-9 (relative) of an integer
/// are rounded to it so that e.g. 0.1·30 yields 3, not 4.
pub fn subset_size(delta: f64, n: usize) -> usize {
    let v = delta * n as f64;
    let r = v.round();
    let m = if (v - r).abs() <= 1e-9 * r.max(1.0) { r } else { v.ceil() };
    (m.max(1.0) as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("sampling rate must lie in (0, 1], got {0}")]
    BadDelta(f64),

    #[error("subset size ceil(delta*N) = {subset_size} for N = {n}; at least 2 is required")]
    SubsetTooSmall { subset_size: usize, n: usize },

    #[error("sparsity {sparsity} exceeds ceil(delta*N) - 1 = {max}")]
    SparsityTooLarge { sparsity: usize, max: usize },

    #[error("number of subsets must be positive")]
    NoSubsets,

    #[error("sparsity must be positive")]
    ZeroSparsity,

    #[error("epsilon must be finite and nonnegative, got {0}")]
    BadEpsilon(f64),

    #[error("number of clusters must lie in 1..={n}, got {clusters}")]
    BadClusterCount { clusters: usize, n: usize },
}

/// Checks `p` against a dataset of `n` points.
pub fn validate_params(p: &Params, n: usize) -> Result<(), ParamError> {
    if !(p.sampling_rate > 0.0 && p.sampling_rate <= 1.0) {
        return Err(ParamError::BadDelta(p.sampling_rate));
    }
    if p.num_subsets == 0 {
        return Err(ParamError::NoSubsets);
    }
    if p.sparsity == 0 {
        return Err(ParamError::ZeroSparsity);
    }
    if !(p.epsilon.is_finite() && p.epsilon >= 0.0) {
        return Err(ParamError::BadEpsilon(p.epsilon));
    }
    let m = p.subset_size(n);
    if m < 2 {
        return Err(ParamError::SubsetTooSmall { subset_size: m, n });
    }
    if p.sparsity > m - 1 {
        return Err(ParamError::SparsityTooLarge {
            sparsity: p.sparsity,
            max: m - 1,
        });
    }
    if p.num_clusters == 0 || p.num_clusters > n {
        return Err(ParamError::BadClusterCount {
            clusters: p.num_clusters,
            n,
        });
    }
    Ok(())
}

/// The sampled index sets `I^(t)` and the weights left after sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPlan {
    subsets: Vec<Vec<usize>>,
    final_weights: Vec<f64>,
    membership: Vec<Vec<usize>>,
}

impl SubsetPlan {
    /// Sorts each subset and derives the membership map. Fails on duplicate or
    /// out-of-range indices.
    pub fn new(mut subsets: Vec<Vec<usize>>, final_weights: Vec<f64>) -> Result<Self, DataError> {
        let n = final_weights.len();
        let mut membership = vec![Vec::new(); n];
        for (t, subset) in subsets.iter_mut().enumerate() {
            subset.sort_unstable();
            for w in subset.windows(2) {
                if w[0] == w[1] {
                    return Err(DataError::DuplicateIndex(w[0]));
                }
            }
            for &i in subset.iter() {
                if i >= n {
                    return Err(DataError::IndexOutOfRange { index: i, len: n });
                }
                membership[i].push(t);
            }
        }
        Ok(Self {
            subsets,
            final_weights,
            membership,
        })
    }

    pub fn n_points(&self) -> usize {
        self.final_weights.len()
    }

    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }

    /// Sorted subsets.
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn final_weights(&self) -> &[f64] {
        &self.final_weights
    }

    /// Sorted subset ids containing point `i`.
    pub fn membership(&self, i: usize) -> &[usize] {
        &self.membership[i]
    }
}

/// Sparse vector of logical length `len` with sorted, distinct indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffVector {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseCoeffVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    /// Sorts the entries by index; rejects duplicates and out-of-range indices.
    /// Explicit zeros are kept.
    pub fn new(len: usize, mut entries: Vec<(usize, f64)>) -> Result<Self, DataError> {
        entries.sort_unstable_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::DuplicateIndex(w[0].0));
            }
        }
        if let Some(&(index, _)) = entries.last() {
            if index >= len {
                return Err(DataError::IndexOutOfRange { index, len });
            }
        }
        Ok(Self { len, entries })
    }

    /// Keeps the nonzero entries of `dense`.
    pub fn from_dense(dense: &[f64]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self {
            len: dense.len(),
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    /// Indices of the nonzero entries.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|(_, v)| *v != 0.0).map(|&(i, _)| i)
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }
}

/// Column-sparse N×N coefficient matrix; column `i` is `c_i*`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    columns: Vec<SparseCoeffVector>,
}

impl CoeffMatrix {
    /// Requires N columns of length N and a zero diagonal.
    pub fn new(columns: Vec<SparseCoeffVector>) -> Result<Self, DataError> {
        let n = columns.len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(DataError::ShapeMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            if col.get(j) != 0.0 {
                return Err(DataError::NonzeroDiagonal(j));
            }
        }
        Ok(Self { columns })
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &SparseCoeffVector {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[SparseCoeffVector] {
        &self.columns
    }

    /// Entry `C[row][col]`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col].get(row)
    }

    pub fn has_zero_diagonal(&self) -> bool {
        self.columns
            .iter()
            .enumerate()
            .all(|(j, c)| c.get(j) == 0.0)
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(SparseCoeffVector::nnz).sum()
    }
}

/// The weights `b*(i)` over the T per-subset reconstructions of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    pub values: Vec<f64>,
    /// Selected subset ids, sorted.
    pub support: Vec<usize>,
}

impl CombinationWeights {
    pub fn zeros(num_subsets: usize) -> Self {
        Self {
            values: vec![0.0; num_subsets],
            support: Vec::new(),
        }
    }
}

/// Labels and metrics of one clustering run. Metrics that need ground truth
/// are `None` when no labels were supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringReport {
    pub labels: Vec<usize>,
    pub accuracy_pct: Option<f64>,
    pub sre_pct: Option<f64>,
    pub connectivity: Option<f64>,
    pub runtime_seconds: f64,
    pub residuals: Option<ResidualDiagnostics>,
}
