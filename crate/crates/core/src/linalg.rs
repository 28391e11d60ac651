//! Small dense and sparse linear algebra used by the solvers.
//!
//! - [`lstsq`]: least squares by Householder QR with column pivoting. Columns
//!   that are numerically dependent on earlier pivots get a zero coefficient.
//! - [`CsrMatrix`]: square sparse matrix for affinities and Laplacians.
//! - [`smallest_eigenpairs`]: the `k` smallest eigenpairs of a symmetric
//!   sparse matrix. Small problems use a dense decomposition; larger ones use
//!   a restarted block Krylov (Rayleigh–Ritz) iteration whose eigenpairs are
//!   accepted only once `‖Lv − λv‖₂ ≤ 1e-8`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Pivots with `|R_jj| <= LSTSQ_RTOL * |R_00|` are treated as rank deficient.
pub const LSTSQ_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LstsqError {
    #[error("column {col} has length {got}, expected {expected}")]
    ShapeMismatch { col: usize, expected: usize, got: usize },

    #[error("least-squares solve produced a non-finite coefficient")]
    NonFinite,
}

/// Solves `min_z ‖b − A z‖₂` where `A = [columns...]`.
///
/// Returns the basic solution of the column-pivoted QR: coefficients of
/// columns found dependent on earlier pivots are exactly zero.
pub fn lstsq(columns: &[&[f64]], b: &[f64]) -> Result<Vec<f64>, LstsqError> {
    let m = b.len();
    let k = columns.len();
    for (j, col) in columns.iter().enumerate() {
        if col.len() != m {
            return Err(LstsqError::ShapeMismatch {
                col: j,
                expected: m,
                got: col.len(),
            });
        }
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    // Column-major working copy; `perm[j]` is the original column at position j.
    let mut a: Vec<f64> = columns.iter().flat_map(|c| c.iter().copied()).collect();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let steps = m.min(k);
    let mut diag = Vec::with_capacity(steps);

    for j in 0..steps {
        // Pivot: largest trailing column norm, lowest index on ties.
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..k {
            let tail = &a[c * m + j..(c + 1) * m];
            let nrm = dot(tail, tail);
            if nrm > best_norm {
                best_norm = nrm;
                best = c;
            }
        }
        if best != j {
            for r in 0..m {
                a.swap(j * m + r, best * m + r);
            }
            perm.swap(j, best);
        }

        let col_norm = best_norm.sqrt();
        if col_norm == 0.0 {
            diag.push(0.0);
            break;
        }
        let head = a[j * m + j];
        let alpha = if head >= 0.0 { -col_norm } else { col_norm };
        // v = x - alpha e1, stored in place of the column tail.
        let mut v: Vec<f64> = a[j * m + j..(j + 1) * m].to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv > 0.0 {
            for c in (j + 1)..k {
                let tail = &mut a[c * m + j..(c + 1) * m];
                let s = 2.0 * dot(&v, tail) / vtv;
                axpy(-s, &v, tail);
            }
            let s = 2.0 * dot(&v, &rhs[j..]) / vtv;
            axpy(-s, &v, &mut rhs[j..]);
        }
        a[j * m + j] = alpha;
        diag.push(alpha);
    }

    let lead = diag.first().map_or(0.0, |d: &f64| d.abs());
    let rank = diag
        .iter()
        .take_while(|d| lead > 0.0 && d.abs() > LSTSQ_RTOL * lead)
        .count();

    // Back substitution on the leading rank x rank block of R.
    let mut z = vec![0.0; rank];
    for row in (0..rank).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..rank {
            acc -= a[c * m + row] * z[c];
        }
        z[row] = acc / a[row * m + row];
    }

    let mut out = vec![0.0; k];
    for (pos, value) in z.into_iter().enumerate() {
        if !value.is_finite() {
            return Err(LstsqError::NonFinite);
        }
        out[perm[pos]] = value;
    }
    Ok(out)
}

/// Square sparse matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate coordinates are summed; exact zeros are dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with every stored value mapped through `f`; the sparsity pattern
    /// is kept even where `f` returns zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.n {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            for (v, &j) in values[range.clone()].iter_mut().zip(&self.col_idx[range]) {
                *v = f(i, j, *v);
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("requested {k} eigenpairs of a {n}x{n} matrix")]
    TooMany { k: usize, n: usize },

    #[error("eigensolver did not converge (worst residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("dense eigendecomposition produced non-finite values")]
    NonFinite,
}

/// Eigenpairs sorted by ascending eigenvalue; `vectors[j]` has unit norm.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Matrices up to this order are decomposed densely.
pub const DENSE_EIGEN_LIMIT: usize = 400;
/// Residual bound for accepting an iterative eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
const MAX_RESTARTS: usize = 300;

/// The `k` smallest eigenpairs of the symmetric matrix `a`.
pub fn smallest_eigenpairs(a: &CsrMatrix, k: usize, seed: u64) -> Result<EigenPairs, EigenError> {
    let n = a.n();
    if k > n {
        return Err(EigenError::TooMany { k, n });
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    if n <= DENSE_EIGEN_LIMIT {
        return dense_smallest_eigenpairs(&a.to_dense(), k);
    }
    match block_krylov_smallest(a, k, seed) {
        Ok(pairs) => Ok(pairs),
        Err(EigenError::NotConverged { residual }) => {
            log::warn!(
                "iterative eigensolver stalled at residual {residual:e} (n = {n}); using dense decomposition"
            );
            dense_smallest_eigenpairs(&a.to_dense(), k)
        }
        Err(e) => Err(e),
    }
}

/// Dense symmetric decomposition; returns the `k` smallest eigenpairs.
pub fn dense_smallest_eigenpairs(m: &DMatrix<f64>, k: usize) -> Result<EigenPairs, EigenError> {
    let n = m.nrows();
    if k > n {
        return Err(EigenError::TooMany { k, n });
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order[..k].iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    Ok(EigenPairs { values, vectors })
}

/// Dense symmetric eigenvalues only, ascending.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Restarted block Krylov iteration with full reorthogonalization.
///
/// Each cycle expands the current block into a Krylov basis, projects the
/// operator onto it and restarts from the lowest Ritz vectors. Blocks keep
/// multiple eigenvalues (disconnected graphs) from being lost.
fn block_krylov_smallest(a: &CsrMatrix, k: usize, seed: u64) -> Result<EigenPairs, EigenError> {
    let n = a.n();
    let block = (k + 6).min(n);
    let basis_cap = (10 * block).max(100).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    let mut worst = f64::INFINITY;
    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
        let mut pending = std::mem::take(&mut start);
        while basis.len() < basis_cap && !pending.is_empty() {
            let mut next = Vec::new();
            for mut v in pending {
                if basis.len() >= basis_cap {
                    break;
                }
                let before = norm(&v);
                if before == 0.0 {
                    continue;
                }
                for _ in 0..2 {
                    for q in &basis {
                        let c = dot(q, &v);
                        axpy(-c, q, &mut v);
                    }
                }
                let after = norm(&v);
                if after <= 1e-10 * before {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= after);
                let mut av = vec![0.0; n];
                a.matvec(&v, &mut av);
                next.push(av.clone());
                basis.push(v);
                images.push(av);
            }
            pending = next;
        }

        let m = basis.len();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let keep = block.min(m);
        let ritz = dense_smallest_eigenpairs(&h, keep)?;

        let mut vectors = Vec::with_capacity(keep);
        worst = 0.0f64;
        for (j, y) in ritz.vectors.iter().enumerate() {
            let mut u = vec![0.0; n];
            let mut au = vec![0.0; n];
            for (coef, (q, aq)) in y.iter().zip(basis.iter().zip(&images)) {
                axpy(*coef, q, &mut u);
                axpy(*coef, aq, &mut au);
            }
            if j < k {
                axpy(-ritz.values[j], &u, &mut au);
                worst = worst.max(norm(&au));
            }
            vectors.push(u);
        }
        if worst <= EIGEN_RESIDUAL_TOL || m == n {
            let values = ritz.values[..k].to_vec();
            vectors.truncate(k);
            return Ok(EigenPairs { values, vectors });
        }
        start = vectors;
    }
    Err(EigenError::NotConverged { residual: worst })
}
