//! Orthogonal matching pursuit.
//!
//! Two solvers share one greedy loop:
//!
//! - [`omp_subset`] expresses a point with at most `s` atoms of a subset
//!   dictionary, never using the point itself.
//! - [`omp_combination`] expresses a point with the T per-subset
//!   reconstructions `y^(t)`.
//!
//! Each iteration adds the admissible atom with the largest absolute
//! correlation `|aᵀr|` (lowest index on ties), refits by least squares on the
//! support and recomputes the residual. The loop stops once the iteration cap
//! is reached, `‖r‖₂ ≤ ε`, or no admissible atom has nonzero correlation.

use thiserror::Error;

use crate::linalg::{axpy, dot, lstsq, norm, LstsqError};
use crate::types::{CombinationWeights, DataError, DataMatrix, SparseCoeffVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OmpError {
    #[error("dictionary has no admissible columns")]
    EmptyCandidateSet,

    #[error("least-squares solve failed: {0}")]
    NumericalFailure(#[from] LstsqError),

    #[error("signal has dimension {got}, dictionary atoms have {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("self index {index} is not a column of a {len}-atom dictionary")]
    BadSelfIndex { index: usize, len: usize },

    #[error(transparent)]
    Data(#[from] DataError),
}

/// Column-normalized copy of `x`. Alias of [`DataMatrix::normalized`].
pub fn normalize_columns(x: &DataMatrix) -> DataMatrix {
    x.normalized()
}

/// Greedy state after the loop has finished.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpState {
    /// Selected atoms (dictionary-local), in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients, aligned with `support`.
    pub coefficients: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: usize,
    /// Residual norm after each iteration, starting with `‖x‖₂`.
    pub residual_history: Vec<f64>,
}

impl OmpState {
    pub fn residual_norm(&self) -> f64 {
        *self.residual_history.last().expect("history starts with the initial norm")
    }
}

/// The shared greedy loop over the columns of `atoms`.
fn pursue(
    atoms: &DataMatrix,
    x: &[f64],
    max_iter: usize,
    epsilon: f64,
    admissible: impl Fn(usize) -> bool,
) -> Result<OmpState, OmpError> {
    if x.len() != atoms.dim() {
        return Err(OmpError::DimensionMismatch {
            expected: atoms.dim(),
            got: x.len(),
        });
    }
    let k_atoms = atoms.n_points();
    let mut selected = vec![false; k_atoms];
    let mut support = Vec::new();
    let mut coefficients = Vec::new();
    let mut residual = x.to_vec();
    let mut history = vec![norm(x)];

    while support.len() < max_iter && *history.last().unwrap() > epsilon {
        let mut best = None;
        let mut best_corr = 0.0;
        for (j, &taken) in selected.iter().enumerate() {
            if taken || !admissible(j) {
                continue;
            }
            let corr = dot(atoms.column(j), &residual).abs();
            if corr > best_corr {
                best_corr = corr;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        selected[j] = true;
        support.push(j);

        let cols: Vec<&[f64]> = support.iter().map(|&s| atoms.column(s)).collect();
        coefficients = lstsq(&cols, x)?;
        residual.copy_from_slice(x);
        for (&c, col) in coefficients.iter().zip(&cols) {
            axpy(-c, col, &mut residual);
        }
        history.push(norm(&residual));
    }

    Ok(OmpState {
        iterations: support.len(),
        support,
        coefficients,
        residual,
        residual_history: history,
    })
}

/// A subset dictionary stored compactly, with the map from local column to
/// global point index. Global indices are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDictionary {
    atoms: DataMatrix,
    global: Vec<usize>,
    n_total: usize,
}

impl SubsetDictionary {
    /// Copies the columns `indices` (sorted, distinct) of `x`.
    pub fn from_indices(x: &DataMatrix, indices: &[usize]) -> Result<Self, DataError> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::DuplicateIndex(w[1]));
        }
        Ok(Self {
            atoms: x.select_columns(indices)?,
            global: indices.to_vec(),
            n_total: x.n_points(),
        })
    }

    /// Every column of `x`.
    pub fn full(x: &DataMatrix) -> Self {
        Self {
            atoms: x.clone(),
            global: (0..x.n_points()).collect(),
            n_total: x.n_points(),
        }
    }

    pub fn atoms(&self) -> &DataMatrix {
        &self.atoms
    }

    pub fn global_indices(&self) -> &[usize] {
        &self.global
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.global.binary_search(&global).ok()
    }
}

/// Result of [`omp_subset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    /// Coefficients in global (length N) index space.
    pub coeffs: SparseCoeffVector,
    pub residual_norm: f64,
    pub state: OmpState,
}

/// Sparse self-expression of `x` over `dict`, excluding local column
/// `self_local` when given.
pub fn omp_subset(
    dict: &SubsetDictionary,
    self_local: Option<usize>,
    x: &[f64],
    sparsity: usize,
    epsilon: f64,
) -> Result<SubsetFit, OmpError> {
    let k = dict.atoms.n_points();
    if let Some(i) = self_local {
        if i >= k {
            return Err(OmpError::BadSelfIndex { index: i, len: k });
        }
    }
    let admissible_count = k - usize::from(self_local.is_some());
    if admissible_count == 0 && sparsity > 0 {
        return Err(OmpError::EmptyCandidateSet);
    }
    let state = pursue(&dict.atoms, x, sparsity, epsilon, |j| Some(j) != self_local)?;
    let entries = state
        .support
        .iter()
        .zip(&state.coefficients)
        .filter(|(_, &c)| c != 0.0)
        .map(|(&j, &c)| (dict.global[j], c))
        .collect();
    Ok(SubsetFit {
        coeffs: SparseCoeffVector::new(dict.n_total, entries)?,
        residual_norm: state.residual_norm(),
        state,
    })
}

/// Result of [`omp_combination`].
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationFit {
    pub weights: CombinationWeights,
    pub residual_norm: f64,
    pub state: OmpState,
}

/// Weights `b` over the columns of `y` (D×T) minimizing `‖x − Y b‖₂`
/// greedily, with at most T iterations. Zero columns are never selected.
pub fn omp_combination(y: &DataMatrix, x: &[f64], epsilon: f64) -> Result<CombinationFit, OmpError> {
    let t = y.n_points();
    let state = pursue(y, x, t, epsilon, |_| true)?;
    let mut values = vec![0.0; t];
    for (&j, &c) in state.support.iter().zip(&state.coefficients) {
        values[j] = c;
    }
    let mut support = state.support.clone();
    support.sort_unstable();
    Ok(CombinationFit {
        weights: CombinationWeights { values, support },
        residual_norm: state.residual_norm(),
        state,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force greedy reference: correlations over every admissible atom,
    //! then a dense least-squares solve through the SVD at each step.

    use nalgebra::{DMatrix, DVector};

    pub struct Reference {
        pub support: Vec<usize>,
        pub coefficients: Vec<f64>,
        pub residual_norm: f64,
    }

    pub fn greedy(
        atoms: &[Vec<f64>],
        x: &[f64],
        max_iter: usize,
        epsilon: f64,
        excluded: Option<usize>,
    ) -> Reference {
        let d = x.len();
        let xv = DVector::from_column_slice(x);
        let mut support: Vec<usize> = Vec::new();
        let mut coef = DVector::zeros(0);
        let mut r = xv.clone();
        while support.len() < max_iter && r.norm() > epsilon {
            let mut best: Option<(usize, f64)> = None;
            for (j, a) in atoms.iter().enumerate() {
                if Some(j) == excluded || support.contains(&j) {
                    continue;
                }
                let c = DVector::from_column_slice(a).dot(&r).abs();
                if c > 0.0 && best.is_none_or(|(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
            let Some((j, _)) = best else { break };
            support.push(j);
            let a = DMatrix::from_fn(d, support.len(), |row, col| atoms[support[col]][row]);
            coef = a.clone().svd(true, true).solve(&xv, 1e-13).unwrap();
            r = &xv - &a * &coef;
        }
        Reference {
            support,
            coefficients: coef.iter().copied().collect(),
            residual_norm: r.norm(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(cols: &[Vec<f64>]) -> SubsetDictionary {
        SubsetDictionary::full(&DataMatrix::from_columns(cols).unwrap())
    }

    #[test]
    fn normalize_examples() {
        let m = DataMatrix::from_columns(&[vec![3.0, 4.0], vec![0.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let n = normalize_columns(&m);
        assert_eq!(n.column(0), &[0.6, 0.8]);
        assert_eq!(n.column(1), &[0.0, 0.0]);
        assert_eq!(n.column(2), m.column(2));
    }

    #[test]
    fn exact_atom_is_recovered() {
        let d = dict(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8], vec![0.0, 1.0, 0.0]]);
        let fit = omp_subset(&d, Some(0), &[0.0, 0.6, 0.8], 2, 1e-6).unwrap();
        assert_eq!(fit.coeffs.entries(), &[(1, 1.0)]);
        assert!(fit.residual_norm < 1e-15);
        assert_eq!(fit.state.iterations, 1);
    }

    #[test]
    fn single_step_on_orthonormal_atoms_is_projection() {
        let d = dict(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let x = [0.2, -0.7, 0.1];
        let fit = omp_subset(&d, None, &x, 1, 0.0).unwrap();
        assert_eq!(fit.coeffs.entries(), &[(1, -0.7)]);
        assert_eq!(fit.state.residual, vec![0.2, 0.0, 0.1]);
    }

    #[test]
    fn self_column_is_never_used() {
        let d = dict(&[vec![1.0, 0.0], vec![0.8, 0.6], vec![0.0, 1.0]]);
        let fit = omp_subset(&d, Some(1), &[0.8, 0.6], 2, 0.0).unwrap();
        assert_eq!(fit.coeffs.get(1), 0.0);
        assert!(fit.state.support.iter().all(|&j| j != 1));
    }

    #[test]
    fn global_indices_are_reported() {
        let x = DataMatrix::from_columns(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.6, 0.8],
            vec![0.8, 0.6],
        ])
        .unwrap();
        let d = SubsetDictionary::from_indices(&x, &[1, 3]).unwrap();
        assert_eq!(d.local_index(3), Some(1));
        assert_eq!(d.local_index(2), None);
        let fit = omp_subset(&d, Some(0), &[0.8, 0.6], 1, 1e-9).unwrap();
        assert_eq!(fit.coeffs.len(), 4);
        let e = fit.coeffs.entries();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].0, 3);
        assert!((e[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_set_is_an_error() {
        let d = dict(&[vec![1.0, 0.0]]);
        assert_eq!(
            omp_subset(&d, Some(0), &[1.0, 0.0], 1, 0.0),
            Err(OmpError::EmptyCandidateSet)
        );
        assert!(matches!(
            omp_subset(&d, Some(3), &[1.0, 0.0], 1, 0.0),
            Err(OmpError::BadSelfIndex { .. })
        ));
    }

    #[test]
    fn orthogonal_signal_selects_nothing() {
        let d = dict(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let fit = omp_subset(&d, None, &[0.0, 0.0, 1.0], 2, 0.0).unwrap();
        assert_eq!(fit.coeffs.nnz(), 0);
        assert_eq!(fit.residual_norm, 1.0);
    }

    #[test]
    fn combination_examples() {
        let x = vec![0.6, 0.0, 0.8];
        let y = DataMatrix::from_columns(std::slice::from_ref(&x)).unwrap();
        let fit = omp_combination(&y, &x, 1e-6).unwrap();
        assert!((fit.weights.values[0] - 1.0).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-15);

        let y = DataMatrix::from_columns(&[x.clone(), vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let fit = omp_combination(&y, &x, 1e-6).unwrap();
        assert!((fit.weights.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(&fit.weights.values[1..], &[0.0, 0.0]);
        assert_eq!(fit.weights.support, vec![0]);

        let y = DataMatrix::from_columns(&[vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let fit = omp_combination(&y, &x, 1e-6).unwrap();
        assert_eq!(fit.weights.values, vec![0.0, 0.0]);
        assert!(fit.weights.support.is_empty());
        assert_eq!(fit.residual_norm, norm(&x));
    }

    fn random_cols(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect()
    }

    #[test]
    fn subset_solver_matches_brute_force_reference() {
        // D = 3, 4 atoms, s = 2, ε = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let cols = random_cols(&mut rng, 3, 4);
            let x = random_cols(&mut rng, 3, 1).pop().unwrap();
            let fit = omp_subset(&dict(&cols), None, &x, 2, 0.0).unwrap();
            let r = oracle::greedy(&cols, &x, 2, 0.0, None);
            assert_eq!(fit.state.support, r.support);
            for (a, b) in fit.state.coefficients.iter().zip(&r.coefficients) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((fit.residual_norm - r.residual_norm).abs() < 1e-9);
        }
    }

    #[test]
    fn combination_solver_matches_brute_force_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let y_cols = random_cols(&mut rng, 5, 3);
            let x = random_cols(&mut rng, 5, 1).pop().unwrap();
            let y = DataMatrix::from_columns(&y_cols).unwrap();
            let fit = omp_combination(&y, &x, 1e-6).unwrap();
            let r = oracle::greedy(&y_cols, &x, 3, 1e-6, None);
            assert_eq!(fit.state.support, r.support);
            for (&j, b) in r.support.iter().zip(&r.coefficients) {
                assert!((fit.weights.values[j] - b).abs() < 1e-9);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize, Option<usize>)> {
            (2usize..7, 2usize..10, 1usize..5).prop_flat_map(|(d, k, s)| {
                (
                    proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, d), k),
                    proptest::collection::vec(-1.0..1.0f64, d),
                    Just(s),
                    proptest::option::of(0..k),
                )
            })
        }

        proptest! {
            #[test]
            fn pursuit_invariants((cols, x, s, me) in instance()) {
                let d = dict(&cols);
                let fit = omp_subset(&d, me, &x, s, 1e-6).unwrap();
                let h = &fit.state.residual_history;
                for w in h.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-12);
                }
                prop_assert!(fit.state.iterations <= s);
                prop_assert!(fit.coeffs.nnz() <= s);
                if let Some(i) = me {
                    prop_assert_eq!(fit.coeffs.get(i), 0.0);
                }
                // Stopping rule.
                let admissible: Vec<usize> = (0..cols.len())
                    .filter(|&j| Some(j) != me && !fit.state.support.contains(&j))
                    .collect();
                let stalled = admissible.iter().all(|&j| dot(&cols[j], &fit.state.residual) == 0.0);
                prop_assert!(fit.residual_norm <= 1e-6 || fit.state.iterations == s || stalled);
            }

            #[test]
            fn combination_dominates_each_column(
                (cols, x, _s, _me) in instance()
            ) {
                let y = DataMatrix::from_columns(&cols).unwrap();
                let fit = omp_combination(&y, &x, 1e-6).unwrap();
                let best_single = cols
                    .iter()
                    .map(|c| {
                        let diff: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
                        norm(&diff)
                    })
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(fit.residual_norm <= best_single.max(1e-6) + 1e-10);
                prop_assert!(fit.weights.support.len() <= cols.len());
            }
        }
    }
}
