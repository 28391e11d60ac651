//! Multi-subset self-expression.
//!
//! For each point `x_i` and each subset `t` containing it, [`omp_subset`]
//! yields `c_i^(t)` and the reconstruction `y_i^(t) = X c_i^(t)`. Subsets that
//! do not contain `i` contribute `c_i^(t) = 0`, `y_i^(t) = 0`. The
//! reconstructions are stacked into `Y` (D×T), [`omp_combination`] finds
//! `b*(i)`, and the fused coefficients are `c_i* = Σ_t b*_t c_i^(t)`.
//!
//! The subset plan is sampled before any parallel work; the per-point solves
//! are pure, so `C*` does not depend on the thread count.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::omp::{omp_combination, omp_subset, OmpError, SubsetDictionary};
use crate::sampling::{coverage_report, generate_plan};
use crate::types::{
    validate_params, CoeffMatrix, CombinationWeights, DataError, DataMatrix, Params,
    SparseCoeffVector, SubsetPlan,
};

/// The pursuit of one point within one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSolution {
    pub point: usize,
    pub subset: usize,
    /// `c_i^(t)`, global indices, supported in `I^(t) \ {i}`.
    pub coeffs: SparseCoeffVector,
    /// `y_i^(t) = X c_i^(t)`.
    pub reconstruction: Vec<f64>,
    /// `‖x_i − y_i^(t)‖₂`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub point: usize,
    /// One entry per subset containing the point, ascending subset id.
    pub subsets: Vec<SubsetSolution>,
    pub weights: CombinationWeights,
    /// Fused `c_i*`.
    pub coeffs: SparseCoeffVector,
    /// `‖x_i − Y b*(i)‖₂`.
    pub residual_norm: f64,
}

/// Everything computed by [`pms_coefficients`].
#[derive(Debug, Clone)]
pub struct PmsOutput {
    /// Column-normalized data; all residuals live in this space.
    pub normalized: DataMatrix,
    pub plan: SubsetPlan,
    pub points: Vec<PointSolution>,
    pub coeffs: CoeffMatrix,
    /// Points in no subset.
    pub uncovered: Vec<usize>,
}

/// `X c` for coefficients indexed by columns of `x`.
pub fn reconstruct(x: &DataMatrix, coeffs: &SparseCoeffVector) -> std::result::Result<Vec<f64>, DataError> {
    let mut out = vec![0.0; x.dim()];
    for &(j, c) in coeffs.entries() {
        if j >= x.n_points() {
            return Err(DataError::IndexOutOfRange {
                index: j,
                len: x.n_points(),
            });
        }
        axpy(c, x.column(j), &mut out);
    }
    Ok(out)
}

/// One compact dictionary per subset of `plan`.
pub fn subset_dictionaries(x: &DataMatrix, plan: &SubsetPlan) -> std::result::Result<Vec<SubsetDictionary>, DataError> {
    plan.subsets()
        .iter()
        .map(|s| SubsetDictionary::from_indices(x, s))
        .collect()
}

/// Solves point `i` against every subset dictionary and fuses the results.
/// `x` must already be column-normalized.
pub fn solve_point(
    i: usize,
    x: &DataMatrix,
    plan: &SubsetPlan,
    dictionaries: &[SubsetDictionary],
    p: &Params,
) -> std::result::Result<PointSolution, OmpError> {
    let n = x.n_points();
    let t_count = plan.num_subsets();
    let xi = x.column(i);

    let mut subsets = Vec::with_capacity(plan.membership(i).len());
    let mut y_data = vec![0.0; x.dim() * t_count];
    for &t in plan.membership(i) {
        let dict = &dictionaries[t];
        let local = dict.local_index(i);
        let fit = omp_subset(dict, local, xi, p.sparsity, p.epsilon)?;
        let reconstruction = reconstruct(x, &fit.coeffs)?;
        y_data[t * x.dim()..(t + 1) * x.dim()].copy_from_slice(&reconstruction);
        subsets.push(SubsetSolution {
            point: i,
            subset: t,
            coeffs: fit.coeffs,
            residual_norm: fit.residual_norm,
            reconstruction,
        });
    }

    if subsets.is_empty() {
        return Ok(PointSolution {
            point: i,
            subsets,
            weights: CombinationWeights::zeros(t_count),
            coeffs: SparseCoeffVector::zeros(n),
            residual_norm: crate::linalg::norm(xi),
        });
    }

    let y = DataMatrix::from_column_major(x.dim(), t_count, y_data)?;
    let combo = omp_combination(&y, xi, p.epsilon)?;

    let mut fused: BTreeMap<usize, f64> = BTreeMap::new();
    for sol in &subsets {
        let b = combo.weights.values[sol.subset];
        if b == 0.0 {
            continue;
        }
        for &(j, c) in sol.coeffs.entries() {
            *fused.entry(j).or_insert(0.0) += b * c;
        }
    }
    let entries = fused.into_iter().filter(|&(_, v)| v != 0.0).collect();
    Ok(PointSolution {
        point: i,
        subsets,
        weights: combo.weights,
        coeffs: SparseCoeffVector::new(n, entries)?,
        residual_norm: combo.residual_norm,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the ambient pool
/// when `threads == 0`.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Computes the fused coefficient matrix `C*` of `x`.
pub fn pms_coefficients(x: &DataMatrix, p: &Params) -> Result<PmsOutput> {
    let n = x.n_points();
    validate_params(p, n)?;
    let normalized = x.normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let plan = generate_plan(n, p, &mut rng)?;
    let uncovered = coverage_report(&plan);
    if !uncovered.is_empty() {
        log::warn!(
            "{} point(s) belong to no subset and get zero coefficients: {:?}",
            uncovered.len(),
            &uncovered[..uncovered.len().min(20)]
        );
    }
    let dictionaries = subset_dictionaries(&normalized, &plan)?;

    let points: Vec<PointSolution> = with_threads(p.threads, || {
        (0..n)
            .into_par_iter()
            .map(|i| solve_point(i, &normalized, &plan, &dictionaries, p))
            .collect::<std::result::Result<Vec<_>, OmpError>>()
    })??;

    let coeffs = CoeffMatrix::new(points.iter().map(|s| s.coeffs.clone()).collect())?;
    Ok(PmsOutput {
        normalized,
        plan,
        points,
        coeffs,
        uncovered,
    })
}
