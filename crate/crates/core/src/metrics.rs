//! Evaluation metrics: clustering accuracy, subspace-preserving
//! representation error (sre), connectivity, and residual diagnostics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hungarian::max_weight_assignment;
use crate::linalg::{norm, smallest_eigenpairs};
use crate::pms::{reconstruct, PointSolution};
use crate::spectral::{normalized_laplacian, AffinityMatrix, SpectralError};
use crate::types::{CoeffMatrix, DataMatrix, SubsetPlan};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} is not below the cluster count {clusters}")]
    LabelOutOfRange { label: usize, clusters: usize },

    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Mean residual norms per subset and after fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub per_subset_mean: Vec<f64>,
    pub combined_mean: f64,
}

fn check_len(left: usize, right: usize) -> Result<(), MetricsError> {
    if left == right {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { left, right })
    }
}

/// Maps arbitrary labels onto `0..k` in order of first appearance.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let dense = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

/// Percentage of points labeled correctly under the best one-to-one matching
/// of estimated to true clusters.
pub fn clustering_accuracy(est: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    check_len(est.len(), truth.len())?;
    if est.is_empty() {
        return Ok(100.0);
    }
    let (est, ke) = densify(est);
    let (truth, kt) = densify(truth);
    let k = ke.max(kt);
    let mut q = vec![vec![0i64; k]; k];
    for (&e, &t) in est.iter().zip(&truth) {
        q[e][t] += 1;
    }
    let assign = max_weight_assignment(&q);
    let matched: i64 = assign.iter().enumerate().map(|(e, &t)| q[e][t]).sum();
    Ok(100.0 * matched as f64 / est.len() as f64)
}

/// `(100/N) Σ_j (1 − Σ_i ω_ij |c_ij| / ‖c_j‖₁)`. Zero columns count as fully
/// non-preserving.
pub fn subspace_preserving_error(c: &CoeffMatrix, truth: &[usize]) -> Result<f64, MetricsError> {
    check_len(c.n(), truth.len())?;
    let n = c.n();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut zero_columns = Vec::new();
    for (j, col) in c.columns().iter().enumerate() {
        let l1 = col.l1_norm();
        if l1 == 0.0 {
            zero_columns.push(j);
            total += 1.0;
            continue;
        }
        let inside: f64 = col
            .entries()
            .iter()
            .filter(|&&(i, _)| truth[i] == truth[j])
            .map(|&(_, v)| v.abs())
            .sum();
        total += 1.0 - inside / l1;
    }
    if !zero_columns.is_empty() {
        log::warn!(
            "sre: {} zero coefficient column(s) counted as non-preserving: {:?}",
            zero_columns.len(),
            &zero_columns[..zero_columns.len().min(20)]
        );
    }
    Ok(100.0 * total / n as f64)
}

/// Second smallest eigenvalue of the normalized Laplacian of `a`; exactly 0
/// for disconnected graphs and graphs with fewer than two nodes.
pub fn algebraic_connectivity(a: &AffinityMatrix, seed: u64) -> Result<f64, MetricsError> {
    if a.n() < 2 || a.connected_components() > 1 {
        return Ok(0.0);
    }
    let pairs = smallest_eigenpairs(&normalized_laplacian(a), 2, seed).map_err(SpectralError::from)?;
    Ok(pairs.values[1].max(0.0))
}

/// λ₂ of each ground-truth cluster's induced subgraph, for clusters `0..clusters`.
pub fn cluster_connectivities(
    a: &AffinityMatrix,
    truth: &[usize],
    clusters: usize,
) -> Result<Vec<f64>, MetricsError> {
    check_len(a.n(), truth.len())?;
    let mut members = vec![Vec::new(); clusters];
    for (i, &l) in truth.iter().enumerate() {
        if l >= clusters {
            return Err(MetricsError::LabelOutOfRange { label: l, clusters });
        }
        members[l].push(i);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, nodes)| {
            if nodes.len() < 2 {
                log::warn!("connectivity: cluster {c} has {} point(s); contributes 0", nodes.len());
                return Ok(0.0);
            }
            algebraic_connectivity(&a.induced(nodes), c as u64)
        })
        .collect()
}

/// `(1/L) Σ λ₂⁽ⁱ⁾` over the ground-truth clusters.
pub fn connectivity(a: &AffinityMatrix, truth: &[usize], clusters: usize) -> Result<f64, MetricsError> {
    if clusters == 0 {
        return Ok(0.0);
    }
    let per = cluster_connectivities(a, truth, clusters)?;
    Ok(per.iter().sum::<f64>() / clusters as f64)
}

/// Mean residuals of the per-subset solutions (normalized by the subset size)
/// and of the fused coefficients (normalized by N). `x` is the column-normalized
/// data the solutions were computed on.
pub fn residual_diagnostics(
    x: &DataMatrix,
    plan: &SubsetPlan,
    points: &[PointSolution],
    coeffs: &CoeffMatrix,
) -> Result<ResidualDiagnostics, MetricsError> {
    let n = x.n_points();
    check_len(points.len(), n)?;
    check_len(coeffs.n(), n)?;
    let residual = |i: usize, rec: &[f64]| {
        let diff: Vec<f64> = x.column(i).iter().zip(rec).map(|(a, b)| a - b).collect();
        norm(&diff)
    };

    let mut sums = vec![0.0; plan.num_subsets()];
    for sol in points {
        for s in &sol.subsets {
            sums[s.subset] += residual(sol.point, &s.reconstruction);
        }
    }
    let per_subset_mean = sums
        .iter()
        .zip(plan.subsets())
        .map(|(s, members)| if members.is_empty() { 0.0 } else { s / members.len() as f64 })
        .collect();

    let mut combined = 0.0;
    for i in 0..n {
        let rec = reconstruct(x, coeffs.column(i)).expect("coefficient indices lie within the data");
        combined += residual(i, &rec);
    }
    Ok(ResidualDiagnostics {
        per_subset_mean,
        combined_mean: if n == 0 { 0.0 } else { combined / n as f64 },
    })
}
