//! Subspace clustering with a parallelizable multi-subset sparse self-expressive model.
//!
//! Every point `x_i` is expressed sparsely, by orthogonal matching pursuit, in
//! terms of the points of several randomly sampled subsets. The per-subset
//! reconstructions are then combined by a second pursuit over the subsets and
//! the combination weights are folded back into one coefficient vector `c_i*`.
//! The affinity `|C*| + |C*ᵀ|` is partitioned by normalized-cut spectral
//! clustering.
//!
//! The pipeline, bottom to top:
//!
//! | module | role |
//! |--------|------|
//! | [`types`] | data matrices, parameters, sparse coefficient vectors |
//! | [`sampling`] | weighted subset sampling with down-weighting |
//! | [`omp`] | the two greedy pursuit solvers |
//! | [`pms`] | per-point orchestration and coefficient fusion |
//! | [`spectral`] | affinity, normalized Laplacian, spectral clustering |
//! | [`metrics`] | accuracy, subspace-preserving error, connectivity, residuals |
//! | [`datagen`] | union-of-subspaces synthetic data |
//! | [`io`] | matrix, label, coefficient and report files |
//! | [`experiment`] | end-to-end runs, repeated trials and parameter sweeps |
//!
//! Indices are 0-based everywhere, including in every file format.

pub mod datagen;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod omp;
pub mod pms;
pub mod sampling;
pub mod spectral;
pub mod types;

mod hungarian;

pub use error::{Error, Result};
pub use types::{
    validate_params, ClusteringReport, CoeffMatrix, CombinationWeights, DataMatrix, Params,
    SamplingScheme, SparseCoeffVector, SubsetPlan,
};
