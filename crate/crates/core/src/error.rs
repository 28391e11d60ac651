use thiserror::Error;

use crate::datagen::DatagenError;
use crate::io::IoError;
use crate::metrics::MetricsError;
use crate::omp::OmpError;
use crate::sampling::SamplingError;
use crate::spectral::SpectralError;
use crate::types::{DataError, ParamError};

/// Crate-level error. The variant names the module the failure came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("params: {0}")]
    Params(#[from] ParamError),

    #[error("data: {0}")]
    Data(#[from] DataError),

    #[error("sampling: {0}")]
    Sampling(#[from] SamplingError),

    #[error("omp: {0}")]
    Omp(#[from] OmpError),

    #[error("pms: {0} point(s) are not covered by any subset: {1:?}")]
    Uncovered(usize, Vec<usize>),

    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),

    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),

    #[error("datagen: {0}")]
    Datagen(#[from] DatagenError),

    #[error("io: {0}")]
    Io(#[from] IoError),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
