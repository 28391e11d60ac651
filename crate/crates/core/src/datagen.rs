//! Synthetic unions of linear subspaces.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::norm;
use crate::types::DataMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_subspaces: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    pub points_per_subspace: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Five 6-dimensional subspaces of R⁹, noiseless.
    pub fn new(points_per_subspace: usize, seed: u64) -> Self {
        Self {
            num_subspaces: 5,
            subspace_dim: 6,
            ambient_dim: 9,
            points_per_subspace,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::BadSpec(m.to_string()));
        if self.num_subspaces == 0 {
            return bad("at least one subspace is required");
        }
        if self.subspace_dim == 0 || self.subspace_dim > self.ambient_dim {
            return bad("subspace dimension must be in 1..=ambient dimension");
        }
        if self.points_per_subspace == 0 {
            return bad("each subspace needs at least one point");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Unit-norm points, grouped by subspace.
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    /// Orthonormal basis (D×d) of each subspace.
    pub bases: Vec<DMatrix<f64>>,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DatagenError> {
    spec.validate()?;
    let (dd, d, n) = (spec.ambient_dim, spec.subspace_dim, spec.points_per_subspace);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns = Vec::with_capacity(spec.num_subspaces * n);
    let mut labels = Vec::with_capacity(spec.num_subspaces * n);
    let mut bases = Vec::with_capacity(spec.num_subspaces);
    for k in 0..spec.num_subspaces {
        let basis = gaussian_matrix(dd, d, &mut rng).qr().q();
        let coeffs = gaussian_matrix(d, n, &mut rng);
        let mut points = &basis * coeffs;
        if spec.noise_sigma > 0.0 {
            points += gaussian_matrix(dd, n, &mut rng) * spec.noise_sigma;
        }
        for col in points.column_iter() {
            let v: Vec<f64> = col.iter().copied().collect();
            let nrm = norm(&v);
            columns.push(if nrm > 0.0 { v.iter().map(|x| x / nrm).collect() } else { v });
            labels.push(k);
        }
        bases.push(basis);
    }
    let data = DataMatrix::from_columns(&columns).map_err(|e| DatagenError::BadSpec(e.to_string()))?;
    Ok(SyntheticData { data, labels, bases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_labels() {
        let s = generate_synthetic(&SyntheticSpec::new(100, 0)).unwrap();
        assert_eq!((s.data.dim(), s.data.n_points()), (9, 500));
        for k in 0..5 {
            assert_eq!(s.labels.iter().filter(|&&l| l == k).count(), 100);
        }
        for c in s.data.columns() {
            assert!((norm(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bases_are_orthonormal_and_points_lie_in_them() {
        let s = generate_synthetic(&SyntheticSpec::new(30, 3)).unwrap();
        for u in &s.bases {
            let gram = u.transpose() * u;
            assert!((gram - DMatrix::identity(6, 6)).norm() < 1e-9);
        }
        for (i, c) in s.data.columns().enumerate() {
            let u = &s.bases[s.labels[i]];
            let x = nalgebra::DVector::from_column_slice(c);
            let r = &x - u * (u.transpose() * &x);
            assert!(r.norm() <= 1e-9);
        }
    }

    #[test]
    fn noise_leaves_the_subspace() {
        let spec = SyntheticSpec {
            noise_sigma: 0.1,
            ..SyntheticSpec::new(20, 3)
        };
        let s = generate_synthetic(&spec).unwrap();
        let u = &s.bases[0];
        let x = nalgebra::DVector::from_column_slice(s.data.column(0));
        assert!((&x - u * (u.transpose() * &x)).norm() > 1e-6);
    }

    #[test]
    fn full_dimensional_subspace_has_zero_sre() {
        let spec = SyntheticSpec {
            num_subspaces: 1,
            subspace_dim: 9,
            ..SyntheticSpec::new(40, 2)
        };
        let s = generate_synthetic(&spec).unwrap();
        let p = crate::types::Params {
            num_subsets: 4,
            sampling_rate: 0.5,
            sparsity: 3,
            ..crate::types::Params::new(1)
        };
        let out = crate::pms::pms_coefficients(&s.data, &p).unwrap();
        assert_eq!(crate::metrics::subspace_preserving_error(&out.coeffs, &s.labels).unwrap(), 0.0);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = generate_synthetic(&SyntheticSpec::new(10, 11)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::new(10, 11)).unwrap();
        let c = generate_synthetic(&SyntheticSpec::new(10, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let too_big = SyntheticSpec {
            subspace_dim: 10,
            ..SyntheticSpec::new(5, 0)
        };
        assert!(matches!(generate_synthetic(&too_big), Err(DatagenError::BadSpec(_))));
        assert!(generate_synthetic(&SyntheticSpec::new(0, 0)).is_err());
    }
}
