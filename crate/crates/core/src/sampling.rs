//! Subset sampling.
//!
//! Subsets are drawn one after another by successive proportional draws
//! without replacement. Under [`SamplingScheme::Weighted`] every point chosen
//! for subset `t` has its weight multiplied by [`DOWN_WEIGHT`] before subset
//! `t + 1` is drawn, so points that have not been picked yet dominate later
//! draws. All weights start at 1.

use rand::Rng;
use thiserror::Error;

use crate::types::{validate_params, ParamError, Params, SamplingScheme, SubsetPlan};

/// Weight multiplier applied to a point each time it is selected.
pub const DOWN_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("cannot draw {m} distinct indices from a population of {n}")]
    SampleSizeExceedsPopulation { m: usize, n: usize },

    #[error("weight {index} is {value}; weights must be positive and finite")]
    BadWeight { index: usize, value: f64 },

    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Strictly positive sampling weights, one per point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, SamplingError> {
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(SamplingError::BadWeight { index, value });
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Draws `m` distinct indices. Each draw picks the remaining index `j` with
/// probability `w_j / Σ_remaining w`; indices are returned in draw order.
pub fn sample_subset<R: Rng + ?Sized>(
    w: &WeightVector,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>, SamplingError> {
    let n = w.0.len();
    if m > n {
        return Err(SamplingError::SampleSizeExceedsPopulation { m, n });
    }
    let mut remaining = w.0.clone();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = remaining.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last_live = None;
            for (j, &wj) in remaining.iter().enumerate() {
                if wj <= 0.0 {
                    continue;
                }
                last_live = Some(j);
                acc += wj;
                if acc > target {
                    chosen = Some(j);
                    break;
                }
            }
            // Rounding can leave `target` just past the final partial sum.
            chosen.or(last_live)
        } else {
            None
        };
        let j = match pick {
            Some(j) => j,
            None => {
                // All remaining weights underflowed: fall back to a uniform draw.
                let free: Vec<usize> = (0..n).filter(|&j| !taken[j]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        taken[j] = true;
        remaining[j] = 0.0;
        out.push(j);
    }
    Ok(out)
}

/// Draws the T subsets of size `⌈δN⌉` sequentially from one random stream.
pub fn generate_plan<R: Rng + ?Sized>(
    n: usize,
    p: &Params,
    rng: &mut R,
) -> Result<SubsetPlan, SamplingError> {
    validate_params(p, n)?;
    let m = p.subset_size(n);
    let mut weights = WeightVector::uniform(n);
    let mut subsets = Vec::with_capacity(p.num_subsets);
    for _ in 0..p.num_subsets {
        let subset = sample_subset(&weights, m, rng)?;
        if p.sampling == SamplingScheme::Weighted {
            for &i in &subset {
                weights.0[i] *= DOWN_WEIGHT;
            }
        }
        subsets.push(subset);
    }
    Ok(SubsetPlan::new(subsets, weights.into_inner())
        .expect("sampled subsets are distinct and in range"))
}

/// Points that belong to no subset. They receive zero coefficients and end up
/// as isolated nodes of the affinity graph.
pub fn coverage_report(plan: &SubsetPlan) -> Vec<usize> {
    (0..plan.n_points())
        .filter(|&i| plan.membership(i).is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(t: usize, delta: f64) -> Params {
        Params {
            num_subsets: t,
            sampling_rate: delta,
            sparsity: 1,
            ..Params::new(1)
        }
    }

    #[test]
    fn full_draw_returns_every_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = sample_subset(&WeightVector::uniform(6), 6, &mut rng).unwrap();
        s.sort();
        assert_eq!(s, (0..6).collect::<Vec<_>>());
        let mut s = sample_subset(&WeightVector::new(vec![1.0, 1.0]).unwrap(), 2, &mut rng).unwrap();
        s.sort();
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_subset(&WeightVector::uniform(3), 4, &mut rng),
            Err(SamplingError::SampleSizeExceedsPopulation { m: 4, n: 3 })
        );
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn heavy_weight_dominates_single_draw() {
        let mut w = vec![1e-4; 10];
        w[0] = 1.0;
        let w = WeightVector::new(w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| sample_subset(&w, 1, &mut rng).unwrap()[0] == 0)
            .count();
        // Exact probability 1 / 1.0009.
        assert!(hits as f64 / trials as f64 >= 0.99);
    }

    /// Inclusion probabilities of a size-m successive draw, by enumerating every
    /// ordered draw sequence.
    fn inclusion_oracle(w: &[f64], m: usize) -> Vec<f64> {
        fn rec(w: &[f64], taken: &mut Vec<bool>, depth: usize, m: usize, p: f64, out: &mut [f64]) {
            if depth == m {
                for (i, &t) in taken.iter().enumerate() {
                    if t {
                        out[i] += p;
                    }
                }
                return;
            }
            let total: f64 = w.iter().zip(taken.iter()).filter(|(_, &t)| !t).map(|(x, _)| x).sum();
            for j in 0..w.len() {
                if !taken[j] {
                    taken[j] = true;
                    rec(w, taken, depth + 1, m, p * w[j] / total, out);
                    taken[j] = false;
                }
            }
        }
        let mut out = vec![0.0; w.len()];
        rec(w, &mut vec![false; w.len()], 0, m, 1.0, &mut out);
        out
    }

    #[test]
    fn inclusion_frequencies_match_successive_draw_oracle() {
        let w = [1.0, 2.0, 3.0, 0.5];
        let expected = inclusion_oracle(&w, 2);
        let wv = WeightVector::new(w.to_vec()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            for i in sample_subset(&wv, 2, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        for (c, e) in counts.iter().zip(&expected) {
            let freq = *c as f64 / trials as f64;
            // ~5 standard errors at this sample size.
            assert!((freq - e).abs() < 0.006, "freq {freq} vs exact {e}");
        }
    }

    #[test]
    fn single_full_subset_down_weights_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = generate_plan(4, &params(1, 1.0), &mut rng).unwrap();
        assert_eq!(plan.subsets(), &[vec![0, 1, 2, 3]]);
        assert!(plan.final_weights().iter().all(|&w| w == 0.1));
        assert!(coverage_report(&plan).is_empty());
    }

    #[test]
    fn weights_replay_matches_reference_draw() {
        // Replay the two draws by hand with an identically seeded stream.
        let p = params(2, 0.5);
        let plan = generate_plan(10, &p, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut w = vec![1.0; 10];
        let mut expected_subsets = Vec::new();
        for _ in 0..2 {
            let mut remaining = w.clone();
            let mut subset = Vec::new();
            for _ in 0..5 {
                let total: f64 = remaining.iter().sum();
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let j = (0..10)
                    .find(|&j| {
                        if remaining[j] <= 0.0 {
                            return false;
                        }
                        acc += remaining[j];
                        acc > target
                    })
                    .unwrap();
                remaining[j] = 0.0;
                subset.push(j);
            }
            for &j in &subset {
                w[j] *= 0.1;
            }
            subset.sort();
            expected_subsets.push(subset);
        }
        assert_eq!(plan.subsets(), expected_subsets.as_slice());
        for i in 0..10 {
            let count = expected_subsets.iter().filter(|s| s.contains(&i)).count();
            let expect = match count {
                0 => 1.0,
                1 => 0.1,
                _ => 0.1 * 0.1,
            };
            assert_eq!(plan.final_weights()[i], expect);
        }
    }

    #[test]
    fn experiment_sized_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = generate_plan(500, &params(16, 0.3), &mut rng).unwrap();
        assert_eq!(plan.num_subsets(), 16);
        assert!(plan.subsets().iter().all(|s| s.len() == 150));
    }

    #[test]
    fn coverage_lists_missing_points() {
        let plan = SubsetPlan::new(vec![vec![0, 1], vec![1, 2]], vec![1.0; 5]).unwrap();
        assert_eq!(coverage_report(&plan), vec![3, 4]);
    }

    #[test]
    fn weighted_plans_cover_almost_always() {
        let p = params(16, 0.3);
        let uncovered_runs = (0..50)
            .filter(|&seed| {
                let plan = generate_plan(500, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                !coverage_report(&plan).is_empty()
            })
            .count();
        assert!(uncovered_runs <= 1, "{uncovered_runs} of 50 plans left points uncovered");
    }

    #[test]
    fn uniform_scheme_keeps_weights() {
        let p = Params {
            sampling: SamplingScheme::Uniform,
            ..params(3, 0.5)
        };
        let plan = generate_plan(8, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(plan.final_weights().iter().all(|&w| w == 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn plan_invariants(n in 4usize..80, t in 1usize..8, delta in 0.05f64..=1.0, seed: u64) {
                let p = params(t, delta);
                prop_assume!(validate_params(&p, n).is_ok());
                let a = generate_plan(n, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let b = generate_plan(n, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                prop_assert_eq!(&a, &b);
                let m = p.subset_size(n);
                for s in a.subsets() {
                    prop_assert_eq!(s.len(), m);
                    prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
                }
                for i in 0..n {
                    let count = a.subsets().iter().filter(|s| s.binary_search(&i).is_ok()).count();
                    prop_assert_eq!(a.membership(i).len(), count);
                    let expect = (0..count).fold(1.0, |w, _| w * DOWN_WEIGHT);
                    prop_assert_eq!(a.final_weights()[i], expect);
                }
            }
        }
    }
}
