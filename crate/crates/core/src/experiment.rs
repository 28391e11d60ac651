//! End-to-end runs: one clustering pipeline, repeated synthetic trials, and
//! parameter sweeps.

use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{generate_synthetic, SyntheticSpec};
use crate::error::{Error, Result};
use crate::metrics::{clustering_accuracy, connectivity, residual_diagnostics, subspace_preserving_error};
use crate::pms::{pms_coefficients, with_threads, PmsOutput};
use crate::spectral::{build_affinity, spectral_clustering, AffinityMatrix};
use crate::types::{ClusteringReport, DataMatrix, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PipelineOptions {
    /// Fail instead of warning when a point is in no subset.
    pub require_coverage: bool,
    pub emit_residuals: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: ClusteringReport,
    pub pms: PmsOutput,
    pub affinity: AffinityMatrix,
}

/// Coefficients, affinity, spectral clustering, then metrics. The runtime
/// covers everything up to and including spectral clustering.
pub fn run_pipeline(
    x: &DataMatrix,
    truth: Option<&[usize]>,
    p: &Params,
    opts: &PipelineOptions,
) -> Result<PipelineRun> {
    let start = Instant::now();
    let pms = pms_coefficients(x, p)?;
    if opts.require_coverage && !pms.uncovered.is_empty() {
        return Err(Error::Uncovered(pms.uncovered.len(), pms.uncovered.clone()));
    }
    let affinity = build_affinity(&pms.coeffs);
    let labels = spectral_clustering(&affinity, p.num_clusters, p.seed)?;
    let runtime_seconds = start.elapsed().as_secs_f64();

    let (accuracy_pct, sre_pct, conn) = match truth {
        Some(t) => {
            let clusters = p.num_clusters.max(t.iter().max().map_or(0, |m| m + 1));
            (
                Some(clustering_accuracy(&labels, t)?),
                Some(subspace_preserving_error(&pms.coeffs, t)?),
                Some(connectivity(&affinity, t, clusters)?),
            )
        }
        None => (None, None, None),
    };
    let residuals = if opts.emit_residuals {
        Some(residual_diagnostics(&pms.normalized, &pms.plan, &pms.points, &pms.coeffs)?)
    } else {
        None
    };
    Ok(PipelineRun {
        report: ClusteringReport {
            labels,
            accuracy_pct,
            sre_pct,
            connectivity: conn,
            runtime_seconds,
            residuals,
        },
        pms,
        affinity,
    })
}

/// Mean and sample standard deviation; `std` is absent for a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { mean, std }
    }
}

/// Metrics of one synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub accuracy_pct: f64,
    pub sre_pct: f64,
    pub connectivity: f64,
    pub runtime_seconds: f64,
    pub uncovered_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    /// Parameters of the first trial; later trials differ only in the seed.
    pub params: Params,
    pub records: Vec<TrialRecord>,
    pub accuracy_pct: MetricSummary,
    pub sre_pct: MetricSummary,
    pub connectivity: MetricSummary,
    pub runtime_seconds: MetricSummary,
    pub uncovered_points_total: usize,
}

impl TrialSummary {
    fn new(params: Params, records: Vec<TrialRecord>) -> Self {
        let col = |f: fn(&TrialRecord) -> f64| MetricSummary::of(&records.iter().map(f).collect::<Vec<_>>());
        Self {
            accuracy_pct: col(|r| r.accuracy_pct),
            sre_pct: col(|r| r.sre_pct),
            connectivity: col(|r| r.connectivity),
            runtime_seconds: col(|r| r.runtime_seconds),
            uncovered_points_total: records.iter().map(|r| r.uncovered_points).sum(),
            params,
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub spec: SyntheticSpec,
    pub trials: usize,
    pub pmssc: TrialSummary,
    /// The same trials with one full-size subset.
    pub baseline: Option<TrialSummary>,
}

/// Trial `k` generates data with seed `spec.seed + k` and clusters it with
/// `p.seed + k`. Trials run one after another; each uses `p.threads`.
pub fn run_synthetic_trials(
    spec: &SyntheticSpec,
    p: &Params,
    trials: usize,
    baseline: bool,
    opts: &PipelineOptions,
) -> Result<SynthOutcome> {
    assert!(trials >= 1, "at least one trial is required");
    let methods: Vec<Params> = if baseline { vec![p.clone(), p.ssc_omp()] } else { vec![p.clone()] };
    let mut records: Vec<Vec<TrialRecord>> = vec![Vec::with_capacity(trials); methods.len()];
    for k in 0..trials as u64 {
        let data_spec = SyntheticSpec {
            seed: spec.seed.wrapping_add(k),
            ..spec.clone()
        };
        let data = generate_synthetic(&data_spec)?;
        for (m, params) in methods.iter().enumerate() {
            let trial_params = Params {
                seed: params.seed.wrapping_add(k),
                ..params.clone()
            };
            let run = run_pipeline(&data.data, Some(&data.labels), &trial_params, opts)?;
            let r = &run.report;
            records[m].push(TrialRecord {
                seed: trial_params.seed,
                accuracy_pct: r.accuracy_pct.unwrap_or(f64::NAN),
                sre_pct: r.sre_pct.unwrap_or(f64::NAN),
                connectivity: r.connectivity.unwrap_or(f64::NAN),
                runtime_seconds: r.runtime_seconds,
                uncovered_points: run.pms.uncovered.len(),
            });
        }
    }
    let mut summaries = methods.into_iter().zip(records).map(|(p, r)| TrialSummary::new(p, r));
    let pmssc = summaries.next().unwrap();
    Ok(SynthOutcome {
        spec: spec.clone(),
        trials,
        pmssc,
        baseline: summaries.next(),
    })
}

/// Cartesian grid of sweep values; every axis must be nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub points_per_subspace: Vec<usize>,
    pub num_subsets: Vec<usize>,
    pub sampling_rates: Vec<f64>,
    pub sparsities: Vec<usize>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &n in &self.points_per_subspace {
            for &t in &self.num_subsets {
                for &delta in &self.sampling_rates {
                    for &s in &self.sparsities {
                        out.push(SweepCell {
                            points_per_subspace: n,
                            num_subsets: t,
                            sampling_rate: delta,
                            sparsity: s,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub points_per_subspace: usize,
    pub num_subsets: usize,
    pub sampling_rate: f64,
    pub sparsity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCellResult {
    pub cell: SweepCell,
    pub trials: usize,
    /// A failing cell keeps its error message; other cells are unaffected.
    pub outcome: std::result::Result<TrialSummary, String>,
}

/// Runs every grid cell as an independent synthetic experiment. Cells run
/// concurrently on a pool of `base.threads` workers (0 = ambient pool); the
/// output order follows [`SweepGrid::cells`].
pub fn run_sweep(
    spec: &SyntheticSpec,
    base: &Params,
    grid: &SweepGrid,
    trials: usize,
    opts: &PipelineOptions,
) -> Result<Vec<SweepCellResult>> {
    let cells = grid.cells();
    with_threads(base.threads, || {
        cells
            .par_iter()
            .map(|&cell| {
                let cell_spec = SyntheticSpec {
                    points_per_subspace: cell.points_per_subspace,
                    ..spec.clone()
                };
                // Nested work joins the sweep pool instead of spawning new ones.
                let p = Params {
                    num_subsets: cell.num_subsets,
                    sampling_rate: cell.sampling_rate,
                    sparsity: cell.sparsity,
                    threads: 0,
                    ..base.clone()
                };
                let outcome = run_synthetic_trials(&cell_spec, &p, trials, false, opts)
                    .map(|o| o.pmssc)
                    .map_err(|e| e.to_string());
                SweepCellResult { cell, trials, outcome }
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> Params {
        Params {
            num_subsets: 4,
            sampling_rate: 0.5,
            sparsity: 3,
            ..Params::new(5)
        }
    }

    #[test]
    fn summary_statistics() {
        let one = MetricSummary::of(&[3.0]);
        assert_eq!(one, MetricSummary { mean: 3.0, std: None });
        let two = MetricSummary::of(&[1.0, 3.0]);
        assert_eq!(two.mean, 2.0);
        assert!((two.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pipeline_without_truth_omits_metrics() {
        let data = generate_synthetic(&SyntheticSpec::new(20, 1)).unwrap();
        let run = run_pipeline(&data.data, None, &small_params(), &PipelineOptions::default()).unwrap();
        assert_eq!(run.report.labels.len(), 100);
        assert!(run.report.accuracy_pct.is_none() && run.report.connectivity.is_none());
        assert!(run.report.residuals.is_none());
    }

    #[test]
    fn pipeline_clusters_independent_subspaces() {
        // Three 3-dimensional subspaces of R⁹ are independent.
        let spec = SyntheticSpec {
            num_subspaces: 3,
            subspace_dim: 3,
            ..SyntheticSpec::new(40, 2)
        };
        let data = generate_synthetic(&spec).unwrap();
        let p = Params {
            num_clusters: 3,
            ..small_params()
        };
        let opts = PipelineOptions {
            emit_residuals: true,
            ..Default::default()
        };
        let run = run_pipeline(&data.data, Some(&data.labels), &p, &opts).unwrap();
        assert_eq!(run.report.accuracy_pct, Some(100.0));
        assert_eq!(run.report.sre_pct, Some(0.0));
        assert!(run.report.connectivity.unwrap() > 0.0);
        let r = run.report.residuals.unwrap();
        assert_eq!(r.per_subset_mean.len(), 4);
    }

    #[test]
    fn coverage_can_be_required() {
        let data = generate_synthetic(&SyntheticSpec::new(20, 1)).unwrap();
        let p = Params {
            num_subsets: 1,
            sampling_rate: 0.5,
            ..small_params()
        };
        let opts = PipelineOptions {
            require_coverage: true,
            ..Default::default()
        };
        assert!(matches!(
            run_pipeline(&data.data, Some(&data.labels), &p, &opts),
            Err(Error::Uncovered(50, _))
        ));
    }

    #[test]
    fn trials_use_consecutive_seeds_and_align_baseline() {
        let spec = SyntheticSpec::new(15, 7);
        let out = run_synthetic_trials(&spec, &Params { seed: 7, ..small_params() }, 2, true, &Default::default())
            .unwrap();
        let seeds: Vec<u64> = out.pmssc.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![7, 8]);
        let base = out.baseline.unwrap();
        assert!(base.params.is_ssc_omp_equivalent());
        assert_eq!(base.records.len(), 2);
        assert!(out.pmssc.accuracy_pct.std.is_some());
    }

    #[test]
    fn sweep_records_failing_cells() {
        let grid = SweepGrid {
            points_per_subspace: vec![10],
            num_subsets: vec![2],
            sampling_rates: vec![0.02, 0.5],
            sparsities: vec![2],
        };
        let out = run_sweep(&SyntheticSpec::new(10, 0), &small_params(), &grid, 1, &Default::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].outcome.is_err());
        assert!(out[1].outcome.is_ok());
    }

    #[test]
    fn single_cell_sweep_matches_synth() {
        let spec = SyntheticSpec::new(12, 3);
        let p = Params { seed: 3, ..small_params() };
        let grid = SweepGrid {
            points_per_subspace: vec![12],
            num_subsets: vec![p.num_subsets],
            sampling_rates: vec![p.sampling_rate],
            sparsities: vec![p.sparsity],
        };
        let sweep = run_sweep(&spec, &p, &grid, 2, &Default::default()).unwrap();
        let synth = run_synthetic_trials(&spec, &p, 2, false, &Default::default()).unwrap();
        let cell = sweep[0].outcome.as_ref().unwrap();
        assert_eq!(cell.accuracy_pct, synth.pmssc.accuracy_pct);
        assert_eq!(cell.sre_pct, synth.pmssc.sre_pct);
        assert_eq!(cell.connectivity, synth.pmssc.connectivity);
    }
}
