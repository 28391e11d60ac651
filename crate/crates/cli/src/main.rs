//! `pmssc`: cluster a data file, run synthetic experiments, evaluate saved
//! results, or sweep parameter grids.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pmssc::datagen::SyntheticSpec;
use pmssc::experiment::{run_pipeline, run_sweep, run_synthetic_trials, PipelineOptions, SweepGrid};
use pmssc::io::{self, Layout, ReportDocument};
use pmssc::metrics::{clustering_accuracy, connectivity, subspace_preserving_error};
use pmssc::spectral::build_affinity;
use pmssc::{Params, SamplingScheme};

#[derive(Parser)]
#[command(name = "pmssc", version, about = "Multi-subset sparse subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the points of a matrix file.
    Cluster(ClusterArgs),
    /// Repeated experiments on synthetic unions of subspaces.
    Synth(SynthArgs),
    /// Metrics of precomputed labels (and optionally coefficients).
    Eval(EvalArgs),
    /// Synthetic experiments over a grid of parameters.
    Sweep(SweepArgs),
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let v: u64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > i64::MAX as u64 {
        return Err(format!("seed must be at most {}", i64::MAX));
    }
    Ok(v)
}

/// Subset count, sampling rate and sparsity of a single run.
#[derive(Args, Clone)]
struct SolverArgs {
    /// Number of subsets T.
    #[arg(long, default_value_t = 16)]
    num_subsets: usize,
    /// Sampling rate δ in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    sampling_rate: f64,
    /// Maximum number of atoms per subset pursuit.
    #[arg(long, default_value_t = 6)]
    sparsity: usize,
    #[command(flatten)]
    run: RunArgs,
}

impl SolverArgs {
    fn params(&self, clusters: usize) -> Params {
        Params {
            num_subsets: self.num_subsets,
            sampling_rate: self.sampling_rate,
            sparsity: self.sparsity,
            ..self.run.params(clusters)
        }
    }
}

/// Settings shared by every subcommand that runs the pipeline.
#[derive(Args, Clone)]
struct RunArgs {
    /// Residual threshold of both pursuits.
    #[arg(long, default_value_t = pmssc::types::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0, value_parser = parse_seed)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "PMSSC_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = SamplingScheme::Weighted)]
    sampling: SamplingScheme,
    /// Fail when a point belongs to no subset.
    #[arg(long)]
    require_coverage: bool,
    /// Include per-subset and fused residual means in the report.
    #[arg(long)]
    emit_residuals: bool,
}

impl RunArgs {
    fn params(&self, clusters: usize) -> Params {
        Params {
            epsilon: self.epsilon,
            num_clusters: clusters,
            seed: self.seed,
            threads: self.threads,
            sampling: self.sampling,
            ..Params::new(clusters)
        }
    }

    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            require_coverage: self.require_coverage,
            emit_residuals: self.emit_residuals,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    /// Matrix file: CSV, or binary with the PMS1 header.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth labels, one per line; enables accuracy, sre and connectivity.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of clusters L.
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value = "rows-are-points")]
    layout: Layout,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the estimated labels (default: next to the report).
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Write the nonzero entries of C* as row,col,value.
    #[arg(long)]
    coefficients_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Clone)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 5)]
    num_subspaces: usize,
    #[arg(long, default_value_t = 6)]
    subspace_dim: usize,
    #[arg(long, default_value_t = 9)]
    ambient_dim: usize,
    /// Standard deviation of Gaussian noise added before normalization.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

impl SyntheticArgs {
    fn spec(&self, n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            num_subspaces: self.num_subspaces,
            subspace_dim: self.subspace_dim,
            ambient_dim: self.ambient_dim,
            points_per_subspace: n,
            noise_sigma: self.noise,
            seed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Points per subspace n.
    #[arg(long, default_value_t = 100)]
    points_per_subspace: usize,
    /// Number of clusters L (default: the number of subspaces).
    #[arg(long)]
    clusters: Option<usize>,
    /// Also run the single full subset configuration on the same data.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth labels.
    #[arg(long)]
    truth: PathBuf,
    /// Estimated labels.
    #[arg(long)]
    labels: PathBuf,
    /// Coefficients as row,col,value; enables sre and connectivity.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "100")]
    points_per_subspace: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    num_subsets: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    sampling_rate: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "6")]
    sparsity: Vec<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Table file (CSV); printed to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    run: RunArgs,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => io::write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let x = io::load_matrix(&a.input, a.layout)?;
    let truth = a.labels.as_deref().map(io::load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.labels.len() != x.n_points() {
            bail!("{} labels for {} points", t.labels.len(), x.n_points());
        }
        if !t.is_identity() {
            eprintln!("note: ground-truth labels densified; label k is original {:?}[k]", t.mapping);
        }
    }
    let p = a.solver.params(a.clusters);
    let run = run_pipeline(&x, truth.as_ref().map(|t| &t.labels[..]), &p, &a.solver.run.options())?;

    let labels_out = a
        .labels_out
        .clone()
        .or_else(|| a.output.as_ref().map(|o| o.with_extension("labels.txt")));
    if let Some(path) = &labels_out {
        io::save_labels(path, &run.report.labels)?;
    }
    if let Some(path) = &a.coefficients_out {
        io::save_coefficients(path, &run.pms.coeffs)?;
    }
    let doc = ReportDocument::new(&run.report, &p, run.pms.uncovered.len(), labels_out.as_deref());
    emit(a.output.as_deref(), &doc.render())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.synthetic.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let spec = a.synthetic.spec(a.points_per_subspace, a.solver.run.seed);
    let p = a.solver.params(a.clusters.unwrap_or(spec.num_subspaces));
    let outcome = run_synthetic_trials(&spec, &p, a.synthetic.trials, a.baseline, &a.solver.run.options())?;
    emit(a.output.as_deref(), &io::render_synth(&outcome))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let truth = io::load_labels(&a.truth)?;
    let est = io::load_labels(&a.labels)?;
    let n = truth.labels.len();
    let mut out = String::from("schema = \"pmssc-eval/1\"\n");
    out += &format!("n_points = {n}\n");
    out += &format!("accuracy_pct = {:.16e}\n", clustering_accuracy(&est.labels, &truth.labels)?);
    if let Some(path) = &a.coefficients {
        let c = io::load_coefficients(path, n).with_context(|| format!("reading {}", path.display()))?;
        out += &format!("sre_pct = {:.16e}\n", subspace_preserving_error(&c, &truth.labels)?);
        let conn = connectivity(&build_affinity(&c), &truth.labels, truth.num_clusters())?;
        out += &format!("connectivity = {conn:.16e}\n");
    }
    emit(a.output.as_deref(), &out)
}

/// Exits unsuccessfully when any cell failed, after writing the full table.
fn cmd_sweep(a: &SweepArgs) -> Result<bool> {
    if a.synthetic.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let grid = SweepGrid {
        points_per_subspace: a.points_per_subspace.clone(),
        num_subsets: a.num_subsets.clone(),
        sampling_rates: a.sampling_rate.clone(),
        sparsities: a.sparsity.clone(),
    };
    let spec = a.synthetic.spec(a.points_per_subspace[0], a.run.seed);
    let p = a.run.params(a.clusters.unwrap_or(spec.num_subspaces));
    let cells = run_sweep(&spec, &p, &grid, a.synthetic.trials, &a.run.options())?;
    emit(a.output.as_deref(), &io::render_sweep(&cells))?;
    let failed: Vec<_> = cells.iter().filter_map(|c| c.outcome.as_ref().err()).collect();
    for e in &failed {
        log::error!("sweep cell failed: {e}");
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a).map(|_| true),
        Command::Synth(a) => cmd_synth(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
