//! The `mgmoments` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors (missing
//! or malformed input), 3 when a solve did not converge. Reports are still
//! written in the last case.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgmoments_core::experiments::{
    compare_estimates, convergence_trace, machine_precision_threshold, synthetic_uniform_sequence, zipf_sequence_with, BootstrapReport,
    ZipfSampler, ZIPF_CAP,
};
use mgmoments_core::mcmc::BurnIn;
use mgmoments_core::nalgebra::DMatrix;
use mgmoments_core::rng::DEFAULT_SEED;
use mgmoments_core::{
    cl_estimate, collapse_error_bound, configuration_identity_residual, enumerate_ensemble,
    from_edge_list, mc_estimates, modularity_matrix, omega_i_estimate, oracle_moments, solve, temporal_threshold,
    BetaEstimate, ChainConfig, DegreeSequence, EstimateSource, LabelledGraph, Model, MomentEstimates, MspConfig,
    Multigraph, NullSource, RegularityConstants, SolverConfig, UpdateScheme,
};
use rayon::ThreadPool;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{self, DegreeFile};
use crate::parallel::{bootstrap_parallel, msp_parallel, pool, run_chains, MultiChainRun};

#[derive(Debug, Parser)]
#[command(name = "mgmoments", version, about = "Moments of random loopless multigraphs with fixed degrees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read an edge list and write the multigraph and its degree file.
    Ingest(IngestArgs),
    /// Run the edge-swap chain and write Monte Carlo moments.
    Sample(SampleArgs),
    /// Solve for the expected collapsed degrees.
    SolveBeta(SolveArgs),
    /// Write Ω, χ and σ estimates.
    Estimate(EstimateArgs),
    /// Score the Chung–Lu and solver estimates against a Monte Carlo reference.
    Compare(CompareArgs),
    /// Perturb the degree sequence by one edge and measure the change in β.
    BootstrapU(BootstrapArgs),
    /// Convergence trace of the solver.
    Convergence(ConvergenceArgs),
    /// Modularity of a given partition.
    Modularity(ModularityArgs),
    /// Multiway spectral partitioning.
    Msp(MspArgs),
    /// Exact moments of a tiny ensemble by enumeration.
    Enumerate(EnumerateArgs),
    /// Draw a synthetic degree sequence.
    Synthesize(SynthesizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Uniform,
    Configuration,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Uniform => Model::Uniform,
            ModelArg::Configuration => Model::Configuration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Cl,
    #[value(name = "uniform-I")]
    UniformI,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Simultaneous,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SyntheticKind {
    Uniform,
    Zipf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, default_value = "mgmoments-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EdgeArgs {
    /// Edge list with lines `u v [t]`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Keep only the most recent fraction of timestamped records.
    #[arg(long, requires = "edges")]
    pub fraction: Option<f64>,
    /// Drop self-loop records instead of rejecting the file.
    #[arg(long)]
    pub skip_self_loops: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub graph: EdgeArgs,
    /// Degree file: one integer per line, or CSV with a `degree` column.
    #[arg(long, conflicts_with = "edges")]
    pub degrees: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Mean-square error at which the solve stops.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_sweeps: usize,
    /// Largest relative coordinate change allowed at convergence.
    #[arg(long, default_value_t = 1e-10)]
    pub step_tol: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Simultaneous)]
    pub scheme: SchemeArg,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            step_tol: self.step_tol,
            update: match self.scheme {
                SchemeArg::Simultaneous => UpdateScheme::Simultaneous,
                SchemeArg::Sequential => UpdateScheme::Sequential,
            },
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Steps between samples; defaults to max(10, m).
    #[arg(long)]
    pub dt: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    /// Burn-in steps; defaults to running until 10 m swaps are accepted.
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long, default_value_t = 50)]
    pub batches: u64,
    /// Worker threads; with more than one, samples are split over that many
    /// independent chains.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

impl ChainArgs {
    fn config(&self, model: Model, seed: u64) -> ChainConfig {
        let mut c = ChainConfig::new(model, self.samples);
        c.sample_interval = self.dt;
        c.burn_in = self.burn_in.map(BurnIn::Steps);
        c.batches = self.batches;
        c.seed = seed;
        c
    }
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Draw the sequence instead of reading it.
    #[arg(long, value_enum, conflicts_with = "degrees")]
    pub synthetic: Option<SyntheticKind>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Zipf exponent.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub graph: EdgeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub model: ModelArg,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub model: EstimatorArg,
    /// Chain target when `--model mcmc`.
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub target: ModelArg,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Reference Ω (CSV or sparse JSON); sampled with the chain when absent.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub model: ModelArg,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub degrees: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Experiment name used in output file names.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub degrees: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct NullArgs {
    #[arg(long = "null", value_enum, default_value_t = EstimatorArg::Cl)]
    pub null: EstimatorArg,
    /// Custom null Ω (CSV or sparse JSON); overrides `--null`.
    #[arg(long)]
    pub null_matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub target: ModelArg,
}

#[derive(Debug, Clone, Args)]
pub struct ModularityArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, requires = "edges")]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub skip_self_loops: bool,
    /// Partition CSV with columns `node_id,label`.
    #[arg(long)]
    pub partition: PathBuf,
    #[command(flatten)]
    pub null: NullArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct MspArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, requires = "edges")]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub skip_self_loops: bool,
    #[command(flatten)]
    pub null: NullArgs,
    /// Also evaluate the partition found against this null.
    #[arg(long, value_enum)]
    pub cross_null: Option<EstimatorArg>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub restarts: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_passes: usize,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub degrees: Option<PathBuf>,
    /// Comma-separated degrees, e.g. `2,2,2,2`.
    #[arg(long, conflicts_with = "degrees")]
    pub sequence: Option<String>,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub model: ModelArg,
    /// Largest edge count enumerated.
    #[arg(long, default_value_t = mgmoments_core::enumerate::DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[arg(long, default_value = "mgmoments-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    #[arg(value_enum)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub common: Common,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    fn from_converged(converged: bool) -> Self {
        if converged {
            Outcome::Done
        } else {
            Outcome::NotConverged
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 3,
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            if outcome == Outcome::NotConverged {
                eprintln!("warning: solver did not converge; report written");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Sample(a) => sample(a),
        Command::SolveBeta(a) => solve_beta(a),
        Command::Estimate(a) => estimate(a),
        Command::Compare(a) => compare(a),
        Command::BootstrapU(a) => bootstrap(a),
        Command::Convergence(a) => convergence(a),
        Command::Modularity(a) => modularity(a),
        Command::Msp(a) => msp(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Synthesize(a) => synthesize(a),
    }
}

/// Output directory that remembers what was written to it.
struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn file(&mut self, name: impl Into<String>) -> PathBuf {
        let name = name.into();
        let path = self.dir.join(&name);
        self.written.push(name);
        path
    }

    fn matrix(&mut self, stem: &str, ids: &[String], m: &DMatrix<f64>, format: FormatArg) -> Result<()> {
        match format {
            FormatArg::Csv => io::write_matrix_csv(&self.file(format!("{stem}.csv")), ids, m),
            FormatArg::Json => io::write_matrix_json(&self.file(format!("{stem}.json")), ids, m),
        }
    }

    fn estimates(&mut self, est: &MomentEstimates, ids: &[String], format: FormatArg) -> Result<()> {
        self.matrix("omega", ids, &est.omega, format)?;
        for (stem, m) in [("chi", &est.chi), ("sigma", &est.sigma), ("eps", &est.eps)] {
            if let Some(m) = m {
                self.matrix(stem, ids, m, format)?;
            }
        }
        Ok(())
    }

    /// Writes the metadata file, listing every output written so far.
    fn finish(mut self, name: &str, meta: Metadata<'_>, report: Value) -> Result<()> {
        let path = self.file(name.to_owned());
        let mut doc = serde_json::to_value(&meta)?;
        doc["outputs"] = json!(self.written);
        if let (Value::Object(doc), Value::Object(extra)) = (&mut doc, report) {
            doc.extend(extra);
        }
        io::write_json(&path, &doc)
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    subcommand: &'a str,
    seed: Option<u64>,
    threads: Option<usize>,
    inputs: Vec<String>,
}

impl<'a> Metadata<'a> {
    fn new(subcommand: &'a str, seed: Option<u64>, inputs: &[Option<&PathBuf>]) -> Self {
        Self {
            tool: "mgmoments",
            version: env!("CARGO_PKG_VERSION"),
            core_version: mgmoments_core::VERSION,
            subcommand,
            seed,
            threads: None,
            inputs: inputs.iter().flatten().map(|p| p.display().to_string()).collect(),
        }
    }

    fn threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

fn data_err(path: &Path) -> impl Fn(mgmoments_core::Error) -> Error + '_ {
    move |e| Error::data(path, e.to_string())
}

#[derive(Debug, Serialize)]
struct IngestStats {
    records: usize,
    kept_records: usize,
    fraction: Option<f64>,
}

fn load_graph(path: &Path, fraction: Option<f64>, skip_self_loops: bool) -> Result<(LabelledGraph<String>, IngestStats)> {
    let records = io::read_edge_list(path)?;
    let total = records.len();
    let kept = match fraction {
        Some(f) => temporal_threshold(&records, f).map_err(data_err(path))?,
        None => records,
    };
    let stats = IngestStats { records: total, kept_records: kept.len(), fraction };
    let g = from_edge_list(&kept, skip_self_loops).map_err(data_err(path))?;
    Ok((g, stats))
}

/// Degree sequence and, when read from an edge list, the graph itself.
struct Input {
    degrees: DegreeFile,
    graph: Option<Multigraph>,
    path: PathBuf,
}

impl Input {
    fn load(args: &InputArgs) -> Result<Self> {
        match (&args.degrees, &args.graph.edges) {
            (Some(path), None) => Ok(Self { degrees: io::read_degrees(path)?, graph: None, path: path.clone() }),
            (None, Some(path)) => {
                let (g, _) = load_graph(path, args.graph.fraction, args.graph.skip_self_loops)?;
                let degrees = DegreeFile { degrees: g.graph.degree_sequence(), ids: g.ids };
                Ok(Self { degrees, graph: Some(g.graph), path: path.clone() })
            }
            _ => Err(Error::Usage("exactly one of --edges or --degrees is required".into())),
        }
    }

    fn input_path(&self) -> Option<&PathBuf> {
        Some(&self.path)
    }

    /// The observed graph, or a realisation of the degree sequence.
    fn graph(&self) -> Result<Multigraph> {
        match &self.graph {
            Some(g) => Ok(g.clone()),
            None => Multigraph::realise(&self.degrees.degrees).map_err(data_err(&self.path)),
        }
    }

    fn check_solvable(&self) -> Result<()> {
        if let Some(node) = self.degrees.degrees.first_zero() {
            return Err(Error::data(
                &self.path,
                format!("node {} has degree zero; remove it before solving", self.degrees.ids[node]),
            ));
        }
        Ok(())
    }
}

fn synthetic_or_file(
    degrees: &Option<PathBuf>,
    synthetic: &SyntheticArgs,
    seed: u64,
) -> Result<(DegreeFile, String, Value)> {
    match (degrees, synthetic.synthetic) {
        (Some(path), None) => {
            let stem = path.file_stem().map_or("degrees".into(), |s| s.to_string_lossy().into_owned());
            Ok((io::read_degrees(path)?, stem, json!({ "source": path.display().to_string() })))
        }
        (None, Some(kind)) => {
            let (d, info) = draw_synthetic(kind, synthetic.n, synthetic.alpha, seed)?;
            Ok((DegreeFile::anonymous(d), kind_name(kind).into(), info))
        }
        _ => Err(Error::Usage("exactly one of --degrees or --synthetic is required".into())),
    }
}

fn kind_name(kind: SyntheticKind) -> &'static str {
    match kind {
        SyntheticKind::Uniform => "uniform",
        SyntheticKind::Zipf => "zipf",
    }
}

fn draw_synthetic(kind: SyntheticKind, n: usize, alpha: f64, seed: u64) -> Result<(DegreeSequence, Value)> {
    if n < 2 {
        return Err(Error::Usage("--n must be at least 2".into()));
    }
    Ok(match kind {
        SyntheticKind::Uniform => {
            (synthetic_uniform_sequence(n, seed), json!({ "source": "synthetic", "kind": "uniform", "n": n, "seed": seed }))
        }
        SyntheticKind::Zipf => {
            let sampler = ZipfSampler::new(alpha, ZIPF_CAP).map_err(|e| Error::Usage(e.to_string()))?;
            let d = zipf_sequence_with(&sampler, n, seed)?;
            let info = json!({
                "source": "synthetic",
                "kind": "zipf",
                "n": n,
                "alpha": alpha,
                "seed": seed,
                "support_cap": sampler.cap(),
                "truncation_mass": sampler.truncation_mass(),
            });
            (d, info)
        }
    })
}

fn solve_report(est: &BetaEstimate, d: &DegreeSequence) -> Value {
    let machine = machine_precision_threshold(d);
    let first = |t: f64| est.mse_trace.iter().position(|&e| e <= t).map(|k| k + 1);
    json!({
        "iterations": est.sweeps,
        "final_mse": est.final_mse,
        "initial_mse": est.initial_mse,
        "residual_norm": est.residual_norm,
        "converged": est.converged,
        "stop": est.stop,
        "classification": est.classification,
        "psi": est.psi,
        "machine_precision_threshold": machine,
        "sweeps_to": { "1e-6": first(1e-6), "1e-12": first(1e-12), "machine": first(machine) },
    })
}

fn chain_report(cfg: &ChainConfig, run: &MultiChainRun) -> Value {
    let acc = &run.accumulator.acceptance;
    json!({
        "model": cfg.model,
        "seed": cfg.seed,
        "dt": run.sample_interval,
        "samples": run.accumulator.count,
        "burn_in": match cfg.burn_in {
            Some(BurnIn::Steps(s)) => json!({ "steps": s }),
            Some(BurnIn::AcceptedSwaps(s)) => json!({ "accepted_swaps": s }),
            None => json!({ "accepted_swaps": "10m" }),
        },
        "burn_in_steps": run.chains.iter().map(|c| c.burn_in_steps).collect::<Vec<_>>(),
        "acceptance_rate": acc.acceptance_rate(),
        "acceptance": acc,
        "batches": run.accumulator.batch_count(),
        "chains": run.chains,
    })
}

fn ingest(a: &IngestArgs) -> Result<Outcome> {
    let path = a.graph.edges.as_ref().ok_or_else(|| Error::Usage("--edges is required".into()))?;
    let (g, stats) = load_graph(path, a.graph.fraction, a.graph.skip_self_loops)?;
    let mut out = OutDir::create(&a.out)?;
    io::write_edge_list(&out.file("graph.txt"), &g)?;
    io::write_degrees(&out.file("degrees.csv"), &g.ids, &g.graph.degree_sequence())?;
    let report = json!({
        "n": g.graph.node_count(),
        "m": g.graph.edge_count(),
        "simple": g.graph.is_simple(),
        "records": stats.records,
        "kept_records": stats.kept_records,
        "fraction": stats.fraction,
        "skip_self_loops": a.graph.skip_self_loops,
    });
    out.finish("ingest.json", Metadata::new("ingest", None, &[Some(path)]), report)?;
    Ok(Outcome::Done)
}

fn sample_chain(g: &Multigraph, chain: &ChainArgs, model: Model, seed: u64) -> Result<(ChainConfig, MultiChainRun)> {
    let cfg = chain.config(model, seed);
    let pool = pool(chain.threads)?;
    let run = run_chains(g, &cfg, chain.threads, &pool)?;
    Ok((cfg, run))
}

fn write_mc_outputs(out: &mut OutDir, run: &MultiChainRun, ids: &[String], format: FormatArg) -> Result<MomentEstimates> {
    let est = mc_estimates(&run.accumulator)?;
    out.estimates(&est, ids, format)?;
    let se = run.accumulator.standard_errors()?;
    out.matrix("omega_se", ids, &se.omega, format)?;
    out.matrix("chi_se", ids, &se.chi, format)?;
    if let Some(beta) = &est.beta {
        io::write_column_csv(&out.file("collapsed_degrees.csv"), ids, "beta", beta)?;
    }
    Ok(est)
}

fn sample(a: &SampleArgs) -> Result<Outcome> {
    let input = Input::load(&a.input)?;
    let g = input.graph()?;
    let (cfg, run) = sample_chain(&g, &a.chain, a.model.into(), a.common.seed)?;
    let mut out = OutDir::create(&a.common.out)?;
    let est = write_mc_outputs(&mut out, &run, &input.degrees.ids, a.format)?;
    let report = json!({
        "n": g.node_count(),
        "m": g.edge_count(),
        "chain": chain_report(&cfg, &run),
        "psi": est.psi,
    });
    let meta = Metadata::new("sample", Some(a.common.seed), &[input.input_path()]).threads(a.chain.threads);
    out.finish("sample.json", meta, report)?;
    Ok(Outcome::Done)
}

fn solve_beta(a: &SolveArgs) -> Result<Outcome> {
    let input = Input::load(&a.input)?;
    input.check_solvable()?;
    let d = &input.degrees.degrees;
    let est = solve(d, &a.solver.config())?;
    let mut out = OutDir::create(&a.common.out)?;
    io::write_beta_csv(&out.file("beta.csv"), &input.degrees.ids, d, &est.beta)?;
    let residual: Vec<f64> = est.mse_trace.iter().map(|m| (m / d.len() as f64).sqrt()).collect();
    io::write_trace_csv(&out.file("trace.csv"), &est.mse_trace, &residual)?;
    let mut report = solve_report(&est, d);
    report["n"] = json!(d.len());
    report["solver"] = json!(a.solver.config());
    out.finish("solve-beta.json", Metadata::new("solve-beta", None, &[input.input_path()]), report)?;
    Ok(Outcome::from_converged(est.converged))
}

fn estimate(a: &EstimateArgs) -> Result<Outcome> {
    let input = Input::load(&a.input)?;
    let d = &input.degrees.degrees;
    let ids = &input.degrees.ids;
    let mut out = OutDir::create(&a.common.out)?;
    let mut meta = Metadata::new("estimate", None, &[input.input_path()]);
    let (report, outcome) = match a.model {
        EstimatorArg::Cl => {
            let est = cl_estimate(d).map_err(data_err(&input.path))?;
            out.estimates(&est, ids, a.format)?;
            (json!({ "estimator": "cl", "two_m": 2 * d.edge_count() }), Outcome::Done)
        }
        EstimatorArg::UniformI => {
            input.check_solvable()?;
            let beta = solve(d, &a.solver.config())?;
            io::write_beta_csv(&out.file("beta.csv"), ids, d, &beta.beta)?;
            let mut report = json!({ "estimator": "uniform-I", "solver": a.solver.config(), "result": solve_report(&beta, d) });
            if beta.converged {
                let est = omega_i_estimate(&beta)?;
                out.estimates(&est, ids, a.format)?;
                report["regularity_constants"] = json!(RegularityConstants::default());
            }
            (report, Outcome::from_converged(beta.converged))
        }
        EstimatorArg::Mcmc => {
            let g = input.graph()?;
            let (cfg, run) = sample_chain(&g, &a.chain, a.target.into(), a.common.seed)?;
            write_mc_outputs(&mut out, &run, ids, a.format)?;
            meta.seed = Some(a.common.seed);
            meta = meta.threads(a.chain.threads);
            (json!({ "estimator": "mcmc", "chain": chain_report(&cfg, &run) }), Outcome::Done)
        }
    };
    out.finish("estimate.json", meta, report)?;
    Ok(outcome)
}

fn compare(a: &CompareArgs) -> Result<Outcome> {
    let input = Input::load(&a.input)?;
    input.check_solvable()?;
    let ids = &input.degrees.ids;
    let mut meta = Metadata::new("compare", None, &[input.input_path(), a.reference.as_ref()]);
    let (reference, chain) = match &a.reference {
        Some(path) => {
            let (ref_ids, m) = io::read_matrix(path)?;
            let m = align(&ref_ids, m, ids, path)?;
            (MomentEstimates::from_omega(EstimateSource::Mcmc, m), Value::Null)
        }
        None => {
            let g = input.graph()?;
            let (cfg, run) = sample_chain(&g, &a.chain, a.model.into(), a.common.seed)?;
            meta.seed = Some(a.common.seed);
            meta = meta.threads(a.chain.threads);
            (mc_estimates(&run.accumulator)?, chain_report(&cfg, &run))
        }
    };
    let c = compare_estimates(&input.degrees.degrees, reference, &a.solver.config())?;
    let mut out = OutDir::create(&a.common.out)?;
    let mut entry = |name: &str, e: &mgmoments_core::RelativeError| -> Result<Value> {
        let file = format!("rel_error_{name}.csv");
        io::write_matrix_csv(&out.file(file.clone()), ids, &e.errors)?;
        Ok(json!({
            "mean_abs_rel_error": e.mean_abs,
            "excluded_pairs": e.excluded_pairs,
            "included_pairs": e.included_pairs,
            "per_entry_csv_path": file,
        }))
    };
    let cl = entry("cl", &c.cl_error)?;
    let uniform = entry("uniform-I", &c.uniform_error)?;
    let report = json!({
        "cl": cl,
        "uniform-I": uniform,
        "summary": c.summary(),
        "solver": solve_report(&c.beta, &input.degrees.degrees),
        "chain": chain,
    });
    out.finish("compare.json", meta, report)?;
    Ok(Outcome::from_converged(c.beta.converged))
}

/// Reorders `m`, indexed by `from`, into the order of `to`.
fn align(from: &[String], m: DMatrix<f64>, to: &[String], path: &Path) -> Result<DMatrix<f64>> {
    if from == to {
        return Ok(m);
    }
    let index: std::collections::HashMap<&str, usize> = from.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if from.len() != to.len() {
        return Err(Error::data(path, format!("matrix has {} nodes, graph has {}", from.len(), to.len())));
    }
    let perm: Vec<usize> = to
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::data(path, format!("node id {id:?} missing"))))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(to.len(), to.len(), |i, j| m[(perm[i], perm[j])]))
}

fn bootstrap(a: &BootstrapArgs) -> Result<Outcome> {
    let (file, stem, source) = synthetic_or_file(&a.degrees, &a.synthetic, a.common.seed)?;
    let name = a.name.clone().unwrap_or(stem);
    if let Some(node) = file.degrees.first_zero() {
        return Err(Error::Usage(format!("node {} has degree zero", file.ids[node])));
    }
    let pool = pool(a.threads)?;
    let seed = a.common.seed;
    let result = bootstrap_parallel(&name, &file.degrees, a.trials, seed, &a.solver.config(), &pool);
    let report: Option<BootstrapReport> = match result {
        Ok(r) => Some(r),
        Err(Error::Core(mgmoments_core::Error::NotConverged)) => None,
        Err(e) => return Err(e),
    };
    let mut out = OutDir::create(&a.common.out)?;
    let base = format!("bootstrap-u_{name}_seed{seed}");
    if let Some(r) = &report {
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &r.trials {
            w.serialize(t).expect("in-memory write");
        }
        let path = out.file(format!("{base}.csv"));
        fs::write(&path, w.into_inner().expect("in-memory write")).map_err(|e| Error::io(&path, e))?;
    }
    let converged = report.as_ref().is_some_and(|r| r.non_converged == 0);
    let summary = report.as_ref().map(|r| {
        json!({
            "trials": r.trials.len(),
            "max_change": r.max_change,
            "max_mean_change": r.max_mean_change,
            "average_mean_change": r.average_mean_change,
            "non_converged": r.non_converged,
        })
    });
    let doc = json!({
        "name": name,
        "input": source,
        "base_converged": report.is_some(),
        "solver": a.solver.config(),
        "summary": summary,
    });
    let meta = Metadata::new("bootstrap-u", Some(seed), &[a.degrees.as_ref()]).threads(a.threads);
    out.finish(&format!("{base}.json"), meta, doc)?;
    Ok(Outcome::from_converged(converged))
}

fn convergence(a: &ConvergenceArgs) -> Result<Outcome> {
    let (file, stem, source) = synthetic_or_file(&a.degrees, &a.synthetic, a.common.seed)?;
    let name = a.name.clone().unwrap_or(stem);
    if let Some(node) = file.degrees.first_zero() {
        return Err(Error::Usage(format!("node {} has degree zero", file.ids[node])));
    }
    let r = convergence_trace(&name, &file.degrees, &a.solver.config())?;
    let mut out = OutDir::create(&a.common.out)?;
    let base = format!("convergence_{name}_seed{}", a.common.seed);
    io::write_trace_csv(&out.file(format!("{base}.csv")), &r.mse_trace, &r.residual_trace)?;
    let doc = json!({
        "name": name,
        "input": source,
        "n": r.n,
        "sweeps": r.sweeps,
        "converged": r.converged,
        "final_mse": r.final_mse,
        "thresholds": r.thresholds,
        "increases": r.increases,
    });
    let meta = Metadata::new("convergence", Some(a.common.seed), &[a.degrees.as_ref()]);
    out.finish(&format!("{base}.json"), meta, doc)?;
    Ok(Outcome::from_converged(r.converged))
}

/// Null expectation for a modularity computation.
struct Null {
    estimates: MomentEstimates,
    source: NullSource,
    report: Value,
    converged: bool,
}

fn build_null(
    kind: EstimatorArg,
    g: &LabelledGraph<String>,
    edges: &Path,
    chain: &ChainArgs,
    target: ModelArg,
    solver: &SolverArgs,
    seed: u64,
) -> Result<Null> {
    let d = g.graph.degree_sequence();
    Ok(match kind {
        EstimatorArg::Cl => Null {
            estimates: cl_estimate(&d).map_err(data_err(edges))?,
            source: NullSource::Cl,
            report: Value::Null,
            converged: true,
        },
        EstimatorArg::UniformI => {
            let beta = solve(&d, &solver.config())?;
            let report = solve_report(&beta, &d);
            if !beta.converged {
                let placeholder = MomentEstimates::from_omega(EstimateSource::UniformSolver, DMatrix::zeros(0, 0));
                return Ok(Null { estimates: placeholder, source: NullSource::UniformI, report, converged: false });
            }
            Null { estimates: omega_i_estimate(&beta)?, source: NullSource::UniformI, report, converged: true }
        }
        EstimatorArg::Mcmc => {
            let (cfg, run) = sample_chain(&g.graph, chain, target.into(), seed)?;
            Null {
                estimates: mc_estimates(&run.accumulator)?,
                source: NullSource::Mcmc,
                report: chain_report(&cfg, &run),
                converged: true,
            }
        }
    })
}

fn custom_null(path: &Path, ids: &[String]) -> Result<Null> {
    let (from, m) = io::read_matrix(path)?;
    let m = align(&from, m, ids, path)?;
    Ok(Null {
        estimates: MomentEstimates::from_omega(EstimateSource::Oracle, m),
        source: NullSource::Custom,
        report: json!({ "path": path.display().to_string() }),
        converged: true,
    })
}

fn null_name(source: NullSource) -> Value {
    serde_json::to_value(source).expect("plain enum")
}

fn modularity(a: &ModularityArgs) -> Result<Outcome> {
    let (g, _) = load_graph(&a.edges, a.fraction, a.skip_self_loops)?;
    let (labels, k) = io::read_partition(&a.partition, &g.ids)?;
    let null_model = match &a.null.null_matrix {
        Some(path) => custom_null(path, &g.ids)?,
        None => build_null(a.null.null, &g, &a.edges, &a.chain, a.null.target, &a.solver, a.common.seed)?,
    };
    let out = OutDir::create(&a.common.out)?;
    let mut report = json!({ "null_source": null_name(null_model.source), "null": null_model.report, "k": k, "converged": null_model.converged });
    if null_model.converged {
        let m = modularity_matrix(&g.graph, &null_model.estimates)?;
        report["Q"] = json!(m.q(&labels, k)?);
        report["two_m"] = json!(m.two_m);
    }
    let inputs = [Some(&a.edges), Some(&a.partition), a.null.null_matrix.as_ref()];
    out.finish("modularity.json", Metadata::new("modularity", Some(a.common.seed), &inputs), report)?;
    Ok(Outcome::from_converged(null_model.converged))
}

fn msp(a: &MspArgs) -> Result<Outcome> {
    let (g, _) = load_graph(&a.edges, a.fraction, a.skip_self_loops)?;
    if a.k < 2 || a.k > g.ids.len() {
        return Err(Error::Usage(format!("--k must lie in 2..={}", g.ids.len())));
    }
    let seed = a.common.seed;
    let null_model = match &a.null.null_matrix {
        Some(path) => custom_null(path, &g.ids)?,
        None => build_null(a.null.null, &g, &a.edges, &a.chain, a.null.target, &a.solver, seed)?,
    };
    let mut out = OutDir::create(&a.common.out)?;
    let meta = Metadata::new("msp", Some(seed), &[Some(&a.edges), a.null.null_matrix.as_ref()]).threads(a.chain.threads);
    if !null_model.converged {
        let report = json!({ "null_source": null_name(null_model.source), "null": null_model.report, "converged": false });
        out.finish("msp.json", meta, report)?;
        return Ok(Outcome::NotConverged);
    }
    let m = modularity_matrix(&g.graph, &null_model.estimates)?;
    let cfg = MspConfig { max_passes: a.max_passes, ..MspConfig::new(a.k, a.restarts, seed) };
    let pool: ThreadPool = pool(a.chain.threads)?;
    let p = msp_parallel(&m, &cfg, &pool)?;
    io::write_partition_csv(&out.file("partition.csv"), &g.ids, &p.labels)?;
    let mut report = json!({
        "Q": p.q,
        "k_requested": a.k,
        "k_used": p.k_used,
        "null_source": null_name(null_model.source),
        "seed": seed,
        "restarts": a.restarts,
        "best_restart": p.restart,
        "fallback": p.fallback,
        "null": null_model.report,
        "converged": true,
    });
    let mut outcome = Outcome::Done;
    if let Some(kind) = a.cross_null {
        let other = build_null(kind, &g, &a.edges, &a.chain, a.null.target, &a.solver, seed)?;
        let mut cross = json!({ "null_source": null_name(other.source), "null": other.report, "converged": other.converged });
        if other.converged {
            cross["Q"] = json!(modularity_matrix(&g.graph, &other.estimates)?.q(&p.labels, p.k)?);
        } else {
            outcome = Outcome::NotConverged;
        }
        report["cross"] = cross;
    }
    out.finish("msp.json", meta, report)?;
    Ok(outcome)
}

fn enumerate(a: &EnumerateArgs) -> Result<Outcome> {
    let (file, label) = match (&a.degrees, &a.sequence) {
        (Some(path), None) => (io::read_degrees(path)?, path.clone()),
        (None, Some(s)) => {
            let label = PathBuf::from("--sequence");
            let degrees = s
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|_| Error::Usage(format!("bad degree {x:?} in --sequence"))))
                .collect::<Result<Vec<_>>>()?;
            (DegreeFile::anonymous(DegreeSequence::new(degrees).map_err(|e| Error::Usage(e.to_string()))?), label)
        }
        _ => return Err(Error::Usage("exactly one of --degrees or --sequence is required".into())),
    };
    let model: Model = a.model.into();
    let ensemble = enumerate_ensemble(&file.degrees, a.cap).map_err(|e| match e {
        mgmoments_core::Error::EnumerationCap { .. } => Error::Usage(e.to_string()),
        e => Error::data(&label, e.to_string()),
    })?;
    let oracle = oracle_moments(&ensemble, model).map_err(data_err(&label))?;
    let mut out = OutDir::create(&a.out)?;
    out.estimates(&oracle.estimates, &file.ids, a.format)?;
    let probs = ensemble.probabilities(model);
    let graphs: Vec<Value> = ensemble
        .graphs
        .iter()
        .zip(&ensemble.config_weights)
        .zip(&probs)
        .map(|((g, w), p)| {
            let n = g.node_count();
            let edges: Vec<(usize, usize, u32)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter_map(|(i, j)| (g.weight(i, j) > 0).then(|| (i, j, g.weight(i, j))))
                .collect();
            json!({ "edges": edges, "config_weight": w, "probability": p })
        })
        .collect();
    let mut report = json!({
        "model": model,
        "degrees": file.degrees.as_slice(),
        "count": ensemble.len(),
        "graphs": graphs,
        "beta": oracle.estimates.beta,
        "psi": oracle.estimates.psi,
    });
    if model == Model::Configuration {
        let r = configuration_identity_residual(&oracle.pair, &file.degrees)?;
        report["identity_max_abs_residual"] = json!(r.max_abs);
        report["identity_undefined_pairs"] = json!(r.undefined);
    }
    if let (Some(beta), Some(chi)) = (&oracle.estimates.beta, &oracle.estimates.chi) {
        let eps = collapse_error_bound(beta, chi, RegularityConstants::default());
        out.matrix("eps_bound", &file.ids, &eps, a.format)?;
    }
    out.finish("enumerate.json", Metadata::new("enumerate", None, &[a.degrees.as_ref()]), report)?;
    Ok(Outcome::Done)
}

fn synthesize(a: &SynthesizeArgs) -> Result<Outcome> {
    let seed = a.common.seed;
    let (d, info) = draw_synthetic(a.kind, a.n, a.alpha, seed)?;
    let mut out = OutDir::create(&a.common.out)?;
    let base = format!("synthetic_{}_seed{seed}", kind_name(a.kind));
    let ids: Vec<String> = (0..d.len()).map(|i| i.to_string()).collect();
    io::write_degrees(&out.file(format!("{base}.csv")), &ids, &d)?;
    let report = json!({ "sequence": info, "edge_count": d.edge_count() });
    out.finish(&format!("{base}.json"), Metadata::new("synthesize", Some(seed), &[]), report)?;
    Ok(Outcome::Done)
}
