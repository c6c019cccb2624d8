//! The `wtx` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod io;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use wtx_core::analysis::{classical_mds, cut_dendrogram, single_linkage};
use wtx_core::datasets::{DatasetSpec, DumbbellSpec, NoisyCircleSpec, Scale};
use wtx_core::localization::{InnerKind, Kernel, LocalizationConfig, LocalizationKind};
use wtx_core::meanshift::{meanshift_run, MeanShiftConfig};
use wtx_core::ot::{wasserstein, GroundCost, LocalizedMeasure, SolverConfig, SolverMethod};
use wtx_core::stability::{run_monte_carlo, MonteCarloConfig};
use wtx_core::transform::{transform_iterate, transform_iterate_cloud, EpsilonMode, TransformConfig};

use crate::io::{Input, InputKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: u64, msg: String },
    #[error(transparent)]
    Core(#[from] wtx_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, line: u64, msg: impl Into<String>) -> Self {
        CliError::Csv {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "wtx", version, about = "Wasserstein transforms of finite metric-measure spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the Wasserstein transform and write each metric.
    Transform(TransformArgs),
    /// Run mean shift on a point cloud.
    Meanshift(MeanshiftArgs),
    /// Single-linkage dendrogram, optionally cut into k clusters.
    Cluster(ClusterArgs),
    /// Classical multidimensional scaling.
    Mds(MdsArgs),
    /// Transport cost between two measures on a ground space.
    Ot(OtArgs),
    /// Generate a synthetic point cloud.
    GenDataset(GenArgs),
    /// Monte-Carlo check of the stability bounds.
    VerifyStability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputKind::Auto)]
    pub input_kind: InputKind,
    /// One weight per line; uniform when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    /// Final regularization in distance units.
    #[arg(long)]
    pub sinkhorn_reg: Option<f64>,
    #[arg(long)]
    pub sinkhorn_max_iter: Option<usize>,
    #[arg(long)]
    pub sinkhorn_tol: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        let method = match self.solver {
            SolverArg::Exact => SolverMethod::Exact,
            SolverArg::Sinkhorn => SolverMethod::Sinkhorn,
            SolverArg::OneDim => SolverMethod::OneDim,
        };
        if method != SolverMethod::Sinkhorn
            && (self.sinkhorn_reg.is_some() || self.sinkhorn_max_iter.is_some() || self.sinkhorn_tol.is_some())
        {
            return Err(usage("--sinkhorn-* flags require --solver sinkhorn"));
        }
        let mut cfg = SolverConfig {
            method,
            sinkhorn_reg: self.sinkhorn_reg,
            ..SolverConfig::default()
        };
        if let Some(m) = self.sinkhorn_max_iter {
            cfg.sinkhorn_max_iter = m;
        }
        if let Some(t) = self.sinkhorn_tol {
            cfg.sinkhorn_tol = t;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exact,
    Sinkhorn,
    OneDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LocalizationArg {
    Truncation,
    Kernel,
    Meanshift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Truncation,
    Gaussian,
    Epanechnikov,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Truncation => Kernel::Truncation,
            KernelArg::Gaussian => Kernel::Gaussian,
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InnerArg {
    Truncation,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Absolute,
    Relative,
}

impl From<ModeArg> for EpsilonMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Absolute => EpsilonMode::Absolute,
            ModeArg::Relative => EpsilonMode::Relative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Absolute)]
    pub epsilon_mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = LocalizationArg::Truncation)]
    pub localization: LocalizationArg,
    /// Kernel for `kernel` and `meanshift` localizations.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Inner localization whose mean `meanshift` takes.
    #[arg(long, value_enum)]
    pub inner: Option<InnerArg>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, env = "WTX_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MeanshiftArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Absolute)]
    pub epsilon_mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = KernelArg::Truncation)]
    pub kernel: KernelArg,
    #[arg(long, env = "WTX_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also write flat labels for a cut into this many clusters.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct OtArgs {
    /// Masses over the ground points, one per line or `index,mass` rows.
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    /// Distance matrix, or a point cloud whose Euclidean metric is used.
    #[arg(long)]
    pub ground: PathBuf,
    #[arg(long, value_enum, default_value_t = InputKind::Auto)]
    pub input_kind: InputKind,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Dumbbell,
    NoisyCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Paper,
    Desk,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: DatasetKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    pub scale: ScaleArg,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest point count drawn per trial.
    #[arg(long, default_value_t = 12)]
    pub n_points: usize,
    /// Fixed ε; drawn per trial against the median distance when omitted.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, env = "WTX_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Report file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wtx: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Transform(a) => transform(a),
        Command::Meanshift(a) => meanshift(a),
        Command::Cluster(a) => cluster(a),
        Command::Mds(a) => mds(a),
        Command::Ot(a) => ot(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::VerifyStability(a) => verify_stability(a),
    }
}

fn check_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    Ok(())
}

fn load(args: &InputArgs) -> Result<(Input, Option<Vec<f64>>), CliError> {
    let input = io::read_input(&args.input, args.input_kind)?;
    let weights = args.weights.as_deref().map(io::read_weights).transpose()?;
    if let Some(w) = &weights {
        if w.len() != input.len() {
            return Err(CliError::Core(wtx_core::Error::Shape(format!(
                "{} weights for {} points",
                w.len(),
                input.len()
            ))));
        }
    }
    Ok((input, weights))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn transform_config(a: &TransformArgs) -> Result<TransformConfig, CliError> {
    check_threads(a.threads)?;
    let kind = match a.localization {
        LocalizationArg::Truncation => LocalizationKind::Truncation,
        LocalizationArg::Kernel => LocalizationKind::Kernel,
        LocalizationArg::Meanshift => LocalizationKind::MeanshiftWrap,
    };
    if kind == LocalizationKind::Truncation && a.kernel.is_some() {
        return Err(usage("--kernel has no effect with --localization truncation"));
    }
    if kind != LocalizationKind::MeanshiftWrap && a.inner.is_some() {
        return Err(usage("--inner requires --localization meanshift"));
    }
    let kernel = a.kernel.map_or(Kernel::Gaussian, Kernel::from);
    let localization = match kind {
        LocalizationKind::Truncation => LocalizationConfig::truncation(a.epsilon),
        LocalizationKind::Kernel => LocalizationConfig::kernel(kernel, a.epsilon),
        LocalizationKind::MeanshiftWrap => {
            let inner = match a.inner.unwrap_or(InnerArg::Kernel) {
                InnerArg::Truncation => InnerKind::Truncation,
                InnerArg::Kernel => InnerKind::Kernel,
            };
            LocalizationConfig::meanshift(inner, kernel, a.epsilon)
        }
    };
    let cfg = TransformConfig {
        localization,
        solver: a.solver.config()?,
        iterations: a.iterations,
        epsilon_mode: a.epsilon_mode.into(),
        threads: a.threads,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn transform(a: &TransformArgs) -> Result<(), CliError> {
    let cfg = transform_config(a)?;
    let (input, weights) = load(&a.input)?;
    match &input {
        Input::Distance(_) if cfg.localization.kind == LocalizationKind::MeanshiftWrap => {
            return Err(usage("--localization meanshift needs point-cloud input, got a distance matrix"));
        }
        Input::Distance(_) if cfg.solver.method == SolverMethod::OneDim => {
            return Err(usage("--solver one-dim needs a 1D point cloud, got a distance matrix"));
        }
        Input::Points(c) if cfg.solver.method == SolverMethod::OneDim && c.dim() != 1 => {
            return Err(usage(format!("--solver one-dim needs a 1D point cloud, got dimension {}", c.dim())));
        }
        _ => {}
    }
    let trace = match &input {
        Input::Distance(_) => {
            let space = input.space(weights)?;
            space.validate().into_result()?;
            transform_iterate(&space, &cfg)?.1
        }
        Input::Points(c) => {
            let cloud = match weights {
                Some(w) => c.clone().with_weights(w)?,
                None => c.clone(),
            };
            transform_iterate_cloud(&cloud, &cfg)?.1
        }
    };
    prepare_dir(&a.out_dir)?;
    for rec in &trace.iterations {
        let dist = rec.dist.as_ref().expect("transform keeps every iterate");
        let body = match a.format {
            Format::Csv => io::distance_csv(dist),
            Format::Json => io::distance_json(dist),
        };
        io::write_atomic(&a.out_dir.join(format!("iter_{}.{}", rec.iteration, a.format.ext())), &body)?;
    }
    let json = serde_json::to_string_pretty(&trace.iterations).expect("trace serializes");
    io::write_atomic(&a.out_dir.join("trace.json"), &(json + "\n"))
}

fn meanshift(a: &MeanshiftArgs) -> Result<(), CliError> {
    check_threads(a.threads)?;
    let cfg = MeanShiftConfig {
        kernel: a.kernel.into(),
        epsilon: a.epsilon,
        epsilon_mode: a.epsilon_mode.into(),
        iterations: a.iterations,
        threads: a.threads,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (input, weights) = load(&a.input)?;
    let cloud = match input {
        Input::Points(c) => c,
        Input::Distance(_) => return Err(usage("meanshift needs point-cloud input, got a distance matrix")),
    };
    let cloud = match weights {
        Some(w) => cloud.with_weights(w)?,
        None => cloud,
    };
    let (_, trace) = meanshift_run(&cloud, &cfg)?;
    prepare_dir(&a.out_dir)?;
    for rec in &trace {
        let c = rec.cloud.as_ref().expect("mean shift keeps every iterate");
        let body = match a.format {
            Format::Csv => io::cloud_csv(c),
            Format::Json => io::cloud_json(c),
        };
        io::write_atomic(&a.out_dir.join(format!("iter_{}.{}", rec.iteration, a.format.ext())), &body)?;
    }
    let json = serde_json::to_string_pretty(&trace).expect("trace serializes");
    io::write_atomic(&a.out_dir.join("trace.json"), &(json + "\n"))
}

fn cluster(a: &ClusterArgs) -> Result<(), CliError> {
    if a.k == Some(0) {
        return Err(usage("--k must be at least 1"));
    }
    let (input, weights) = load(&a.input)?;
    let space = input.space(weights)?;
    if let Some(k) = a.k {
        if k > space.len() {
            return Err(usage(format!("--k {k} exceeds the {} points", space.len())));
        }
    }
    let dendro = single_linkage(&space)?;
    prepare_dir(&a.out_dir)?;
    io::write_atomic(&a.out_dir.join("dendrogram.csv"), &io::dendrogram_csv(&dendro))?;
    if let Some(k) = a.k {
        let labels = cut_dendrogram(&dendro, k)?;
        io::write_atomic(&a.out_dir.join("labels.csv"), &io::labels_csv(&labels))?;
    }
    Ok(())
}

fn mds(a: &MdsArgs) -> Result<(), CliError> {
    if a.dim == 0 {
        return Err(usage("--dim must be at least 1"));
    }
    let (input, weights) = load(&a.input)?;
    let emb = classical_mds(&input.space(weights)?, a.dim)?;
    prepare_dir(&a.out_dir)?;
    io::write_atomic(&a.out_dir.join("embedding.csv"), &io::embedding_csv(&emb))
}

fn sparse(mass: &[f64], path: &Path) -> Result<LocalizedMeasure, CliError> {
    let (support, w): (Vec<usize>, Vec<f64>) = mass
        .iter()
        .enumerate()
        .filter(|(_, &m)| m != 0.0)
        .map(|(i, &m)| (i, m))
        .unzip();
    LocalizedMeasure::new(support, w).map_err(|e| CliError::csv(path, 0, e.to_string()))
}

fn ot(a: &OtArgs) -> Result<(), CliError> {
    let cfg = a.solver.config()?;
    let ground = io::read_input(&a.ground, a.input_kind)?;
    let coords = match &ground {
        Input::Points(c) if c.dim() == 1 => Some(c.coords().to_vec()),
        _ => None,
    };
    if cfg.method == SolverMethod::OneDim && coords.is_none() {
        return Err(usage("--solver one-dim needs a 1D point-cloud ground"));
    }
    let dist = match &ground {
        Input::Distance(d) => d.clone(),
        Input::Points(c) => c.distance_matrix(),
    };
    let mu = sparse(&io::read_measure(&a.mu, dist.len())?, &a.mu)?;
    let nu = sparse(&io::read_measure(&a.nu, dist.len())?, &a.nu)?;
    let cost = wasserstein(&mu, &nu, &GroundCost::restrict(&dist, &mu, &nu), &cfg, coords.as_deref())?;
    match a.format {
        Format::Csv => println!("{}", io::num(cost)),
        Format::Json => println!("{}", serde_json::json!({ "cost": cost })),
    }
    Ok(())
}

fn gen_dataset(a: &GenArgs) -> Result<(), CliError> {
    let spec = match a.kind {
        DatasetKind::Dumbbell => DatasetSpec::Dumbbell(DumbbellSpec::new(a.seed)),
        DatasetKind::NoisyCircle => DatasetSpec::NoisyCircle(NoisyCircleSpec::new(
            match a.scale {
                ScaleArg::Paper => Scale::Paper,
                ScaleArg::Desk => Scale::Desk,
            },
            a.seed,
        )),
    };
    let body = io::cloud_csv(&spec.generate()?);
    match &a.output {
        Some(p) => io::write_atomic(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn verify_stability(a: &StabilityArgs) -> Result<(), CliError> {
    check_threads(a.threads)?;
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.n_points < 2 {
        return Err(usage("--n-points must be at least 2"));
    }
    if let Some(e) = a.epsilon {
        if !(e > 0.0) || !e.is_finite() {
            return Err(usage(format!("--epsilon must be positive, got {e}")));
        }
    }
    let report = run_monte_carlo(&MonteCarloConfig {
        trials: a.trials,
        seed: a.seed,
        max_points: a.n_points,
        epsilon: a.epsilon,
        threads: a.threads,
    })?;
    let worst: Vec<_> = report
        .checks
        .iter()
        .map(|c| &report.trials[c.worst_trial])
        .collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "trials": a.trials,
        "seed": a.seed,
        "n_points": a.n_points,
        "epsilon": a.epsilon,
        "violations": report.violations(),
        "checks": report.checks,
        "worst_cases": worst,
    }))
    .expect("report serializes");
    for c in &report.checks {
        eprintln!("{}: {} violations, min slack {:e}", c.name, c.violations, c.min_slack);
    }
    match &a.output {
        Some(p) => io::write_atomic(p, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
