//! `plfc`: piecewise-linear summaries and clustering of curves.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use plfc_core::bench::{self, BenchConfig};
use plfc_core::io::{load_dataset, write_dataset, write_table, Cell, InputFormat, Table};
use plfc_core::pipeline::{cluster_features, Clustering, PipelineConfig};
use plfc_core::report;
use plfc_core::segmentation::segment_all;
use plfc_core::simulation::{sample_dataset, JitterSet, ModelKind, ModelSpec};
use plfc_core::spline::{featurize_summaries, FeatureMatrix, Scaling};
use plfc_core::trend_filter::search_lambda;
use plfc_core::{ari, changepoint_frequencies, par, Contrast, ErrorClass, Exec, KSelection};

#[derive(Parser)]
#[command(name = "plfc", version, about = "Piecewise-linear summaries and clustering of curves")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// JSON config file. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw curves from one of the simulation models.
    Simulate(SimulateArgs),
    /// Trend-filter fits and candidate change-points per curve.
    Fit(FitArgs),
    /// Select change-points and node values per curve.
    Segment(SegmentArgs),
    /// Turn a segments file into a feature matrix.
    Featurize(FeaturizeArgs),
    /// Scale features, choose k and run k-means.
    Cluster(ClusterArgs),
    /// Adjusted Rand index between two label files.
    Ari(AriArgs),
    /// Change-point frequencies over a directory of segments files.
    Cpfreq(CpfreqArgs),
    /// Seeded simulation studies.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// segment, featurize and cluster in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    n_curves: usize,
    #[arg(long)]
    seed: u64,
    /// verbatim or symmetric
    #[arg(long)]
    jitter_set: Option<JitterSet>,
    #[arg(long)]
    out: PathBuf,
    /// Per-curve labels, knots and node values.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct SearchFlags {
    /// Largest number of candidate change-points.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SearchFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.k_max, self.kmax);
        set(&mut cfg.tol, self.tol);
        set(&mut cfg.grid_size, self.grid_size);
        set(&mut cfg.eps_rel, self.eps_rel);
        set(&mut cfg.max_iter, self.max_iter);
    }
}

#[derive(Args, Clone, Default)]
struct SelectFlags {
    /// Threshold on the normalized second difference of the contrast.
    #[arg(long = "s")]
    s_threshold: Option<f64>,
    /// log-rss or rss
    #[arg(long)]
    contrast: Option<Contrast>,
}

impl SelectFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.s_threshold, self.s_threshold);
        set(&mut cfg.contrast, self.contrast);
    }
}

#[derive(Args, Clone, Default)]
struct KmeansFlags {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    kmeans_max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use this many clusters instead of the majority vote.
    #[arg(long)]
    k: Option<usize>,
}

impl KmeansFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.restarts, self.restarts);
        set(&mut cfg.kmeans_max_iter, self.kmeans_max_iter);
        set(&mut cfg.seed, self.seed);
        if self.k.is_some() {
            cfg.forced_k = self.k;
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    search: SearchFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    select: SelectFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    segments: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[command(flatten)]
    kmeans: KmeansFlags,
    /// Labels file; `kselection.json` is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AriArgs {
    #[arg(long)]
    labels_a: PathBuf,
    #[arg(long)]
    labels_b: PathBuf,
    #[arg(long, default_value = "label")]
    column_a: String,
    #[arg(long, default_value = "label")]
    column_b: String,
}

#[derive(Args)]
struct CpfreqArgs {
    /// Every `*.csv` segments file in here counts.
    #[arg(long)]
    segments_dir: PathBuf,
    /// Positions as `start:step:end`.
    #[arg(long, default_value = "0:10:500")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Pipeline against k-means on the raw curves, scored by ARI.
    Ari(BenchArgs),
    /// Change-point recovery on curves from a single cluster.
    Cp(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n_curves: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Cluster drawn by the change-point study.
    #[arg(long)]
    cluster: Option<usize>,
    #[arg(long)]
    jitter_set: Option<JitterSet>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    select: SelectFlags,
    #[arg(long)]
    cluster_kmin: Option<usize>,
    #[arg(long)]
    cluster_kmax: Option<usize>,
    #[command(flatten)]
    kmeans: KmeansFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] plfc_core::Error),
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Internal => 4,
            },
            CliError::Config { .. } | CliError::Usage(_) => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(plfc_core::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn echo_config<T: Serialize>(config: &T, dir: &Path) -> CliResult {
    create_dir(dir)?;
    bench::write_json(config, dir.join("config.resolved.json"))?;
    Ok(())
}

fn write_out(table: &Table, path: &Path) -> CliResult {
    create_dir(&parent_dir(path))?;
    write_table(table, path)?;
    Ok(())
}

struct Ctx {
    exec: Exec,
    config: Option<PathBuf>,
}

impl Ctx {
    fn pipeline_config(&self, edit: impl FnOnce(&mut PipelineConfig)) -> CliResult<PipelineConfig> {
        let mut cfg: PipelineConfig = read_config(self.config.as_deref())?;
        edit(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct SimulateConfig {
    model: ModelKind,
    sigma: f64,
    n_curves: usize,
    seed: u64,
    jitter: JitterSet,
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> CliResult {
    let jitter = match a.jitter_set {
        Some(j) => j,
        None => ctx.pipeline_config(|_| {})?.jitter,
    };
    let sim = sample_dataset(&ModelSpec::new(a.model), a.sigma, a.n_curves, a.seed, jitter, ctx.exec)?;
    create_dir(&parent_dir(&a.out))?;
    write_dataset(&sim.dataset, &a.out)?;
    if let Some(truth) = &a.truth {
        write_out(&sim.truth_table(), truth)?;
    }
    let resolved = SimulateConfig {
        model: a.model,
        sigma: a.sigma,
        n_curves: a.n_curves,
        seed: a.seed,
        jitter,
    };
    echo_config(&resolved, &parent_dir(&a.out))
}

fn fit(ctx: &Ctx, a: FitArgs) -> CliResult {
    let cfg = ctx.pipeline_config(|c| a.search.apply(c))?;
    let data = load_dataset(&a.input, InputFormat::LongCsv)?;
    let opts = cfg.search_options();
    let fits = par::try_map(ctx.exec, &data.curves, |c| search_lambda(&c.y, cfg.k_max, &opts))?;
    let rows = data
        .curves
        .iter()
        .zip(&fits)
        .map(|(c, f)| (c.id.as_str(), c.x.as_slice(), f));
    write_out(&report::fits_table(rows), &a.out)?;
    echo_config(&cfg, &parent_dir(&a.out))
}

fn segment(ctx: &Ctx, a: SegmentArgs) -> CliResult {
    let cfg = ctx.pipeline_config(|c| {
        a.search.apply(c);
        a.select.apply(c);
    })?;
    let data = load_dataset(&a.input, InputFormat::LongCsv)?;
    let segs = segment_all(&data, &cfg.segment_options(), ctx.exec)?;
    write_out(&report::segments_table(&segs), &a.out)?;
    echo_config(&cfg, &parent_dir(&a.out))
}

fn featurize(a: FeaturizeArgs) -> CliResult {
    let summaries = report::read_segments(&a.segments)?;
    let features = featurize_summaries(&summaries)?;
    write_out(&features.to_table(), &a.out)
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    k: usize,
    forced: bool,
    wss: f64,
    sizes: Vec<usize>,
    selection: Option<&'a KSelection>,
    scaling: &'a Scaling,
}

fn write_clustering(features: &FeatureMatrix, scaling: &Scaling, clustering: &Clustering, labels: &Path) -> CliResult {
    let p = &clustering.partition;
    write_out(&report::labels_table(&features.ids, &p.labels), labels)?;
    let rep = ClusterReport {
        k: p.k,
        forced: clustering.selection.is_none(),
        wss: p.wss,
        sizes: p.sizes(),
        selection: clustering.selection.as_ref(),
        scaling,
    };
    bench::write_json(&rep, parent_dir(labels).join("kselection.json"))?;
    Ok(())
}

fn cluster(ctx: &Ctx, a: ClusterArgs) -> CliResult {
    let cfg = ctx.pipeline_config(|c| {
        set(&mut c.cluster_k_min, a.kmin);
        set(&mut c.cluster_k_max, a.kmax);
        a.kmeans.apply(c);
    })?;
    let features = report::read_features(&a.features)?;
    let (_, scaling, clustering) = cluster_features(&features, &cfg, ctx.exec)?;
    write_clustering(&features, &scaling, &clustering, &a.out)?;
    echo_config(&cfg, &parent_dir(&a.out))
}

fn pipeline(ctx: &Ctx, a: PipelineArgs) -> CliResult {
    let cfg = ctx.pipeline_config(|c| {
        a.search.apply(c);
        a.select.apply(c);
        set(&mut c.cluster_k_min, a.cluster_kmin);
        set(&mut c.cluster_k_max, a.cluster_kmax);
        a.kmeans.apply(c);
    })?;
    let data = load_dataset(&a.input, InputFormat::LongCsv)?;
    let out = plfc_core::run_pipeline(&data, &cfg, ctx.exec)?;
    let dir = &a.out_dir;
    create_dir(dir)?;
    write_out(&report::segments_table(&out.segmentations), &dir.join("segments.csv"))?;
    write_out(&out.features.to_table(), &dir.join("features.csv"))?;
    write_clustering(&out.features, &out.scaling, &out.clustering, &dir.join("labels.csv"))?;
    echo_config(&cfg, dir)
}

fn ari_cmd(a: AriArgs) -> CliResult {
    let (ids_a, la) = report::read_labels(&a.labels_a, Some(&a.column_a))?;
    let (ids_b, lb) = report::read_labels(&a.labels_b, Some(&a.column_b))?;
    let (p, q) = report::align_labels((&ids_a, &la), (&ids_b, &lb))?;
    println!("{}", ari(&p, &q)?);
    Ok(())
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("grid `{text}` is not start:step:end with step > 0"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, step, end] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start.is_finite() && end.is_finite() && end >= start) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn cpfreq(a: CpfreqArgs) -> CliResult {
    let grid = parse_grid(&a.grid)?;
    let entries = std::fs::read_dir(&a.segments_dir).map_err(|e| plfc_core::Error::Io {
        path: a.segments_dir.clone(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .csv files in {}", a.segments_dir.display())));
    }
    let mut knots = Vec::new();
    for f in &files {
        knots.extend(report::read_segments(f)?.into_iter().map(|s| s.knots));
    }
    let freq = changepoint_frequencies(&knots, &grid)?;
    let mut t = Table::new(["x", "frequency"]);
    for (x, f) in grid.iter().zip(freq) {
        t.rows.push(vec![Cell::Real(*x), Cell::Real(f)]);
    }
    write_out(&t, &a.out)
}

fn bench_config(ctx: &Ctx, a: &BenchArgs) -> CliResult<BenchConfig> {
    let mut cfg: BenchConfig = read_config(ctx.config.as_deref())?;
    set(&mut cfg.model, a.model);
    set(&mut cfg.sigmas, a.sigma.clone());
    set(&mut cfg.replicates, a.reps);
    set(&mut cfg.n_curves, a.n_curves);
    set(&mut cfg.cp_cluster, a.cluster);
    set(&mut cfg.pipeline.jitter, a.jitter_set);
    cfg.seed = a.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn bench_cmd(ctx: &Ctx, cmd: BenchCommand) -> CliResult {
    match cmd {
        BenchCommand::Ari(a) => {
            let cfg = bench_config(ctx, &a)?;
            let b = bench::run_ari_benchmark(&cfg, ctx.exec)?;
            create_dir(&a.out_dir)?;
            bench::write_ari_outputs(&b, &cfg, &a.out_dir)?;
            if !b.failures.is_empty() {
                eprintln!("{} replicate failure(s), see failures.csv", b.failures.len());
            }
            echo_config(&cfg, &a.out_dir)
        }
        BenchCommand::Cp(a) => {
            let cfg = bench_config(ctx, &a)?;
            let study = bench::run_cp_study(&cfg, ctx.exec)?;
            create_dir(&a.out_dir)?;
            bench::write_cp_outputs(&study, &a.out_dir)?;
            echo_config(&cfg, &a.out_dir)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Fit(_) => "fit",
        Command::Segment(_) => "segment",
        Command::Featurize(_) => "featurize",
        Command::Cluster(_) => "cluster",
        Command::Ari(_) => "ari",
        Command::Cpfreq(_) => "cpfreq",
        Command::Bench(BenchCommand::Ari(_)) => "bench ari",
        Command::Bench(BenchCommand::Cp(_)) => "bench cp",
        Command::Pipeline(_) => "pipeline",
    }
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = Ctx {
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        config: cli.config,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Segment(a) => segment(&ctx, a),
        Command::Featurize(a) => featurize(a),
        Command::Cluster(a) => cluster(&ctx, a),
        Command::Ari(a) => ari_cmd(a),
        Command::Cpfreq(a) => cpfreq(a),
        Command::Bench(b) => bench_cmd(&ctx, b),
        Command::Pipeline(a) => pipeline(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plfc {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
