//! `nlasso` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 input or parse error, 3 iteration limit
//! reached without convergence, 4 divergence, 5 network flow condition not
//! satisfied.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlasso::datagen::{knn_graph, synthetic_weather, two_cluster_instance, TwoClusterSpec};
use nlasso::experiment::{
    connectivity_sweep, default_weather_cluster, masked_cluster_prediction, steepest_drop, SweepConfig,
    WeatherConfig, SWEEP_INTER_EDGES, SWEEP_LAMBDA, WEATHER_DAYS, WEATHER_KEEP_EVERY, WEATHER_STATIONS,
};
use nlasso::io::{self, IdTable, SignalFile, SolveOutput};
use nlasso::ncc::check_ncc;
use nlasso::{Error, NoiseKind, SolverConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_DIVERGED: u8 = 4;
const EXIT_NCC_FAILED: u8 = 5;

#[derive(Parser)]
#[command(name = "nlasso", version, about = "Network Lasso on networked data")]
struct Cli {
    /// Seed for every generator and experiment.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn node weights with the primal-dual solver.
    Solve(SolveArgs),
    /// Check the network flow condition on a partition.
    NccCheck(NccArgs),
    /// Generate a two-cluster instance.
    GenTwoCluster(GenArgs),
    /// Build a k-nearest-neighbor graph from coordinates.
    KnnGraph(KnnArgs),
    /// NMSE against measured connectivity on two-cluster graphs.
    ExperimentFig1(Fig1Args),
    /// Masked-cluster prediction on weather-station data.
    ExperimentWeather(WeatherArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RequiredLambda {
    #[arg(long)]
    lambda: Option<f64>,
    /// Sets lambda = 1/K.
    #[arg(long = "lambda-from-K", value_name = "K")]
    lambda_from_k: Option<f64>,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct OptionalLambda {
    #[arg(long)]
    lambda: Option<f64>,
    /// Sets lambda = 1/K.
    #[arg(long = "lambda-from-K", value_name = "K")]
    lambda_from_k: Option<f64>,
}

fn lambda_of(lambda: Option<f64>, k: Option<f64>) -> Result<Option<f64>, Failure> {
    match (lambda, k) {
        (Some(l), _) => Ok(Some(l)),
        (None, Some(k)) if k > 0.0 && k.is_finite() => Ok(Some(1.0 / k)),
        (None, Some(k)) => Err(Failure::usage(format!("K must be positive and finite, got {k}"))),
        (None, None) => Ok(None),
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    lambda: RequiredLambda,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0.9)]
    eta: f64,
    #[arg(long, default_value_t = 100)]
    log_every: usize,
    /// Result JSON.
    #[arg(long)]
    out: PathBuf,
    /// Iteration log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct NccArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    /// Dataset whose labeled rows form the training set; also fixes p.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Labeled node ids, comma separated. Overrides --dataset labels.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    labeled: Option<Vec<u64>>,
    /// Feature dimension, required without --dataset.
    #[arg(long)]
    p: Option<usize>,
    /// Constant K of the error bound, echoed in the report.
    #[arg(long = "K", value_name = "K")]
    k: Option<f64>,
    /// Report JSON (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 80)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 10.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 2)]
    inter_edges: usize,
    #[arg(long, default_value_t = 3)]
    labels_per_cluster: usize,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Standard deviation of Gaussian label noise.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Directory for graph.csv, dataset.csv, partition.csv and truth.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    coords: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, default_value_t = 80)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 10.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 3)]
    labels_per_cluster: usize,
    /// Crossing-edge counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    inter_edges: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[command(flatten)]
    lambda: OptionalLambda,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WeatherArgs {
    /// Use the synthetic station generator (seeded by --seed).
    #[arg(long, conflicts_with_all = ["graph", "dataset"])]
    synthetic: bool,
    #[arg(long, requires = "dataset")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    dataset: Option<PathBuf>,
    /// Station coordinates, used to pick the default cluster.
    #[arg(long)]
    coords: Option<PathBuf>,
    #[arg(long, default_value_t = WEATHER_STATIONS)]
    stations: usize,
    #[arg(long, default_value_t = WEATHER_DAYS)]
    days: usize,
    /// Station whose neighbourhood forms the default cluster.
    #[arg(long, default_value_t = 0)]
    center: u64,
    /// Cluster node ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    cluster: Option<Vec<u64>>,
    /// Cluster members that keep their labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    kept: Option<Vec<u64>>,
    #[command(flatten)]
    lambda: OptionalLambda,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 200_000)]
    baseline_iters: usize,
    /// Also write the synthetic graph, dataset and coordinates here.
    #[arg(long)]
    write_data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(Error::Diverged { .. }) => EXIT_DIVERGED,
            Failure::Lib(Error::Config(_) | Error::BoundUndefined { .. }) => EXIT_USAGE,
            Failure::Lib(_) => EXIT_INPUT,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

struct Ctx {
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&ctx, a),
        Command::NccCheck(a) => cmd_ncc(&ctx, a),
        Command::GenTwoCluster(a) => cmd_gen(&ctx, a),
        Command::KnnGraph(a) => cmd_knn(a),
        Command::ExperimentFig1(a) => cmd_fig1(&ctx, a),
        Command::ExperimentWeather(a) => cmd_weather(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn cmd_solve(ctx: &Ctx, a: SolveArgs) -> Result<u8, Failure> {
    let lambda = lambda_of(a.lambda.lambda, a.lambda.lambda_from_k)?.expect("clap enforces one of the two");
    let cfg = SolverConfig {
        lambda,
        eta: a.eta,
        max_iter: a.max_iter,
        rel_tol: a.rel_tol,
        log_every: a.log_every,
    };
    cfg.validate()?;
    let (ds, ids) = io::read_network(&a.graph, &a.dataset)?;
    let res = nlasso::solver::solve(&ds, &cfg)?;
    io::write_json(&a.out, &SolveOutput::new(&res, &cfg, &ids))?;
    if let Some(log) = &a.log {
        io::write_log(log, &res.log)?;
    }
    if res.converged {
        ctx.info(format!(
            "converged after {} iterations, objective {}",
            res.iterations_run,
            res.final_objective()
        ));
        Ok(0)
    } else {
        ctx.info(format!("no convergence within {} iterations", res.iterations_run));
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_ncc(ctx: &Ctx, a: NccArgs) -> Result<u8, Failure> {
    let edges = io::read_edges(&a.graph)?;
    let part_rows = io::read_partition_rows(&a.partition)?;
    let raw = a.dataset.as_deref().map(io::read_dataset_rows).transpose()?;

    let mut all: BTreeSet<u64> = edges.iter().flat_map(|e| [e.a, e.b]).collect();
    all.extend(part_rows.iter().map(|r| r.0));
    if let Some(raw) = &raw {
        all.extend(raw.ids.iter().copied());
    }
    let ids = IdTable::new(all);
    let g = io::graph_from_edges(&a.graph, &edges, &ids)?;
    let part = io::partition_from_rows(&a.partition, &part_rows, &ids)?;

    let p = match (a.p, &raw) {
        (Some(p), _) => p,
        (None, Some(raw)) => raw.dim,
        (None, None) => return Err(Failure::usage("--p is required without --dataset")),
    };
    let labeled_ids: Vec<u64> = match (&a.labeled, &raw) {
        (Some(l), _) => l.clone(),
        (None, Some(raw)) => raw
            .ids
            .iter()
            .zip(&raw.labels)
            .filter(|(_, y)| y.is_some())
            .map(|(id, _)| *id)
            .collect(),
        (None, None) => Vec::new(),
    };
    let mut labeled = labeled_ids
        .iter()
        .map(|&id| {
            ids.index(id)
                .ok_or_else(|| Failure::usage(format!("labeled node {id} is not in the graph")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    labeled.sort_unstable();
    labeled.dedup();

    let report = check_ncc(&g, &part, &labeled, p, a.k)?;
    match &a.out {
        Some(path) => io::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?),
    }
    ctx.info(format!(
        "min rho {} against threshold {}: {}",
        report.rho_min,
        report.threshold,
        if report.satisfied { "satisfied" } else { "not satisfied" }
    ));
    Ok(if report.satisfied { 0 } else { EXIT_NCC_FAILED })
}

fn cmd_gen(ctx: &Ctx, a: GenArgs) -> Result<u8, Failure> {
    let mut spec = TwoClusterSpec::new(a.n, a.avg_degree, a.inter_edges, a.labels_per_cluster, ctx.seed);
    spec.separation = a.separation;
    if let Some(sigma) = a.noise_sigma {
        spec.noise = NoiseKind::Gaussian { sigma };
    }
    let inst = two_cluster_instance(&spec, a.p)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    let ids = IdTable::identity(a.n);
    let dir = &a.out_dir;
    io::write_graph(&dir.join("graph.csv"), inst.dataset.graph(), &ids)?;
    io::write_dataset(&dir.join("dataset.csv"), &inst.dataset, &ids)?;
    io::write_partition(&dir.join("partition.csv"), &inst.partition, &ids)?;
    io::write_json(&dir.join("truth.json"), &SignalFile::from_signal(&inst.truth, &ids))?;
    ctx.info(format!(
        "{} nodes, {} edges written to {}",
        a.n,
        inst.dataset.graph().edge_count(),
        dir.display()
    ));
    Ok(0)
}

fn cmd_knn(a: KnnArgs) -> Result<u8, Failure> {
    let (coords, ids) = io::read_coords(&a.coords)?;
    let g = knn_graph(&coords, a.k)?;
    io::write_graph(&a.out, &g, &ids)?;
    Ok(0)
}

fn cmd_fig1(ctx: &Ctx, a: Fig1Args) -> Result<u8, Failure> {
    let lambda = lambda_of(a.lambda.lambda, a.lambda.lambda_from_k)?.unwrap_or(SWEEP_LAMBDA);
    let mut cfg = SweepConfig::new(a.inter_edges.unwrap_or_else(|| SWEEP_INTER_EDGES.to_vec()), lambda);
    cfg.n = a.n;
    cfg.p = a.p;
    cfg.avg_degree = a.avg_degree;
    cfg.labels_per_cluster = a.labels_per_cluster;
    cfg.runs_per_point = a.runs;
    cfg.solver.max_iter = a.max_iter;
    cfg.solver.rel_tol = a.rel_tol;
    cfg.seed = ctx.seed;
    cfg.solver.validate()?;
    let points = connectivity_sweep(&cfg)?;
    io::write_sweep(&a.out, &points)?;
    for pt in &points {
        ctx.info(format!(
            "inter_edges {:>3}  mean rho {:>8.4}  mean nmse {:.3e}",
            pt.inter_edges, pt.mean_rho, pt.mean_nmse
        ));
    }
    if let Some(d) = steepest_drop(&points) {
        ctx.info(format!(
            "largest NMSE drop {:.3e} between mean rho {:.4} and {:.4}",
            d.drop, d.rho_low, d.rho_high
        ));
    }
    Ok(0)
}

fn to_indices(list: &[u64], ids: &IdTable, what: &str) -> Result<Vec<usize>, Failure> {
    list.iter()
        .map(|&id| ids.index(id).ok_or_else(|| Failure::usage(format!("{what} node {id} is unknown"))))
        .collect()
}

fn cmd_weather(ctx: &Ctx, a: WeatherArgs) -> Result<u8, Failure> {
    let lambda = lambda_of(a.lambda.lambda, a.lambda.lambda_from_k)?;
    let (ds, ids, coords) = if a.synthetic {
        let data = synthetic_weather(a.stations, a.days, ctx.seed)?;
        let ids = IdTable::identity(a.stations);
        if let Some(dir) = &a.write_data {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            io::write_graph(&dir.join("graph.csv"), data.dataset.graph(), &ids)?;
            io::write_dataset(&dir.join("dataset.csv"), &data.dataset, &ids)?;
            io::write_coords(&dir.join("coords.csv"), &data.coords, &ids)?;
        }
        (data.dataset, ids, Some(data.coords))
    } else {
        let (Some(graph), Some(dataset)) = (&a.graph, &a.dataset) else {
            return Err(Failure::usage("give either --synthetic or --graph and --dataset"));
        };
        let (ds, ids) = io::read_network(graph, dataset)?;
        let coords = match &a.coords {
            Some(path) => Some(reorder_coords(path, &ids)?),
            None => None,
        };
        (ds, ids, coords)
    };

    let (cluster, default_kept) = match (&a.cluster, &coords) {
        (Some(list), _) => {
            let cluster = to_indices(list, &ids, "cluster")?;
            let kept = cluster.iter().step_by(WEATHER_KEEP_EVERY).copied().collect();
            (cluster, kept)
        }
        (None, Some(coords)) => {
            let center = ids
                .index(a.center)
                .ok_or_else(|| Failure::usage(format!("center node {} is unknown", a.center)))?;
            default_weather_cluster(coords, center)
        }
        (None, None) => return Err(Failure::usage("--cluster is required without coordinates")),
    };
    let kept = match &a.kept {
        Some(list) => to_indices(list, &ids, "kept")?,
        None => default_kept,
    };
    let mut cfg = WeatherConfig {
        iterations: a.iters,
        baseline_iterations: a.baseline_iters,
        ..WeatherConfig::default()
    };
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    let report = masked_cluster_prediction(&ds, &cluster, &kept, &cfg, &ids)?;
    io::write_json(&a.out, &report)?;
    ctx.info(format!(
        "nLasso error {:.4e}, LAD baseline error {:.4e}, ratio {:.3}",
        report.nlasso_error, report.baseline_error, report.ratio
    ));
    Ok(0)
}

/// Coordinates in the internal order of `ids`.
fn reorder_coords(path: &Path, ids: &IdTable) -> Result<Vec<Vec<f64>>, Failure> {
    let (coords, cids) = io::read_coords(path)?;
    ids.ids()
        .iter()
        .map(|&id| {
            cids.index(id)
                .map(|k| coords[k].clone())
                .ok_or_else(|| Failure::usage(format!("no coordinates for node {id}")))
        })
        .collect()
}
