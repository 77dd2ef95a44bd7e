//! Reproducible experiment drivers: the connectivity sweep on two-cluster
//! graphs and the masked-cluster weather protocol.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::fit_lad;
use crate::datagen::{nearest_points, two_cluster_instance, TwoClusterSpec};
use crate::error::{Error, Result};
use crate::model::{nmse, predict, NetworkDataset};
use crate::ncc::check_ncc;
use crate::solver::{solve, SolverConfig};

/// Default sweep over the number of crossing edges.
pub const SWEEP_INTER_EDGES: [usize; 15] = [2, 4, 6, 8, 10, 12, 14, 16, 20, 24, 30, 40, 50, 60, 80];
/// Default regularization strength of the sweep.
pub const SWEEP_LAMBDA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub p: usize,
    pub avg_degree: f64,
    pub labels_per_cluster: usize,
    pub inter_edges: Vec<usize>,
    pub runs_per_point: usize,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(inter_edges: Vec<usize>, lambda: f64) -> Self {
        let mut solver = SolverConfig::new(lambda);
        solver.max_iter = 10_000;
        solver.rel_tol = 1e-9;
        SweepConfig {
            n: 80,
            p: 2,
            avg_degree: 10.0,
            labels_per_cluster: 3,
            inter_edges,
            runs_per_point: 10,
            solver,
            seed: 0,
        }
    }
}

/// One solver run on one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub inter_edges: usize,
    pub seed: u64,
    pub rho_mean: f64,
    pub rho_min: f64,
    pub nmse: f64,
    pub iterations: usize,
    pub objective: f64,
    pub lambda: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub inter_edges: usize,
    pub mean_rho: f64,
    pub mean_nmse: f64,
    pub records: Vec<ExperimentRecord>,
}

/// Seed of run `run` at sweep value `inter_edges`.
pub fn run_seed(base: u64, inter_edges: usize, run: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((inter_edges as u64) << 20)
        .wrapping_add(run as u64)
}

pub fn run_instance(cfg: &SweepConfig, inter_edges: usize, seed: u64) -> Result<ExperimentRecord> {
    let mut spec = TwoClusterSpec::new(cfg.n, cfg.avg_degree, inter_edges, cfg.labels_per_cluster, seed);
    spec.separation = 1.0;
    let inst = two_cluster_instance(&spec, cfg.p)?;
    let ds = &inst.dataset;
    let report = check_ncc(ds.graph(), &inst.partition, ds.training_set(), cfg.p, None)?;
    let res = solve(ds, &cfg.solver)?;
    Ok(ExperimentRecord {
        inter_edges,
        seed,
        rho_mean: report.rho_mean,
        rho_min: report.rho_min,
        nmse: nmse(&inst.truth, &res.weights)?,
        iterations: res.iterations_run,
        objective: res.final_objective(),
        lambda: cfg.solver.lambda,
        converged: res.converged,
    })
}

/// Runs every `(inter_edges, run)` pair in parallel. Points are returned in
/// increasing mean `rho`, records within a point in run order.
pub fn connectivity_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if cfg.runs_per_point == 0 {
        return Err(Error::Config("runs_per_point must be at least 1".into()));
    }
    if cfg.inter_edges.is_empty() {
        return Err(Error::Config("sweep needs at least one point".into()));
    }
    let tasks: Vec<(usize, usize)> = cfg
        .inter_edges
        .iter()
        .flat_map(|&b| (0..cfg.runs_per_point).map(move |r| (b, r)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(b, r)| run_instance(cfg, b, run_seed(cfg.seed, b, r)))
        .collect::<Result<Vec<_>>>()?;

    let mut points: Vec<SweepPoint> = records
        .chunks(cfg.runs_per_point)
        .map(|chunk| {
            let k = chunk.len() as f64;
            SweepPoint {
                inter_edges: chunk[0].inter_edges,
                mean_rho: chunk.iter().map(|r| r.rho_mean).sum::<f64>() / k,
                mean_nmse: chunk.iter().map(|r| r.nmse).sum::<f64>() / k,
                records: chunk.to_vec(),
            }
        })
        .collect();
    points.sort_by(|a, b| a.mean_rho.total_cmp(&b.mean_rho).then(a.inter_edges.cmp(&b.inter_edges)));
    Ok(points)
}

/// Where the mean NMSE falls the most between neighbouring sweep points
/// (ordered by mean `rho`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteepestDrop {
    pub rho_low: f64,
    pub rho_high: f64,
    pub drop: f64,
}

pub fn steepest_drop(points: &[SweepPoint]) -> Option<SteepestDrop> {
    points
        .windows(2)
        .map(|w| SteepestDrop {
            rho_low: w[0].mean_rho,
            rho_high: w[1].mean_rho,
            drop: w[0].mean_nmse - w[1].mean_nmse,
        })
        .max_by(|a, b| a.drop.total_cmp(&b.drop))
}

/// Station count of the synthetic weather run.
pub const WEATHER_STATIONS: usize = 100;
pub const WEATHER_DAYS: usize = 30;
/// The masked cluster is a station plus its nearest neighbours, this many
/// stations in total.
pub const WEATHER_CLUSTER_SIZE: usize = 15;
/// Every `WEATHER_KEEP_EVERY`-th cluster member (by distance) keeps its label.
pub const WEATHER_KEEP_EVERY: usize = 3;

/// Default masked cluster around `center` and the members that stay labeled.
pub fn default_weather_cluster(coords: &[Vec<f64>], center: usize) -> (Vec<usize>, Vec<usize>) {
    let cluster = nearest_points(coords, center, WEATHER_CLUSTER_SIZE);
    let kept = cluster.iter().step_by(WEATHER_KEEP_EVERY).copied().collect();
    (cluster, kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherConfig {
    pub lambda: f64,
    pub iterations: usize,
    pub baseline_iterations: usize,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        WeatherConfig {
            lambda: 1.0 / 7.0,
            iterations: 10_000,
            baseline_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherReport {
    pub cluster: Vec<u64>,
    pub kept: Vec<u64>,
    pub evaluated: Vec<u64>,
    /// `sum (y - y_hat)^2 / sum y^2` over the masked nodes.
    pub nlasso_error: f64,
    pub baseline_error: f64,
    pub ratio: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub baseline_weights: Vec<f64>,
}

/// Hides the labels of `cluster` except `kept`, learns with nLasso and
/// predicts the hidden labels. The baseline is one LAD model fit to the
/// true labels of the whole cluster.
///
/// `ds` must carry a label on every node of `cluster`. Indices are internal;
/// `ids` maps them back for the report.
pub fn masked_cluster_prediction(
    ds: &NetworkDataset,
    cluster: &[usize],
    kept: &[usize],
    cfg: &WeatherConfig,
    ids: &crate::io::IdTable,
) -> Result<WeatherReport> {
    let n = ds.node_count();
    if let Some(&i) = cluster.iter().chain(kept).find(|&&i| i >= n) {
        return Err(Error::UnknownNode(i));
    }
    if let Some(&i) = kept.iter().find(|i| !cluster.contains(i)) {
        return Err(Error::Config(format!("kept node {} is outside the cluster", ids.id(i))));
    }
    let evaluated: Vec<usize> = cluster.iter().copied().filter(|i| !kept.contains(i)).collect();
    if evaluated.is_empty() {
        return Err(Error::Config("no masked nodes to evaluate".into()));
    }
    let truth: Vec<f64> = cluster
        .iter()
        .map(|&i| ds.label(i).ok_or_else(|| Error::Config(format!("node {} has no label", ids.id(i)))))
        .collect::<Result<_>>()?;

    let mut labels = ds.labels().to_vec();
    for &i in &evaluated {
        labels[i] = None;
    }
    let masked = ds.with_labels(labels)?;
    let mut solver = SolverConfig::new(cfg.lambda);
    solver.max_iter = cfg.iterations;
    solver.rel_tol = 0.0;
    solver.log_every = cfg.iterations.max(1);
    let res = solve(&masked, &solver)?;

    let xs: Vec<&[f64]> = cluster.iter().map(|&i| ds.feature(i)).collect();
    let lad = fit_lad(&xs, &truth, cfg.baseline_iterations)?;

    let mut err_nl = 0.0;
    let mut err_bl = 0.0;
    let mut energy = 0.0;
    for &i in &evaluated {
        let y = ds.label(i).expect("checked above");
        let nl = predict(&res.weights, ds, i)?;
        let bl: f64 = ds.feature(i).iter().zip(&lad.weights).map(|(a, b)| a * b).sum();
        err_nl += (y - nl) * (y - nl);
        err_bl += (y - bl) * (y - bl);
        energy += y * y;
    }
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let nlasso_error = err_nl / energy;
    let baseline_error = err_bl / energy;
    Ok(WeatherReport {
        cluster: cluster.iter().map(|&i| ids.id(i)).collect(),
        kept: kept.iter().map(|&i| ids.id(i)).collect(),
        evaluated: evaluated.iter().map(|&i| ids.id(i)).collect(),
        nlasso_error,
        baseline_error,
        ratio: nlasso_error / baseline_error,
        lambda: cfg.lambda,
        iterations: res.iterations_run,
        baseline_weights: lad.weights,
    })
}
