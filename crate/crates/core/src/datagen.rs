//! Synthetic instances: the two-cluster benchmark, k-nearest-neighbor
//! graphs and a weather-station stand-in.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{EmpiricalGraph, NodeSignal};
use crate::model::{generate_labels, piecewise_signal, NetworkDataset, NoiseKind, NoiseSpec, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoClusterSpec {
    /// Total node count, split evenly between the clusters.
    pub n: usize,
    /// Expected intra-cluster degree.
    pub avg_degree: f64,
    /// Number of edges joining the clusters.
    pub inter_edges: usize,
    pub labels_per_cluster: usize,
    pub seed: u64,
    /// Cluster weights are `+separation * 1` and `-separation * 1`.
    pub separation: f64,
    pub noise: NoiseKind,
}

impl TwoClusterSpec {
    pub fn new(n: usize, avg_degree: f64, inter_edges: usize, labels_per_cluster: usize, seed: u64) -> Self {
        TwoClusterSpec {
            n,
            avg_degree,
            inter_edges,
            labels_per_cluster,
            seed,
            separation: 1.0,
            noise: NoiseKind::None,
        }
    }

    fn validate(&self) -> Result<()> {
        let half = self.n / 2;
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::Config(format!("n must be even and at least 4, got {}", self.n)));
        }
        if !(self.avg_degree >= 0.0) || self.avg_degree >= half as f64 {
            return Err(Error::Config(format!(
                "average degree {} must lie in [0, n/2)",
                self.avg_degree
            )));
        }
        if self.inter_edges > half * half {
            return Err(Error::Config(format!(
                "{} crossing edges requested but only {} node pairs cross",
                self.inter_edges,
                half * half
            )));
        }
        if self.labels_per_cluster > half {
            return Err(Error::Config(format!(
                "{} labels per cluster exceeds cluster size {half}",
                self.labels_per_cluster
            )));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::Config("separation must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TwoClusterInstance {
    /// Labels present only on the sampled training nodes.
    pub dataset: NetworkDataset,
    pub partition: Partition,
    pub truth: NodeSignal,
    /// Labels of every node, before masking.
    pub all_labels: Vec<f64>,
}

/// A point drawn uniformly from the unit sphere in `R^p`.
pub fn unit_sphere_point<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Two Erdős–Rényi clusters of size `n/2` joined by `inter_edges` random
/// crossing edges, unit weights, unit-sphere features and a
/// piecewise-constant truth.
pub fn two_cluster_instance(spec: &TwoClusterSpec, p: usize) -> Result<TwoClusterInstance> {
    spec.validate()?;
    if p == 0 {
        return Err(Error::Config("feature dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.n / 2;
    let prob = if half > 1 {
        spec.avg_degree / (half - 1) as f64
    } else {
        0.0
    };

    let mut edges = Vec::new();
    for offset in [0, half] {
        for a in 0..half {
            for b in a + 1..half {
                if rng.random::<f64>() < prob {
                    edges.push((offset + a, offset + b, 1.0));
                }
            }
        }
    }
    for pair in sample(&mut rng, half * half, spec.inter_edges) {
        edges.push((pair / half, half + pair % half, 1.0));
    }
    let graph = EmpiricalGraph::new(spec.n, edges)?;

    let mut feats = Vec::with_capacity(spec.n * p);
    for _ in 0..spec.n {
        feats.extend(unit_sphere_point(&mut rng, p));
    }
    let features = NodeSignal::from_flat(p, feats)?;

    let partition = Partition::new(spec.n, vec![(0..half).collect(), (half..spec.n).collect()])?;
    let truth = piecewise_signal(
        &partition,
        &[vec![spec.separation; p], vec![-spec.separation; p]],
    )?;
    let noise = NoiseSpec {
        kind: spec.noise,
        seed: rng.random(),
    };
    let all_labels = generate_labels(&truth, &features, &noise)?;

    let mut labels = vec![None; spec.n];
    for offset in [0, half] {
        for k in sample(&mut rng, half, spec.labels_per_cluster) {
            labels[offset + k] = Some(all_labels[offset + k]);
        }
    }
    let dataset = NetworkDataset::new(graph, features, labels)?;
    Ok(TwoClusterInstance {
        dataset,
        partition,
        truth,
        all_labels,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `count` points nearest to `coords[center]` (including it), nearest
/// first, ties broken by index.
pub fn nearest_points(coords: &[Vec<f64>], center: usize, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| {
        sq_dist(&coords[a], &coords[center])
            .total_cmp(&sq_dist(&coords[b], &coords[center]))
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Unit-weight graph joining every point to its `k` nearest neighbors
/// (symmetrized by union).
pub fn knn_graph(coords: &[Vec<f64>], k: usize) -> Result<EmpiricalGraph> {
    let n = coords.len();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("k = {k} must lie in 1..{n}")));
    }
    let d = coords[0].len();
    if let Some(c) = coords.iter().find(|c| c.len() != d) {
        return Err(Error::dim("coordinate dimension", d, c.len()));
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("coordinates must be finite".into()));
    }
    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&a, &b| {
        coords[a]
            .iter()
            .zip(&coords[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some(w) = sorted.windows(2).find(|w| coords[w[0]] == coords[w[1]]) {
        return Err(Error::Config(format!(
            "points {} and {} have identical coordinates",
            w[0].min(w[1]),
            w[0].max(w[1])
        )));
    }

    let mut pairs = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(&coords[i], &coords[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &others[..k] {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    EmpiricalGraph::new(n, pairs.into_iter().map(|(a, b)| (a, b, 1.0)))
}

/// Neighbors per station in [`synthetic_weather`].
pub const WEATHER_NEIGHBORS: usize = 3;

#[derive(Debug, Clone)]
pub struct WeatherData {
    /// Every station labeled; features are the three previous daily means.
    pub dataset: NetworkDataset,
    pub coords: Vec<Vec<f64>>,
    /// 0 for the southern regime, 1 for the northern one.
    pub region: Vec<usize>,
}

// autoregressive coefficients (lag 1, 2, 3) per regime
const REGIME_AR: [[f64; 3]; 2] = [[0.55, 0.25, 0.12], [0.7, 0.15, 0.1]];
// climatology: SOUTH_MEAN at the southern edge, cooling by LAT_GRADIENT per
// unit of northing
const SOUTH_MEAN: f64 = 2.0;
const LAT_GRADIENT: f64 = 0.8;
const BURN_IN: usize = 40;
// daily anomaly innovation: regional term + Gaussian bumps
const REGIONAL_SD: f64 = 1.0;
const BUMPS: usize = 6;
const BUMP_SD: f64 = 1.5;
const BUMP_WIDTH: f64 = 2.5;
// independent measurement noise, not fed back into the series
const LOCAL_SD: f64 = 0.25;

/// Stations on a 10 x 10 field with a southern and a northern temperature
/// regime. A station reads its climatology plus an AR(3) anomaly plus
/// measurement noise. The anomaly is driven by a spatially smooth daily
/// innovation: one shock shared by all stations and a sum of randomly placed
/// Gaussian bumps.
pub fn synthetic_weather(n_stations: usize, days: usize, seed: u64) -> Result<WeatherData> {
    if days < 4 {
        return Err(Error::Config(format!("need at least 4 days, got {days}")));
    }
    if n_stations <= WEATHER_NEIGHBORS {
        return Err(Error::Config(format!(
            "need more than {WEATHER_NEIGHBORS} stations, got {n_stations}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec<f64>> = (0..n_stations)
        .map(|_| vec![10.0 * rng.random::<f64>(), 10.0 * rng.random::<f64>()])
        .collect();
    let region: Vec<usize> = coords.iter().map(|c| usize::from(c[1] >= 5.0)).collect();

    let total = BURN_IN + days;
    let regional = Normal::new(0.0, REGIONAL_SD).expect("valid sigma");
    let bump = Normal::new(0.0, BUMP_SD).expect("valid sigma");
    let local = Normal::new(0.0, LOCAL_SD).expect("valid sigma");
    let centers: Vec<[f64; 2]> = (0..BUMPS)
        .map(|_| [10.0 * rng.random::<f64>(), 10.0 * rng.random::<f64>()])
        .collect();
    let regional_shock: Vec<f64> = (0..total).map(|_| regional.sample(&mut rng)).collect();
    let amplitudes: Vec<Vec<f64>> = (0..total)
        .map(|_| (0..BUMPS).map(|_| bump.sample(&mut rng)).collect())
        .collect();
    let profile: Vec<Vec<f64>> = coords
        .iter()
        .map(|c| {
            centers
                .iter()
                .map(|m| {
                    let d2 = (c[0] - m[0]).powi(2) + (c[1] - m[1]).powi(2);
                    (-d2 / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp()
                })
                .collect()
        })
        .collect();

    let mut feats = Vec::with_capacity(n_stations * 3);
    let mut labels = Vec::with_capacity(n_stations);
    for (s, &r) in region.iter().enumerate() {
        let phi = REGIME_AR[r];
        let clim = SOUTH_MEAN - LAT_GRADIENT * coords[s][1];
        let mut anomaly = vec![0.0; 3];
        for t in 3..total {
            let field: f64 = amplitudes[t].iter().zip(&profile[s]).map(|(a, b)| a * b).sum();
            let next = phi[0] * anomaly[t - 1]
                + phi[1] * anomaly[t - 2]
                + phi[2] * anomaly[t - 3]
                + regional_shock[t]
                + field;
            anomaly.push(next);
        }
        let last = total - 1;
        let mut observe = |t: usize| clim + anomaly[t] + local.sample(&mut rng);
        feats.extend([observe(last - 1), observe(last - 2), observe(last - 3)]);
        labels.push(Some(observe(last)));
    }

    let graph = knn_graph(&coords, WEATHER_NEIGHBORS)?;
    let features = NodeSignal::from_flat(3, feats)?;
    let dataset = NetworkDataset::new(graph, features, labels)?;
    Ok(WeatherData {
        dataset,
        coords,
        region,
    })
}
