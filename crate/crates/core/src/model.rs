//! Localized linear model on a graph: datasets, partitions, label
//! generation and error measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{EmpiricalGraph, NodeSignal};

/// A graph with one feature vector per node and labels on a subset of nodes.
/// The training set is exactly the set of nodes whose label is present.
#[derive(Debug, Clone)]
pub struct NetworkDataset {
    graph: EmpiricalGraph,
    features: NodeSignal,
    labels: Vec<Option<f64>>,
    training_set: Vec<usize>,
}

impl NetworkDataset {
    pub fn new(graph: EmpiricalGraph, features: NodeSignal, labels: Vec<Option<f64>>) -> Result<Self> {
        let n = graph.node_count();
        if features.len() != n {
            return Err(Error::dim("feature vectors", n, features.len()));
        }
        if labels.len() != n {
            return Err(Error::dim("labels", n, labels.len()));
        }
        if !features.is_finite() {
            return Err(Error::Config("features contain non-finite values".into()));
        }
        let mut training_set = Vec::new();
        for (i, y) in labels.iter().enumerate() {
            if let Some(y) = y {
                if !y.is_finite() {
                    return Err(Error::Config(format!("label of node {i} is not finite")));
                }
                if features.block(i).iter().all(|&v| v == 0.0) {
                    return Err(Error::ZeroFeature(i));
                }
                let sq: f64 = features.block(i).iter().map(|v| v * v).sum();
                if !(sq > 0.0 && sq.is_finite()) {
                    return Err(Error::FeatureScale(i));
                }
                training_set.push(i);
            }
        }
        Ok(NetworkDataset {
            graph,
            features,
            labels,
            training_set,
        })
    }

    /// Same graph and features with a different label vector.
    pub fn with_labels(&self, labels: Vec<Option<f64>>) -> Result<Self> {
        NetworkDataset::new(self.graph.clone(), self.features.clone(), labels)
    }

    pub fn graph(&self) -> &EmpiricalGraph {
        &self.graph
    }

    pub fn features(&self) -> &NodeSignal {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        self.features.block(i)
    }

    pub fn labels(&self) -> &[Option<f64>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<f64> {
        self.labels[i]
    }

    /// Nodes with a label, in increasing order.
    pub fn training_set(&self) -> &[usize] {
        &self.training_set
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

/// Disjoint clusters covering all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidPartition("no clusters".into()));
        }
        let mut assignment = vec![usize::MAX; n];
        for (l, cluster) in clusters.iter().enumerate() {
            if cluster.is_empty() {
                return Err(Error::InvalidPartition(format!("cluster {l} is empty")));
            }
            for &i in cluster {
                let slot = assignment
                    .get_mut(i)
                    .ok_or_else(|| Error::InvalidPartition(format!("node {i} out of range")))?;
                if *slot != usize::MAX {
                    return Err(Error::InvalidPartition(format!("node {i} appears in two clusters")));
                }
                *slot = l;
            }
        }
        if let Some(i) = assignment.iter().position(|&a| a == usize::MAX) {
            return Err(Error::InvalidPartition(format!("node {i} is not covered")));
        }
        let clusters = clusters
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        Ok(Partition { clusters, assignment })
    }

    /// Builds a partition from a cluster label per node. Distinct labels are
    /// numbered in increasing order.
    pub fn from_assignment(labels: &[u64]) -> Result<Self> {
        let mut distinct: Vec<u64> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let mut clusters = vec![Vec::new(); distinct.len()];
        for (i, label) in labels.iter().enumerate() {
            let l = distinct.binary_search(label).expect("label present");
            clusters[l].push(i);
        }
        Partition::new(labels.len(), clusters)
    }

    pub fn single(n: usize) -> Self {
        Partition {
            clusters: vec![(0..n).collect()],
            assignment: vec![0; n],
        }
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    Gaussian { sigma: f64 },
    /// A random `fraction` of nodes receives `±magnitude`.
    SparseSpikes { fraction: f64, magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::None => Ok(()),
            NoiseKind::Gaussian { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            NoiseKind::SparseSpikes { fraction, magnitude }
                if (0.0..=1.0).contains(&fraction) && magnitude.is_finite() =>
            {
                Ok(())
            }
            _ => Err(Error::Config(format!("invalid noise spec {:?}", self.kind))),
        }
    }

    /// One noise sample per node.
    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(match self.kind {
            NoiseKind::None => vec![0.0; n],
            NoiseKind::Gaussian { sigma } => {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
            NoiseKind::SparseSpikes { fraction, magnitude } => (0..n)
                .map(|_| {
                    if rng.random::<f64>() < fraction {
                        if rng.random::<bool>() {
                            magnitude
                        } else {
                            -magnitude
                        }
                    } else {
                        0.0
                    }
                })
                .collect(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Predicted label `w_i^T x_i`.
pub fn predict(w: &NodeSignal, ds: &NetworkDataset, i: usize) -> Result<f64> {
    if i >= ds.node_count() || i >= w.len() {
        return Err(Error::UnknownNode(i));
    }
    if w.dim() != ds.dim() {
        return Err(Error::dim("weight dimension", ds.dim(), w.dim()));
    }
    Ok(dot(w.block(i), ds.feature(i)))
}

/// Sum of absolute residuals over the training set.
pub fn training_error(w: &NodeSignal, ds: &NetworkDataset) -> Result<f64> {
    if ds.training_set().is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if w.len() != ds.node_count() {
        return Err(Error::dim("node signal blocks", ds.node_count(), w.len()));
    }
    if w.dim() != ds.dim() {
        return Err(Error::dim("weight dimension", ds.dim(), w.dim()));
    }
    Ok(ds
        .training_set()
        .iter()
        .map(|&i| {
            let y = ds.label(i).expect("training node has a label");
            (y - dot(w.block(i), ds.feature(i))).abs()
        })
        .sum())
}

/// Signal equal to `values[l]` on every node of cluster `l`.
pub fn piecewise_signal(part: &Partition, values: &[Vec<f64>]) -> Result<NodeSignal> {
    if values.len() != part.cluster_count() {
        return Err(Error::dim("cluster vectors", part.cluster_count(), values.len()));
    }
    let p = values[0].len();
    if let Some(v) = values.iter().find(|v| v.len() != p) {
        return Err(Error::dim("cluster vector length", p, v.len()));
    }
    let mut w = NodeSignal::zeros(part.node_count(), p);
    for (i, &l) in part.assignment().iter().enumerate() {
        w.block_mut(i).copy_from_slice(&values[l]);
    }
    Ok(w)
}

/// Labels `y_i = truth_i^T x_i + noise_i` for every node.
pub fn generate_labels(truth: &NodeSignal, features: &NodeSignal, noise: &NoiseSpec) -> Result<Vec<f64>> {
    if truth.len() != features.len() {
        return Err(Error::dim("node count", features.len(), truth.len()));
    }
    if truth.dim() != features.dim() {
        return Err(Error::dim("weight dimension", features.dim(), truth.dim()));
    }
    let eps = noise.sample(truth.len())?;
    Ok(truth
        .blocks()
        .zip(features.blocks())
        .zip(eps)
        .map(|((w, x), e)| dot(w, x) + e)
        .collect())
}

/// `||truth - estimate||^2 / ||truth||^2` over the stacked vectors.
pub fn nmse(truth: &NodeSignal, estimate: &NodeSignal) -> Result<f64> {
    if truth.len() != estimate.len() || truth.dim() != estimate.dim() {
        return Err(Error::dim(
            "signal size",
            truth.as_slice().len(),
            estimate.as_slice().len(),
        ));
    }
    let denom = truth.dot(truth);
    if denom == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let num: f64 = truth
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / denom)
}

/// Upper bound `K (1 + 4 sqrt(p) / (L - sqrt(p))) * noise_l1` on the TV
/// estimation error, valid when `L > sqrt(p)`.
pub fn theorem2_bound(k: f64, l: f64, p: usize, noise_l1: f64) -> Result<f64> {
    let sqrt_p = (p as f64).sqrt();
    if !(k > 0.0) {
        return Err(Error::Config(format!("K must be positive, got {k}")));
    }
    if !(noise_l1 >= 0.0) {
        return Err(Error::Config(format!("noise l1 norm must be nonnegative, got {noise_l1}")));
    }
    if !(l > sqrt_p) {
        return Err(Error::BoundUndefined { l, sqrt_p });
    }
    Ok(k * (1.0 + 4.0 * sqrt_p / (l - sqrt_p)) * noise_l1)
}
