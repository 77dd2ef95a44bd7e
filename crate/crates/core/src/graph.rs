//! Weighted undirected graphs, graph signals and the block incidence operator.
//!
//! Every edge `{i, j}` is stored once with `i < j`, and the edge list is kept
//! sorted by `(i, j)`. The position of an edge in that list is its canonical
//! id; it fixes the block order of [`EdgeSignal`] and of the incidence
//! operator `D`, whose block `e` maps a node signal `w` to
//! `A_ij * (w_i - w_j)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraph {
    n: usize,
    edges: Vec<Edge>,
    degree: Vec<f64>,
}

impl EmpiricalGraph {
    /// Builds a graph from undirected `(i, j, weight)` triples. Endpoint order
    /// within a triple does not matter.
    pub fn new(n: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b, weight) in triples {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) has non-positive or non-finite weight {weight}"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge { i, j, weight });
        }
        edges.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
        if let Some(w) = edges.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].i, w[0].j
            )));
        }
        let mut degree = vec![0.0; n];
        for e in &edges {
            degree[e.i] += e.weight;
            degree[e.j] += e.weight;
        }
        Ok(EmpiricalGraph { n, edges, degree })
    }

    pub fn empty(n: usize) -> Self {
        EmpiricalGraph {
            n,
            edges: Vec::new(),
            degree: vec![0.0; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Option<&Edge> {
        self.edges.get(id)
    }

    /// Weighted degree `d_i = sum_j A_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Canonical id of edge `{a, b}`, if present.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search_by(|e| (e.i, e.j).cmp(&key)).ok()
    }

    /// Adjacency lists `(neighbor, edge id)` for every node.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (id, e) in self.edges.iter().enumerate() {
            adj[e.i].push((e.j, id));
            adj[e.j].push((e.i, id));
        }
        adj
    }

    fn check_nodes(&self, w: &NodeSignal) -> Result<()> {
        if w.len() != self.n {
            return Err(Error::dim("node signal blocks", self.n, w.len()));
        }
        Ok(())
    }

    fn check_edges(&self, u: &EdgeSignal) -> Result<()> {
        if u.len() != self.edges.len() {
            return Err(Error::dim("edge signal blocks", self.edges.len(), u.len()));
        }
        Ok(())
    }

    /// `D w`: block `e = {i, j}` (with `i < j`) is `A_ij (w_i - w_j)`.
    pub fn apply_incidence(&self, w: &NodeSignal) -> Result<EdgeSignal> {
        self.check_nodes(w)?;
        let p = w.dim();
        let mut out = EdgeSignal::zeros(self.edges.len(), p);
        for (id, e) in self.edges.iter().enumerate() {
            let (wi, wj) = (w.block(e.i), w.block(e.j));
            for ((o, a), b) in out.block_mut(id).iter_mut().zip(wi).zip(wj) {
                *o = e.weight * (a - b);
            }
        }
        Ok(out)
    }

    /// `D^T u`: node `i` collects `+A_e u_e` from edges where it is the
    /// smaller endpoint and `-A_e u_e` where it is the larger one.
    pub fn apply_incidence_adjoint(&self, u: &EdgeSignal) -> Result<NodeSignal> {
        self.check_edges(u)?;
        let p = u.dim();
        let mut out = NodeSignal::zeros(self.n, p);
        for (id, e) in self.edges.iter().enumerate() {
            let ue = u.block(id);
            for (o, v) in out.block_mut(e.i).iter_mut().zip(ue) {
                *o += e.weight * v;
            }
            for (o, v) in out.block_mut(e.j).iter_mut().zip(ue) {
                *o -= e.weight * v;
            }
        }
        Ok(out)
    }

    /// Total variation `sum_{ {i,j} in E } A_ij ||w_j - w_i||`.
    pub fn total_variation(&self, w: &NodeSignal) -> Result<f64> {
        self.check_nodes(w)?;
        Ok(self
            .edges
            .iter()
            .map(|e| e.weight * diff_norm(w.block(e.i), w.block(e.j)))
            .sum())
    }

    /// Total variation restricted to the edges listed in `subset`. Repeated
    /// ids are counted once.
    pub fn tv_on_edge_subset(&self, w: &NodeSignal, subset: &[usize]) -> Result<f64> {
        self.check_nodes(w)?;
        let mut seen = vec![false; self.edges.len()];
        for &id in subset {
            match seen.get_mut(id) {
                Some(s) => *s = true,
                None => return Err(Error::UnknownEdge(id)),
            }
        }
        Ok(self
            .edges
            .iter()
            .zip(&seen)
            .filter(|(_, &s)| s)
            .map(|(e, _)| e.weight * diff_norm(w.block(e.i), w.block(e.j)))
            .sum())
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Row-major storage of `count` blocks of length `dim`.
#[derive(Debug, Clone, PartialEq)]
struct Blocks {
    dim: usize,
    values: Vec<f64>,
}

impl Blocks {
    fn zeros(count: usize, dim: usize) -> Self {
        Blocks {
            dim,
            values: vec![0.0; count * dim],
        }
    }

    fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::dim("block length", dim, row.len()));
            }
            values.extend_from_slice(row);
        }
        Ok(Blocks { dim, values })
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }
}

macro_rules! block_signal {
    ($name:ident) => {
        impl $name {
            pub fn zeros(count: usize, dim: usize) -> Self {
                $name(Blocks::zeros(count, dim))
            }

            pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
                Blocks::from_rows(dim, rows).map($name)
            }

            /// Wraps a flat buffer of `values.len() / dim` blocks.
            pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
                if dim == 0 || values.len() % dim != 0 {
                    return Err(Error::dim("flat buffer length", dim, values.len()));
                }
                Ok($name(Blocks { dim, values }))
            }

            /// Number of blocks.
            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.values.is_empty()
            }

            /// Block length `p`.
            pub fn dim(&self) -> usize {
                self.0.dim
            }

            pub fn block(&self, k: usize) -> &[f64] {
                let p = self.0.dim;
                &self.0.values[k * p..(k + 1) * p]
            }

            pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
                let p = self.0.dim;
                &mut self.0.values[k * p..(k + 1) * p]
            }

            pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
                self.0.values.chunks_exact(self.0.dim.max(1))
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0.values
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0.values
            }

            pub fn to_rows(&self) -> Vec<Vec<f64>> {
                self.blocks().map(<[f64]>::to_vec).collect()
            }

            /// Euclidean inner product of the stacked vectors.
            pub fn dot(&self, other: &Self) -> f64 {
                self.0
                    .values
                    .iter()
                    .zip(&other.0.values)
                    .map(|(a, b)| a * b)
                    .sum()
            }

            /// Euclidean norm of the stacked vector.
            pub fn norm(&self) -> f64 {
                self.dot(self).sqrt()
            }

            pub fn is_finite(&self) -> bool {
                self.0.values.iter().all(|v| v.is_finite())
            }

            pub fn scaled(&self, c: f64) -> Self {
                let mut out = self.clone();
                out.0.values.iter_mut().for_each(|v| *v *= c);
                out
            }
        }
    };
}

/// One length-`p` vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignal(Blocks);

/// One length-`p` vector per edge, indexed by canonical edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSignal(Blocks);

block_signal!(NodeSignal);
block_signal!(EdgeSignal);

impl NodeSignal {
    /// The same vector on every node.
    pub fn constant(n: usize, value: &[f64]) -> Self {
        let mut values = Vec::with_capacity(n * value.len());
        for _ in 0..n {
            values.extend_from_slice(value);
        }
        NodeSignal(Blocks {
            dim: value.len(),
            values,
        })
    }
}
