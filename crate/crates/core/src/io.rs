//! CSV and JSON file formats.
//!
//! | file       | header / shape                                   |
//! |------------|--------------------------------------------------|
//! | graph      | `i,j,weight`                                     |
//! | dataset    | `node,x1,...,xp,y` (empty `y` means unlabeled)   |
//! | partition  | `node,cluster_id`                                |
//! | coords     | `node,c1,...,cd`                                 |
//! | truth      | JSON `{ p, nodes, weights }`                     |
//! | result     | JSON [`SolveOutput`]                             |
//! | log        | `iter,objective,primal_change,dual_max_norm`     |
//! | sweep      | [`SweepRow`] columns                             |
//!
//! Node ids in files are arbitrary non-negative integers. Internally nodes
//! are numbered `0..n` in increasing id order; [`IdTable`] keeps the mapping.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::SweepPoint;
use crate::graph::{EmpiricalGraph, NodeSignal};
use crate::model::{NetworkDataset, Partition};
use crate::solver::{IterationRecord, SolverConfig, SolverResult};

/// Sorted external node ids; position is the internal index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdTable {
    ids: Vec<u64>,
}

impl IdTable {
    pub fn new(ids: impl IntoIterator<Item = u64>) -> Self {
        let mut ids: Vec<u64> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        IdTable { ids }
    }

    /// Ids `0..n`.
    pub fn identity(n: usize) -> Self {
        IdTable {
            ids: (0..n as u64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

struct CsvRows {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_csv(path: &Path) -> Result<CsvRows> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(CsvRows {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

impl CsvRows {
    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(parse_err(
                &self.path,
                1,
                format!("expected header {:?}, found {:?}", expected.join(","), self.header.join(",")),
            ));
        }
        Ok(())
    }

    fn field<T: std::str::FromStr>(&self, line: u64, value: &str, name: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| parse_err(&self.path, line, format!("invalid {name} {value:?}")))
    }

    fn check_width(&self, line: u64, row: &[String]) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(parse_err(
                &self.path,
                line,
                format!("expected {} fields, found {}", self.header.len(), row.len()),
            ));
        }
        Ok(())
    }
}

/// One row of a graph file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEdge {
    pub a: u64,
    pub b: u64,
    pub weight: f64,
    pub line: u64,
}

/// Reads `i,j,weight`, rejecting self-loops, non-positive weights and
/// repeated node pairs.
pub fn read_edges(path: &Path) -> Result<Vec<RawEdge>> {
    let csv = read_csv(path)?;
    csv.expect_header(&["i", "j", "weight"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(csv.rows.len());
    for (line, row) in &csv.rows {
        csv.check_width(*line, row)?;
        let a: u64 = csv.field(*line, &row[0], "node id")?;
        let b: u64 = csv.field(*line, &row[1], "node id")?;
        let weight: f64 = csv.field(*line, &row[2], "weight")?;
        if a == b {
            return Err(parse_err(path, *line, format!("self-loop on node {a}")));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(parse_err(path, *line, format!("weight must be positive, got {weight}")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(parse_err(path, *line, format!("duplicate edge {{{a}, {b}}}")));
        }
        out.push(RawEdge {
            a,
            b,
            weight,
            line: *line,
        });
    }
    Ok(out)
}

/// Builds the graph over the nodes of `ids`. Edges naming unknown nodes are
/// reported against their line in `path`.
pub fn graph_from_edges(path: &Path, edges: &[RawEdge], ids: &IdTable) -> Result<EmpiricalGraph> {
    let mut triples = Vec::with_capacity(edges.len());
    for e in edges {
        let a = ids
            .index(e.a)
            .ok_or_else(|| parse_err(path, e.line, format!("unknown node {}", e.a)))?;
        let b = ids
            .index(e.b)
            .ok_or_else(|| parse_err(path, e.line, format!("unknown node {}", e.b)))?;
        triples.push((a, b, e.weight));
    }
    EmpiricalGraph::new(ids.len(), triples)
}

/// Reads a graph whose node set is its edge endpoints plus `extra_ids`.
pub fn read_graph(path: &Path, extra_ids: &[u64]) -> Result<(EmpiricalGraph, IdTable)> {
    let edges = read_edges(path)?;
    let ids = IdTable::new(
        edges
            .iter()
            .flat_map(|e| [e.a, e.b])
            .chain(extra_ids.iter().copied()),
    );
    let g = graph_from_edges(path, &edges, &ids)?;
    Ok((g, ids))
}

pub fn write_graph(path: &Path, g: &EmpiricalGraph, ids: &IdTable) -> Result<()> {
    let mut out = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(out, "i,j,weight")?;
        for e in g.edges() {
            writeln!(out, "{},{},{}", ids.id(e.i), ids.id(e.j), e.weight)?;
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

/// Rows of a dataset file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub ids: Vec<u64>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Option<f64>>,
    pub dim: usize,
}

pub fn read_dataset_rows(path: &Path) -> Result<RawDataset> {
    let csv = read_csv(path)?;
    let h = &csv.header;
    let p = h.len().saturating_sub(2);
    let header_ok = h.len() >= 3
        && h[0] == "node"
        && h[h.len() - 1] == "y"
        && (1..=p).all(|r| h[r] == format!("x{r}"));
    if !header_ok {
        return Err(parse_err(
            path,
            1,
            format!("expected header node,x1,...,xp,y, found {:?}", h.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut raw = RawDataset {
        ids: Vec::new(),
        features: Vec::new(),
        labels: Vec::new(),
        dim: p,
    };
    for (line, row) in &csv.rows {
        csv.check_width(*line, row)?;
        let id: u64 = csv.field(*line, &row[0], "node id")?;
        if !seen.insert(id) {
            return Err(parse_err(path, *line, format!("duplicate node {id}")));
        }
        let x = row[1..=p]
            .iter()
            .map(|v| csv.field::<f64>(*line, v, "feature"))
            .collect::<Result<Vec<_>>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, *line, "non-finite feature"));
        }
        let y = match row[p + 1].as_str() {
            "" => None,
            v => {
                let y: f64 = csv.field(*line, v, "label")?;
                if !y.is_finite() {
                    return Err(parse_err(path, *line, "non-finite label"));
                }
                Some(y)
            }
        };
        raw.ids.push(id);
        raw.features.push(x);
        raw.labels.push(y);
    }
    Ok(raw)
}

/// Reads a dataset file and its graph. The dataset rows define the node set.
pub fn read_network(graph_path: &Path, dataset_path: &Path) -> Result<(NetworkDataset, IdTable)> {
    let raw = read_dataset_rows(dataset_path)?;
    let ids = IdTable::new(raw.ids.iter().copied());
    let mut rows = vec![Vec::new(); ids.len()];
    let mut labels = vec![None; ids.len()];
    for ((id, x), y) in raw.ids.iter().zip(raw.features).zip(raw.labels) {
        let i = ids.index(*id).expect("id in table");
        rows[i] = x;
        labels[i] = y;
    }
    let features = NodeSignal::from_rows(raw.dim, &rows)?;
    let edges = read_edges(graph_path)?;
    let g = graph_from_edges(graph_path, &edges, &ids)?;
    let ds = NetworkDataset::new(g, features, labels)?;
    Ok((ds, ids))
}

pub fn write_dataset(path: &Path, ds: &NetworkDataset, ids: &IdTable) -> Result<()> {
    let mut out = create(path)?;
    let res = (|| -> std::io::Result<()> {
        let cols: Vec<String> = (1..=ds.dim()).map(|r| format!("x{r}")).collect();
        writeln!(out, "node,{},y", cols.join(","))?;
        for i in 0..ds.node_count() {
            let x: Vec<String> = ds.feature(i).iter().map(|v| v.to_string()).collect();
            let y = ds.label(i).map_or(String::new(), |y| y.to_string());
            writeln!(out, "{},{},{}", ids.id(i), x.join(","), y)?;
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

/// Raw `(node, cluster)` pairs in file order.
pub fn read_partition_rows(path: &Path) -> Result<Vec<(u64, u64, u64)>> {
    let csv = read_csv(path)?;
    csv.expect_header(&["node", "cluster_id"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, row) in &csv.rows {
        csv.check_width(*line, row)?;
        let node: u64 = csv.field(*line, &row[0], "node id")?;
        let cluster: u64 = csv.field(*line, &row[1], "cluster id")?;
        if !seen.insert(node) {
            return Err(parse_err(path, *line, format!("node {node} assigned twice")));
        }
        out.push((node, cluster, *line));
    }
    Ok(out)
}

/// Partition over the nodes of `ids`; every node must be assigned.
pub fn partition_from_rows(path: &Path, rows: &[(u64, u64, u64)], ids: &IdTable) -> Result<Partition> {
    let mut assignment = vec![None; ids.len()];
    for &(node, cluster, line) in rows {
        let i = ids
            .index(node)
            .ok_or_else(|| parse_err(path, line, format!("unknown node {node}")))?;
        assignment[i] = Some(cluster);
    }
    if let Some(i) = assignment.iter().position(Option::is_none) {
        return Err(Error::InvalidPartition(format!(
            "node {} has no cluster in {}",
            ids.id(i),
            path.display()
        )));
    }
    let labels: Vec<u64> = assignment.into_iter().map(Option::unwrap).collect();
    Partition::from_assignment(&labels)
}

pub fn write_partition(path: &Path, part: &Partition, ids: &IdTable) -> Result<()> {
    let mut out = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(out, "node,cluster_id")?;
        for (i, l) in part.assignment().iter().enumerate() {
            writeln!(out, "{},{}", ids.id(i), l)?;
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

/// Point coordinates keyed by node id, in increasing id order.
pub fn read_coords(path: &Path) -> Result<(Vec<Vec<f64>>, IdTable)> {
    let csv = read_csv(path)?;
    let h = &csv.header;
    let d = h.len().saturating_sub(1);
    if h.len() < 2 || h[0] != "node" || !(1..=d).all(|r| h[r] == format!("c{r}")) {
        return Err(parse_err(path, 1, format!("expected header node,c1,...,cd, found {:?}", h.join(","))));
    }
    let mut rows = Vec::new();
    for (line, row) in &csv.rows {
        csv.check_width(*line, row)?;
        let id: u64 = csv.field(*line, &row[0], "node id")?;
        let c = row[1..]
            .iter()
            .map(|v| csv.field::<f64>(*line, v, "coordinate"))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, c, *line));
    }
    let ids = IdTable::new(rows.iter().map(|r| r.0));
    if ids.len() != rows.len() {
        let mut seen = HashSet::new();
        let dup = rows.iter().find(|r| !seen.insert(r.0)).expect("duplicate exists");
        return Err(parse_err(path, dup.2, format!("duplicate node {}", dup.0)));
    }
    let mut coords = vec![Vec::new(); ids.len()];
    for (id, c, _) in rows {
        coords[ids.index(id).expect("id in table")] = c;
    }
    Ok((coords, ids))
}

pub fn write_coords(path: &Path, coords: &[Vec<f64>], ids: &IdTable) -> Result<()> {
    let mut out = create(path)?;
    let d = coords.first().map_or(0, Vec::len);
    let res = (|| -> std::io::Result<()> {
        let cols: Vec<String> = (1..=d).map(|r| format!("c{r}")).collect();
        writeln!(out, "node,{}", cols.join(","))?;
        for (i, c) in coords.iter().enumerate() {
            let c: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", ids.id(i), c.join(","))?;
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFile {
    pub p: usize,
    pub nodes: Vec<u64>,
    pub weights: Vec<Vec<f64>>,
}

impl SignalFile {
    pub fn from_signal(w: &NodeSignal, ids: &IdTable) -> Self {
        SignalFile {
            p: w.dim(),
            nodes: ids.ids().to_vec(),
            weights: w.to_rows(),
        }
    }

    /// Reorders the stored blocks to the internal order of `ids`.
    pub fn to_signal(&self, ids: &IdTable) -> Result<NodeSignal> {
        if self.nodes.len() != ids.len() || self.weights.len() != ids.len() {
            return Err(Error::dim("signal nodes", ids.len(), self.nodes.len()));
        }
        let mut rows = vec![Vec::new(); ids.len()];
        for (id, w) in self.nodes.iter().zip(&self.weights) {
            let i = ids.index(*id).ok_or_else(|| Error::Config(format!("unknown node {id} in signal file")))?;
            rows[i] = w.clone();
        }
        NodeSignal::from_rows(self.p, &rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub lambda: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub log_every: usize,
}

impl From<&SolverConfig> for ConfigEcho {
    fn from(c: &SolverConfig) -> Self {
        ConfigEcho {
            lambda: c.lambda,
            eta: c.eta,
            max_iter: c.max_iter,
            rel_tol: c.rel_tol,
            log_every: c.log_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWeights {
    pub node: u64,
    pub weights: Vec<f64>,
}

/// Result file of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub config: ConfigEcho,
    pub converged: bool,
    pub iterations_run: usize,
    pub final_objective: f64,
    pub p: usize,
    pub nodes: Vec<NodeWeights>,
}

impl SolveOutput {
    pub fn new(res: &SolverResult, cfg: &SolverConfig, ids: &IdTable) -> Self {
        SolveOutput {
            config: cfg.into(),
            converged: res.converged,
            iterations_run: res.iterations_run,
            final_objective: res.final_objective(),
            p: res.weights.dim(),
            nodes: res
                .weights
                .blocks()
                .enumerate()
                .map(|(i, w)| NodeWeights {
                    node: ids.id(i),
                    weights: w.to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_signal(&self, ids: &IdTable) -> Result<NodeSignal> {
        SignalFile {
            p: self.p,
            nodes: self.nodes.iter().map(|n| n.node).collect(),
            weights: self.nodes.iter().map(|n| n.weights.clone()).collect(),
        }
        .to_signal(ids)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn write_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut out = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(out, "iter,objective,primal_change,dual_max_norm")?;
        for r in log {
            writeln!(out, "{},{},{},{}", r.iter, r.objective, r.primal_change, r.dual_max_norm)?;
        }
        out.flush()
    })();
    res.map_err(io_err(path))
}

pub fn read_log(path: &Path) -> Result<Vec<IterationRecord>> {
    let csv = read_csv(path)?;
    csv.expect_header(&["iter", "objective", "primal_change", "dual_max_norm"])?;
    csv.rows
        .iter()
        .map(|(line, row)| {
            csv.check_width(*line, row)?;
            Ok(IterationRecord {
                iter: csv.field(*line, &row[0], "iteration")?,
                objective: csv.field(*line, &row[1], "objective")?,
                primal_change: csv.field(*line, &row[2], "primal change")?,
                dual_max_norm: csv.field(*line, &row[3], "dual norm")?,
            })
        })
        .collect()
}

/// One line of a sweep file: a run plus the means of its sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub inter_edges: usize,
    pub seed: u64,
    pub rho_mean: f64,
    pub rho_min: f64,
    pub nmse: f64,
    pub iterations: usize,
    pub objective: f64,
    pub lambda: f64,
    pub converged: bool,
    pub point_mean_rho: f64,
    pub point_mean_nmse: f64,
}

/// Writes the points in the given order, runs in order within a point.
pub fn write_sweep(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for pt in points {
        for r in &pt.records {
            out.serialize(SweepRow {
                inter_edges: r.inter_edges,
                seed: r.seed,
                rho_mean: r.rho_mean,
                rho_min: r.rho_min,
                nmse: r.nmse,
                iterations: r.iterations,
                objective: r.objective,
                lambda: r.lambda,
                converged: r.converged,
                point_mean_rho: pt.mean_rho,
                point_mean_nmse: pt.mean_nmse,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    out.flush().map_err(io_err(path))
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .enumerate()
        .map(|(k, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k as u64 + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}
