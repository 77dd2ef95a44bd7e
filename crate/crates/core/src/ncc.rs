//! Flow-based certificate for the network compatibility condition (NCC).
//!
//! For a cluster `C` with labeled nodes `M_C`, the normalized flow `rho` is
//! the largest `L` such that a flow injected at `M_C` can push `L * A_e`
//! through every boundary edge `e` of `C` while each intra-cluster edge
//! carries at most its weight `A_ij`. Writing `b(v)` for the boundary weight
//! at node `v`, max-flow/min-cut duality gives
//!
//! ```text
//! rho = min over T ⊆ C \ M_C with b(T) > 0 of  A(T, C \ T) / b(T)
//! ```
//!
//! which is computed exactly by a Dinkelbach iteration over parametric
//! max-flow problems: sink arcs `v -> t` carry `L * b(v)`, and whenever the
//! flow cannot saturate them, the minimum cut yields a strictly smaller ratio.
//!
//! A cluster without boundary edges, or whose boundary endpoints are all
//! labeled, has `rho = +inf`. A cluster without labeled nodes has `rho = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::graph::EmpiricalGraph;
use crate::model::Partition;

/// Ids of all edges whose endpoints lie in different clusters.
pub fn boundary_edges(g: &EmpiricalGraph, part: &Partition) -> Vec<usize> {
    g.edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| part.cluster_of(e.i) != part.cluster_of(e.j))
        .map(|(id, _)| id)
        .collect()
}

fn labeled_mask(n: usize, labeled: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in labeled {
        *mask.get_mut(i).ok_or(Error::UnknownNode(i))? = true;
    }
    Ok(mask)
}

/// Normalized flow `rho` of cluster `l` given the labeled nodes.
pub fn normalized_flow(g: &EmpiricalGraph, part: &Partition, labeled: &[usize], l: usize) -> Result<f64> {
    if part.node_count() != g.node_count() {
        return Err(Error::dim("partition nodes", g.node_count(), part.node_count()));
    }
    let cluster = part
        .clusters()
        .get(l)
        .ok_or_else(|| Error::InvalidPartition(format!("no cluster {l}")))?;
    if cluster.is_empty() {
        return Err(Error::InvalidPartition(format!("cluster {l} is empty")));
    }
    let mask = labeled_mask(g.node_count(), labeled)?;
    Ok(ClusterFlow::new(g, part, &mask, l).rho())
}

struct ClusterFlow {
    nodes: Vec<usize>,
    labeled: Vec<bool>,
    boundary: Vec<f64>,
    /// Intra-cluster edges in local indices.
    interior: Vec<(usize, usize, f64)>,
}

impl ClusterFlow {
    fn new(g: &EmpiricalGraph, part: &Partition, mask: &[bool], l: usize) -> Self {
        let nodes = part.clusters()[l].clone();
        let mut local = vec![usize::MAX; g.node_count()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        let mut boundary = vec![0.0; nodes.len()];
        let mut interior = Vec::new();
        for e in g.edges() {
            let (ci, cj) = (part.cluster_of(e.i), part.cluster_of(e.j));
            match (ci == l, cj == l) {
                (true, true) => interior.push((local[e.i], local[e.j], e.weight)),
                (true, false) => boundary[local[e.i]] += e.weight,
                (false, true) => boundary[local[e.j]] += e.weight,
                (false, false) => {}
            }
        }
        let labeled = nodes.iter().map(|&i| mask[i]).collect();
        ClusterFlow {
            nodes,
            labeled,
            boundary,
            interior,
        }
    }

    /// `(A(T, C \ T), b(T))` for the node set `in_t`.
    fn ratio_terms(&self, in_t: &[bool]) -> (f64, f64) {
        let cut = self
            .interior
            .iter()
            .filter(|(a, b, _)| in_t[*a] != in_t[*b])
            .map(|(_, _, w)| w)
            .sum();
        let weight = self
            .boundary
            .iter()
            .zip(in_t)
            .filter(|(_, &t)| t)
            .map(|(b, _)| b)
            .sum();
        (cut, weight)
    }

    fn rho(&self) -> f64 {
        let total: f64 = self.boundary.iter().sum();
        if total == 0.0 {
            return f64::INFINITY;
        }
        if !self.labeled.contains(&true) {
            return 0.0;
        }
        let unlabeled: Vec<bool> = self.labeled.iter().map(|m| !m).collect();
        let (cut, weight) = self.ratio_terms(&unlabeled);
        if weight == 0.0 {
            return f64::INFINITY;
        }
        let mut level = cut / weight;
        // each round strictly lowers the level and the number of cuts is finite
        for _ in 0..=self.nodes.len() + 1 {
            if level == 0.0 {
                return 0.0;
            }
            let (flow, source_side) = self.parametric_flow(level);
            if flow >= level * total * (1.0 - 1e-12) {
                return level;
            }
            let in_t: Vec<bool> = source_side.iter().map(|s| !s).collect();
            let (cut, weight) = self.ratio_terms(&in_t);
            if weight == 0.0 {
                return level;
            }
            let next = cut / weight;
            if next >= level {
                return level;
            }
            level = next;
        }
        level
    }

    fn parametric_flow(&self, level: f64) -> (f64, Vec<bool>) {
        let k = self.nodes.len();
        let (source, sink) = (k, k + 1);
        let mut net = FlowNetwork::new(k + 2);
        for (v, &m) in self.labeled.iter().enumerate() {
            if m {
                net.add_arc(source, v, f64::INFINITY);
            }
        }
        for &(a, b, w) in &self.interior {
            net.add_edge(a, b, w);
        }
        for (v, &b) in self.boundary.iter().enumerate() {
            if b > 0.0 {
                net.add_arc(v, sink, level * b);
            }
        }
        let flow = net.max_flow(source, sink).expect("terminals are valid");
        let mut side = net.reachable_from(source);
        side.truncate(k);
        (flow, side)
    }
}

/// Outcome of the flow-based NCC check. Infinite values serialize as `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NccReport {
    #[serde(with = "inf_vec")]
    pub rho: Vec<f64>,
    #[serde(with = "inf_f64")]
    pub rho_mean: f64,
    #[serde(with = "inf_f64")]
    pub rho_min: f64,
    /// Total weight of the boundary edges.
    pub boundary_size: f64,
    pub boundary_edge_count: usize,
    pub threshold: f64,
    pub satisfied: bool,
    pub k_used: Option<f64>,
    #[serde(with = "inf_f64")]
    pub l_used: f64,
    pub p: usize,
    pub note: Option<String>,
}

/// Computes `rho` for every cluster and compares the smallest against
/// `sqrt(p)`.
pub fn check_ncc(
    g: &EmpiricalGraph,
    part: &Partition,
    labeled: &[usize],
    p: usize,
    k: Option<f64>,
) -> Result<NccReport> {
    if part.node_count() != g.node_count() {
        return Err(Error::dim("partition nodes", g.node_count(), part.node_count()));
    }
    if p == 0 {
        return Err(Error::Config("feature dimension must be positive".into()));
    }
    if let Some(k) = k {
        if !(k > 0.0) {
            return Err(Error::Config(format!("K must be positive, got {k}")));
        }
    }
    let mask = labeled_mask(g.node_count(), labeled)?;
    let rho: Vec<f64> = (0..part.cluster_count())
        .map(|l| ClusterFlow::new(g, part, &mask, l).rho())
        .collect();
    let boundary = boundary_edges(g, part);
    let boundary_size = boundary.iter().map(|&e| g.edges()[e].weight).sum();
    let rho_min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let rho_mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let threshold = (p as f64).sqrt();
    let note = if boundary.is_empty() {
        Some("no boundary edges: condition holds vacuously".to_string())
    } else {
        None
    };
    Ok(NccReport {
        rho,
        rho_mean,
        rho_min,
        boundary_size,
        boundary_edge_count: boundary.len(),
        threshold,
        satisfied: rho_min > threshold,
        k_used: k,
        l_used: threshold * rho_min,
        p,
        note,
    })
}

mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Tag(String),
    }

    pub(super) fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Tag("inf".into())
        } else {
            Repr::Num(v)
        }
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Tag(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Tag(s) => Err(E::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod inf_vec {
    use super::inf_f64::{from_repr, to_repr, Repr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles(bridge: &[(usize, usize)]) -> (EmpiricalGraph, Partition) {
        let mut edges = vec![
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
        ];
        edges.extend(bridge.iter().map(|&(a, b)| (a, b, 1.0)));
        let g = EmpiricalGraph::new(6, edges).unwrap();
        let part = Partition::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        (g, part)
    }

    #[test]
    fn boundary_scan() {
        let (g, part) = two_triangles(&[(0, 3), (1, 4), (2, 5)]);
        let b = boundary_edges(&g, &part);
        let ends: Vec<_> = b.iter().map(|&e| (g.edges()[e].i, g.edges()[e].j)).collect();
        assert_eq!(ends, vec![(0, 3), (1, 4), (2, 5)]);
        assert!(boundary_edges(&g, &Partition::single(6)).is_empty());
    }

    #[test]
    fn path_cluster_ratio() {
        // cluster {0, 1}: labeled 0 --(3)-- 1, node 1 has boundary weight 2
        let g = EmpiricalGraph::new(4, [(0, 1, 3.0), (1, 2, 1.5), (1, 3, 0.5), (2, 3, 1.0)]).unwrap();
        let part = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert!((normalized_flow(&g, &part, &[0], 0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_clusters() {
        let (g, part) = two_triangles(&[(0, 3)]);
        assert_eq!(normalized_flow(&g, &part, &[], 0).unwrap(), 0.0);
        assert_eq!(normalized_flow(&g, &part, &[0], 0).unwrap(), f64::INFINITY);
        let (g, part) = two_triangles(&[]);
        assert_eq!(normalized_flow(&g, &part, &[1], 0).unwrap(), f64::INFINITY);
        // labeled 1 feeds node 0 through edges (0,1) and (1,2)->(0,2): cut 2
        let (g, part) = two_triangles(&[(0, 3)]);
        assert!((normalized_flow(&g, &part, &[1], 0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_fields() {
        let (g, part) = two_triangles(&[(0, 3)]);
        let rep = check_ncc(&g, &part, &[1, 4], 2, Some(3.0)).unwrap();
        assert_eq!(rep.rho.len(), 2);
        assert!((rep.rho_min - 2.0).abs() < 1e-12);
        assert_eq!(rep.threshold, 2f64.sqrt());
        assert!(rep.satisfied);
        assert_eq!(rep.k_used, Some(3.0));
        assert!((rep.l_used - 2.0 * 2f64.sqrt()).abs() < 1e-12);

        let rep = check_ncc(&g, &part, &[], 2, None).unwrap();
        assert!(!rep.satisfied);

        let rep = check_ncc(&g, &Partition::single(6), &[], 2, None).unwrap();
        assert!(rep.satisfied && rep.note.is_some() && rep.boundary_edge_count == 0);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"inf\""));
        let back: NccReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }
}
