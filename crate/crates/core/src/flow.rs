//! Maximum s-t flow by shortest augmenting paths (Edmonds-Karp) on real
//! capacities.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Residual capacities at or below this are treated as saturated.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    residual: f64,
}

/// Arcs are stored in pairs; arc `a ^ 1` is the reverse of arc `a`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            arcs: Vec::new(),
            out: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    fn push_pair(&mut self, a: usize, b: usize, forward: f64, backward: f64) {
        assert!(a < self.out.len() && b < self.out.len(), "arc endpoint out of range");
        assert!(forward >= 0.0 && backward >= 0.0, "negative capacity");
        let id = self.arcs.len();
        self.arcs.push(Arc { to: b, residual: forward });
        self.arcs.push(Arc { to: a, residual: backward });
        self.out[a].push(id);
        self.out[b].push(id + 1);
    }

    /// Directed arc `a -> b`. Capacity may be `f64::INFINITY`.
    pub fn add_arc(&mut self, a: usize, b: usize, capacity: f64) {
        self.push_pair(a, b, capacity, 0.0);
    }

    /// Undirected edge: capacity `c` in each direction.
    pub fn add_edge(&mut self, a: usize, b: usize, capacity: f64) {
        self.push_pair(a, b, capacity, capacity);
    }

    /// Runs to completion and returns the flow value. Consumes residual
    /// capacity, so a second call on the same network returns 0.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> Result<f64> {
        let n = self.out.len();
        if source >= n {
            return Err(Error::Config(format!("flow source {source} missing")));
        }
        if sink >= n {
            return Err(Error::Config(format!("flow sink {sink} missing")));
        }
        if source == sink {
            return Err(Error::Config("flow source equals sink".into()));
        }
        let mut total = 0.0;
        let mut parent = vec![usize::MAX; n];
        loop {
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            let mut queue = VecDeque::from([source]);
            let mut reached = false;
            'bfs: while let Some(v) = queue.pop_front() {
                for &a in &self.out[v] {
                    let arc = &self.arcs[a];
                    if arc.residual > EPS && arc.to != source && parent[arc.to] == usize::MAX {
                        parent[arc.to] = a;
                        if arc.to == sink {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(arc.to);
                    }
                }
            }
            if !reached {
                return Ok(total);
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let a = parent[v];
                bottleneck = bottleneck.min(self.arcs[a].residual);
                v = self.arcs[a ^ 1].to;
            }
            if bottleneck.is_infinite() {
                return Ok(f64::INFINITY);
            }
            let mut v = sink;
            while v != source {
                let a = parent[v];
                self.arcs[a].residual -= bottleneck;
                self.arcs[a ^ 1].residual += bottleneck;
                v = self.arcs[a ^ 1].to;
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `source` in the residual network. After
    /// [`max_flow`](Self::max_flow) this is the source side of a minimum cut.
    pub fn reachable_from(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.out.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.out[v] {
                let arc = &self.arcs[a];
                if arc.residual > EPS && !seen[arc.to] {
                    seen[arc.to] = true;
                    queue.push_back(arc.to);
                }
            }
        }
        seen
    }
}
