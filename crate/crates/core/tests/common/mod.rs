//! Shared oracles and random instances for the integration tests.
#![allow(dead_code)]

use nlasso::baseline::fit_lad;
use nlasso::{EmpiricalGraph, NetworkDataset, NodeSignal, Partition};
use rand::Rng;

/// Random graph on `n` nodes with weights in `[0.5, 2]`. A random spanning
/// tree is laid down first when `connected` is set.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, edge_prob: f64, connected: bool) -> EmpiricalGraph {
    let mut pairs = std::collections::BTreeSet::new();
    if connected {
        for v in 1..n {
            let u = rng.random_range(0..v);
            pairs.insert((u, v));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                pairs.insert((i, j));
            }
        }
    }
    EmpiricalGraph::new(n, pairs.into_iter().map(|(i, j)| (i, j, rng.random_range(0.5..2.0)))).unwrap()
}

pub fn random_signal<R: Rng>(rng: &mut R, count: usize, dim: usize) -> Vec<f64> {
    (0..count * dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Minimizer of a unimodal function on `[a, b]` by golden section.
/// `diff(c, d)` returns `f(c) - f(d)`.
pub fn golden_section(diff: impl Fn(f64, f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > tol {
        if diff(c, d) < 0.0 {
            b = d;
            d = c;
            c = b - r * (b - a);
        } else {
            a = c;
            c = d;
            d = a + r * (b - a);
        }
    }
    0.5 * (a + b)
}

/// `argmin_v |y - x^T v| + ||v - w||^2 / (2 tau)` by golden section. The
/// minimizer differs from `w` only along `x`, so it is `w + t x` for a scalar
/// `t` found on a bracket that contains it. Differences of the objective are
/// formed without cancellation so the search resolves `t` to rounding level.
pub fn prox_oracle(x: &[f64], y: f64, w: &[f64], tau: f64) -> Vec<f64> {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let r = y - x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let diff = |c: f64, d: f64| {
        let (ec, ed) = (r - c * xx, r - d * xx);
        let abs_part = if ec >= 0.0 && ed >= 0.0 {
            (d - c) * xx
        } else if ec <= 0.0 && ed <= 0.0 {
            (c - d) * xx
        } else {
            ec.abs() - ed.abs()
        };
        abs_part + xx * (c - d) * (c + d) / (2.0 * tau)
    };
    let bound = r.abs() / xx + tau + 1.0;
    let t = golden_section(diff, -bound, bound, 1e-14 * bound);
    w.iter().zip(x).map(|(a, b)| a + t * b).collect()
}

/// Minimum `s`-`t` cut over all vertex subsets; `arcs` are directed.
pub fn brute_min_cut(n: usize, arcs: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask & (1 << s) == 0 || mask & (1 << t) != 0 {
            continue;
        }
        let cut: f64 = arcs
            .iter()
            .filter(|(a, b, _)| mask & (1 << a) != 0 && mask & (1 << b) == 0)
            .map(|(_, _, c)| c)
            .sum();
        best = best.min(cut);
    }
    best
}

/// `rho` of cluster `l` by enumerating every unlabeled subset `T` with
/// boundary weight `b(T) > 0` and minimizing `A(T, C \ T) / b(T)`.
pub fn brute_rho(g: &EmpiricalGraph, part: &Partition, labeled: &[usize], l: usize) -> f64 {
    let cluster = &part.clusters()[l];
    let inside = |v: usize| part.cluster_of(v) == l;
    let boundary = |v: usize| -> f64 {
        g.edges()
            .iter()
            .filter(|e| (e.i == v && !inside(e.j)) || (e.j == v && !inside(e.i)))
            .map(|e| e.weight)
            .sum()
    };
    if cluster.iter().map(|&v| boundary(v)).sum::<f64>() == 0.0 {
        return f64::INFINITY;
    }
    if !cluster.iter().any(|v| labeled.contains(v)) {
        return 0.0;
    }
    let free: Vec<usize> = cluster.iter().copied().filter(|v| !labeled.contains(v)).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << free.len()) {
        let in_t = |v: usize| free.iter().position(|&f| f == v).is_some_and(|k| mask & (1 << k) != 0);
        let b: f64 = free
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &v)| boundary(v))
            .sum();
        if b <= 0.0 {
            continue;
        }
        let cut: f64 = g
            .edges()
            .iter()
            .filter(|e| inside(e.i) && inside(e.j) && in_t(e.i) != in_t(e.j))
            .map(|e| e.weight)
            .sum();
        best = best.min(cut / b);
    }
    best
}

/// Minimum of the nLasso objective for `p = 1`, written as one LAD problem
/// in `w in R^n`: a row `(x_i e_i, y_i)` per labeled node and a row
/// `(lambda A_ij (e_i - e_j), 0)` per edge.
pub fn lad_objective_oracle(ds: &NetworkDataset, lambda: f64, iterations: usize) -> (f64, NodeSignal) {
    assert_eq!(ds.dim(), 1);
    let n = ds.node_count();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ys = Vec::new();
    for &i in ds.training_set() {
        let mut r = vec![0.0; n];
        r[i] = ds.feature(i)[0];
        rows.push(r);
        ys.push(ds.label(i).unwrap());
    }
    for e in ds.graph().edges() {
        let mut r = vec![0.0; n];
        r[e.i] = lambda * e.weight;
        r[e.j] = -lambda * e.weight;
        rows.push(r);
        ys.push(0.0);
    }
    let xs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
    let fit = fit_lad(&xs, &ys, iterations).unwrap();
    (fit.loss, NodeSignal::from_flat(1, fit.weights).unwrap())
}
