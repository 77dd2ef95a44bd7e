//! Diagonally preconditioned primal-dual solver for
//! `min_w sum_{i in M} |y_i - w_i^T x_i| + lambda * TV(w)`.
//!
//! The iteration alternates a proximal step on the loss (nodes) with a
//! projection step on the dual edge variables:
//!
//! ```text
//! w_{k+1} = prox_{T h}(w_k - T D^T u_k)
//! u_{k+1} = clip_lambda(u_k + S D (2 w_{k+1} - w_k))
//! ```
//!
//! with per-edge steps `sigma_e = 1 / (2 A_e)` and per-node steps
//! `tau_i = eta / d_i`, `eta < 1`. These keep `||S^{1/2} D T^{1/2}||^2 < 1`,
//! which [`estimate_operator_norm`] checks numerically.

mod prox;

pub use prox::{clip, clip_in_place, labeled_node_update, labeled_node_update_in_place, soft_threshold};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{EdgeSignal, EmpiricalGraph, NodeSignal};
use crate::model::{training_error, NetworkDataset};

/// Number of consecutive iterations with small primal and dual changes
/// required to stop.
pub const STALL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioners {
    pub sigma: Vec<f64>,
    /// Infinite for isolated nodes, which receive no dual contribution.
    pub tau: Vec<f64>,
    pub eta: f64,
}

impl Preconditioners {
    pub fn standard(g: &EmpiricalGraph, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {eta}")));
        }
        let sigma = g.edges().iter().map(|e| 1.0 / (2.0 * e.weight)).collect();
        let tau = g
            .degrees()
            .iter()
            .map(|&d| if d > 0.0 { eta / d } else { f64::INFINITY })
            .collect();
        Ok(Preconditioners { sigma, tau, eta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub eta: f64,
    pub max_iter: usize,
    /// Stop once the relative primal and dual changes both stay below this
    /// for [`STALL_WINDOW`] iterations. Zero runs all `max_iter` iterations.
    pub rel_tol: f64,
    pub log_every: usize,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            eta: 0.9,
            max_iter: 10_000,
            rel_tol: 1e-9,
            log_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::Config(format!("rel_tol must be nonnegative, got {}", self.rel_tol)));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub primal_change: f64,
    pub dual_max_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub weights: NodeSignal,
    pub dual: EdgeSignal,
    pub iterations_run: usize,
    pub converged: bool,
    /// Every `log_every`-th iteration plus the last one.
    pub log: Vec<IterationRecord>,
}

impl SolverResult {
    pub fn objective_trace(&self) -> Vec<(usize, f64)> {
        self.log.iter().map(|r| (r.iter, r.objective)).collect()
    }

    pub fn primal_change_trace(&self) -> Vec<(usize, f64)> {
        self.log.iter().map(|r| (r.iter, r.primal_change)).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// `training_error(w) + lambda * TV(w)`.
pub fn objective(w: &NodeSignal, ds: &NetworkDataset, lambda: f64) -> Result<f64> {
    Ok(training_error(w, ds)? + lambda * ds.graph().total_variation(w)?)
}

fn check_compat(g: &EmpiricalGraph, pre: &Preconditioners) -> Result<()> {
    if pre.sigma.len() != g.edge_count() {
        return Err(Error::dim("edge step sizes", g.edge_count(), pre.sigma.len()));
    }
    if pre.tau.len() != g.node_count() {
        return Err(Error::dim("node step sizes", g.node_count(), pre.tau.len()));
    }
    Ok(())
}

/// `prox_{T h}(w_k - T D^T u_k)`: a gradient-like move on every node followed
/// by the loss prox on labeled nodes.
pub fn primal_step(
    g: &EmpiricalGraph,
    pre: &Preconditioners,
    w: &NodeSignal,
    u: &EdgeSignal,
    ds: &NetworkDataset,
) -> Result<NodeSignal> {
    check_compat(g, pre)?;
    let dtu = g.apply_incidence_adjoint(u)?;
    if w.len() != g.node_count() || w.dim() != ds.dim() || u.dim() != ds.dim() {
        return Err(Error::dim("primal block dimension", ds.dim(), w.dim()));
    }
    let mut next = w.clone();
    primal_update(g, pre, &mut next, &dtu, ds);
    Ok(next)
}

fn primal_update(
    g: &EmpiricalGraph,
    pre: &Preconditioners,
    w: &mut NodeSignal,
    dtu: &NodeSignal,
    ds: &NetworkDataset,
) {
    for i in 0..g.node_count() {
        if g.degree(i) > 0.0 {
            let tau = pre.tau[i];
            for (v, d) in w.block_mut(i).iter_mut().zip(dtu.block(i)) {
                *v -= tau * d;
            }
        }
    }
    for &i in ds.training_set() {
        let y = ds.label(i).expect("training node has a label");
        labeled_node_update_in_place(w.block_mut(i), ds.feature(i), y, pre.tau[i]);
    }
}

/// `clip_lambda(u_k + S D (2 w_next - w_k))` blockwise.
pub fn dual_step(
    g: &EmpiricalGraph,
    pre: &Preconditioners,
    u: &EdgeSignal,
    w_next: &NodeSignal,
    w: &NodeSignal,
    lambda: f64,
) -> Result<EdgeSignal> {
    check_compat(g, pre)?;
    if w_next.len() != w.len() || w_next.dim() != w.dim() {
        return Err(Error::dim("primal iterates", w.as_slice().len(), w_next.as_slice().len()));
    }
    if u.len() != g.edge_count() || u.dim() != w.dim() {
        return Err(Error::dim("dual block dimension", w.dim(), u.dim()));
    }
    let mut next = u.clone();
    dual_update(g, pre, &mut next, w_next, w, lambda);
    Ok(next)
}

fn dual_update(
    g: &EmpiricalGraph,
    pre: &Preconditioners,
    u: &mut EdgeSignal,
    w_next: &NodeSignal,
    w: &NodeSignal,
    lambda: f64,
) {
    for (id, e) in g.edges().iter().enumerate() {
        let scale = pre.sigma[id] * e.weight;
        let (ni, nj) = (w_next.block(e.i), w_next.block(e.j));
        let (oi, oj) = (w.block(e.i), w.block(e.j));
        let block = u.block_mut(id);
        for r in 0..block.len() {
            let extrapolated = (2.0 * ni[r] - oi[r]) - (2.0 * nj[r] - oj[r]);
            block[r] += scale * extrapolated;
        }
        clip_in_place(block, lambda);
    }
}

/// Power-iteration estimate of `||S^{1/2} D T^{1/2}||^2` for signals of
/// dimension `p`. The Rayleigh quotient of the power iterates never
/// decreases, so more iterations give a tighter lower estimate.
pub fn estimate_operator_norm(
    g: &EmpiricalGraph,
    pre: &Preconditioners,
    p: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    check_compat(g, pre)?;
    if iters == 0 {
        return Err(Error::Config("power iteration needs at least one step".into()));
    }
    if g.edge_count() == 0 || p == 0 {
        return Ok(0.0);
    }
    let sqrt_tau: Vec<f64> = (0..g.node_count())
        .map(|i| if g.degree(i) > 0.0 { pre.tau[i].sqrt() } else { 0.0 })
        .collect();
    let sqrt_sigma: Vec<f64> = pre.sigma.iter().map(|s| s.sqrt()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = NodeSignal::zeros(g.node_count(), p);
    v.as_mut_slice()
        .iter_mut()
        .for_each(|x| *x = StandardNormal.sample(&mut rng));

    let forward = |v: &NodeSignal| -> Result<EdgeSignal> {
        let mut scaled = v.clone();
        for (i, s) in sqrt_tau.iter().enumerate() {
            scaled.block_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        let mut out = g.apply_incidence(&scaled)?;
        for (e, s) in sqrt_sigma.iter().enumerate() {
            out.block_mut(e).iter_mut().for_each(|x| *x *= s);
        }
        Ok(out)
    };
    let backward = |u: &EdgeSignal| -> Result<NodeSignal> {
        let mut scaled = u.clone();
        for (e, s) in sqrt_sigma.iter().enumerate() {
            scaled.block_mut(e).iter_mut().for_each(|x| *x *= s);
        }
        let mut out = g.apply_incidence_adjoint(&scaled)?;
        for (i, s) in sqrt_tau.iter().enumerate() {
            out.block_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        Ok(out)
    };

    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = v.norm();
        if norm == 0.0 {
            break;
        }
        v = v.scaled(1.0 / norm);
        let mv = forward(&v)?;
        estimate = mv.dot(&mv);
        v = backward(&mv)?;
    }
    Ok(estimate)
}

/// Runs the primal-dual iteration from `w = 0, u = 0`.
pub fn solve(ds: &NetworkDataset, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if ds.training_set().is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let g = ds.graph();
    let p = ds.dim();
    let pre = Preconditioners::standard(g, cfg.eta)?;

    let mut w = NodeSignal::zeros(g.node_count(), p);
    let mut w_prev = w.clone();
    let mut u = EdgeSignal::zeros(g.edge_count(), p);
    let mut u_prev = u.clone();
    let mut log = Vec::new();
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations_run = 0;

    for k in 1..=cfg.max_iter {
        std::mem::swap(&mut w, &mut w_prev);
        w.as_mut_slice().copy_from_slice(w_prev.as_slice());
        let dtu = g.apply_incidence_adjoint(&u)?;
        primal_update(g, &pre, &mut w, &dtu, ds);
        u_prev.as_mut_slice().copy_from_slice(u.as_slice());
        dual_update(g, &pre, &mut u, &w, &w_prev, cfg.lambda);
        iterations_run = k;

        if !w.is_finite() || !u.is_finite() {
            return Err(Error::Diverged {
                iteration: k,
                what: "non-finite primal or dual iterate".into(),
            });
        }

        let diff: f64 = w
            .as_slice()
            .iter()
            .zip(w_prev.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let change = diff / (1.0 + w_prev.norm());
        // the primal iterate can sit on a loss kink while the dual still moves
        let dual_diff: f64 = u
            .as_slice()
            .iter()
            .zip(u_prev.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dual_change = dual_diff / (1.0 + u_prev.norm());
        if change < cfg.rel_tol && dual_change < cfg.rel_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        converged = stalled >= STALL_WINDOW;
        let last = converged || k == cfg.max_iter;

        if k % cfg.log_every == 0 || last {
            let obj = objective(&w, ds, cfg.lambda)?;
            if !obj.is_finite() {
                return Err(Error::Diverged {
                    iteration: k,
                    what: "non-finite objective".into(),
                });
            }
            log.push(IterationRecord {
                iter: k,
                objective: obj,
                primal_change: change,
                dual_max_norm: u
                    .blocks()
                    .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max),
            });
        }
        if converged {
            break;
        }
    }

    Ok(SolverResult {
        weights: w,
        dual: u,
        iterations_run,
        converged,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(a: f64) -> EmpiricalGraph {
        EmpiricalGraph::new(2, [(0, 1, a)]).unwrap()
    }

    fn dataset(g: EmpiricalGraph, x: Vec<f64>, p: usize, y: Vec<Option<f64>>) -> NetworkDataset {
        NetworkDataset::new(g, NodeSignal::from_flat(p, x).unwrap(), y).unwrap()
    }

    #[test]
    fn standard_steps() {
        let g = EmpiricalGraph::new(3, [(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        let pre = Preconditioners::standard(&g, 0.9).unwrap();
        assert_eq!(pre.sigma, vec![0.25, 1.0]);
        assert_eq!(pre.tau, vec![0.45, 0.9 / 2.5, 1.8]);
        assert!(Preconditioners::standard(&g, 1.0).is_err());
        let iso = Preconditioners::standard(&EmpiricalGraph::empty(2), 0.9).unwrap();
        assert!(iso.tau.iter().all(|t| t.is_infinite()));
    }

    #[test]
    fn primal_step_fixed_points() {
        let g = single_edge(1.0);
        let pre = Preconditioners::standard(&g, 0.9).unwrap();
        let ds = dataset(g.clone(), vec![1.0, 1.0], 1, vec![None, None]);
        let w = NodeSignal::from_flat(1, vec![0.3, -2.0]).unwrap();
        let u = EdgeSignal::zeros(1, 1);
        assert_eq!(primal_step(&g, &pre, &w, &u, &ds).unwrap(), w);

        // labels fit exactly by w
        let ds = dataset(g.clone(), vec![2.0, 1.0], 1, vec![Some(0.6), Some(-2.0)]);
        assert_eq!(primal_step(&g, &pre, &w, &u, &ds).unwrap(), w);
    }

    #[test]
    fn primal_step_hand_evaluated() {
        // A = 2, d = 2 on both ends, tau = 0.45; D^T u = (2*1.5, -2*1.5)
        let g = single_edge(2.0);
        let pre = Preconditioners::standard(&g, 0.9).unwrap();
        let ds = dataset(g.clone(), vec![1.0, 1.0], 1, vec![None, None]);
        let w = NodeSignal::from_flat(1, vec![1.0, 1.0]).unwrap();
        let u = EdgeSignal::from_flat(1, vec![1.5]).unwrap();
        let next = primal_step(&g, &pre, &w, &u, &ds).unwrap();
        assert!((next.as_slice()[0] - (1.0 - 0.45 * 3.0)).abs() < 1e-15);
        assert!((next.as_slice()[1] - (1.0 + 0.45 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn dual_step_cases() {
        let g = single_edge(1.0);
        let pre = Preconditioners::standard(&g, 0.9).unwrap();
        let c = NodeSignal::constant(2, &[4.0]);
        let u0 = EdgeSignal::zeros(1, 1);
        assert_eq!(dual_step(&g, &pre, &u0, &c, &c, 1.0).unwrap(), u0);

        // sigma = 1/2, A = 1: u_bar = 0.2 + 0.5 * ((2*1 - 0) - (2*0 - 1)) = 1.7
        let w_next = NodeSignal::from_flat(1, vec![1.0, 0.0]).unwrap();
        let w = NodeSignal::from_flat(1, vec![0.0, 1.0]).unwrap();
        let u = EdgeSignal::from_flat(1, vec![0.2]).unwrap();
        let out = dual_step(&g, &pre, &u, &w_next, &w, 10.0).unwrap();
        assert!((out.as_slice()[0] - 1.7).abs() < 1e-15);
        let out = dual_step(&g, &pre, &u, &w_next, &w, 0.5).unwrap();
        assert_eq!(out.as_slice(), &[0.5]);
    }

    #[test]
    fn objective_cases() {
        let g = single_edge(1.0);
        let ds = dataset(g, vec![1.0, 2.0], 1, vec![Some(3.0), None]);
        let c = NodeSignal::constant(2, &[3.0]);
        assert_eq!(objective(&c, &ds, 5.0).unwrap(), 0.0);
        let w = NodeSignal::from_flat(1, vec![1.0, -1.0]).unwrap();
        assert_eq!(objective(&w, &ds, 0.0).unwrap(), 2.0);
        assert_eq!(objective(&w, &ds, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn operator_norm_small_cases() {
        let empty = EmpiricalGraph::empty(3);
        let pre = Preconditioners::standard(&empty, 0.9).unwrap();
        assert_eq!(estimate_operator_norm(&empty, &pre, 2, 10, 1).unwrap(), 0.0);

        let g = single_edge(1.0);
        let pre = Preconditioners::standard(&g, 0.9).unwrap();
        let est = estimate_operator_norm(&g, &pre, 1, 5, 7).unwrap();
        assert!((est - 0.9).abs() < 1e-12);
    }

    #[test]
    fn isolated_labeled_node_fits_exactly() {
        let g = EmpiricalGraph::empty(2);
        let ds = dataset(g, vec![0.6, 0.8, 1.0, 0.0], 2, vec![Some(2.0), None]);
        let res = solve(&ds, &SolverConfig::new(1.0)).unwrap();
        let w = res.weights.block(0);
        assert!((w[0] - 1.2).abs() < 1e-12 && (w[1] - 1.6).abs() < 1e-12);
        assert_eq!(res.weights.block(1), &[0.0, 0.0]);
        assert!(res.converged);
    }

    #[test]
    fn solve_rejects_bad_input() {
        let g = single_edge(1.0);
        let ds = dataset(g.clone(), vec![1.0, 1.0], 1, vec![None, None]);
        assert!(matches!(solve(&ds, &SolverConfig::new(1.0)), Err(Error::EmptyTrainingSet)));
        let ds = dataset(g, vec![1.0, 1.0], 1, vec![Some(1.0), None]);
        assert!(solve(&ds, &SolverConfig::new(0.0)).is_err());
        let mut cfg = SolverConfig::new(1.0);
        cfg.eta = 1.2;
        assert!(solve(&ds, &cfg).is_err());
    }
}
