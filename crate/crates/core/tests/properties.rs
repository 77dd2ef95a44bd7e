mod common;

use common::*;
use nlasso::datagen::{knn_graph, two_cluster_instance, TwoClusterSpec};
use nlasso::model::{nmse, theorem2_bound, training_error};
use nlasso::ncc::{boundary_edges, check_ncc, normalized_flow};
use nlasso::solver::{clip, labeled_node_update, soft_threshold, solve};
use nlasso::{EdgeSignal, EmpiricalGraph, NetworkDataset, NodeSignal, Partition, SolverConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_adjoint_identity(seed in any::<u64>(), n in 1usize..30, p in 1usize..4, density in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, density, false);
        let w = NodeSignal::from_flat(p, random_signal(&mut rng, n, p)).unwrap();
        let u = EdgeSignal::from_flat(p, random_signal(&mut rng, g.edge_count(), p)).unwrap();
        let lhs = g.apply_incidence(&w).unwrap().dot(&u);
        let rhs = w.dot(&g.apply_incidence_adjoint(&u).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn tv_is_a_seminorm(seed in any::<u64>(), n in 1usize..25, p in 1usize..4, c in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.3, false);
        let a = NodeSignal::from_flat(p, random_signal(&mut rng, n, p)).unwrap();
        let b = NodeSignal::from_flat(p, random_signal(&mut rng, n, p)).unwrap();
        let tv = |w: &NodeSignal| g.total_variation(w).unwrap();

        let by_edges: f64 = g.apply_incidence(&a).unwrap().blocks().map(norm).sum();
        prop_assert!((by_edges - tv(&a)).abs() <= 1e-12 * (1.0 + tv(&a)));
        prop_assert!((tv(&a.scaled(c)) - c.abs() * tv(&a)).abs() <= 1e-10 * (1.0 + tv(&a)));
        let sum = NodeSignal::from_flat(p, a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect()).unwrap();
        prop_assert!(tv(&sum) <= tv(&a) + tv(&b) + 1e-10);
        let constant = NodeSignal::constant(n, a.block(0));
        prop_assert!(tv(&constant) == 0.0);
    }

    #[test]
    fn tv_splits_over_interior_and_boundary(seed in any::<u64>(), n in 2usize..25, k in 1u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.3, true);
        let assignment: Vec<u64> = (0..n as u64).map(|i| i % k).collect();
        let part = Partition::from_assignment(&assignment).unwrap();
        let w = NodeSignal::from_flat(2, random_signal(&mut rng, n, 2)).unwrap();
        let boundary = boundary_edges(&g, &part);
        let interior: Vec<usize> = (0..g.edge_count()).filter(|e| !boundary.contains(e)).collect();
        let split = g.tv_on_edge_subset(&w, &boundary).unwrap() + g.tv_on_edge_subset(&w, &interior).unwrap();
        let total = g.total_variation(&w).unwrap();
        prop_assert!((split - total).abs() <= 1e-10 * (1.0 + total));
    }

    #[test]
    fn clip_is_nonexpansive(a in prop::collection::vec(-10.0f64..10.0, 1..5), shift in prop::collection::vec(-10.0f64..10.0, 5), lambda in 0.0f64..5.0) {
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let diff: Vec<f64> = clip(&a, lambda).iter().zip(clip(&b, lambda)).map(|(x, y)| x - y).collect();
        let orig: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&diff) <= norm(&orig) + 1e-12);
        prop_assert!(norm(&clip(&a, lambda)) <= lambda * (1.0 + 1e-12));
    }

    #[test]
    fn moreau_identity_in_one_dimension(v in -10.0f64..10.0, tau in 0.0f64..5.0) {
        // prox of tau|.| plus projection onto [-tau, tau] recovers v
        let sum = soft_threshold(v, tau) + clip(&[v], tau)[0];
        prop_assert!((sum - v).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn prox_fixes_points_that_fit(seed in any::<u64>(), p in 1usize..5, tau in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let v = labeled_node_update(&w, &x, y, tau);
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rho_grows_with_labels(seed in any::<u64>(), n in 3usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.35, true);
        let assignment: Vec<u64> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let part = Partition::from_assignment(&assignment).unwrap();
        let mut labeled: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.3).collect();
        let extra = rng.random_range(0..n);
        let before: Vec<f64> = (0..part.cluster_count())
            .map(|l| normalized_flow(&g, &part, &labeled, l).unwrap())
            .collect();
        if !labeled.contains(&extra) {
            labeled.push(extra);
        }
        for (l, b) in before.iter().enumerate() {
            let after = normalized_flow(&g, &part, &labeled, l).unwrap();
            prop_assert!(after >= b * (1.0 - 1e-12), "cluster {l}: {b} -> {after}");
        }
    }

    #[test]
    fn rho_ignores_node_numbering(seed in any::<u64>(), n in 3usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.35, true);
        let assignment: Vec<u64> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let labeled: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.3).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let g2 = EmpiricalGraph::new(n, g.edges().iter().map(|e| (perm[e.i], perm[e.j], e.weight))).unwrap();
        let mut assignment2 = vec![0; n];
        for i in 0..n {
            assignment2[perm[i]] = assignment[i];
        }
        let labeled2: Vec<usize> = labeled.iter().map(|&i| perm[i]).collect();
        let a = check_ncc(&g, &Partition::from_assignment(&assignment).unwrap(), &labeled, 2, None).unwrap();
        let b = check_ncc(&g2, &Partition::from_assignment(&assignment2).unwrap(), &labeled2, 2, None).unwrap();
        prop_assert_eq!(a.satisfied, b.satisfied);
        prop_assert!(a.rho_min == b.rho_min || (a.rho_min - b.rho_min).abs() <= 1e-9 * (1.0 + a.rho_min));
    }

    #[test]
    fn knn_ignores_rigid_motion(seed in any::<u64>(), n in 4usize..30, k in 1usize..4, angle in 0.0f64..6.3, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = coords.iter().map(|p| vec![c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy]).collect();
        let a = knn_graph(&coords, k).unwrap();
        let b = knn_graph(&moved, k).unwrap();
        // rounding may reorder exact distance ties, so compare only tie-free inputs
        let mut d: Vec<f64> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                d.push((coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]));
            }
        }
        d.sort_by(f64::total_cmp);
        prop_assume!(d.windows(2).all(|w| w[1] - w[0] > 1e-9));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bound_monotone_in_constants(k in 0.1f64..10.0, dk in 0.0f64..5.0, excess in 0.01f64..10.0, dl in 0.0f64..5.0, p in 1usize..6, noise in 0.0f64..10.0) {
        let l = (p as f64).sqrt() + excess;
        let base = theorem2_bound(k, l, p, noise).unwrap();
        prop_assert!(theorem2_bound(k + dk, l, p, noise).unwrap() >= base);
        prop_assert!(theorem2_bound(k, l + dl, p, noise).unwrap() <= base * (1.0 + 1e-12));
        prop_assert!(base >= k * noise * (1.0 - 1e-12));
    }

    #[test]
    fn nmse_ignores_node_order(seed in any::<u64>(), n in 1usize..20, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_signal(&mut rng, n, p);
        let e = random_signal(&mut rng, n, p);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let rows = |v: &[f64]| -> Vec<Vec<f64>> { perm.iter().map(|&i| v[i * p..(i + 1) * p].to_vec()).collect() };
        let truth = NodeSignal::from_flat(p, t.clone()).unwrap();
        let est = NodeSignal::from_flat(p, e.clone()).unwrap();
        let truth2 = NodeSignal::from_rows(p, &rows(&t)).unwrap();
        let est2 = NodeSignal::from_rows(p, &rows(&e)).unwrap();
        let a = nmse(&truth, &est).unwrap();
        let b = nmse(&truth2, &est2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn converged_solution_is_optimal_within_tolerance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=6);
        let g = random_graph(&mut rng, n, 0.5, true);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let labels: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(-2.0..2.0))).collect();
        let ds = NetworkDataset::new(g, NodeSignal::from_flat(1, xs).unwrap(), labels).unwrap();
        let lambda = rng.random_range(0.1..1.0);
        let mut cfg = SolverConfig::new(lambda);
        cfg.max_iter = 50_000;
        cfg.rel_tol = 1e-13;
        let res = solve(&ds, &cfg).unwrap();
        // no coordinate move of the solution lowers the objective
        let f = |w: &NodeSignal| nlasso::solver::objective(w, &ds, lambda).unwrap();
        let base = f(&res.weights);
        for i in 0..n {
            for step in [1e-3, -1e-3] {
                let mut w = res.weights.clone();
                w.block_mut(i)[0] += step;
                prop_assert!(f(&w) >= base - 1e-6, "node {i} step {step}: {} < {base}", f(&w));
            }
        }
    }
}

#[test]
fn solver_settles_within_budget_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..50 {
        let n = rng.random_range(3..=10);
        let g = random_graph(&mut rng, n, 0.15, true);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<Option<f64>> = (0..n)
            .map(|i| (i == 0 || rng.random_bool(0.5)).then(|| rng.random_range(-2.0..2.0)))
            .collect();
        let ds = NetworkDataset::new(g, NodeSignal::from_flat(1, xs).unwrap(), labels).unwrap();
        let mut cfg = SolverConfig::new(rng.random_range(0.05..1.0));
        cfg.rel_tol = 0.0;
        let res = solve(&ds, &cfg).unwrap();
        let last = res.log.last().unwrap();
        assert_eq!(last.iter, 10_000);
        assert!(last.primal_change < 1e-6, "case {case}: change {}", last.primal_change);
    }
}

#[test]
fn two_cluster_runs_settle_with_a_longer_budget() {
    for seed in 0..5 {
        let inst = two_cluster_instance(&TwoClusterSpec::new(80, 10.0, 2, 3, seed), 2).unwrap();
        let mut cfg = SolverConfig::new(0.05);
        cfg.rel_tol = 0.0;
        cfg.max_iter = 100_000;
        cfg.log_every = 100_000;
        let res = solve(&inst.dataset, &cfg).unwrap();
        let last = res.log.last().unwrap();
        assert!(last.primal_change < 1e-6, "seed {seed}: change {}", last.primal_change);
    }
}

#[test]
fn zero_noise_truth_fits_and_is_piecewise_constant() {
    for seed in 0..5 {
        let inst = two_cluster_instance(&TwoClusterSpec::new(40, 6.0, 3, 3, seed), 3).unwrap();
        let ds = &inst.dataset;
        assert_eq!(training_error(&inst.truth, ds).unwrap(), 0.0);
        let boundary = boundary_edges(ds.graph(), &inst.partition);
        let interior: Vec<usize> = (0..ds.graph().edge_count()).filter(|e| !boundary.contains(e)).collect();
        assert_eq!(ds.graph().tv_on_edge_subset(&inst.truth, &interior).unwrap(), 0.0);
    }
}

#[test]
fn intra_cluster_degree_concentrates() {
    let target = 10.0;
    let mut total = 0.0;
    for seed in 0..10 {
        let inst = two_cluster_instance(&TwoClusterSpec::new(80, target, 0, 3, seed), 2).unwrap();
        total += inst.dataset.graph().degrees().iter().sum::<f64>() / 80.0;
    }
    let mean = total / 10.0;
    assert!((mean - target).abs() <= 0.15 * target, "mean degree {mean}");
}

#[test]
fn generated_graphs_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..10 {
        let inst = two_cluster_instance(&TwoClusterSpec::new(60, 8.0, rng.random_range(0..20), 2, seed), 2).unwrap();
        let g = inst.dataset.graph();
        let again = EmpiricalGraph::new(g.node_count(), g.edges().iter().map(|e| (e.j, e.i, e.weight))).unwrap();
        assert_eq!(&again, g);
        assert!(g.edges().iter().all(|e| e.i < e.j && e.weight > 0.0));
    }
}
