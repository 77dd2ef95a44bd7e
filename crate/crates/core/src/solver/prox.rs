//! Proximal maps used by the primal-dual iteration.

/// Projection onto the Euclidean ball of radius `lambda`.
pub fn clip(x: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    clip_in_place(&mut out, lambda);
    out
}

pub fn clip_in_place(x: &mut [f64], lambda: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= lambda && norm > 0.0 {
        let s = lambda / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// `sign(x) * max(|x| - tau, 0)`.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Minimizer of `|y - x^T v| + ||v - w||^2 / (2 tau)`.
///
/// Only the component of `w` along `x` moves: with `s = ||x||^2`,
/// `v = x (y/s + S(x^T w / s - y/s; tau)) + (I - x x^T / s) w`.
/// `x` must be nonzero.
pub fn labeled_node_update(w: &[f64], x: &[f64], y: f64, tau: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    labeled_node_update_in_place(&mut out, x, y, tau);
    out
}

pub fn labeled_node_update_in_place(w: &mut [f64], x: &[f64], y: f64, tau: f64) {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    debug_assert!(sq > 0.0);
    let y_n = y / sq;
    let w_n = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sq;
    let target = y_n + soft_threshold(w_n - y_n, tau);
    // replace the x-component w_n by target
    let shift = target - w_n;
    for (v, xi) in w.iter_mut().zip(x) {
        *v += shift * xi;
    }
}
