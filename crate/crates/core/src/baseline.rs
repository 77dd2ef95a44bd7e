//! Single least-absolute-deviation (LAD) linear model, fit by a
//! diminishing-step subgradient method.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LadFit {
    pub weights: Vec<f64>,
    /// `sum |y_i - w^T x_i|` at `weights`.
    pub loss: f64,
    pub iterations: usize,
}

fn loss(w: &[f64], xs: &[&[f64]], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).abs())
        .sum()
}

/// Number of restarts in [`fit_lad`].
const EPOCHS: usize = 25;

/// Minimizes `sum_i |y_i - w^T x_i|` from `w = 0`. The run is split into
/// epochs restarted at the best iterate so far; within epoch `e` the step is
/// `r 2^-e / (G sqrt(t))`.
pub fn fit_lad(xs: &[&[f64]], ys: &[f64], iterations: usize) -> Result<LadFit> {
    if xs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if xs.len() != ys.len() {
        return Err(Error::dim("labels", xs.len(), ys.len()));
    }
    let p = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != p) {
        return Err(Error::dim("feature dimension", p, x.len()));
    }
    let grad_bound: f64 = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    if grad_bound == 0.0 {
        return Err(Error::ZeroFeature(0));
    }
    // rough distance to a solution: largest single-point exact-fit norm
    let radius = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                y.abs() / n
            } else {
                0.0
            }
        })
        .fold(1.0, f64::max);

    let mut w = vec![0.0; p];
    let mut best = w.clone();
    let mut best_loss = loss(&w, xs, ys);
    let mut g = vec![0.0; p];
    let epoch_len = (iterations / EPOCHS).max(1);
    let mut k = 0;
    for epoch in 0.. {
        if k >= iterations {
            break;
        }
        let scale = radius * 0.5f64.powi(epoch);
        w.copy_from_slice(&best);
        for t in 1..=epoch_len.min(iterations - k) {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (x, y) in xs.iter().zip(ys) {
                let r = y - x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let s = if r > 0.0 {
                    -1.0
                } else if r < 0.0 {
                    1.0
                } else {
                    0.0
                };
                for (gv, xv) in g.iter_mut().zip(x.iter()) {
                    *gv += s * xv;
                }
            }
            let step = scale / (grad_bound * (t as f64).sqrt());
            for (wv, gv) in w.iter_mut().zip(&g) {
                *wv -= step * gv;
            }
            let l = loss(&w, xs, ys);
            if l < best_loss {
                best_loss = l;
                best.copy_from_slice(&w);
            }
            k += 1;
        }
    }
    Ok(LadFit {
        weights: best,
        loss: best_loss,
        iterations,
    })
}
