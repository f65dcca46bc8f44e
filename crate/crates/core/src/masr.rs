//! Multi-aperture maximum-likelihood super-resolution.
//!
//! Multiplicative (Richardson-Lucy / EM) update on the stacked system
//! `y = G x`:
//!
//! `x <- x * G^T (y / max(G x, eps)) / G^T 1`
//!
//! which keeps every iterate positive and leaves any exact non-negative
//! solution of `G x = y` fixed.

use crate::cube::BandImage;
use crate::error::{Result, SsrError};
use crate::operators::{upsample_bilinear, warp_image, SparseOperator};
use crate::simulate::ApertureStack;

/// Positivity floor applied before every division.
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MasrState {
    pub estimate: BandImage,
    pub iteration: usize,
    /// `|G x - y|^2` for the initial estimate and after every iteration.
    pub fidelity_history: Vec<f64>,
}

/// Squared data misfit `|G x - y|^2`.
pub fn fidelity(g: &SparseOperator, x: &[f64], y: &[f64]) -> f64 {
    g.apply(x)
        .iter()
        .zip(y)
        .map(|(p, o)| (p - o) * (p - o))
        .sum()
}

/// Bilinear upsample of the mean of the registered low-resolution captures.
pub fn initial_estimate(stack: &ApertureStack) -> Result<BandImage> {
    let (m, n) = stack.low_dims();
    let mut acc = vec![0.0; m * n];
    for c in &stack.captures {
        let t = c.transform.scaled(1.0 / stack.r as f64).inverse();
        let reg = if t.is_identity() {
            c.image.clone()
        } else {
            warp_image(&c.image, &t)?
        };
        acc.iter_mut().zip(&reg.data).for_each(|(a, v)| *a += v);
    }
    let k = stack.k() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    let mean = BandImage::new(m, n, acc)?;
    let mut up = upsample_bilinear(&mean, stack.r);
    up.data.iter_mut().for_each(|v| *v = v.max(EPS));
    Ok(up)
}

pub fn ml_superresolve(stack: &ApertureStack, g: &SparseOperator, n_iters: usize) -> Result<BandImage> {
    Ok(ml_superresolve_with_history(stack, g, n_iters)?.estimate)
}

pub fn ml_superresolve_with_history(
    stack: &ApertureStack,
    g: &SparseOperator,
    n_iters: usize,
) -> Result<MasrState> {
    let y = stack.concatenated();
    let (h, w) = stack.high_dims();
    if g.n_rows() != y.len() || g.n_cols() != h * w {
        return Err(SsrError::Shape(format!(
            "system matrix is {}x{}, observations need {}x{}",
            g.n_rows(),
            g.n_cols(),
            y.len(),
            h * w
        )));
    }
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(SsrError::NegativeObservation { index, value });
    }
    if n_iters == 0 {
        return Err(SsrError::InvalidParam("masr needs at least one iteration".into()));
    }
    let init = initial_estimate(stack)?;
    run_from(g, &y, init, n_iters)
}

/// Runs the multiplicative update from an explicit starting image.
pub fn run_from(
    g: &SparseOperator,
    y: &[f64],
    init: BandImage,
    n_iters: usize,
) -> Result<MasrState> {
    if init.len() != g.n_cols() || y.len() != g.n_rows() {
        return Err(SsrError::Shape("initial estimate does not fit the system".into()));
    }
    let gt = g.transpose();
    let sensitivity = gt.apply(&vec![1.0; g.n_rows()]);
    let mut x = init.data;
    x.iter_mut().for_each(|v| *v = v.max(EPS));
    let mut history = Vec::with_capacity(n_iters + 1);
    let mut pred = vec![0.0; g.n_rows()];
    let mut back = vec![0.0; g.n_cols()];

    g.apply_into(&x, &mut pred);
    history.push(misfit(&pred, y));
    for _ in 0..n_iters {
        for (p, o) in pred.iter_mut().zip(y) {
            *p = o / p.max(EPS);
        }
        gt.apply_into(&pred, &mut back);
        for ((v, b), s) in x.iter_mut().zip(&back).zip(&sensitivity) {
            if *s > 0.0 {
                *v = (*v * b / s).max(EPS);
            }
        }
        g.apply_into(&x, &mut pred);
        history.push(misfit(&pred, y));
    }
    Ok(MasrState {
        estimate: BandImage {
            height: init.height,
            width: init.width,
            data: x,
        },
        iteration: n_iters,
        fidelity_history: history,
    })
}

fn misfit(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, o)| (p - o) * (p - o)).sum()
}
