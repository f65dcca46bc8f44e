//! Vector total variation denoising
//!
//! Solves `min_Z 1/2 |Z - B|^2 + gamma * sum_px sqrt(sum_bands (d1 Z)^2 + (d2 Z)^2)`
//! by projected gradient ascent on the dual field (Chambolle / Bresson-Chan).
//! The group norm couples both derivative directions and every band at a
//! pixel, so edges are pushed to line up across bands.

use crate::error::{Result, SsrError};
use crate::operators::{divergence_into, gradient_into};
use crate::par;
use crate::params::VtvParams;

/// `bands x height x width`, band-major, unconstrained values.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandField {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl MultiBandField {
    pub fn new(bands: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != bands * height * width {
            return Err(SsrError::Shape(format!(
                "field has {} values, expected {bands}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            bands,
            height,
            width,
            data,
        })
    }

    pub fn zeros(bands: usize, height: usize, width: usize) -> Self {
        Self {
            bands,
            height,
            width,
            data: vec![0.0; bands * height * width],
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.bands == other.bands && self.height == other.height && self.width == other.width
    }
}

/// Dual variable: one `(px, py)` pair per band and pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    pub px: Vec<f64>,
    pub py: Vec<f64>,
}

impl DualField {
    pub fn zeros(len: usize) -> Self {
        Self {
            px: vec![0.0; len],
            py: vec![0.0; len],
        }
    }
}

/// Joint `l2,1` norm of the forward-difference gradient.
pub fn vtv_norm(z: &MultiBandField) -> f64 {
    let n = z.pixels();
    let mut gx = vec![0.0; z.data.len()];
    let mut gy = vec![0.0; z.data.len()];
    for b in 0..z.bands {
        let s = b * n..(b + 1) * n;
        gradient_into(&z.data[s.clone()], z.height, z.width, &mut gx[s.clone()], &mut gy[s]);
    }
    (0..n)
        .map(|p| {
            (0..z.bands)
                .map(|b| {
                    let i = b * n + p;
                    gx[i] * gx[i] + gy[i] * gy[i]
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `1/2 |Z - B|^2 + gamma * VTV(Z)`.
pub fn vtv_objective(z: &MultiBandField, b: &MultiBandField, gamma: f64) -> f64 {
    let fid: f64 = z
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    0.5 * fid + gamma * vtv_norm(z)
}

/// Proximal operator of `gamma * VTV` at `b`.
pub fn vtv_denoise(b: &MultiBandField, gamma: f64, params: &VtvParams) -> Result<MultiBandField> {
    let mut dual = DualField::zeros(b.data.len());
    vtv_denoise_with(b, gamma, params, &mut dual, |_, _| {})
}

/// As [`vtv_denoise`] but starting from (and updating) `dual`, calling
/// `monitor(iteration, dual)` after every projection step.
pub fn vtv_denoise_with<F>(
    b: &MultiBandField,
    gamma: f64,
    params: &VtvParams,
    dual: &mut DualField,
    mut monitor: F,
) -> Result<MultiBandField>
where
    F: FnMut(usize, &DualField),
{
    params.validate()?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(SsrError::InvalidParam(format!("gamma must be >= 0, got {gamma}")));
    }
    let len = b.data.len();
    if dual.px.len() != len || dual.py.len() != len {
        return Err(SsrError::Shape("dual field does not match the input".into()));
    }
    if gamma == 0.0 {
        return Ok(b.clone());
    }
    let (h, w, n) = (b.height, b.width, b.pixels());
    let tau = params.dual_step;
    let inv_gamma = 1.0 / gamma;
    let mut work = vec![0.0; len];
    let mut norms = vec![0.0; n];

    for it in 0..params.inner_iters {
        // work = div p - B / gamma
        {
            let (px, py) = (&dual.px, &dual.py);
            par::for_each_chunk(&mut work, n, |band, out| {
                let s = band * n..(band + 1) * n;
                divergence_into(&px[s.clone()], &py[s.clone()], h, w, out);
                for (o, v) in out.iter_mut().zip(&b.data[s]) {
                    *o -= v * inv_gamma;
                }
            });
        }
        // p <- p + tau * grad(work)
        {
            let work = &work;
            let mut gx = std::mem::take(&mut dual.px);
            let mut gy = std::mem::take(&mut dual.py);
            par::for_each_chunk(&mut gx, n, |band, px| {
                let s = band * n..(band + 1) * n;
                let u = &work[s];
                for y in 0..h {
                    for x in 0..w {
                        let i = y * w + x;
                        if x + 1 < w {
                            px[i] += tau * (u[i + 1] - u[i]);
                        }
                    }
                }
            });
            par::for_each_chunk(&mut gy, n, |band, py| {
                let s = band * n..(band + 1) * n;
                let u = &work[s];
                for y in 0..h.saturating_sub(1) {
                    for x in 0..w {
                        let i = y * w + x;
                        py[i] += tau * (u[i + w] - u[i]);
                    }
                }
            });
            dual.px = gx;
            dual.py = gy;
        }
        // project each pixel group onto the unit ball
        {
            let (px, py) = (&dual.px, &dual.py);
            let bands = b.bands;
            par::for_each_chunk(&mut norms, w.max(1), |row, out| {
                for (k, o) in out.iter_mut().enumerate() {
                    let p = row * w + k;
                    let mut s = 0.0;
                    for band in 0..bands {
                        let i = band * n + p;
                        s += px[i] * px[i] + py[i] * py[i];
                    }
                    *o = s.sqrt().max(1.0);
                }
            });
            let norms = &norms;
            par::for_each_chunk(&mut dual.px, n, |_, plane| {
                plane.iter_mut().zip(norms).for_each(|(v, m)| *v /= m);
            });
            par::for_each_chunk(&mut dual.py, n, |_, plane| {
                plane.iter_mut().zip(norms).for_each(|(v, m)| *v /= m);
            });
        }
        monitor(it, dual);
    }
    Ok(primal_from_dual(b, gamma, dual))
}

/// `Z = B - gamma * div p`.
pub fn primal_from_dual(b: &MultiBandField, gamma: f64, dual: &DualField) -> MultiBandField {
    let n = b.pixels();
    let (h, w) = (b.height, b.width);
    let mut out = vec![0.0; b.data.len()];
    par::for_each_chunk(&mut out, n, |band, o| {
        let s = band * n..(band + 1) * n;
        divergence_into(&dual.px[s.clone()], &dual.py[s.clone()], h, w, o);
        for (v, bv) in o.iter_mut().zip(&b.data[s]) {
            *v = bv - gamma * *v;
        }
    });
    MultiBandField {
        bands: b.bands,
        height: h,
        width: w,
        data: out,
    }
}
