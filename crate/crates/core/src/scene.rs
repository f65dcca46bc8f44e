//! Seeded synthetic multispectral scenes: a handful of materials with smooth
//! reflectance spectra laid out as anti-aliased shapes under slowly varying
//! illumination.
//!
//! Materials come from a shared library so that scenes with different layout
//! seeds still draw on related spectra, like the scenes of a real dataset.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::SpectralCube;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// Materials used by this scene, drawn from the library.
    pub materials: usize,
    pub library_size: usize,
    pub library_seed: u64,
    pub shapes: usize,
    /// Layout, illumination and material selection.
    pub seed: u64,
}

impl SceneConfig {
    pub fn new(height: usize, width: usize, seed: u64) -> Self {
        Self {
            height,
            width,
            materials: 6,
            library_size: 16,
            library_seed: 0,
            shapes: 10,
            seed,
        }
    }
}

/// Reflectance of one material: baseline plus two Gaussian bumps.
fn material_spectrum(rng: &mut ChaCha8Rng, wavelengths: &[f64]) -> Vec<f64> {
    let (lo, hi) = (wavelengths[0], *wavelengths.last().unwrap());
    let span = (hi - lo).max(1.0);
    let base = rng.random_range(0.05..0.35);
    let bumps: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.1..0.6),
                lo + rng.random_range(0.0..1.0) * span,
                rng.random_range(0.08..0.3) * span,
            )
        })
        .collect();
    wavelengths
        .iter()
        .map(|&l| {
            let v: f64 = base
                + bumps
                    .iter()
                    .map(|(a, c, s)| a * (-(l - c).powi(2) / (2.0 * s * s)).exp())
                    .sum::<f64>();
            v.clamp(0.02, 0.98)
        })
        .collect()
}

enum Shape {
    Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
    Disc { cy: f64, cx: f64, r: f64 },
}

impl Shape {
    /// Signed distance, negative inside.
    fn distance(&self, y: f64, x: f64) -> f64 {
        match *self {
            Shape::Rect { y0, x0, y1, x1 } => {
                let dy = (y0 - y).max(y - y1);
                let dx = (x0 - x).max(x - x1);
                dy.max(dx)
            }
            Shape::Disc { cy, cx, r } => ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() - r,
        }
    }
}

pub fn synthetic_scene(cfg: &SceneConfig, wavelengths_nm: &[f64]) -> Result<SpectralCube> {
    let mut lib_rng = ChaCha8Rng::seed_from_u64(cfg.library_seed);
    let library: Vec<Vec<f64>> = (0..cfg.library_size.max(1))
        .map(|_| material_spectrum(&mut lib_rng, wavelengths_nm))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..library.len()).collect();
    order.shuffle(&mut rng);
    let materials: Vec<&Vec<f64>> = order
        .iter()
        .take(cfg.materials.clamp(1, library.len()))
        .map(|&i| &library[i])
        .collect();
    let (h, w) = (cfg.height, cfg.width);
    let (hf, wf) = (h as f64, w as f64);
    let q = wavelengths_nm.len();
    let shapes: Vec<(Shape, usize)> = (0..cfg.shapes)
        .map(|_| {
            let m = rng.random_range(0..materials.len());
            let s = if rng.random_bool(0.5) {
                let (y0, x0) = (rng.random_range(0.0..hf * 0.8), rng.random_range(0.0..wf * 0.8));
                Shape::Rect {
                    y0,
                    x0,
                    y1: y0 + rng.random_range(0.1..0.5) * hf,
                    x1: x0 + rng.random_range(0.1..0.5) * wf,
                }
            } else {
                Shape::Disc {
                    cy: rng.random_range(0.0..hf),
                    cx: rng.random_range(0.0..wf),
                    r: rng.random_range(0.05..0.25) * hf.min(wf),
                }
            };
            (s, m)
        })
        .collect();
    let (gy, gx) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
    let (fy, fx) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));

    let n = h * w;
    let mut data = vec![0.0; q * n];
    let mut mix = vec![0.0; materials.len()];
    for y in 0..h {
        for x in 0..w {
            let (yc, xc) = (y as f64 + 0.5, x as f64 + 0.5);
            mix.iter_mut().for_each(|m| *m = 0.0);
            mix[0] = 1.0;
            // painter's order with one-pixel soft edges
            for (shape, m) in &shapes {
                let cover = (0.5 - shape.distance(yc, xc)).clamp(0.0, 1.0);
                if cover > 0.0 {
                    mix.iter_mut().for_each(|v| *v *= 1.0 - cover);
                    mix[*m] += cover;
                }
            }
            let light = 0.8
                + gy * (yc / hf - 0.5)
                + gx * (xc / wf - 0.5)
                + 0.05 * (fy * 6.3 * yc / hf).sin() * (fx * 6.3 * xc / wf).cos();
            let p = y * w + x;
            for b in 0..q {
                let refl: f64 = mix.iter().zip(&materials).map(|(a, s)| a * s[b]).sum();
                data[b * n + p] = (refl * light).clamp(0.0, 1.0);
            }
        }
    }
    SpectralCube::new(h, w, wavelengths_nm.to_vec(), data)
}
