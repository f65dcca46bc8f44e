//! Integer-pixel shift estimation by phase correlation.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use ssr_core::BandImage;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift {
    pub dx: i64,
    pub dy: i64,
    /// Height of the correlation peak, 1 for a pure circular shift.
    pub peak: f64,
}

fn fft2(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for r in data.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut column = vec![Complex64::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

fn spectrum(img: &BandImage) -> Vec<Complex64> {
    let mean = img.mean();
    let mut d: Vec<Complex64> = img.data.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    fft2(&mut d, img.height, img.width, false);
    d
}

fn wrap(i: usize, n: usize) -> i64 {
    if i > n / 2 {
        i as i64 - n as i64
    } else {
        i as i64
    }
}

/// Shift `d` such that `moving(p) ~ reference(p + d)`, the same pull
/// convention as `GeometricTransform`.
pub fn phase_correlate(reference: &BandImage, moving: &BandImage) -> Result<Shift> {
    let (h, w) = (reference.height, reference.width);
    if (moving.height, moving.width) != (h, w) {
        return Err(CliError::Dataset(format!(
            "cannot register {}x{} against {h}x{w}",
            moving.height, moving.width
        )));
    }
    let a = spectrum(reference);
    let b = spectrum(moving);
    let mut cross: Vec<Complex64> = a
        .iter()
        .zip(&b)
        .map(|(fa, fb)| {
            let c = fa * fb.conj();
            let n = c.norm();
            if n > 1e-12 {
                c / n
            } else {
                Complex64::default()
            }
        })
        .collect();
    fft2(&mut cross, h, w, true);
    let scale = (h * w) as f64;
    let (best, peak) = cross
        .iter()
        .map(|c| c.re / scale)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(Shift {
        dx: wrap(best % w, w),
        dy: wrap(best / w, h),
        peak,
    })
}
