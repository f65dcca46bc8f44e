//! Reconstruction quality: RMSE and PSNR on the 8-bit scale, SSIM, SAM.

use std::fmt::Write as _;

use crate::cube::{BandImage, SpectralCube};
use crate::error::{Result, SsrError};

/// PSNR reported for a band with zero error.
pub const PSNR_CAP_DB: f64 = 99.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check(a: &SpectralCube, b: &SpectralCube) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(SsrError::Shape(format!(
            "cubes differ: {}x{}x{} vs {}x{}x{}",
            a.q_bands(),
            a.height(),
            a.width(),
            b.q_bands(),
            b.height(),
            b.width()
        )))
    }
}

fn mse_8bit(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = 255.0 * x - 255.0 * y;
            d * d
        })
        .sum::<f64>()
        / a.len().max(1) as f64
}

/// Cube-global RMSE on the 0-255 scale.
pub fn rmse_8bit(a: &SpectralCube, b: &SpectralCube) -> Result<f64> {
    check(a, b)?;
    Ok(mse_8bit(a.data(), b.data()).sqrt())
}

pub fn band_rmse_8bit(a: &SpectralCube, b: &SpectralCube) -> Result<Vec<f64>> {
    check(a, b)?;
    Ok((0..a.q_bands())
        .map(|k| mse_8bit(a.band_slice(k), b.band_slice(k)).sqrt())
        .collect())
}

pub fn band_psnr_db(a: &SpectralCube, b: &SpectralCube) -> Result<Vec<f64>> {
    Ok(band_rmse_8bit(a, b)?
        .into_iter()
        .map(|r| {
            if r == 0.0 {
                PSNR_CAP_DB
            } else {
                (20.0 * (255.0 / r).log10()).min(PSNR_CAP_DB)
            }
        })
        .collect())
}

/// Band-averaged PSNR in dB.
pub fn psnr_db(a: &SpectralCube, b: &SpectralCube) -> Result<f64> {
    Ok(mean(&band_psnr_db(a, b)?))
}

/// Gaussian window side used for an image of this size: 11, or the largest
/// odd size that fits.
pub fn ssim_window(h: usize, w: usize) -> usize {
    let m = h.min(w).min(SSIM_WINDOW);
    if m.is_multiple_of(2) {
        m.saturating_sub(1).max(1)
    } else {
        m
    }
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut win = Vec::with_capacity(size * size);
    for gy in &g {
        for gx in &g {
            win.push(gy * gx);
        }
    }
    let s: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= s);
    win
}

/// Mean SSIM of one band pair over all fully-contained windows, on the
/// 8-bit scale.
pub fn ssim_band(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let size = ssim_window(h, w);
    let win = gaussian_window(size);
    let c1 = (SSIM_K1 * 255.0).powi(2);
    let c2 = (SSIM_K2 * 255.0).powi(2);
    let (oh, ow) = (h + 1 - size, w + 1 - size);
    let mut total = 0.0;
    for y0 in 0..oh {
        for x0 in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wy in 0..size {
                for wx in 0..size {
                    let g = win[wy * size + wx];
                    let i = (y0 + wy) * w + x0 + wx;
                    let (va, vb) = (255.0 * a[i], 255.0 * b[i]);
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (oh * ow) as f64
}

pub fn band_ssim(a: &SpectralCube, b: &SpectralCube) -> Result<Vec<f64>> {
    check(a, b)?;
    Ok((0..a.q_bands())
        .map(|k| ssim_band(a.band_slice(k), b.band_slice(k), a.height(), a.width()))
        .collect())
}

/// Band-averaged SSIM.
pub fn ssim(a: &SpectralCube, b: &SpectralCube) -> Result<f64> {
    Ok(mean(&band_ssim(a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamResult {
    pub mean_radians: f64,
    /// Pixels where either spectrum is all zero.
    pub skipped: usize,
}

pub fn sam(a: &SpectralCube, b: &SpectralCube) -> Result<SamResult> {
    check(a, b)?;
    let (n, q) = (a.pixels(), a.q_bands());
    let (da, db) = (a.data(), b.data());
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..n {
        let (mut aa, mut bb) = (0.0, 0.0);
        for k in 0..q {
            aa += da[k * n + p] * da[k * n + p];
            bb += db[k * n + p] * db[k * n + p];
        }
        if aa == 0.0 || bb == 0.0 {
            continue;
        }
        // 2 atan2(|u - v|, |u + v|) on the unit vectors; exact at zero angle
        let (na, nb) = (aa.sqrt(), bb.sqrt());
        let (mut diff, mut sum) = (0.0, 0.0);
        for k in 0..q {
            let (u, v) = (da[k * n + p] / na, db[k * n + p] / nb);
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        total += 2.0 * diff.sqrt().atan2(sum.sqrt());
        counted += 1;
    }
    Ok(SamResult {
        mean_radians: if counted == 0 { 0.0 } else { total / counted as f64 },
        skipped: n - counted,
    })
}

/// Mean spectral angle over pixels with non-zero spectra.
pub fn sam_radians(a: &SpectralCube, b: &SpectralCube) -> Result<f64> {
    Ok(sam(a, b)?.mean_radians)
}

/// `min(gain * |a - b|, 1)` for one band.
pub fn error_map(a: &SpectralCube, b: &SpectralCube, band: usize, gain: f64) -> Result<BandImage> {
    check(a, b)?;
    if band >= a.q_bands() {
        return Err(SsrError::BandIndex {
            index: band,
            len: a.q_bands(),
        });
    }
    let data = a
        .band_slice(band)
        .iter()
        .zip(b.band_slice(band))
        .map(|(x, y)| (gain * (x - y).abs()).min(1.0))
        .collect();
    BandImage::new(a.height(), a.width(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub scene: String,
    pub psnr_db: Vec<f64>,
    pub ssim: Vec<f64>,
    pub rmse_8bit: Vec<f64>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    /// Cube-global RMSE on the 0-255 scale.
    pub rmse_8bit_cube: f64,
    pub sam_radians: f64,
    pub sam_skipped: usize,
}

impl QualityReport {
    /// `reference` is the ground truth.
    pub fn evaluate(scene: &str, reconstructed: &SpectralCube, reference: &SpectralCube) -> Result<Self> {
        let psnr = band_psnr_db(reconstructed, reference)?;
        let ssim = band_ssim(reconstructed, reference)?;
        let sam = sam(reconstructed, reference)?;
        Ok(Self {
            scene: scene.to_string(),
            mean_psnr_db: mean(&psnr),
            mean_ssim: mean(&ssim),
            rmse_8bit: band_rmse_8bit(reconstructed, reference)?,
            rmse_8bit_cube: rmse_8bit(reconstructed, reference)?,
            psnr_db: psnr,
            ssim,
            sam_radians: sam.mean_radians,
            sam_skipped: sam.skipped,
        })
    }

    /// One `key = value` line per metric.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scene = \"{}\"", self.scene);
        let _ = writeln!(s, "rmse_8bit = {:.6}", self.rmse_8bit_cube);
        let _ = writeln!(s, "sam_radians = {:.6}", self.sam_radians);
        let _ = writeln!(s, "sam_skipped = {}", self.sam_skipped);
        let _ = writeln!(s, "psnr_db = {:.6}", self.mean_psnr_db);
        let _ = writeln!(s, "ssim = {:.6}", self.mean_ssim);
        for (k, ((p, q), r)) in self
            .psnr_db
            .iter()
            .zip(&self.ssim)
            .zip(&self.rmse_8bit)
            .enumerate()
        {
            let _ = writeln!(s, "band.{k}.psnr_db = {p:.6}");
            let _ = writeln!(s, "band.{k}.ssim = {q:.6}");
            let _ = writeln!(s, "band.{k}.rmse_8bit = {r:.6}");
        }
        s
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}
