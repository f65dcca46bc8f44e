//! File formats for the intermediate products of the pipeline.
//!
//! A capture stack is a directory holding `stack.toml` (geometry and
//! filters) and `captures.ssrc` (the low-resolution images, one "band" per
//! aperture). Single images and multi-band fields are stored as cube files
//! whose wavelength axis just counts bands.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ssr_core::cubefile::RawCube;
use ssr_core::{ApertureStack, BandImage, Capture, GeometricTransform, MultiBandField, NotchFilter, SpectralCube};

use crate::error::{CliError, Result};

pub const STACK_META: &str = "stack.toml";
pub const STACK_DATA: &str = "captures.ssrc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StackMeta {
    r: usize,
    /// Band grid of the scene the stack was taken from.
    wavelengths_nm: Vec<f64>,
    capture: Vec<CaptureMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CaptureMeta {
    aperture_index: usize,
    pan: bool,
    center_nm: f64,
    half_width_nm: f64,
    dx: f64,
    dy: f64,
    rotation_deg: f64,
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_raw(path: &Path, raw: &RawCube) -> Result<()> {
    write_bytes(path, &raw.to_bytes()?)
}

pub fn read_raw(path: &Path) -> Result<RawCube> {
    RawCube::from_bytes(&read_bytes(path)?).map_err(|e| format_error(path, e))
}

fn format_error(path: &Path, e: ssr_core::SsrError) -> CliError {
    CliError::Dataset(format!("{}: {e}", path.display()))
}

pub fn write_cube(path: &Path, cube: &SpectralCube) -> Result<()> {
    write_raw(path, &RawCube::from(cube))
}

pub fn read_cube(path: &Path) -> Result<SpectralCube> {
    read_raw(path)?.into_cube().map_err(|e| format_error(path, e))
}

fn index_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

pub fn field_to_raw(f: &MultiBandField) -> RawCube {
    RawCube {
        q: f.bands,
        height: f.height,
        width: f.width,
        wavelengths_nm: index_axis(f.bands),
        data: f.data.clone(),
    }
}

pub fn raw_to_field(raw: RawCube) -> Result<MultiBandField> {
    Ok(MultiBandField::new(raw.q, raw.height, raw.width, raw.data)?)
}

pub fn write_image(path: &Path, img: &BandImage) -> Result<()> {
    write_raw(
        path,
        &RawCube {
            q: 1,
            height: img.height,
            width: img.width,
            wavelengths_nm: vec![0.0],
            data: img.data.clone(),
        },
    )
}

pub fn read_image(path: &Path) -> Result<BandImage> {
    let raw = read_raw(path)?;
    if raw.q != 1 {
        return Err(CliError::Dataset(format!(
            "{}: expected a single image, found {} bands",
            path.display(),
            raw.q
        )));
    }
    Ok(BandImage::new(raw.height, raw.width, raw.data)?)
}

pub fn save_stack(dir: &Path, stack: &ApertureStack, wavelengths_nm: &[f64]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let meta = StackMeta {
        r: stack.r,
        wavelengths_nm: wavelengths_nm.to_vec(),
        capture: stack
            .captures
            .iter()
            .map(|c| CaptureMeta {
                aperture_index: c.aperture_index,
                pan: c.filter.is_panchromatic,
                center_nm: c.filter.center_nm,
                half_width_nm: c.filter.half_width_nm,
                dx: c.transform.dx,
                dy: c.transform.dy,
                rotation_deg: c.transform.rotation_deg,
            })
            .collect(),
    };
    let text = toml::to_string(&meta).map_err(|e| CliError::Config(e.to_string()))?;
    write_bytes(&dir.join(STACK_META), text.as_bytes())?;
    let (m, n) = stack.low_dims();
    let raw = RawCube {
        q: stack.k(),
        height: m,
        width: n,
        wavelengths_nm: stack.captures.iter().map(|c| c.aperture_index as f64).collect(),
        data: stack.concatenated(),
    };
    write_raw(&dir.join(STACK_DATA), &raw)
}

/// Returns the stack and the wavelength grid it was simulated on.
pub fn load_stack(dir: &Path) -> Result<(ApertureStack, Vec<f64>)> {
    let meta_path = dir.join(STACK_META);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: StackMeta = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", meta_path.display())))?;
    let raw = read_raw(&dir.join(STACK_DATA))?;
    if raw.q != meta.capture.len() {
        return Err(CliError::Dataset(format!(
            "{}: {} captures described but {} stored",
            dir.display(),
            meta.capture.len(),
            raw.q
        )));
    }
    let plane = raw.height * raw.width;
    let captures = meta
        .capture
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let filter = if c.pan {
                NotchFilter::panchromatic()
            } else {
                NotchFilter::notch(c.center_nm, c.half_width_nm)?
            };
            Ok(Capture {
                aperture_index: c.aperture_index,
                image: BandImage::new(raw.height, raw.width, raw.data[i * plane..(i + 1) * plane].to_vec())?,
                filter,
                transform: GeometricTransform {
                    dx: c.dx,
                    dy: c.dy,
                    rotation_deg: c.rotation_deg,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ApertureStack::new(captures, meta.r)?, meta.wavelengths_nm))
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes `[0, 1]` values as a 16-bit grayscale PNG.
pub fn write_png16(path: &Path, img: &BandImage) -> Result<()> {
    let buf: Vec<u16> = img.data.iter().map(|&v| to_u16(v)).collect();
    let out = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(img.width as u32, img.height as u32, buf)
        .expect("buffer matches dimensions");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    out.save(path).map_err(|e| CliError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One PNG per band, named `<prefix>_NN.png` with a one-based index like the
/// CAVE files.
pub fn write_cube_pngs(dir: &Path, prefix: &str, cube: &SpectralCube) -> Result<()> {
    for b in 0..cube.q_bands() {
        let img = ssr_core::cube_band(cube, b)?;
        write_png16(&dir.join(format!("{prefix}_{:02}.png", b + 1)), &img)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssr_core::scene::{synthetic_scene, SceneConfig};
    use ssr_core::simulate::{default_filters, default_transforms, simulate_capture};

    #[test]
    fn stack_round_trip() {
        let wl = SpectralCube::cave_wavelengths();
        let truth = synthetic_scene(&SceneConfig::new(12, 12, 5), &wl).unwrap();
        let stack = simulate_capture(&truth, &default_filters(), &default_transforms(3, 0.1, 2), 3, 0.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_stack(dir.path(), &stack, &wl).unwrap();
        let (back, wl2) = load_stack(dir.path()).unwrap();
        assert_eq!(wl2, wl);
        assert_eq!(back.r, 3);
        assert_eq!(back.filters(), stack.filters());
        assert_eq!(back.transforms(), stack.transforms());
        for (a, b) in back.captures.iter().zip(&stack.captures) {
            // stored as f32
            for (x, y) in a.image.data.iter().zip(&b.image.data) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn png_round_trip_is_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = BandImage::new(3, 4, (0..12).map(|i| i as f64 / 11.0).collect()).unwrap();
        let p = dir.path().join("x_01.png");
        write_png16(&p, &img).unwrap();
        let back = crate::cave::read_band_png(&p).unwrap();
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }
}
