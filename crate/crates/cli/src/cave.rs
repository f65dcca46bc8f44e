//! Loader for CAVE-style scenes: one grayscale PNG per band, named
//! `<scene>_01.png` .. `<scene>_31.png`, possibly inside a nested folder.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use ssr_core::{BandImage, SpectralCube};

use crate::error::{CliError, Result};

pub const CAVE_BANDS: usize = 31;

/// Band number from a `..._NN.png` file name, one-based.
fn band_number(path: &Path) -> Option<usize> {
    if !path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
    {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let (_, digits) = stem.rsplit_once('_')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn collect_pngs(dir: &Path, depth: usize, out: &mut BTreeMap<usize, PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| CliError::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            if depth > 0 {
                collect_pngs(&p, depth - 1, out)?;
            }
        } else if let Some(n) = band_number(&p) {
            out.entry(n).or_insert(p);
        }
    }
    Ok(())
}

/// Decodes one band to `[0, 1]`, scaling by the file's bit depth. Colour
/// files are reduced to luma.
pub fn read_band_png(path: &Path) -> Result<BandImage> {
    let img = image::open(path).map_err(|e| CliError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        _ => img
            .to_luma8()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
    };
    Ok(BandImage::new(h, w, data)?)
}

/// Loads all 31 bands (400-700 nm in 10 nm steps) of the scene in `dir`.
pub fn load_cave_scene(dir: &Path) -> Result<SpectralCube> {
    let mut found = BTreeMap::new();
    collect_pngs(dir, 2, &mut found)?;
    let wavelengths = SpectralCube::cave_wavelengths();
    let mut bands = Vec::with_capacity(CAVE_BANDS);
    for (i, nm) in wavelengths.iter().enumerate() {
        let path = found.get(&(i + 1)).ok_or_else(|| {
            CliError::Dataset(format!(
                "{}: band {} ({nm} nm) is missing",
                dir.display(),
                i + 1
            ))
        })?;
        bands.push(read_band_png(path)?);
    }
    if let Some((&extra, _)) = found.range(CAVE_BANDS + 1..).next() {
        return Err(CliError::Dataset(format!(
            "{}: unexpected band number {extra}",
            dir.display()
        )));
    }
    Ok(SpectralCube::from_bands(&bands, wavelengths)?)
}

/// Loads a scene and keeps the central `crop x crop` window.
pub fn load_cave_scene_cropped(dir: &Path, crop: usize) -> Result<SpectralCube> {
    let cube = load_cave_scene(dir)?;
    if cube.height() == crop && cube.width() == crop {
        return Ok(cube);
    }
    Ok(cube.center_crop(crop, crop)?)
}
