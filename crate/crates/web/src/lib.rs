//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The page offers three things: the super-resolution bound for a camera
//! array, the transmittance of a notch filter, and a small synthetic
//! capture-and-reconstruct run rendered to canvases.

use ssr_core::dictionary::{train_dictionary, Dictionary, KsvdConfig};
use ssr_core::metrics::{rmse_8bit, sam_radians};
use ssr_core::pipeline::{run_ssr, training_spectra};
use ssr_core::scene::{synthetic_scene, SceneConfig};
use ssr_core::simulate::{default_filters, default_transforms, notch_transmittance, simulate_capture};
use ssr_core::{sr_factor, ApertureStack, BandImage, NotchFilter, OpticsSpec, SpectralCube, SsrParams};
use wasm_bindgen::prelude::*;

const R: usize = 3;

#[wasm_bindgen(js_name = srFactor)]
pub fn sr_factor_js(aperture_mm: f64, focal_mm: f64, pixel_um: f64, wavelength_nm: f64, apertures: usize) -> f64 {
    sr_factor(&OpticsSpec {
        aperture_diameter_mm: aperture_mm,
        focal_length_mm: focal_mm,
        pixel_pitch_um: pixel_um,
        wavelength_nm,
        k_apertures: apertures,
    })
}

/// Transmittance sampled on `start, start + step, ...` (`count` samples).
#[wasm_bindgen(js_name = notchCurve)]
pub fn notch_curve(center_nm: f64, half_width_nm: f64, start_nm: f64, step_nm: f64, count: usize) -> Vec<f64> {
    let wl: Vec<f64> = (0..count).map(|i| start_nm + step_nm * i as f64).collect();
    let f = NotchFilter {
        center_nm,
        half_width_nm: half_width_nm.max(0.0),
        is_panchromatic: false,
    };
    notch_transmittance(&f, &wl)
}

/// Synthetic scene, its nine captures and, once run, the reconstruction.
#[wasm_bindgen]
pub struct Demo {
    truth: SpectralCube,
    stack: ApertureStack,
    dict: Dictionary,
    pan: Option<BandImage>,
    recon: Option<SpectralCube>,
}

impl Demo {
    /// `size` is rounded down to a multiple of 3.
    pub fn build(size: usize, seed: u32, noise: f64) -> Result<Self, String> {
        let size = (size / R * R).max(R * 4);
        let wl = SpectralCube::cave_wavelengths();
        let truth = synthetic_scene(&SceneConfig::new(size, size, u64::from(seed)), &wl).map_err(|e| e.to_string())?;
        let stack = simulate_capture(&truth, &default_filters(), &default_transforms(R, 0.1, u64::from(seed)), R, noise, u64::from(seed))
            .map_err(|e| e.to_string())?;
        // trained on scenes the demo never shows
        let train: Vec<SpectralCube> = (0..3)
            .map(|i| synthetic_scene(&SceneConfig::new(48, 48, 1000 + i), &wl))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let refs: Vec<&SpectralCube> = train.iter().collect();
        let cfg = KsvdConfig {
            n_atoms: 2 * wl.len(),
            sparsity: 8,
            iters: 8,
            seed: 0,
        };
        let (dict, _) = train_dictionary(&training_spectra(&refs, 2), wl.len(), &cfg).map_err(|e| e.to_string())?;
        Ok(Self {
            truth,
            stack,
            dict,
            pan: None,
            recon: None,
        })
    }

    /// Runs all three stages; returns `(rmse_8bit, sam_radians)`.
    pub fn run_stages(&mut self, pansharpen_iters: usize, admm_iters: usize) -> Result<(f64, f64), String> {
        let mut params = SsrParams::default();
        params.pansharpen.iter_max = pansharpen_iters.max(1);
        params.specrecon.iter_max = admm_iters.max(1);
        let stages = run_ssr(&self.stack, &self.dict, self.truth.wavelengths_nm(), &params).map_err(|e| e.to_string())?;
        let cube = stages.specrecon.cube;
        let rmse = rmse_8bit(&cube, &self.truth).map_err(|e| e.to_string())?;
        let sam = sam_radians(&cube, &self.truth).map_err(|e| e.to_string())?;
        self.pan = Some(stages.masr.estimate);
        self.recon = Some(cube);
        Ok((rmse, sam))
    }
}

fn gray_rgba(data: &[f64], gain: f64) -> Vec<u8> {
    data.iter()
        .flat_map(|&v| {
            let g = (v * gain * 255.0).clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

fn nearest_band(cube: &SpectralCube, nm: f64) -> usize {
    let wl = cube.wavelengths_nm();
    (0..wl.len())
        .min_by(|&a, &b| (wl[a] - nm).abs().total_cmp(&(wl[b] - nm).abs()))
        .unwrap_or(0)
}

/// False-colour preview from the 620, 540 and 460 nm bands.
fn rgb_preview(cube: &SpectralCube) -> Vec<u8> {
    let bands = [620.0, 540.0, 460.0].map(|nm| cube.band_slice(nearest_band(cube, nm)));
    (0..cube.pixels())
        .flat_map(|p| {
            let c = bands.map(|b| (b[p] * 1.6 * 255.0).clamp(0.0, 255.0) as u8);
            [c[0], c[1], c[2], 255]
        })
        .collect()
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u32, noise: f64) -> Result<Demo, JsError> {
        Self::build(size, seed, noise).map_err(|e| JsError::new(&e))
    }

    pub fn size(&self) -> usize {
        self.truth.height()
    }

    #[wasm_bindgen(js_name = lowSize)]
    pub fn low_size(&self) -> usize {
        self.stack.low_dims().0
    }

    pub fn apertures(&self) -> usize {
        self.stack.k()
    }

    /// Runs the pipeline; returns `[rmse_8bit, sam_radians]`.
    pub fn run(&mut self, pansharpen_iters: usize, admm_iters: usize) -> Result<Vec<f64>, JsError> {
        let (rmse, sam) = self.run_stages(pansharpen_iters, admm_iters).map_err(|e| JsError::new(&e))?;
        Ok(vec![rmse, sam])
    }

    #[wasm_bindgen(js_name = truthRgba)]
    pub fn truth_rgba(&self) -> Vec<u8> {
        rgb_preview(&self.truth)
    }

    /// Empty until `run` has been called.
    #[wasm_bindgen(js_name = reconRgba)]
    pub fn recon_rgba(&self) -> Vec<u8> {
        self.recon.as_ref().map(rgb_preview).unwrap_or_default()
    }

    #[wasm_bindgen(js_name = captureRgba)]
    pub fn capture_rgba(&self, aperture: usize) -> Vec<u8> {
        self.stack
            .captures
            .get(aperture)
            .map(|c| gray_rgba(&c.image.data, 1.6))
            .unwrap_or_default()
    }

    #[wasm_bindgen(js_name = panRgba)]
    pub fn pan_rgba(&self) -> Vec<u8> {
        self.pan.as_ref().map(|p| gray_rgba(&p.data, 1.6)).unwrap_or_default()
    }

    /// Truth followed by the reconstruction (if any) at pixel `(x, y)`.
    pub fn spectra(&self, x: usize, y: usize) -> Vec<f64> {
        let n = self.truth.width();
        if x >= n || y >= self.truth.height() {
            return Vec::new();
        }
        let p = y * n + x;
        let mut out = self.truth.spectrum(p);
        if let Some(r) = &self.recon {
            out.extend(r.spectrum(p));
        }
        out
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.truth.wavelengths_nm().to_vec()
    }
}
