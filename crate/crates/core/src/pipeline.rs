//! The three reconstruction stages chained in memory. Callers that need
//! per-stage timing invoke the stage functions individually.

use crate::cube::{BandImage, FilterBank, SpectralCube};
use crate::dictionary::Dictionary;
use crate::error::{Result, SsrError};
use crate::masr::{ml_superresolve_with_history, MasrState};
use crate::operators::build_system_matrix;
use crate::pansharpen::{pansharpen_with_history, PansharpenOutput, PansharpenProblem};
use crate::params::SsrParams;
use crate::simulate::ApertureStack;
use crate::specrecon::{spectral_reconstruct_with_state, SpecReconOutput, StackedResponse};
use crate::vtv::MultiBandField;

pub fn superresolve_stack(stack: &ApertureStack, params: &SsrParams) -> Result<MasrState> {
    let (h, w) = stack.high_dims();
    let g = build_system_matrix(&stack.transforms(), stack.r, h, w)?;
    ml_superresolve_with_history(stack, &g, params.masr_iters)
}

pub fn pansharpen_stack(
    stack: &ApertureStack,
    pan: &BandImage,
    params: &SsrParams,
) -> Result<PansharpenOutput> {
    let problem = PansharpenProblem::from_stack(stack, pan, params.pansharpen, params.vtv)?;
    pansharpen_with_history(&problem)
}

pub fn reconstruct_stack(
    stack: &ApertureStack,
    sharpened: &MultiBandField,
    pan: &BandImage,
    dict: &Dictionary,
    wavelengths_nm: &[f64],
    params: &SsrParams,
) -> Result<SpecReconOutput> {
    let bank = FilterBank::from_filters(&stack.filters(), wavelengths_nm);
    let obs = StackedResponse::new(&bank, sharpened.clone(), wavelengths_nm.to_vec())?;
    spectral_reconstruct_with_state(&obs, dict, pan, &params.specrecon, &params.vtv)
}

#[derive(Debug, Clone)]
pub struct SsrStages {
    pub masr: MasrState,
    pub pansharpen: PansharpenOutput,
    pub specrecon: SpecReconOutput,
}

impl SsrStages {
    pub fn cube(&self) -> &SpectralCube {
        &self.specrecon.cube
    }
}

/// Super-resolve, pan-sharpen, then reconstruct the spectra.
pub fn run_ssr(
    stack: &ApertureStack,
    dict: &Dictionary,
    wavelengths_nm: &[f64],
    params: &SsrParams,
) -> Result<SsrStages> {
    params.validate()?;
    if dict.q() != wavelengths_nm.len() {
        return Err(SsrError::Shape(format!(
            "dictionary has {} bands, wavelength grid has {}",
            dict.q(),
            wavelengths_nm.len()
        )));
    }
    let masr = superresolve_stack(stack, params)?;
    let pansharpen = pansharpen_stack(stack, &masr.estimate, params)?;
    let specrecon = reconstruct_stack(
        stack,
        &pansharpen.field,
        &masr.estimate,
        dict,
        wavelengths_nm,
        params,
    )?;
    Ok(SsrStages {
        masr,
        pansharpen,
        specrecon,
    })
}

/// Column-major spectra sampled every `stride` pixels along both axes.
pub fn training_spectra(cubes: &[&SpectralCube], stride: usize) -> Vec<f64> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for c in cubes {
        for y in (0..c.height()).step_by(stride) {
            for x in (0..c.width()).step_by(stride) {
                out.extend(c.spectrum(y * c.width() + x));
            }
        }
    }
    out
}
