//! Solver parameter records. Defaults follow the published simulation setup.

use crate::error::{Result, SsrError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VtvParams {
    pub inner_iters: usize,
    pub dual_step: f64,
    /// Reuse the previous dual field between outer iterations.
    pub warm_start: bool,
}

impl Default for VtvParams {
    fn default() -> Self {
        Self {
            inner_iters: 30,
            dual_step: 0.125,
            warm_start: false,
        }
    }
}

/// Momentum rule used by the pan-sharpening solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Momentum {
    /// Standard FISTA extrapolation.
    Fista,
    /// FISTA that only accepts iterates which do not raise the energy.
    #[default]
    Monotone,
    /// Plain proximal gradient (t fixed at 1).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PansharpenParams {
    pub lipschitz: f64,
    pub t1: f64,
    pub gamma: f64,
    pub iter_max: usize,
    pub rel_tol: f64,
    pub momentum: Momentum,
}

impl Default for PansharpenParams {
    fn default() -> Self {
        Self {
            lipschitz: 1.0,
            t1: 1.0,
            gamma: 0.05,
            iter_max: 200,
            rel_tol: 1e-6,
            momentum: Momentum::Monotone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecReconParams {
    pub rho1: f64,
    pub rho2: f64,
    pub eta_tv: f64,
    pub eta: f64,
    pub iter_max: usize,
}

impl Default for SpecReconParams {
    fn default() -> Self {
        Self {
            rho1: 1e-6,
            rho2: 2e-3,
            eta_tv: 1e-3,
            eta: 1e-3,
            iter_max: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsrParams {
    pub masr_iters: usize,
    pub pansharpen: PansharpenParams,
    pub specrecon: SpecReconParams,
    pub vtv: VtvParams,
}

impl Default for SsrParams {
    fn default() -> Self {
        Self {
            masr_iters: 50,
            pansharpen: PansharpenParams::default(),
            specrecon: SpecReconParams::default(),
            vtv: VtvParams::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SsrError::InvalidParam(format!("{name} must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SsrError::InvalidParam(format!("{name} must be >= 0, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(SsrError::InvalidParam(format!("{name} must be >= 1")))
    }
}

impl VtvParams {
    pub fn validate(&self) -> Result<()> {
        at_least_one("vtv inner_iters", self.inner_iters)?;
        if !(self.dual_step > 0.0 && self.dual_step <= 0.125) {
            return Err(SsrError::InvalidParam(format!(
                "vtv dual_step must lie in (0, 1/8], got {}",
                self.dual_step
            )));
        }
        Ok(())
    }
}

impl PansharpenParams {
    pub fn validate(&self) -> Result<()> {
        positive("pansharpen L", self.lipschitz)?;
        if !(self.t1 >= 1.0) {
            return Err(SsrError::InvalidParam("pansharpen t1 must be >= 1".into()));
        }
        non_negative("pansharpen gamma", self.gamma)?;
        non_negative("pansharpen rel_tol", self.rel_tol)?;
        at_least_one("pansharpen iter_max", self.iter_max)
    }
}

impl SpecReconParams {
    pub fn validate(&self) -> Result<()> {
        positive("rho1", self.rho1)?;
        positive("rho2", self.rho2)?;
        non_negative("eta_tv", self.eta_tv)?;
        non_negative("eta", self.eta)?;
        at_least_one("specrecon iter_max", self.iter_max)
    }
}

impl SsrParams {
    pub fn validate(&self) -> Result<()> {
        at_least_one("masr_iters", self.masr_iters)?;
        self.pansharpen.validate()?;
        self.specrecon.validate()?;
        self.vtv.validate()
    }
}
