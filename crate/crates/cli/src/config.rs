//! Experiment configuration: a flat TOML file with one `[[aperture]]` table
//! per camera.
//!
//! ```toml
//! seed = 7
//! r = 3
//! out_dir = "out"
//!
//! [synthetic]
//! size = 64
//! scenes = [1]
//!
//! [[aperture]]
//! center_nm = 420.0
//! half_width_nm = 20.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssr_core::simulate::{default_filters, default_transforms};
use ssr_core::{
    GeometricTransform, Momentum, NotchFilter, PansharpenParams, SpecReconParams, SsrParams,
    VtvParams,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub r: usize,
    pub noise_sigma: f64,
    pub out_dir: PathBuf,
    pub wavelengths: WavelengthGrid,
    pub dataset: Option<DatasetConfig>,
    pub synthetic: Option<SyntheticConfig>,
    pub transforms: TransformConfig,
    pub aperture: Vec<ApertureConfig>,
    pub masr: MasrConfig,
    pub pansharpen: PansharpenConfig,
    pub specrecon: SpecReconConfig,
    pub vtv: VtvConfig,
    pub dictionary: DictionaryConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            r: 3,
            noise_sigma: 0.0,
            out_dir: PathBuf::from("out"),
            wavelengths: WavelengthGrid::default(),
            dataset: None,
            synthetic: None,
            transforms: TransformConfig::default(),
            aperture: default_filters().iter().map(ApertureConfig::from).collect(),
            masr: MasrConfig::default(),
            pansharpen: PansharpenConfig::default(),
            specrecon: SpecReconConfig::default(),
            vtv: VtvConfig::default(),
            dictionary: DictionaryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub step_nm: f64,
    pub count: usize,
    /// Overrides the regular grid when present.
    pub list: Option<Vec<f64>>,
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self {
            start_nm: 400.0,
            step_nm: 10.0,
            count: 31,
            list: None,
        }
    }
}

impl WavelengthGrid {
    pub fn values(&self) -> Vec<f64> {
        match &self.list {
            Some(l) => l.clone(),
            None => (0..self.count)
                .map(|i| self.start_nm + self.step_nm * i as f64)
                .collect(),
        }
    }
}

/// CAVE-style dataset: one sub-directory per scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub scenes: Vec<String>,
    /// Dictionary training scenes; defaults to every scene directory in
    /// `path`. The scene under test is always left out.
    #[serde(default)]
    pub train_scenes: Option<Vec<String>>,
    #[serde(default = "default_crop")]
    pub crop: usize,
}

fn default_crop() -> usize {
    510
}

/// Seeded synthetic scenes standing in for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub size: usize,
    pub scenes: Vec<u64>,
    pub train_scenes: Vec<u64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 64,
            scenes: vec![1],
            train_scenes: vec![101, 102, 103],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Uniform sub-pixel jitter added to the default shift grid.
    pub jitter: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { jitter: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApertureConfig {
    pub pan: bool,
    pub center_nm: f64,
    pub half_width_nm: f64,
    /// Explicit shift in high-resolution pixels; all or none of the
    /// apertures must set it.
    pub dx: Option<f64>,
    pub dy: Option<f64>,
    pub rotation_deg: Option<f64>,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self {
            pan: false,
            center_nm: 550.0,
            half_width_nm: 20.0,
            dx: None,
            dy: None,
            rotation_deg: None,
        }
    }
}

impl From<&NotchFilter> for ApertureConfig {
    fn from(f: &NotchFilter) -> Self {
        Self {
            pan: f.is_panchromatic,
            center_nm: f.center_nm,
            half_width_nm: f.half_width_nm,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasrConfig {
    pub iters: usize,
}

impl Default for MasrConfig {
    fn default() -> Self {
        Self {
            iters: SsrParams::default().masr_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumName {
    Fista,
    Monotone,
    None,
}

impl From<MomentumName> for Momentum {
    fn from(m: MomentumName) -> Self {
        match m {
            MomentumName::Fista => Momentum::Fista,
            MomentumName::Monotone => Momentum::Monotone,
            MomentumName::None => Momentum::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PansharpenConfig {
    pub lipschitz: f64,
    pub t1: f64,
    pub gamma: f64,
    pub iter_max: usize,
    pub rel_tol: f64,
    pub momentum: MomentumName,
}

impl Default for PansharpenConfig {
    fn default() -> Self {
        let p = PansharpenParams::default();
        Self {
            lipschitz: p.lipschitz,
            t1: p.t1,
            gamma: p.gamma,
            iter_max: p.iter_max,
            rel_tol: p.rel_tol,
            momentum: MomentumName::Monotone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecReconConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub eta_tv: f64,
    pub eta: f64,
    pub iter_max: usize,
}

impl Default for SpecReconConfig {
    fn default() -> Self {
        let p = SpecReconParams::default();
        Self {
            rho1: p.rho1,
            rho2: p.rho2,
            eta_tv: p.eta_tv,
            eta: p.eta,
            iter_max: p.iter_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VtvConfig {
    pub inner_iters: usize,
    pub dual_step: f64,
    pub warm_start: bool,
}

impl Default for VtvConfig {
    fn default() -> Self {
        let v = VtvParams::default();
        Self {
            inner_iters: v.inner_iters,
            dual_step: v.dual_step,
            warm_start: v.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    /// Pre-trained dictionary; skips training when set.
    pub path: Option<PathBuf>,
    /// Defaults to twice the band count.
    pub atoms: Option<usize>,
    pub sparsity: usize,
    pub iters: usize,
    /// Pixel stride when sampling training spectra.
    pub stride: usize,
    /// Evenly thins the training set down to this many spectra.
    pub max_spectra: usize,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            path: None,
            atoms: None,
            sparsity: 8,
            iters: 30,
            stride: 4,
            max_spectra: 20_000,
            seed: 0,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(d) = &mut self.dataset {
            fix(&mut d.path);
        }
        if let Some(p) = &mut self.dictionary.path {
            fix(p);
        }
        if let Some(p) = &mut self.dictionary.cache_dir {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(CliError::Config("r must be >= 1".into()));
        }
        if self.aperture.is_empty() {
            return Err(CliError::Config("at least one [[aperture]] is required".into()));
        }
        let pans = self.aperture.iter().filter(|a| a.pan).count();
        if pans != 1 {
            return Err(CliError::Config(format!(
                "exactly one panchromatic aperture is required, found {pans}"
            )));
        }
        let explicit = self.aperture.iter().filter(|a| a.dx.is_some() || a.dy.is_some()).count();
        if explicit != 0 && explicit != self.aperture.len() {
            return Err(CliError::Config(
                "either every aperture or none sets dx/dy".into(),
            ));
        }
        if explicit == 0 && self.aperture.len() != self.r * self.r {
            return Err(CliError::Config(format!(
                "{} apertures need explicit dx/dy (the default grid has r^2 = {})",
                self.aperture.len(),
                self.r * self.r
            )));
        }
        if self.dataset.is_some() == self.synthetic.is_some() {
            return Err(CliError::Config(
                "set exactly one of [dataset] and [synthetic]".into(),
            ));
        }
        self.filters()?;
        self.params().validate()?;
        let wl = self.wavelengths.values();
        if wl.is_empty() || wl.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("wavelengths must be strictly increasing".into()));
        }
        if self.dictionary.stride == 0 {
            return Err(CliError::Config("dictionary.stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn filters(&self) -> Result<Vec<NotchFilter>> {
        self.aperture
            .iter()
            .map(|a| {
                if a.pan {
                    Ok(NotchFilter::panchromatic())
                } else {
                    Ok(NotchFilter::notch(a.center_nm, a.half_width_nm)?)
                }
            })
            .collect()
    }

    pub fn transforms(&self) -> Vec<GeometricTransform> {
        if self.aperture.iter().all(|a| a.dx.is_some() || a.dy.is_some()) {
            self.aperture
                .iter()
                .map(|a| GeometricTransform {
                    dx: a.dx.unwrap_or(0.0),
                    dy: a.dy.unwrap_or(0.0),
                    rotation_deg: a.rotation_deg.unwrap_or(0.0),
                })
                .collect()
        } else {
            default_transforms(self.r, self.transforms.jitter, self.seed)
        }
    }

    pub fn params(&self) -> SsrParams {
        let p = &self.pansharpen;
        let s = &self.specrecon;
        let v = &self.vtv;
        SsrParams {
            masr_iters: self.masr.iters,
            pansharpen: PansharpenParams {
                lipschitz: p.lipschitz,
                t1: p.t1,
                gamma: p.gamma,
                iter_max: p.iter_max,
                rel_tol: p.rel_tol,
                momentum: p.momentum.into(),
            },
            specrecon: SpecReconParams {
                rho1: s.rho1,
                rho2: s.rho2,
                eta_tv: s.eta_tv,
                eta: s.eta,
                iter_max: s.iter_max,
            },
            vtv: VtvParams {
                inner_iters: v.inner_iters,
                dual_step: v.dual_step,
                warm_start: v.warm_start,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synthetic_config() {
        let cfg = PipelineConfig::from_toml_str("[synthetic]\nsize = 36\n").unwrap();
        assert_eq!(cfg.aperture.len(), 9);
        assert_eq!(cfg.params(), SsrParams::default());
        assert_eq!(cfg.transforms().len(), 9);
        assert_eq!(cfg.wavelengths.values().len(), 31);
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = PipelineConfig {
            synthetic: Some(SyntheticConfig::default()),
            ..PipelineConfig::default()
        };
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn explicit_apertures() {
        let text = r#"
r = 1
[synthetic]
[[aperture]]
pan = true
dx = 0.0
dy = 0.0
[[aperture]]
center_nm = 500.0
half_width_nm = 15.0
dx = 1.0
dy = -0.5
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        let t = cfg.transforms();
        assert_eq!(t[1], GeometricTransform::translation(1.0, -0.5));
        assert!(cfg.filters().unwrap()[0].is_panchromatic);
    }

    #[test]
    fn shipped_configs_parse() {
        let cave = PipelineConfig::from_toml_str(include_str!("../configs/cave.toml")).unwrap();
        assert_eq!(cave.params(), SsrParams::default());
        assert_eq!(cave.filters().unwrap(), default_filters());
        PipelineConfig::from_toml_str(include_str!("../configs/synthetic.toml")).unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let two_pans = "[synthetic]\n[[aperture]]\npan = true\ndx = 0.0\n[[aperture]]\npan = true\ndx = 1.0\n";
        assert!(PipelineConfig::from_toml_str(two_pans).is_err());
        assert!(PipelineConfig::from_toml_str("r = 0\n[synthetic]\n").is_err());
        assert!(PipelineConfig::from_toml_str("bogus = 1\n[synthetic]\n").is_err());
        assert!(PipelineConfig::from_toml_str("r = 3\n").is_err());
        assert!(PipelineConfig::from_toml_str("[synthetic]\n[pansharpen]\nmomentum = \"fast\"\n").is_err());
    }
}
