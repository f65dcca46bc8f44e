//! End-to-end experiment: simulate captures from a reference cube, run the
//! three reconstruction stages, and score the result.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use ssr_core::dictionary::{train_dictionary, Dictionary, KsvdConfig};
use ssr_core::metrics::{error_map, QualityReport};
use ssr_core::pipeline::{pansharpen_stack, reconstruct_stack, superresolve_stack, training_spectra};
use ssr_core::scene::{synthetic_scene, SceneConfig};
use ssr_core::simulate::simulate_capture;
use ssr_core::{ApertureStack, SpectralCube};

use crate::cave::load_cave_scene_cropped;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result, StageContext};
use crate::stackio;

/// Gain applied to absolute errors in the saved error maps.
pub const ERROR_MAP_GAIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub scene: String,
    pub stages: Vec<StageTime>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SceneResult {
    pub report: QualityReport,
    pub timing: Timing,
    pub out_dir: PathBuf,
    /// Reconstructed cube file.
    pub cube_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub scenes: Vec<SceneResult>,
}

impl PipelineReport {
    pub fn mean_rmse(&self) -> f64 {
        mean(self.scenes.iter().map(|s| s.report.rmse_8bit_cube))
    }

    pub fn mean_psnr(&self) -> f64 {
        mean(self.scenes.iter().map(|s| s.report.mean_psnr_db))
    }

    pub fn mean_sam(&self) -> f64 {
        mean(self.scenes.iter().map(|s| s.report.sam_radians))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.scenes {
            s.push_str(&format!(
                "{:<24} rmse {:8.4}  psnr {:7.3} dB  ssim {:.4}  sam {:.4}  {:8.2} s\n",
                r.report.scene,
                r.report.rmse_8bit_cube,
                r.report.mean_psnr_db,
                r.report.mean_ssim,
                r.report.sam_radians,
                r.timing.total_seconds
            ));
        }
        if self.scenes.len() > 1 {
            s.push_str(&format!(
                "{:<24} rmse {:8.4}  psnr {:7.3} dB  sam {:.4}\n",
                "mean",
                self.mean_rmse(),
                self.mean_psnr(),
                self.mean_sam()
            ));
        }
        s
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n.max(1) as f64
}

struct Clock {
    start: Instant,
    stages: Vec<StageTime>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f().stage(stage)?;
        self.stages.push(StageTime {
            stage,
            seconds: t0.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn finish(self, scene: &str) -> Timing {
        Timing {
            scene: scene.to_string(),
            stages: self.stages,
            total_seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// A reference cube source: either dataset folders or seeded synthetic scenes.
enum Source<'a> {
    Dataset(&'a crate::config::DatasetConfig),
    Synthetic(&'a crate::config::SyntheticConfig),
}

impl<'a> Source<'a> {
    fn of(cfg: &'a PipelineConfig) -> Result<Self> {
        match (&cfg.dataset, &cfg.synthetic) {
            (Some(d), None) => Ok(Self::Dataset(d)),
            (None, Some(s)) => Ok(Self::Synthetic(s)),
            _ => Err(CliError::Config("set exactly one of [dataset] and [synthetic]".into())),
        }
    }

    fn test_scenes(&self) -> Vec<String> {
        match self {
            Self::Dataset(d) => d.scenes.clone(),
            Self::Synthetic(s) => s.scenes.iter().map(synthetic_name).collect(),
        }
    }

    fn train_scenes(&self, exclude: &str) -> Result<Vec<String>> {
        let names = match self {
            Self::Dataset(d) => match &d.train_scenes {
                Some(t) => t.clone(),
                None => list_scene_dirs(&d.path)?,
            },
            Self::Synthetic(s) => s.train_scenes.iter().map(synthetic_name).collect(),
        };
        Ok(names.into_iter().filter(|n| n != exclude).collect())
    }

    fn load(&self, name: &str, wavelengths: &[f64]) -> Result<SpectralCube> {
        match self {
            Self::Dataset(d) => {
                let cube = load_cave_scene_cropped(&d.path.join(name), d.crop)?;
                if cube.wavelengths_nm() != wavelengths {
                    return Err(CliError::Config(format!(
                        "scene {name} has {} bands at 400-700 nm; the configured wavelength grid differs",
                        cube.q_bands()
                    )));
                }
                Ok(cube)
            }
            Self::Synthetic(s) => {
                let seed = name
                    .strip_prefix("synthetic-")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| CliError::Dataset(format!("not a synthetic scene name: {name}")))?;
                Ok(synthetic_scene(&SceneConfig::new(s.size, s.size, seed), wavelengths)?)
            }
        }
    }

    /// Identifies the training data in the dictionary cache key.
    fn describe(&self) -> String {
        match self {
            Self::Dataset(d) => format!("dataset:{}:{}", d.path.display(), d.crop),
            Self::Synthetic(s) => format!("synthetic:{}", s.size),
        }
    }
}

fn synthetic_name(seed: &u64) -> String {
    format!("synthetic-{seed}")
}

fn list_scene_dirs(root: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for e in std::fs::read_dir(root).map_err(|e| CliError::io(root, e))? {
        let e = e.map_err(|err| CliError::io(root, err))?;
        if e.path().is_dir() {
            names.push(e.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Two atoms per band, `+e_b` and `-e_b`. Used when there are too few bands
/// to train a sparse dictionary.
pub fn signed_identity_dictionary(q: usize) -> Result<Dictionary> {
    let mut atoms = vec![0.0; q * 2 * q];
    for b in 0..q {
        atoms[b * q + b] = 1.0;
        atoms[(q + b) * q + b] = -1.0;
    }
    Ok(Dictionary::new(q, 2 * q, atoms)?)
}

/// Keeps every `ceil(n / cap)`-th spectrum.
fn thin(samples: Vec<f64>, q: usize, cap: usize) -> Vec<f64> {
    let n = samples.len() / q;
    if cap == 0 || n <= cap {
        return samples;
    }
    let step = n.div_ceil(cap);
    samples
        .chunks_exact(q)
        .step_by(step)
        .flatten()
        .copied()
        .collect()
}

fn cache_key(cfg: &PipelineConfig, source: &str, scenes: &[String], n_atoms: usize) -> String {
    let d = &cfg.dictionary;
    let mut h = DefaultHasher::new();
    source.hash(&mut h);
    scenes.hash(&mut h);
    for w in cfg.wavelengths.values() {
        w.to_bits().hash(&mut h);
    }
    (n_atoms, d.sparsity, d.iters, d.stride, d.max_spectra, d.seed).hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Loads the configured dictionary, reuses a cached one, or trains on the
/// training scenes other than `exclude`.
pub fn obtain_dictionary(cfg: &PipelineConfig, exclude: &str) -> Result<Dictionary> {
    let wl = cfg.wavelengths.values();
    let q = wl.len();
    if let Some(path) = &cfg.dictionary.path {
        let dict = Dictionary::from_bytes(&stackio::read_bytes(path)?)
            .map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))?;
        return Ok(dict);
    }
    if q < 2 {
        return signed_identity_dictionary(q);
    }
    let source = Source::of(cfg)?;
    let scenes = source.train_scenes(exclude)?;
    if scenes.is_empty() {
        return Err(CliError::Config(format!(
            "no training scenes left after excluding {exclude}"
        )));
    }
    let n_atoms = cfg.dictionary.atoms.unwrap_or(2 * q);
    let cached = cfg
        .dictionary
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("dict-{}.ssrd", cache_key(cfg, &source.describe(), &scenes, n_atoms))));
    if let Some(p) = cached.as_ref().filter(|p| p.exists()) {
        let mut dict = Dictionary::from_bytes(&stackio::read_bytes(p)?)
            .map_err(|e| CliError::Dataset(format!("{}: {e}", p.display())))?;
        dict.source_scenes = scenes;
        return Ok(dict);
    }
    let dict = train_on(cfg, &source, &scenes, n_atoms)?;
    if let Some(p) = cached {
        stackio::write_bytes(&p, &dict.to_bytes())?;
    }
    Ok(dict)
}

fn train_on(cfg: &PipelineConfig, source: &Source, scenes: &[String], n_atoms: usize) -> Result<Dictionary> {
    let wl = cfg.wavelengths.values();
    let q = wl.len();
    let mut samples = Vec::new();
    // one scene in memory at a time
    for name in scenes {
        let cube = source.load(name, &wl)?;
        samples.extend(training_spectra(&[&cube], cfg.dictionary.stride));
    }
    let samples = thin(samples, q, cfg.dictionary.max_spectra);
    let ksvd = KsvdConfig {
        n_atoms,
        sparsity: cfg.dictionary.sparsity.min(q - 1),
        iters: cfg.dictionary.iters,
        seed: cfg.dictionary.seed,
    };
    let (mut dict, _) = train_dictionary(&samples, q, &ksvd)?;
    dict.source_scenes = scenes.to_vec();
    Ok(dict)
}

/// Standalone dictionary training for the `train-dict` subcommand: uses every
/// configured training scene.
pub fn train_dictionary_from_config(cfg: &PipelineConfig) -> Result<Dictionary> {
    let q = cfg.wavelengths.values().len();
    if q < 2 {
        return signed_identity_dictionary(q);
    }
    let source = Source::of(cfg)?;
    let scenes = source.train_scenes("")?;
    train_on(cfg, &source, &scenes, cfg.dictionary.atoms.unwrap_or(2 * q))
}

/// Reference cube and capture stack for one scene. The reference is
/// center-cropped to a multiple of `r` first.
pub fn simulate_scene(cfg: &PipelineConfig, name: &str) -> Result<(SpectralCube, ApertureStack)> {
    let wl = cfg.wavelengths.values();
    let mut truth = Source::of(cfg)?.load(name, &wl)?;
    let (h, w) = (truth.height() / cfg.r * cfg.r, truth.width() / cfg.r * cfg.r);
    if (h, w) != (truth.height(), truth.width()) {
        truth = truth.center_crop(h, w)?;
    }
    let stack = simulate_capture(
        &truth,
        &cfg.filters()?,
        &cfg.transforms(),
        cfg.r,
        cfg.noise_sigma,
        cfg.seed,
    )?;
    Ok((truth, stack))
}

pub fn scene_names(cfg: &PipelineConfig) -> Result<Vec<String>> {
    Ok(Source::of(cfg)?.test_scenes())
}

fn run_scene(cfg: &PipelineConfig, name: &str) -> Result<SceneResult> {
    let params = cfg.params();
    let wl = cfg.wavelengths.values();
    let out = cfg.out_dir.join(name);
    let mut clock = Clock::new();

    let (truth, stack) = clock.time("simulate", || simulate_scene(cfg, name))?;
    let masr = clock.time("masr", || Ok(superresolve_stack(&stack, &params)?))?;
    let sharp = clock.time("pansharpen", || Ok(pansharpen_stack(&stack, &masr.estimate, &params)?))?;
    let dict = clock.time("dictionary", || obtain_dictionary(cfg, name))?;
    let recon = clock.time("specrecon", || {
        Ok(reconstruct_stack(&stack, &sharp.field, &masr.estimate, &dict, &wl, &params)?)
    })?;
    let report = clock.time("metrics", || Ok(QualityReport::evaluate(name, &recon.cube, &truth)?))?;

    let cube_path = out.join("recon.ssrc");
    clock.time("write", || {
        stackio::save_stack(&out.join("stack"), &stack, &wl)?;
        stackio::write_image(&out.join("pan.ssrc"), &masr.estimate)?;
        stackio::write_raw(&out.join("sharpened.ssrc"), &stackio::field_to_raw(&sharp.field))?;
        stackio::write_cube(&cube_path, &recon.cube)?;
        stackio::write_cube_pngs(&out.join("bands"), "recon", &recon.cube)?;
        for b in 0..recon.cube.q_bands() {
            let e = error_map(&recon.cube, &truth, b, ERROR_MAP_GAIN)?;
            stackio::write_png16(&out.join("errors").join(format!("error_{:02}.png", b + 1)), &e)?;
        }
        stackio::write_bytes(&out.join("report.txt"), report.to_text().as_bytes())
    })?;
    let timing = clock.finish(name);
    let json = serde_json::to_string_pretty(&timing).expect("timing serialises");
    stackio::write_bytes(&out.join("timing.json"), json.as_bytes())?;
    Ok(SceneResult {
        report,
        timing,
        out_dir: out,
        cube_path,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut scenes = Vec::new();
    for name in scene_names(cfg)? {
        scenes.push(run_scene(cfg, &name)?);
    }
    let report = PipelineReport { scenes };
    stackio::write_bytes(&cfg.out_dir.join("summary.txt"), report.summary().as_bytes())?;
    stackio::write_bytes(&cfg.out_dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    Ok(report)
}
