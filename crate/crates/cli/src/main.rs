use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssr_cli::config::{PipelineConfig, SyntheticConfig};
use ssr_cli::error::{CliError, Result};
use ssr_cli::{pipeline, register, stackio};
use ssr_core::dictionary::Dictionary;
use ssr_core::metrics::QualityReport;
use ssr_core::pipeline::{pansharpen_stack, reconstruct_stack, superresolve_stack};
use ssr_core::{sr_factor, OpticsSpec};

#[derive(Parser)]
#[command(name = "ssr", version, about = "Spatial and spectral super-resolution for notch-filter camera arrays")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML). Defaults to a 64x64 synthetic scene.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Attainable super-resolution factor of a camera array.
    SrFactor {
        #[arg(long, default_value_t = 25.0 / 2.2)]
        aperture_mm: f64,
        #[arg(long, default_value_t = 25.0)]
        focal_mm: f64,
        #[arg(long, default_value_t = 6.9)]
        pixel_um: f64,
        #[arg(long, default_value_t = 700.0)]
        wavelength_nm: f64,
        #[arg(long, default_value_t = 9)]
        apertures: usize,
    },
    /// Simulate the captures of each configured scene.
    Simulate,
    /// Multi-aperture super-resolution of a capture stack.
    Superresolve {
        #[arg(long)]
        stack: PathBuf,
    },
    /// Lift every capture to high resolution guided by the pan image.
    Pansharpen {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        pan: PathBuf,
    },
    /// Train a spectral dictionary on the configured training scenes.
    TrainDict,
    /// Recover the spectral cube from pan-sharpened captures.
    Reconstruct {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        sharpened: PathBuf,
        #[arg(long)]
        pan: PathBuf,
        #[arg(long)]
        dict: PathBuf,
    },
    /// Compare a reconstruction with a reference cube.
    Evaluate { reconstructed: PathBuf, reference: PathBuf },
    /// Run every stage on every configured scene.
    Pipeline,
    /// Integer shift of each capture relative to the pan capture.
    Register {
        #[arg(long)]
        stack: PathBuf,
    },
}

fn config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig {
            synthetic: Some(SyntheticConfig::default()),
            ..PipelineConfig::default()
        },
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::SrFactor {
            aperture_mm,
            focal_mm,
            pixel_um,
            wavelength_nm,
            apertures,
        } => {
            let o = OpticsSpec {
                aperture_diameter_mm: aperture_mm,
                focal_length_mm: focal_mm,
                pixel_pitch_um: pixel_um,
                wavelength_nm,
                k_apertures: apertures,
            };
            println!("{:?}", sr_factor(&o));
        }
        Command::Simulate => {
            let cfg = config(g)?;
            for name in pipeline::scene_names(&cfg)? {
                let (truth, stack) = pipeline::simulate_scene(&cfg, &name)?;
                let dir = cfg.out_dir.join(&name);
                stackio::save_stack(&dir.join("stack"), &stack, truth.wavelengths_nm())?;
                stackio::write_cube(&dir.join("truth.ssrc"), &truth)?;
                announce(&dir);
            }
        }
        Command::Superresolve { stack } => {
            let cfg = config(g)?;
            let (stack, _) = stackio::load_stack(&stack)?;
            let state = superresolve_stack(&stack, &cfg.params())?;
            let p = out_file(&cfg, "pan.ssrc");
            stackio::write_image(&p, &state.estimate)?;
            announce(&p);
        }
        Command::Pansharpen { stack, pan } => {
            let cfg = config(g)?;
            let (stack, _) = stackio::load_stack(&stack)?;
            let pan = stackio::read_image(&pan)?;
            let out = pansharpen_stack(&stack, &pan, &cfg.params())?;
            let p = out_file(&cfg, "sharpened.ssrc");
            stackio::write_raw(&p, &stackio::field_to_raw(&out.field))?;
            announce(&p);
        }
        Command::TrainDict => {
            let cfg = config(g)?;
            let dict = pipeline::train_dictionary_from_config(&cfg)?;
            let p = out_file(&cfg, "dictionary.ssrd");
            stackio::write_bytes(&p, &dict.to_bytes())?;
            announce(&p);
        }
        Command::Reconstruct {
            stack,
            sharpened,
            pan,
            dict,
        } => {
            let cfg = config(g)?;
            let (stack, wl) = stackio::load_stack(&stack)?;
            let field = stackio::raw_to_field(stackio::read_raw(&sharpened)?)?;
            let pan = stackio::read_image(&pan)?;
            let dict = Dictionary::from_bytes(&stackio::read_bytes(&dict)?)?;
            let out = reconstruct_stack(&stack, &field, &pan, &dict, &wl, &cfg.params())?;
            let p = out_file(&cfg, "recon.ssrc");
            stackio::write_cube(&p, &out.cube)?;
            announce(&p);
        }
        Command::Evaluate {
            reconstructed,
            reference,
        } => {
            let a = stackio::read_cube(&reconstructed)?;
            let b = stackio::read_cube(&reference)?;
            let name = reference
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            print!("{}", QualityReport::evaluate(&name, &a, &b)?.to_text());
        }
        Command::Pipeline => {
            let cfg = config(g)?;
            let report = ssr_cli::run_pipeline(&cfg)?;
            print!("{}", report.summary());
        }
        Command::Register { stack } => {
            let (stack, _) = stackio::load_stack(&stack)?;
            let pan = stack
                .pan_index()
                .ok_or_else(|| CliError::Dataset("stack has no panchromatic capture".into()))?;
            let reference = &stack.captures[pan].image;
            for c in &stack.captures {
                let s = register::phase_correlate(reference, &c.image)?;
                println!(
                    "aperture {}: dx = {} dy = {} (low-res px), peak = {:.3}",
                    c.aperture_index, s.dx, s.dy, s.peak
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Display already carries the source chain
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
