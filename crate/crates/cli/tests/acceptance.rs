//! Acceptance criteria, one line each. Run with `cargo test -p ssr-cli
//! --test acceptance`. Criteria 5 and 6 need a local CAVE copy in
//! `SSR_CAVE_DIR` and are skipped otherwise.
//!
//! The run is a report: it exits successfully whatever the verdicts so the
//! rest of the workspace tests still run. Set `SSR_ACCEPTANCE_STRICT=1` to
//! exit with failure when a gating criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssr_cli::config::{DatasetConfig, PipelineConfig, SyntheticConfig};
use ssr_cli::run_pipeline;
use ssr_core::dictionary::Dictionary;
use ssr_core::masr::ml_superresolve_with_history;
use ssr_core::metrics::{psnr_db, rmse_8bit, sam_radians, ssim, ssim_window};
use ssr_core::operators::build_system_matrix;
use ssr_core::pansharpen::{pansharpen_with_history, PansharpenProblem};
use ssr_core::pipeline::{superresolve_stack, training_spectra};
use ssr_core::scene::{synthetic_scene, SceneConfig};
use ssr_core::simulate::{default_filters, default_transforms, simulate_capture};
use ssr_core::specrecon::{soft_threshold, soft_threshold_scalar, spectral_reconstruct_with_state, StackedResponse};
use ssr_core::vtv::vtv_denoise;
use ssr_core::{
    apply_filter, BandImage, FilterBank, GeometricTransform, MultiBandField, NotchFilter,
    SpecReconParams, SpectralCube, SsrParams, VtvParams,
};

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    fn skip(detail: &str) -> Self {
        Self {
            verdict: Verdict::Skip,
            detail: detail.into(),
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pan_image(cube: &SpectralCube) -> BandImage {
    apply_filter(cube, &vec![1.0; cube.q_bands()]).unwrap()
}

// 1 ---------------------------------------------------------------------

fn exact_recovery() -> Outcome {
    let wl = SpectralCube::cave_wavelengths();
    let truth_cube = synthetic_scene(&SceneConfig::new(32, 32, 11), &wl).unwrap();
    let truth = pan_image(&truth_cube);
    let shifts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
    let transforms: Vec<GeometricTransform> =
        shifts.iter().map(|&(dx, dy)| GeometricTransform::translation(dx, dy)).collect();
    let filters = vec![NotchFilter::panchromatic(); 4];
    let t0 = Instant::now();
    let stack = simulate_capture(&truth_cube, &filters, &transforms, 2, 0.0, 0).unwrap();
    let g = build_system_matrix(&transforms, 2, 32, 32).unwrap();
    let state = ml_superresolve_with_history(&stack, &g, 50).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let err = max_abs_diff(&state.estimate.data, &truth.data);
    Outcome::check(
        err <= 1e-6 && secs < 5.0,
        format!("max error {err:.3e} after 50 iterations (limit 1e-6), {secs:.2} s (limit 5 s)"),
    )
}

// 2 ---------------------------------------------------------------------

/// Reference solution from `oracles/admm_small.py` (interior-point solve,
/// two solvers agree to 1.4e-6), band-major 5 x 4 x 4.
const SMALL_REFERENCE: [f64; 80] = [
    0.555334408410, 0.715225434707, 0.580560134626, 0.553451517762, 0.704075608531, 0.636338586419,
    0.660502975245, 0.403488929961, 0.595482319625, 0.687752902789, 0.500326018508, 0.470078083859,
    0.627391024003, 0.491589564394, 0.519170579056, 0.369008003411, 0.610663350036, 0.774479797867,
    0.629219429202, 0.598905946188, 0.763186480039, 0.695703920098, 0.711479069781, 0.448943357612,
    0.652811738401, 0.745333024636, 0.548791572538, 0.513947294672, 0.683920057674, 0.542020028779,
    0.569615221549, 0.412728275932, 0.642369365134, 0.799771033701, 0.645928644138, 0.613720843573,
    0.796452635578, 0.726461897198, 0.729691646201, 0.463758255789, 0.686446263206, 0.778200334743,
    0.574018623256, 0.531931596043, 0.717337673219, 0.574501701596, 0.597868200041, 0.430776825303,
    0.648512511462, 0.803080129216, 0.648046178866, 0.616218044023, 0.802991451754, 0.731116223752,
    0.731301419645, 0.466255457367, 0.694665728922, 0.786047054179, 0.578276663313, 0.535884560091,
    0.725648319587, 0.582534343549, 0.603301595268, 0.434888654768, 0.645714959307, 0.804966769256,
    0.653891073449, 0.623063013934, 0.802012246660, 0.731020375815, 0.736423248064, 0.473100423841,
    0.694191629976, 0.785255148697, 0.576947285299, 0.537408821988, 0.726079772806, 0.581007674895,
    0.601830365471, 0.436128611474,
];

fn small_problem() -> (StackedResponse, Dictionary, BandImage) {
    let (q, h, w, atoms) = (5usize, 4usize, 4usize, 10usize);
    let n = h * w;
    let mut d = vec![0.0; q * atoms];
    for j in 0..atoms {
        let col = &mut d[j * q..(j + 1) * q];
        for (b, v) in col.iter_mut().enumerate() {
            let (jf, bf) = (j as f64, b as f64);
            *v = (0.9 * (jf + 1.0) * (bf + 0.5) + 0.37 * jf).cos() + 0.15 * (bf + 1.0) / (jf + 1.0);
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.iter_mut().for_each(|v| *v /= norm);
    }
    let dict = Dictionary::new(q, atoms, d).unwrap();
    let rows: [[f64; 5]; 4] = [
        [1.0, 0.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 0.0, 1.0],
        [1.0, 1.0, 1.0, 1.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, 1.0],
    ];
    let t: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let mut truth = vec![0.0; q * n];
    for b in 0..q {
        for y in 0..h {
            for x in 0..w {
                let (xf, yf, bf) = (x as f64, y as f64, b as f64);
                truth[b * n + y * w + x] = 0.5
                    + 0.3 * (0.8 * xf + 0.5 * bf).sin() * (0.6 * yf - 0.3 * bf).cos()
                    + 0.1 * ((x + y) % 2) as f64;
            }
        }
    }
    let mut obs = vec![0.0; t.len() * n];
    for (k, row) in t.iter().enumerate() {
        for p in 0..n {
            obs[k * n + p] = (0..q).map(|b| row[b] * truth[b * n + p]).sum();
        }
    }
    let pan = BandImage::new(h, w, obs[3 * n..].to_vec()).unwrap();
    let y_h = MultiBandField::new(4, h, w, obs).unwrap();
    let wl = (0..q).map(|i| 400.0 + 10.0 * i as f64).collect();
    (StackedResponse::from_rows(t, y_h, wl).unwrap(), dict, pan)
}

fn small_convex_equivalence() -> Outcome {
    let (obs, dict, pan) = small_problem();
    let params = SpecReconParams {
        rho1: 0.05,
        rho2: 0.05,
        eta_tv: 0.02,
        eta: 0.01,
        iter_max: 3000,
    };
    let vtv = VtvParams {
        inner_iters: 100,
        warm_start: true,
        ..VtvParams::default()
    };
    let t0 = Instant::now();
    let out = spectral_reconstruct_with_state(&obs, &dict, &pan, &params, &vtv).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let err = max_abs_diff(&out.raw, &SMALL_REFERENCE);
    Outcome::check(
        err <= 1e-3 && secs < 10.0,
        format!("max deviation from reference solve {err:.3e} (limit 1e-3), {secs:.2} s (limit 10 s)"),
    )
}

// 3 ---------------------------------------------------------------------

fn random_field(bands: usize, h: usize, w: usize, seed: u64) -> MultiBandField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MultiBandField::new(bands, h, w, (0..bands * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn vtv_suite() -> Outcome {
    let b = random_field(4, 7, 6, 3);
    let z = vtv_denoise(&b, 0.0, &VtvParams::default()).unwrap();
    let identity = max_abs_diff(&z.data, &b.data);

    let z = vtv_denoise(&b, 0.25, &VtvParams::default()).unwrap();
    let n = (b.height * b.width) as f64;
    let mean_shift = (0..b.bands)
        .map(|k| (b.band(k).iter().sum::<f64>() - z.band(k).iter().sum::<f64>()).abs() / n)
        .fold(0.0, f64::max);

    // two plateaus of length n1, n2: each moves gamma / n_i toward the other
    let mut step = 0.0f64;
    for (n1, n2, gamma) in [(2usize, 2usize, 0.1), (3, 2, 0.1), (1, 4, 0.15)] {
        let mut v = vec![0.0; n1];
        v.extend(vec![1.0; n2]);
        let f = MultiBandField::new(1, 1, n1 + n2, v).unwrap();
        let p = VtvParams {
            inner_iters: 4000,
            ..VtvParams::default()
        };
        let z = vtv_denoise(&f, gamma, &p).unwrap();
        let mut expect = vec![gamma / n1 as f64; n1];
        expect.extend(vec![1.0 - gamma / n2 as f64; n2]);
        step = step.max(max_abs_diff(&z.data, &expect));
    }
    Outcome::check(
        identity <= 1e-12 && mean_shift <= 1e-10 && step <= 1e-8,
        format!("identity {identity:.1e} (1e-12), mean {mean_shift:.1e} (1e-10), step {step:.1e} (1e-8)"),
    )
}

// 4 ---------------------------------------------------------------------

fn random_cube(seed: u64) -> SpectralCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralCube::new(8, 8, vec![450.0, 550.0, 650.0], (0..192).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn brute_rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (255.0 * (x - y)).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Windowed SSIM straight from the definition: Gaussian weights, sigma 1.5,
/// every fully contained `win x win` window.
fn brute_ssim_band(a: &[f64], b: &[f64], h: usize, w: usize, win: usize) -> f64 {
    let c = (win as f64 - 1.0) / 2.0;
    let mut g = vec![0.0; win * win];
    for i in 0..win {
        for j in 0..win {
            g[i * win + j] = (-((i as f64 - c).powi(2) + (j as f64 - c).powi(2)) / 4.5).exp();
        }
    }
    let gs: f64 = g.iter().sum();
    let (c1, c2) = (6.5025, 58.5225);
    let mut acc = Vec::new();
    for y0 in 0..=h - win {
        for x0 in 0..=w - win {
            let idx = |i: usize| (y0 + i / win) * w + x0 + i % win;
            let ma: f64 = (0..win * win).map(|i| g[i] / gs * 255.0 * a[idx(i)]).sum();
            let mb: f64 = (0..win * win).map(|i| g[i] / gs * 255.0 * b[idx(i)]).sum();
            let va: f64 = (0..win * win).map(|i| g[i] / gs * (255.0 * a[idx(i)] - ma).powi(2)).sum();
            let vb: f64 = (0..win * win).map(|i| g[i] / gs * (255.0 * b[idx(i)] - mb).powi(2)).sum();
            let cv: f64 = (0..win * win)
                .map(|i| g[i] / gs * (255.0 * a[idx(i)] - ma) * (255.0 * b[idx(i)] - mb))
                .sum();
            acc.push((2.0 * ma * mb + c1) * (2.0 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)));
        }
    }
    acc.iter().sum::<f64>() / acc.len() as f64
}

fn metric_suite() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let (a, b) = (random_cube(seed), random_cube(seed + 50));
        let n = 64;
        let bands = |c: &SpectralCube, k: usize| c.data()[k * n..(k + 1) * n].to_vec();
        let rmse = brute_rmse(a.data(), b.data());
        let psnr = (0..3)
            .map(|k| 20.0 * (255.0 / brute_rmse(&bands(&a, k), &bands(&b, k))).log10())
            .sum::<f64>()
            / 3.0;
        let ss = (0..3)
            .map(|k| brute_ssim_band(&bands(&a, k), &bands(&b, k), 8, 8, 7))
            .sum::<f64>()
            / 3.0;
        let sam = (0..n)
            .map(|p| {
                let u: Vec<f64> = (0..3).map(|k| a.data()[k * n + p]).collect();
                let v: Vec<f64> = (0..3).map(|k| b.data()[k * n + p]).collect();
                let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
                let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                (dot / (nu * nv)).clamp(-1.0, 1.0).acos()
            })
            .sum::<f64>()
            / n as f64;
        worst = worst
            .max((rmse_8bit(&a, &b).unwrap() - rmse).abs())
            .max((psnr_db(&a, &b).unwrap() - psnr).abs())
            .max((ssim(&a, &b).unwrap() - ss).abs())
            .max((sam_radians(&a, &b).unwrap() - sam).abs());
    }
    let table = [(5.0, 2.0, 3.0), (-1.0, 2.0, 0.0), (-5.0, 2.0, -3.0), (0.7, 0.0, 0.7), (2.0, 2.0, 0.0)];
    let table_ok = table.iter().all(|&(x, t, e)| soft_threshold_scalar(x, t) == e)
        && soft_threshold(&[5.0, -1.0], 2.0) == vec![3.0, 0.0];
    Outcome::check(
        worst <= 1e-9 && table_ok && ssim_window(8, 8) == 7,
        format!("largest metric deviation {worst:.1e} (1e-9), soft-threshold table {}", if table_ok { "exact" } else { "wrong" }),
    )
}

// 5, 6 ------------------------------------------------------------------

fn cave_dir() -> Option<PathBuf> {
    std::env::var_os("SSR_CAVE_DIR").map(PathBuf::from)
}

fn cave_config(root: PathBuf, scenes: Vec<String>, out: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed: 1,
        out_dir: out.to_path_buf(),
        dataset: Some(DatasetConfig {
            path: root,
            scenes,
            train_scenes: None,
            crop: 510,
        }),
        ..PipelineConfig::default()
    };
    cfg.dictionary.cache_dir = Some(out.join("dict-cache"));
    cfg
}

fn scene_dirs(root: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(root)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().is_dir())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn balloons() -> Outcome {
    let Some(root) = cave_dir() else {
        return Outcome::skip("SSR_CAVE_DIR not set");
    };
    let Some(scene) = scene_dirs(&root).into_iter().find(|s| s.starts_with("balloons")) else {
        return Outcome::check(false, format!("no balloons scene under {}", root.display()));
    };
    let tmp = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    match run_pipeline(&cave_config(root, vec![scene], tmp.path())) {
        Ok(r) => {
            let secs = t0.elapsed().as_secs_f64();
            let rep = &r.scenes[0].report;
            Outcome::check(
                rep.rmse_8bit_cube <= 5.5 && rep.sam_radians <= 0.20 && secs <= 3.0 * 173.4,
                format!(
                    "RMSE {:.3} (<= 5.5), SAM {:.4} (<= 0.20), {secs:.1} s (<= 520.2 s)",
                    rep.rmse_8bit_cube, rep.sam_radians
                ),
            )
        }
        Err(e) => Outcome::check(false, format!("pipeline error: {e}")),
    }
}

fn cave_aggregate() -> Outcome {
    let Some(root) = cave_dir() else {
        return Outcome::skip("SSR_CAVE_DIR not set");
    };
    let scenes: Vec<String> = scene_dirs(&root).into_iter().take(5).collect();
    if scenes.len() < 5 {
        return Outcome::check(false, format!("found {} scenes, need 5", scenes.len()));
    }
    let tmp = tempfile::tempdir().unwrap();
    match run_pipeline(&cave_config(root, scenes, tmp.path())) {
        Ok(r) => {
            let (rmse, psnr) = (r.mean_rmse(), r.mean_psnr());
            Outcome::check(
                (rmse - 4.914).abs() <= 0.5 * 4.914 && psnr >= 30.0,
                format!("mean RMSE {rmse:.3} (4.914 +/- 50%), mean PSNR {psnr:.2} dB (>= 30)"),
            )
        }
        Err(e) => Outcome::check(false, format!("pipeline error: {e}")),
    }
}

// 7 ---------------------------------------------------------------------

fn convergence_monitors() -> Outcome {
    let wl = SpectralCube::cave_wavelengths();
    let truth = synthetic_scene(&SceneConfig::new(36, 36, 21), &wl).unwrap();
    let stack = simulate_capture(&truth, &default_filters(), &default_transforms(3, 0.1, 4), 3, 0.0, 0).unwrap();
    let params = SsrParams::default();

    let masr = superresolve_stack(&stack, &params).unwrap();
    let e = &masr.fidelity_history;
    let start = e.len() / 10;
    let masr_ok = e[start..].windows(2).all(|p| p[1] <= p[0]);

    let problem = PansharpenProblem::from_stack(&stack, &masr.estimate, params.pansharpen, params.vtv).unwrap();
    let ps = pansharpen_with_history(&problem).unwrap();
    let en = &ps.energy_history;
    let fista_ok = en.len() > 6 && en[5..].windows(2).all(|p| p[1] <= p[0]);

    // dictionary from other scenes
    let train: Vec<SpectralCube> = (0..3)
        .map(|s| synthetic_scene(&SceneConfig::new(48, 48, 300 + s), &wl).unwrap())
        .collect();
    let refs: Vec<&SpectralCube> = train.iter().collect();
    let samples = training_spectra(&refs, 2);
    let ksvd = ssr_core::dictionary::KsvdConfig {
        n_atoms: 62,
        sparsity: 8,
        iters: 10,
        seed: 0,
    };
    let (dict, _) = ssr_core::dictionary::train_dictionary(&samples, 31, &ksvd).unwrap();
    let sr = SpecReconParams {
        rho1: 0.1,
        rho2: 0.1,
        eta: 1e-3,
        eta_tv: 1e-3,
        iter_max: 40,
    };
    let bank = FilterBank::from_filters(&stack.filters(), &wl);
    let obs = StackedResponse::new(&bank, ps.field.clone(), wl.clone()).unwrap();
    let out = spectral_reconstruct_with_state(&obs, &dict, &masr.estimate, &sr, &params.vtv).unwrap();
    let s = &out.state;
    let shrink = |r: &[f64]| r[0] / r[r.len() - 1].max(f64::MIN_POSITIVE);
    let (s1, s2) = (shrink(&s.residual_theta), shrink(&s.residual_dtheta));
    Outcome::check(
        masr_ok && fista_ok && s1 >= 10.0 && s2 >= 10.0,
        format!(
            "fidelity monotone {masr_ok}, FISTA energy monotone after 5 {fista_ok}, ADMM residual shrink {s1:.1}x / {s2:.1}x (>= 10x)"
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = |dir: &str| PipelineConfig {
        seed: 5,
        noise_sigma: 0.01,
        out_dir: tmp.path().join(dir),
        synthetic: Some(SyntheticConfig {
            size: 36,
            scenes: vec![2],
            train_scenes: vec![201, 202, 203],
        }),
        dictionary: ssr_cli::config::DictionaryConfig {
            stride: 2,
            iters: 10,
            ..Default::default()
        },
        ..PipelineConfig::default()
    };
    let run = |threads: usize, dir: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| run_pipeline(&cfg(dir))).unwrap();
        std::fs::read(&r.scenes[0].cube_path).unwrap()
    };
    let a = run(1, "a");
    let b = run(4, "b");
    let c = run(1, "c");
    Outcome::check(
        a == b && a == c,
        format!("{} byte cube files; 1 vs 4 threads identical {}, repeat identical {}", a.len(), a == b, a == c),
    )
}

// 9 ---------------------------------------------------------------------

fn sr_factor_cli() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_ssr")).arg("sr-factor").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
    Outcome::check(out.status.success() && text == "3.0", format!("printed {text:?}"))
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, bool, fn() -> Outcome);
    // (number, name, gating, check)
    let criteria: [Criterion; 9] = [
        (1, "exact recovery oracle (masr)", true, exact_recovery),
        (2, "small-instance convex equivalence", true, small_convex_equivalence),
        (3, "VTV prox suite", true, vtv_suite),
        (4, "metric oracle suite", true, metric_suite),
        (5, "CAVE balloons reproduction", true, balloons),
        (6, "CAVE aggregate (reported only)", false, cave_aggregate),
        (7, "convergence monitors", true, convergence_monitors),
        (8, "determinism across thread counts", true, determinism),
        (9, "sr-factor prints 3.0", true, sr_factor_cli),
    ];
    let mut failed = 0;
    for (n, name, gating, f) in criteria {
        let o = f();
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        println!("{tag} criterion {n}: {name}: {}", o.detail);
        if gating && o.verdict == Verdict::Fail {
            failed += 1;
        }
    }
    println!("{failed} gating criteria failed");
    if failed == 0 || std::env::var_os("SSR_ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
