#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssr_core::metrics::{
    error_map, psnr_db, rmse_8bit, sam, sam_radians, ssim, ssim_window, QualityReport,
};
use ssr_core::SpectralCube;

fn cube(q: usize, h: usize, w: usize, data: Vec<f64>) -> SpectralCube {
    SpectralCube::new(h, w, (0..q).map(|i| 400.0 + 10.0 * i as f64).collect(), data).unwrap()
}

fn random_cube(q: usize, h: usize, w: usize, seed: u64) -> SpectralCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cube(q, h, w, (0..q * h * w).map(|_| rng.random_range(0.0..1.0)).collect())
}

/// Direct-definition metrics, written independently of the library code.
mod brute {
    pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (255.0 * a[i] - 255.0 * b[i]).powi(2);
        }
        (s / a.len() as f64).sqrt()
    }

    pub fn psnr(a: &[f64], b: &[f64], q: usize) -> f64 {
        let n = a.len() / q;
        let mut total = 0.0;
        for k in 0..q {
            let r = rmse(&a[k * n..(k + 1) * n], &b[k * n..(k + 1) * n]);
            total += 20.0 * (255.0 / r).log10();
        }
        total / q as f64
    }

    pub fn ssim(a: &[f64], b: &[f64], q: usize, h: usize, w: usize, win: usize) -> f64 {
        let n = h * w;
        let c = (win - 1) as f64 / 2.0;
        let mut g = vec![vec![0.0; win]; win];
        let mut gs = 0.0;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                *v = (-r2 / (2.0 * 1.5 * 1.5)).exp();
                gs += *v;
            }
        }
        let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
        let mut total = 0.0;
        for k in 0..q {
            let mut band = 0.0;
            let mut count = 0;
            for y0 in 0..=h - win {
                for x0 in 0..=w - win {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for i in 0..win {
                        for j in 0..win {
                            let p = k * n + (y0 + i) * w + x0 + j;
                            ma += g[i][j] / gs * 255.0 * a[p];
                            mb += g[i][j] / gs * 255.0 * b[p];
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..win {
                        for j in 0..win {
                            let p = k * n + (y0 + i) * w + x0 + j;
                            let (da, db) = (255.0 * a[p] - ma, 255.0 * b[p] - mb);
                            va += g[i][j] / gs * da * da;
                            vb += g[i][j] / gs * db * db;
                            cov += g[i][j] / gs * da * db;
                        }
                    }
                    band += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1;
                }
            }
            total += band / count as f64;
        }
        total / q as f64
    }

    pub fn sam(a: &[f64], b: &[f64], q: usize) -> f64 {
        let n = a.len() / q;
        let mut total = 0.0;
        for p in 0..n {
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for k in 0..q {
                ab += a[k * n + p] * b[k * n + p];
                aa += a[k * n + p].powi(2);
                bb += b[k * n + p].powi(2);
            }
            total += (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0).acos();
        }
        total / n as f64
    }
}

#[test]
fn random_cubes_match_brute_force() {
    for seed in 0..5u64 {
        let a = random_cube(3, 8, 8, seed);
        let b = random_cube(3, 8, 8, seed + 100);
        let (da, db) = (a.data(), b.data());
        assert!((rmse_8bit(&a, &b).unwrap() - brute::rmse(da, db)).abs() < 1e-9);
        assert!((psnr_db(&a, &b).unwrap() - brute::psnr(da, db, 3)).abs() < 1e-9);
        assert_eq!(ssim_window(8, 8), 7);
        assert!((ssim(&a, &b).unwrap() - brute::ssim(da, db, 3, 8, 8, 7)).abs() < 1e-9);
        assert!((sam_radians(&a, &b).unwrap() - brute::sam(da, db, 3)).abs() < 1e-9);
    }
}

/// Deterministic pair shared with `oracles/metrics_ref.py`.
fn reference_pair() -> (SpectralCube, SpectralCube) {
    let (q, h, w) = (2, 16, 16);
    let mut a = vec![0.0; q * h * w];
    let mut b = vec![0.0; q * h * w];
    for k in 0..q {
        for y in 0..h {
            for x in 0..w {
                let i = k * h * w + y * w + x;
                let (xf, yf, kf) = (x as f64, y as f64, k as f64);
                a[i] = 0.5 + 0.4 * (0.3 * xf + 0.7 * kf).sin() * (0.2 * yf).cos();
                b[i] = (a[i] + 0.05 * (1.3 * xf * yf + kf).sin()).clamp(0.0, 1.0);
            }
        }
    }
    (cube(q, h, w, a), cube(q, h, w, b))
}

#[test]
fn matches_scikit_image_reference() {
    let (a, b) = reference_pair();
    assert!((ssim(&a, &b).unwrap() - 0.914_257_670_255_292).abs() < 1e-9);
    assert!((rmse_8bit(&a, &b).unwrap() - 8.795_769_862_437_284).abs() < 1e-9);
    assert!((psnr_db(&a, &b).unwrap() - 29.250_199_795_328_64).abs() < 1e-9);
    assert!((sam_radians(&a, &b).unwrap() - 0.041_310_361_871_341).abs() < 1e-9);
}

#[test]
fn sam_is_symmetric_and_scale_free() {
    let a = random_cube(4, 5, 5, 1);
    let b = random_cube(4, 5, 5, 2);
    assert_eq!(sam_radians(&a, &b).unwrap(), sam_radians(&b, &a).unwrap());
    let half = cube(4, 5, 5, a.data().iter().map(|v| v / 2.0).collect());
    assert!(sam_radians(&a, &half).unwrap() < 1e-12);
}

#[test]
fn sam_counts_zero_pixels() {
    let mut data = random_cube(3, 2, 2, 5).into_data();
    for k in 0..3 {
        data[k * 4 + 2] = 0.0;
    }
    let a = cube(3, 2, 2, data);
    let r = sam(&a, &random_cube(3, 2, 2, 6)).unwrap();
    assert_eq!(r.skipped, 1);
    assert!(r.mean_radians > 0.0);
}

#[test]
fn psnr_falls_with_noise_level() {
    let truth = random_cube(3, 16, 16, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let unit: Vec<f64> = (0..truth.data().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut last = f64::INFINITY;
    for sigma in [0.01, 0.03, 0.1] {
        let noisy: Vec<f64> = truth
            .data()
            .iter()
            .zip(&unit)
            .map(|(v, u)| (v + sigma * u).clamp(0.0, 1.0))
            .collect();
        let p = psnr_db(&cube(3, 16, 16, noisy), &truth).unwrap();
        assert!(p <= last);
        last = p;
    }
}

#[test]
fn report_is_consistent() {
    let a = random_cube(3, 12, 12, 1);
    let b = random_cube(3, 12, 12, 2);
    let r = QualityReport::evaluate("s", &b, &a).unwrap();
    assert_eq!(r.psnr_db.len(), 3);
    assert!(r.ssim.iter().all(|s| (-1.0..=1.0).contains(s)));
    assert!((0.0..=std::f64::consts::PI).contains(&r.sam_radians));
    assert!(r.rmse_8bit_cube > 0.0 && r.mean_psnr_db > 0.0);
    let map = error_map(&b, &a, 1, 4.0).unwrap();
    assert!(map.data.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(error_map(&b, &a, 3, 1.0).is_err());
}
