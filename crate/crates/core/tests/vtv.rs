use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssr_core::vtv::{primal_from_dual, vtv_denoise, vtv_denoise_with, vtv_objective, DualField};
use ssr_core::{MultiBandField, VtvParams};

fn random_field(bands: usize, h: usize, w: usize, seed: u64) -> MultiBandField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MultiBandField::new(bands, h, w, (0..bands * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn params(iters: usize) -> VtvParams {
    VtvParams {
        inner_iters: iters,
        ..VtvParams::default()
    }
}

#[test]
fn zero_gamma_returns_input() {
    let b = random_field(4, 6, 5, 1);
    let z = vtv_denoise(&b, 0.0, &VtvParams::default()).unwrap();
    for (x, y) in z.data.iter().zip(&b.data) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn mean_preserved_per_band() {
    let b = random_field(3, 9, 7, 2);
    let z = vtv_denoise(&b, 0.3, &VtvParams::default()).unwrap();
    let n = 63;
    for k in 0..3 {
        let mb: f64 = b.band(k).iter().sum::<f64>() / n as f64;
        let mz: f64 = z.band(k).iter().sum::<f64>() / n as f64;
        assert!((mb - mz).abs() < 1e-10);
    }
}

/// TV prox of a two-plateau step with lengths `n1`, `n2` and jump `d`: for
/// `gamma < d n1 n2 / (n1 + n2)` the plateaus move together by `gamma / n1`
/// and `gamma / n2`.
fn step_oracle(n1: usize, n2: usize, d: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![gamma / n1 as f64; n1];
    out.extend(vec![d - gamma / n2 as f64; n2]);
    out
}

#[test]
fn one_dimensional_step_matches_closed_form() {
    for (n1, n2, gamma) in [(2usize, 2usize, 0.05), (2, 2, 0.2), (3, 2, 0.1), (1, 4, 0.15)] {
        let mut b = vec![0.0; n1];
        b.extend(vec![1.0; n2]);
        let field = MultiBandField::new(1, 1, n1 + n2, b).unwrap();
        let z = vtv_denoise(&field, gamma, &params(4000)).unwrap();
        let expect = step_oracle(n1, n2, 1.0, gamma);
        for (a, e) in z.data.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-8, "{n1}+{n2}, gamma {gamma}: {:?} vs {expect:?}", z.data);
        }
        // jump shrinks by gamma (1/n1 + 1/n2)
        let jump = z.data[n1] - z.data[n1 - 1];
        assert!((jump - (1.0 - gamma * (1.0 / n1 as f64 + 1.0 / n2 as f64))).abs() < 1e-8);
    }
}

#[test]
fn constant_input_unchanged() {
    let b = MultiBandField::new(2, 5, 5, vec![0.61; 50]).unwrap();
    let z = vtv_denoise(&b, 1.5, &VtvParams::default()).unwrap();
    assert!(z.data.iter().all(|v| (v - 0.61).abs() < 1e-15));
}

#[test]
fn identical_bands_stay_identical() {
    let one = random_field(1, 8, 8, 3);
    let mut data = one.data.clone();
    data.extend_from_slice(&one.data);
    let b = MultiBandField::new(2, 8, 8, data).unwrap();
    let z = vtv_denoise(&b, 0.2, &VtvParams::default()).unwrap();
    assert_eq!(z.band(0), z.band(1));
}

#[test]
fn objective_non_increasing_over_dual_iterations() {
    for (seed, gamma) in [(4u64, 0.05), (5, 0.2), (6, 1.0)] {
        let b = random_field(3, 8, 8, seed);
        let mut dual = DualField::zeros(b.data.len());
        let mut objs = vec![vtv_objective(&b, &b, gamma)];
        vtv_denoise_with(&b, gamma, &params(100), &mut dual, |_, d| {
            objs.push(vtv_objective(&primal_from_dual(&b, gamma, d), &b, gamma));
        })
        .unwrap();
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "gamma {gamma}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn dual_stays_in_unit_ball() {
    let b = random_field(3, 6, 6, 9);
    let mut dual = DualField::zeros(b.data.len());
    vtv_denoise_with(&b, 0.5, &VtvParams::default(), &mut dual, |_, d| {
        for p in 0..36 {
            let s: f64 = (0..3).map(|k| d.px[k * 36 + p].powi(2) + d.py[k * 36 + p].powi(2)).sum();
            assert!(s.sqrt() <= 1.0 + 1e-12);
        }
    })
    .unwrap();
}

#[test]
fn warm_start_continues_from_dual() {
    let b = random_field(2, 6, 6, 10);
    let full = vtv_denoise(&b, 0.3, &params(60)).unwrap();
    let mut dual = DualField::zeros(b.data.len());
    vtv_denoise_with(&b, 0.3, &params(30), &mut dual, |_, _| {}).unwrap();
    let resumed = vtv_denoise_with(&b, 0.3, &params(30), &mut dual, |_, _| {}).unwrap();
    for (a, c) in full.data.iter().zip(&resumed.data) {
        assert!((a - c).abs() < 1e-12);
    }
}
