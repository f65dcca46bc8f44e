//! Forward model of the nine-aperture notch-filter array.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::cube::{apply_filter, BandImage, GeometricTransform, NotchFilter, SpectralCube};
use crate::error::{Result, SsrError};
use crate::operators::build_aperture_operator;

/// One aperture's low-resolution capture and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub aperture_index: usize,
    pub image: BandImage,
    pub filter: NotchFilter,
    pub transform: GeometricTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApertureStack {
    pub captures: Vec<Capture>,
    /// Spatial downsampling factor shared by all apertures.
    pub r: usize,
}

impl ApertureStack {
    pub fn new(captures: Vec<Capture>, r: usize) -> Result<Self> {
        let first = captures
            .first()
            .ok_or_else(|| SsrError::Shape("stack has no captures".into()))?;
        if r == 0 {
            return Err(SsrError::InvalidParam("downsampling factor must be >= 1".into()));
        }
        let (m, n) = (first.image.height, first.image.width);
        if captures
            .iter()
            .any(|c| c.image.height != m || c.image.width != n)
        {
            return Err(SsrError::Shape("captures differ in size".into()));
        }
        Ok(Self { captures, r })
    }

    pub fn k(&self) -> usize {
        self.captures.len()
    }

    /// Low-resolution `(M, N)`.
    pub fn low_dims(&self) -> (usize, usize) {
        let img = &self.captures[0].image;
        (img.height, img.width)
    }

    /// High-resolution `(r M, r N)`.
    pub fn high_dims(&self) -> (usize, usize) {
        let (m, n) = self.low_dims();
        (m * self.r, n * self.r)
    }

    pub fn pan_index(&self) -> Option<usize> {
        self.captures.iter().position(|c| c.filter.is_panchromatic)
    }

    pub fn transforms(&self) -> Vec<GeometricTransform> {
        self.captures.iter().map(|c| c.transform).collect()
    }

    pub fn filters(&self) -> Vec<NotchFilter> {
        self.captures.iter().map(|c| c.filter).collect()
    }

    /// Observations concatenated in aperture order.
    pub fn concatenated(&self) -> Vec<f64> {
        self.captures
            .iter()
            .flat_map(|c| c.image.data.iter().copied())
            .collect()
    }
}

/// Optics of one aperture for the magnification bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsSpec {
    pub aperture_diameter_mm: f64,
    pub focal_length_mm: f64,
    pub pixel_pitch_um: f64,
    pub wavelength_nm: f64,
    pub k_apertures: usize,
}

impl OpticsSpec {
    /// The prototype: f/2.2 25 mm lens, 6.9 um pixels, 700 nm, nine apertures.
    pub fn prototype() -> Self {
        Self {
            aperture_diameter_mm: 25.0 / 2.2,
            focal_length_mm: 25.0,
            pixel_pitch_um: 6.9,
            wavelength_nm: 700.0,
            k_apertures: 9,
        }
    }

    /// `2 A p / (1.22 lambda f)` with everything converted to millimetres.
    pub fn diffraction_ratio(&self) -> f64 {
        let p_mm = self.pixel_pitch_um * 1e-3;
        let lambda_mm = self.wavelength_nm * 1e-6;
        2.0 * self.aperture_diameter_mm * p_mm / (1.22 * lambda_mm * self.focal_length_mm)
    }
}

/// Theoretical super-resolution bound `min(2Ap / (1.22 lambda f), sqrt(K))`.
pub fn sr_factor(o: &OpticsSpec) -> f64 {
    o.diffraction_ratio().min((o.k_apertures as f64).sqrt())
}

/// Binary transmittance sampled on `wavelengths_nm`.
pub fn notch_transmittance(filter: &NotchFilter, wavelengths_nm: &[f64]) -> Vec<f64> {
    wavelengths_nm
        .iter()
        .map(|&l| {
            if !filter.is_panchromatic && (l - filter.center_nm).abs() <= filter.half_width_nm {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Eight notches spread over 420-690 nm with the panchromatic aperture in the
/// middle of a 3x3 grid (index 4).
pub fn default_filters() -> Vec<NotchFilter> {
    const CENTERS: [f64; 8] = [420.0, 460.0, 500.0, 540.0, 580.0, 620.0, 655.0, 690.0];
    let mut out: Vec<NotchFilter> = CENTERS
        .iter()
        .map(|&c| NotchFilter {
            center_nm: c,
            half_width_nm: 20.0,
            is_panchromatic: false,
        })
        .collect();
    out.insert(4, NotchFilter::panchromatic());
    out
}

/// One shift per cell of an `r x r` grid centered on the middle aperture,
/// in high-resolution pixels, each perturbed by uniform jitter in
/// `[-jitter, jitter]`. The center aperture of an odd grid is left exact.
pub fn default_transforms(r: usize, jitter: f64, seed: u64) -> Vec<GeometricTransform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (r as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(r * r);
    for gy in 0..r {
        for gx in 0..r {
            let (mut dx, mut dy) = (gx as f64 - half, gy as f64 - half);
            let is_center = r % 2 == 1 && gx == r / 2 && gy == r / 2;
            if jitter > 0.0 {
                let u = Uniform::new_inclusive(-jitter, jitter).expect("jitter range");
                let (jx, jy) = (u.sample(&mut rng), u.sample(&mut rng));
                if !is_center {
                    dx += jx;
                    dy += jy;
                }
            }
            out.push(GeometricTransform::translation(dx, dy));
        }
    }
    out
}

/// Filter, warp and decimate each aperture, then add optional clamped
/// Gaussian noise. Noise for aperture `i` is drawn from a stream derived
/// from `(seed, i)`.
pub fn simulate_capture(
    truth: &SpectralCube,
    filters: &[NotchFilter],
    transforms: &[GeometricTransform],
    r: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<ApertureStack> {
    if filters.len() != transforms.len() || filters.is_empty() {
        return Err(SsrError::Shape(format!(
            "{} filters but {} transforms",
            filters.len(),
            transforms.len()
        )));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(SsrError::InvalidParam(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let (h, w) = (truth.height(), truth.width());
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(SsrError::NotDivisible { h, w, r });
    }
    let (m, n) = (h / r, w / r);
    let mut captures = Vec::with_capacity(filters.len());
    for (i, (f, t)) in filters.iter().zip(transforms).enumerate() {
        let row = notch_transmittance(f, truth.wavelengths_nm());
        let filtered = apply_filter(truth, &row)?;
        let op = build_aperture_operator(t, r, h, w)?;
        let mut low = op.apply(&filtered.data);
        if noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));
            let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
            for v in low.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        captures.push(Capture {
            aperture_index: i,
            image: BandImage::new(m, n, low)?,
            filter: *f,
            transform: *t,
        });
    }
    ApertureStack::new(captures, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_bound_is_three() {
        let o = OpticsSpec::prototype();
        assert!((o.diffraction_ratio() - 7.345).abs() < 5e-4);
        assert_eq!(sr_factor(&o), 3.0);
    }

    #[test]
    fn bound_takes_smaller_branch() {
        let mut o = OpticsSpec::prototype();
        o.k_apertures = 1;
        assert_eq!(sr_factor(&o), 1.0);
        // shrink the aperture until the diffraction term is exactly 2
        let mut o = OpticsSpec::prototype();
        o.aperture_diameter_mm *= 2.0 / o.diffraction_ratio();
        assert!((sr_factor(&o) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn notch_550_blocks_530_to_570() {
        let wl: Vec<f64> = (0..31).map(|i| 400.0 + 10.0 * i as f64).collect();
        let t = notch_transmittance(&NotchFilter::notch(550.0, 20.0).unwrap(), &wl);
        for (l, v) in wl.iter().zip(&t) {
            let blocked = (530.0..=570.0).contains(l);
            assert_eq!(*v, if blocked { 0.0 } else { 1.0 }, "at {l} nm");
        }
        assert_eq!(t.iter().filter(|&&v| v == 1.0).count(), 26);
    }

    #[test]
    fn panchromatic_and_narrow_off_grid_are_all_pass() {
        let wl: Vec<f64> = (0..31).map(|i| 400.0 + 10.0 * i as f64).collect();
        assert!(notch_transmittance(&NotchFilter::panchromatic(), &wl)
            .iter()
            .all(|&v| v == 1.0));
        let narrow = NotchFilter::notch(545.0, 2.0).unwrap();
        assert!(notch_transmittance(&narrow, &wl).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn default_layout_shape() {
        let f = default_filters();
        assert_eq!(f.len(), 9);
        assert_eq!(f.iter().filter(|f| f.is_panchromatic).count(), 1);
        assert!(f[4].is_panchromatic);
        let t = default_transforms(3, 0.1, 7);
        assert_eq!(t.len(), 9);
        assert_eq!(t[4], GeometricTransform::identity());
        for (i, tr) in t.iter().enumerate() {
            let (gx, gy) = ((i % 3) as f64 - 1.0, (i / 3) as f64 - 1.0);
            assert!((tr.dx - gx).abs() <= 0.1 && (tr.dy - gy).abs() <= 0.1);
        }
        assert_eq!(t, default_transforms(3, 0.1, 7));
    }

    #[test]
    fn rejects_bad_arguments() {
        let cube = SpectralCube::new(4, 4, vec![500.0], vec![0.5; 16]).unwrap();
        let f = vec![NotchFilter::panchromatic(); 2];
        let t = vec![GeometricTransform::identity(); 2];
        assert!(simulate_capture(&cube, &f, &t[..1], 2, 0.0, 0).is_err());
        assert!(simulate_capture(&cube, &f, &t, 3, 0.0, 0).is_err());
        assert!(simulate_capture(&cube, &f, &t, 2, -0.1, 0).is_err());
    }
}
