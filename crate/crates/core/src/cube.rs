//! Image and cube containers plus the spectral filter model.
//!
//! Intensities are kept in `[0, 1]`; 8-bit scaling only happens inside
//! [`crate::metrics`].

use crate::error::{Result, SsrError};

/// A single-band image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BandImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl BandImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(SsrError::Shape(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SsrError::InvalidValue(format!("non-finite pixel at {i}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }
}

/// A `q_bands x height x width` cube, band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    q_bands: usize,
    height: usize,
    width: usize,
    wavelengths_nm: Vec<f64>,
    data: Vec<f64>,
}

impl SpectralCube {
    pub fn new(
        height: usize,
        width: usize,
        wavelengths_nm: Vec<f64>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let q_bands = wavelengths_nm.len();
        if q_bands == 0 {
            return Err(SsrError::Shape("cube needs at least one band".into()));
        }
        check_increasing(&wavelengths_nm)?;
        if data.len() != q_bands * height * width {
            return Err(SsrError::Shape(format!(
                "cube data has {} values, expected {}x{}x{}",
                data.len(),
                q_bands,
                height,
                width
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(SsrError::InvalidValue(format!(
                "voxel {i} = {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            q_bands,
            height,
            width,
            wavelengths_nm,
            data,
        })
    }

    /// Clamps `data` into `[0, 1]` before validating the rest.
    pub fn from_unclamped(
        height: usize,
        width: usize,
        wavelengths_nm: Vec<f64>,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        for v in data.iter_mut() {
            if v.is_finite() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Self::new(height, width, wavelengths_nm, data)
    }

    /// Restacks single-band planes into a cube.
    pub fn from_bands(bands: &[BandImage], wavelengths_nm: Vec<f64>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| SsrError::Shape("no bands to stack".into()))?;
        if bands.len() != wavelengths_nm.len() {
            return Err(SsrError::Shape(format!(
                "{} bands but {} wavelengths",
                bands.len(),
                wavelengths_nm.len()
            )));
        }
        let mut data = Vec::with_capacity(bands.len() * first.len());
        for b in bands {
            if b.height != first.height || b.width != first.width {
                return Err(SsrError::Shape("bands differ in size".into()));
            }
            data.extend_from_slice(&b.data);
        }
        Self::new(first.height, first.width, wavelengths_nm, data)
    }

    /// 400, 410, ..., 700 nm.
    pub fn cave_wavelengths() -> Vec<f64> {
        (0..31).map(|i| 400.0 + 10.0 * i as f64).collect()
    }

    pub fn q_bands(&self) -> usize {
        self.q_bands
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band_slice(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    /// Spectrum of pixel `p` (row-major index).
    pub fn spectrum(&self, p: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.q_bands).map(|b| self.data[b * n + p]).collect()
    }

    pub fn same_shape(&self, other: &SpectralCube) -> bool {
        self.q_bands == other.q_bands && self.height == other.height && self.width == other.width
    }

    /// Crops a centered `height x width` window.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(SsrError::Shape(format!(
                "cannot crop {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let y0 = (self.height - height) / 2;
        let x0 = (self.width - width) / 2;
        let mut data = Vec::with_capacity(self.q_bands * height * width);
        for b in 0..self.q_bands {
            let plane = self.band_slice(b);
            for y in y0..y0 + height {
                data.extend_from_slice(&plane[y * self.width + x0..y * self.width + x0 + width]);
            }
        }
        Self::new(height, width, self.wavelengths_nm.clone(), data)
    }
}

fn check_increasing(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(SsrError::InvalidValue("non-finite wavelength".into()));
    }
    if w.windows(2).any(|p| p[1] <= p[0]) {
        return Err(SsrError::InvalidValue(
            "wavelengths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Returns band `band_index` of `cube` as a standalone image.
pub fn cube_band(cube: &SpectralCube, band_index: usize) -> Result<BandImage> {
    if band_index >= cube.q_bands {
        return Err(SsrError::BandIndex {
            index: band_index,
            len: cube.q_bands,
        });
    }
    Ok(BandImage {
        height: cube.height,
        width: cube.width,
        data: cube.band_slice(band_index).to_vec(),
    })
}

/// Per-pixel inner product of each spectrum with `t_row`, divided by the
/// number of pass-band (non-zero) entries.
pub fn apply_filter(cube: &SpectralCube, t_row: &[f64]) -> Result<BandImage> {
    let weights = normalized_row(t_row, cube.q_bands)?;
    let n = cube.pixels();
    let mut out = vec![0.0; n];
    for (b, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(cube.band_slice(b)) {
            *o += w * v;
        }
    }
    Ok(BandImage {
        height: cube.height,
        width: cube.width,
        data: out,
    })
}

/// `t_row / (number of non-zero entries)`; the same scaling is used for the
/// stacked response in spectral reconstruction.
pub fn normalized_row(t_row: &[f64], q_bands: usize) -> Result<Vec<f64>> {
    if t_row.len() != q_bands {
        return Err(SsrError::Shape(format!(
            "transmittance row has {} entries, cube has {} bands",
            t_row.len(),
            q_bands
        )));
    }
    let pass = t_row.iter().filter(|&&t| t != 0.0).count();
    if pass == 0 {
        return Err(SsrError::InvalidValue("transmittance row blocks every band".into()));
    }
    Ok(t_row.iter().map(|t| t / pass as f64).collect())
}

/// Ideal notch: blocks `|lambda - center| <= half_width`, passes the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchFilter {
    pub center_nm: f64,
    pub half_width_nm: f64,
    pub is_panchromatic: bool,
}

impl NotchFilter {
    pub fn notch(center_nm: f64, half_width_nm: f64) -> Result<Self> {
        if !(half_width_nm > 0.0) || !center_nm.is_finite() {
            return Err(SsrError::InvalidParam(format!(
                "notch needs finite center and positive half width, got {center_nm} / {half_width_nm}"
            )));
        }
        Ok(Self {
            center_nm,
            half_width_nm,
            is_panchromatic: false,
        })
    }

    pub fn panchromatic() -> Self {
        Self {
            center_nm: 0.0,
            half_width_nm: 0.0,
            is_panchromatic: true,
        }
    }
}

/// `K x Q` transmittance matrix, one row per aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub rows: Vec<Vec<f64>>,
}

impl FilterBank {
    pub fn from_filters(filters: &[NotchFilter], wavelengths_nm: &[f64]) -> Self {
        Self {
            rows: filters
                .iter()
                .map(|f| crate::simulate::notch_transmittance(f, wavelengths_nm))
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn q(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Rows scaled by their pass-band count, matching [`apply_filter`].
    pub fn normalized(&self) -> Result<Vec<Vec<f64>>> {
        let q = self.q();
        self.rows.iter().map(|r| normalized_row(r, q)).collect()
    }
}

/// Sub-pixel translation plus optional small rotation about the image
/// center, in high-resolution pixel units. The warp it induces pulls:
/// `out(p) = src(Rot(p - c) + c + (dx, dy))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricTransform {
    pub dx: f64,
    pub dy: f64,
    pub rotation_deg: f64,
}

impl GeometricTransform {
    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            dx,
            dy,
            rotation_deg: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = (-self.rotation_deg).to_radians().sin_cos();
        // p = Rot^-1 (q - c - d) + c  ->  translation -Rot^-1 d
        Self {
            dx: -(c * self.dx - s * self.dy),
            dy: -(s * self.dx + c * self.dy),
            rotation_deg: -self.rotation_deg,
        }
    }

    /// Same motion expressed on a grid `factor` times coarser.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dx: self.dx * factor,
            dy: self.dy * factor,
            rotation_deg: self.rotation_deg,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if !(self.dx.is_finite() && self.dy.is_finite() && self.rotation_deg.is_finite()) {
            return Err(SsrError::DegenerateTransform("non-finite parameter".into()));
        }
        if self.dx.abs() >= width as f64 || self.dy.abs() >= height as f64 {
            return Err(SsrError::DegenerateTransform(format!(
                "shift ({}, {}) exceeds the {height}x{width} image",
                self.dx, self.dy
            )));
        }
        if self.rotation_deg.abs() >= 45.0 {
            return Err(SsrError::DegenerateTransform(format!(
                "rotation {} deg is not a small angle",
                self.rotation_deg
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0 && self.rotation_deg == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_cube(q: usize, h: usize, w: usize) -> SpectralCube {
        let n = q * h * w;
        let data = (0..n).map(|i| (i as f64) / n as f64).collect();
        let wl = (0..q).map(|i| 400.0 + 10.0 * i as f64).collect();
        SpectralCube::new(h, w, wl, data).unwrap()
    }

    #[test]
    fn single_band_cube_returns_its_plane() {
        let c = ramp_cube(1, 3, 4);
        assert_eq!(cube_band(&c, 0).unwrap().data, c.data());
    }

    #[test]
    fn band_14_of_cave_grid_is_540nm() {
        let c = ramp_cube(31, 2, 2);
        assert_eq!(c.wavelengths_nm()[14], 540.0);
        let b = cube_band(&c, 14).unwrap();
        assert_eq!(b.data, c.band_slice(14));
    }

    #[test]
    fn band_index_at_q_is_rejected() {
        let c = ramp_cube(5, 2, 2);
        assert_eq!(
            cube_band(&c, 5),
            Err(SsrError::BandIndex { index: 5, len: 5 })
        );
    }

    #[test]
    fn restack_is_bit_exact() {
        let c = ramp_cube(7, 3, 5);
        let bands: Vec<_> = (0..7).map(|b| cube_band(&c, b).unwrap()).collect();
        let back = SpectralCube::from_bands(&bands, c.wavelengths_nm().to_vec()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn cube_rejects_bad_inputs() {
        assert!(SpectralCube::new(1, 1, vec![500.0, 500.0], vec![0.0, 0.0]).is_err());
        assert!(SpectralCube::new(1, 1, vec![500.0], vec![1.5]).is_err());
        assert!(SpectralCube::new(1, 2, vec![500.0], vec![0.5]).is_err());
        assert!(SpectralCube::new(1, 1, vec![], vec![]).is_err());
    }

    #[test]
    fn all_pass_filter_on_identical_bands_is_identity() {
        let plane: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let data: Vec<f64> = (0..4).flat_map(|_| plane.clone()).collect();
        let c = SpectralCube::new(3, 4, vec![1.0, 2.0, 3.0, 4.0], data).unwrap();
        let out = apply_filter(&c, &[1.0; 4]).unwrap();
        for (a, b) in out.data.iter().zip(&plane) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_filter_selects_band() {
        let c = ramp_cube(4, 2, 3);
        let out = apply_filter(&c, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out.data, c.band_slice(2));
    }

    #[test]
    fn filter_length_mismatch_errors() {
        let c = ramp_cube(4, 2, 3);
        assert!(matches!(
            apply_filter(&c, &[1.0; 3]),
            Err(SsrError::Shape(_))
        ));
    }

    #[test]
    fn transform_inverse_round_trips() {
        let t = GeometricTransform {
            dx: 0.7,
            dy: -1.2,
            rotation_deg: 3.0,
        };
        let back = t.inverse().inverse();
        assert!((back.dx - t.dx).abs() < 1e-12);
        assert!((back.dy - t.dy).abs() < 1e-12);
        assert!((back.rotation_deg - t.rotation_deg).abs() < 1e-12);
    }

    #[test]
    fn center_crop_takes_middle() {
        let c = ramp_cube(2, 4, 4);
        let k = c.center_crop(2, 2).unwrap();
        assert_eq!(k.band_slice(0), &[c.band_slice(0)[5], c.band_slice(0)[6], c.band_slice(0)[9], c.band_slice(0)[10]]);
    }
}
