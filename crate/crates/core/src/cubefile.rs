//! On-disk cube container.
//!
//! Layout, all little-endian: `"SSRC"`, `u32` Q, `u32` H, `u32` W, Q `f64`
//! wavelengths (nm), then Q*H*W `f32` samples band-major.

use crate::cube::SpectralCube;
use crate::error::{Result, SsrError};

const MAGIC: &[u8; 4] = b"SSRC";

/// Cube payload without the `[0, 1]` constraint, for intermediate fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCube {
    pub q: usize,
    pub height: usize,
    pub width: usize,
    pub wavelengths_nm: Vec<f64>,
    pub data: Vec<f64>,
}

impl From<&SpectralCube> for RawCube {
    fn from(c: &SpectralCube) -> Self {
        Self {
            q: c.q_bands(),
            height: c.height(),
            width: c.width(),
            wavelengths_nm: c.wavelengths_nm().to_vec(),
            data: c.data().to_vec(),
        }
    }
}

impl RawCube {
    pub fn into_cube(self) -> Result<SpectralCube> {
        SpectralCube::new(self.height, self.width, self.wavelengths_nm, self.data)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.wavelengths_nm.len() != self.q || self.data.len() != self.q * self.height * self.width {
            return Err(SsrError::Shape("cube header does not match payload".into()));
        }
        let dim = |v: usize| {
            u32::try_from(v).map_err(|_| SsrError::Format(format!("dimension {v} exceeds u32")))
        };
        let mut out = Vec::with_capacity(16 + 8 * self.q + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&dim(self.q)?.to_le_bytes());
        out.extend_from_slice(&dim(self.height)?.to_le_bytes());
        out.extend_from_slice(&dim(self.width)?.to_le_bytes());
        for w in &self.wavelengths_nm {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for v in &self.data {
            if !v.is_finite() {
                return Err(SsrError::InvalidValue("non-finite sample".into()));
            }
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(SsrError::Format("missing SSRC header".into()));
        }
        let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (q, height, width) = (u(4), u(8), u(12));
        let n = q
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| SsrError::Format("header dimensions overflow".into()))?;
        let expect = 16 + 8 * q + 4 * n;
        if bytes.len() != expect {
            return Err(SsrError::Format(format!(
                "cube file is {} bytes, header implies {expect}",
                bytes.len()
            )));
        }
        let wl_end = 16 + 8 * q;
        let wavelengths_nm = bytes[16..wl_end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let data: Vec<f64> = bytes[wl_end..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SsrError::InvalidValue("non-finite sample in cube file".into()));
        }
        Ok(Self {
            q,
            height,
            width,
            wavelengths_nm,
            data,
        })
    }
}

pub fn cube_to_bytes(cube: &SpectralCube) -> Vec<u8> {
    RawCube::from(cube)
        .to_bytes()
        .expect("a validated cube always serialises")
}

pub fn cube_from_bytes(bytes: &[u8]) -> Result<SpectralCube> {
    RawCube::from_bytes(bytes)?.into_cube()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let c = SpectralCube::new(1, 2, vec![400.0, 410.0], vec![0.0, 0.5, 0.25, 1.0]).unwrap();
        let b = cube_to_bytes(&c);
        assert_eq!(&b[..4], b"SSRC");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 400.0);
        assert_eq!(b.len(), 16 + 16 + 16);
        assert_eq!(cube_from_bytes(&b).unwrap(), c);
    }

    #[test]
    fn truncated_and_bad_magic() {
        let c = SpectralCube::new(1, 1, vec![400.0], vec![0.5]).unwrap();
        let b = cube_to_bytes(&c);
        assert!(cube_from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[3] = b'D';
        assert!(cube_from_bytes(&bad).is_err());
    }
}
