//! Spectral reconstruction from the high-resolution filtered images.
//!
//! Solves
//!
//! `min_theta 1/2 |Y - T D theta|^2 + eta |theta|_1 + eta_tv VTV(D theta - P_Q)`
//!
//! by ADMM with splittings `Z1 = theta` and `Z2 = D theta`, where `P_Q` is the
//! pan image repeated over all `Q` bands. The cube is `X = D theta`.

use nalgebra::DMatrix;

use crate::cube::{BandImage, FilterBank, SpectralCube};
use crate::dictionary::Dictionary;
use crate::error::{Result, SsrError};
use crate::par;
use crate::params::{SpecReconParams, SsrParams, VtvParams};
use crate::vtv::{vtv_denoise_with, DualField, MultiBandField};

#[inline]
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// `sign(x) max(|x| - tau, 0)` elementwise.
pub fn soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold_scalar(v, tau)).collect()
}

/// Normalised transmittance rows and the matching high-resolution images.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedResponse {
    /// `K x Q`, each row scaled like [`crate::cube::apply_filter`].
    pub t: Vec<Vec<f64>>,
    pub y_h: MultiBandField,
    pub wavelengths_nm: Vec<f64>,
}

impl StackedResponse {
    pub fn new(bank: &FilterBank, y_h: MultiBandField, wavelengths_nm: Vec<f64>) -> Result<Self> {
        if bank.k() != y_h.bands {
            return Err(SsrError::Shape(format!(
                "{} transmittance rows but {} observed bands",
                bank.k(),
                y_h.bands
            )));
        }
        if bank.q() != wavelengths_nm.len() {
            return Err(SsrError::Shape(format!(
                "transmittance has {} columns but {} wavelengths",
                bank.q(),
                wavelengths_nm.len()
            )));
        }
        Ok(Self {
            t: bank.normalized()?,
            y_h,
            wavelengths_nm,
        })
    }

    /// Uses `t` as given, without normalisation.
    pub fn from_rows(t: Vec<Vec<f64>>, y_h: MultiBandField, wavelengths_nm: Vec<f64>) -> Result<Self> {
        let q = wavelengths_nm.len();
        if t.len() != y_h.bands || t.iter().any(|r| r.len() != q) {
            return Err(SsrError::Shape("transmittance rows do not match observations".into()));
        }
        Ok(Self {
            t,
            y_h,
            wavelengths_nm,
        })
    }

    pub fn k(&self) -> usize {
        self.t.len()
    }

    pub fn q(&self) -> usize {
        self.wavelengths_nm.len()
    }
}

/// ADMM iterates. `theta`, `z1`, `v1` are pixel-major (`2Q` per pixel);
/// `z2`, `v2` are band-major like the cube.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub theta: Vec<f64>,
    pub z1: Vec<f64>,
    pub v1: Vec<f64>,
    pub z2: Vec<f64>,
    pub v2: Vec<f64>,
    pub params: SpecReconParams,
    /// `|theta - Z1|_F` per iteration.
    pub residual_theta: Vec<f64>,
    /// `|D theta - Z2|_F` per iteration.
    pub residual_dtheta: Vec<f64>,
    /// Fraction of exact zeros in `Z1` per iteration.
    pub zero_fraction: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpecReconOutput {
    pub cube: SpectralCube,
    /// `D theta` before clamping, band-major.
    pub raw: Vec<f64>,
    pub state: AdmmState,
}

pub fn spectral_reconstruct(
    obs: &StackedResponse,
    dict: &Dictionary,
    pan: &BandImage,
    params: &SsrParams,
) -> Result<SpectralCube> {
    Ok(spectral_reconstruct_with_state(obs, dict, pan, &params.specrecon, &params.vtv)?.cube)
}

/// Cholesky factor of the `2Q x 2Q` theta system, stored lower-triangular row-major.
struct ThetaSolver {
    n: usize,
    l: Vec<f64>,
}

impl ThetaSolver {
    fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let chol = a.cholesky().ok_or_else(|| {
            SsrError::NotPositiveDefinite("D^T T^T T D + rho1 I + rho2 D^T D".into())
        })?;
        let lm = chol.l();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = lm[(i, j)];
            }
        }
        Ok(Self { n, l })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.l[i * n + j] * b[j];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.l[j * n + i] * b[j];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

pub fn spectral_reconstruct_with_state(
    obs: &StackedResponse,
    dict: &Dictionary,
    pan: &BandImage,
    params: &SpecReconParams,
    vtv: &VtvParams,
) -> Result<SpecReconOutput> {
    params.validate()?;
    vtv.validate()?;
    let (q, k, atoms) = (obs.q(), obs.k(), dict.n_atoms());
    let (h, w) = (obs.y_h.height, obs.y_h.width);
    let npix = h * w;
    if dict.q() != q {
        return Err(SsrError::Shape(format!(
            "dictionary has {} rows, cube has {q} bands",
            dict.q()
        )));
    }
    if pan.height != h || pan.width != w {
        return Err(SsrError::Shape(format!(
            "pan is {}x{}, observations are {h}x{w}",
            pan.height, pan.width
        )));
    }
    let d = dict.matrix();
    let t = DMatrix::from_fn(k, q, |i, j| obs.t[i][j]);
    let td = &t * &d;
    let dtd = d.transpose() * &d;
    let system = td.transpose() * &td
        + DMatrix::identity(atoms, atoms) * params.rho1
        + &dtd * params.rho2;
    let solver = ThetaSolver::new(system)?;
    // row-major copies for the per-pixel loops
    let tdt = td.transpose(); // atoms x k
    let tdt_rm: Vec<f64> = (0..atoms).flat_map(|a| (0..k).map(move |i| (a, i))).map(|(a, i)| tdt[(a, i)]).collect();
    let dt_rm: Vec<f64> = (0..atoms).flat_map(|a| (0..q).map(move |b| (a, b))).map(|(a, b)| d[(b, a)]).collect();
    let d_rm: Vec<f64> = (0..q).flat_map(|b| (0..atoms).map(move |a| (b, a))).map(|(b, a)| d[(b, a)]).collect();

    let (rho1, rho2) = (params.rho1, params.rho2);
    let mut st = AdmmState {
        theta: vec![0.0; npix * atoms],
        z1: vec![0.0; npix * atoms],
        v1: vec![0.0; npix * atoms],
        z2: vec![0.0; q * npix],
        v2: vec![0.0; q * npix],
        params: *params,
        residual_theta: Vec::with_capacity(params.iter_max),
        residual_dtheta: Vec::with_capacity(params.iter_max),
        zero_fraction: Vec::with_capacity(params.iter_max),
    };
    let mut dtheta = vec![0.0; q * npix];
    let mut dual = DualField::zeros(q * npix);
    let y = &obs.y_h.data;
    const PIX_CHUNK: usize = 256;

    for _ in 0..params.iter_max {
        // theta update, pixel by pixel
        {
            let (z1, v1, z2, v2) = (&st.z1, &st.v1, &st.z2, &st.v2);
            let (tdt_rm, dt_rm, solver) = (&tdt_rm, &dt_rm, &solver);
            par::for_each_chunk(&mut st.theta, PIX_CHUNK * atoms, |ci, out| {
                let mut u = vec![0.0; q];
                for (off, th) in out.chunks_mut(atoms).enumerate() {
                    let p = ci * PIX_CHUNK + off;
                    for b in 0..q {
                        u[b] = rho2 * z2[b * npix + p] - v2[b * npix + p];
                    }
                    for a in 0..atoms {
                        let mut s = rho1 * z1[p * atoms + a] - v1[p * atoms + a];
                        let trow = &tdt_rm[a * k..(a + 1) * k];
                        for i in 0..k {
                            s += trow[i] * y[i * npix + p];
                        }
                        let drow = &dt_rm[a * q..(a + 1) * q];
                        for b in 0..q {
                            s += drow[b] * u[b];
                        }
                        th[a] = s;
                    }
                    solver.solve_in_place(th);
                }
            });
        }
        // Z1 = soft(theta + V1 / rho1, eta / rho1)
        {
            let thr = params.eta / rho1;
            for ((z, th), v) in st.z1.iter_mut().zip(&st.theta).zip(&st.v1) {
                *z = soft_threshold_scalar(th + v / rho1, thr);
            }
        }
        // D theta, band-major
        {
            let (theta, d_rm) = (&st.theta, &d_rm);
            par::for_each_chunk(&mut dtheta, npix, |b, plane| {
                let drow = &d_rm[b * atoms..(b + 1) * atoms];
                for (p, o) in plane.iter_mut().enumerate() {
                    let th = &theta[p * atoms..(p + 1) * atoms];
                    *o = drow.iter().zip(th).map(|(x, y)| x * y).sum();
                }
            });
        }
        // Z2 = P_Q + prox_{eta_tv / rho2 VTV}(D theta + V2 / rho2 - P_Q)
        {
            let mut shifted = vec![0.0; q * npix];
            for b in 0..q {
                for p in 0..npix {
                    let i = b * npix + p;
                    shifted[i] = dtheta[i] + st.v2[i] / rho2 - pan.data[p];
                }
            }
            let field = MultiBandField::new(q, h, w, shifted)?;
            if !vtv.warm_start {
                dual = DualField::zeros(q * npix);
            }
            let zq = vtv_denoise_with(&field, params.eta_tv / rho2, vtv, &mut dual, |_, _| {})?;
            for b in 0..q {
                for p in 0..npix {
                    let i = b * npix + p;
                    st.z2[i] = zq.data[i] + pan.data[p];
                }
            }
        }
        // multipliers and monitors
        let mut r1 = 0.0;
        let mut zeros = 0usize;
        for ((v, th), z) in st.v1.iter_mut().zip(&st.theta).zip(&st.z1) {
            let diff = th - z;
            *v += rho1 * diff;
            r1 += diff * diff;
            if *z == 0.0 {
                zeros += 1;
            }
        }
        let mut r2 = 0.0;
        for ((v, dt), z) in st.v2.iter_mut().zip(&dtheta).zip(&st.z2) {
            let diff = dt - z;
            *v += rho2 * diff;
            r2 += diff * diff;
        }
        st.residual_theta.push(r1.sqrt());
        st.residual_dtheta.push(r2.sqrt());
        st.zero_fraction.push(zeros as f64 / st.z1.len().max(1) as f64);
    }

    let cube = SpectralCube::from_unclamped(h, w, obs.wavelengths_nm.clone(), dtheta.clone())?;
    Ok(SpecReconOutput {
        cube,
        raw: dtheta,
        state: st,
    })
}
