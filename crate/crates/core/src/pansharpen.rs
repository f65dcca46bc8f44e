//! Pan-sharpening of every aperture against the super-resolved pan image.
//!
//! Energy per aperture stack `Y = (Y_1..Y_K)` at high resolution:
//!
//! `E(Y) = 1/2 sum_i |A_i Y_i - y_i|^2 + gamma * VTV(Y - P)`
//!
//! with `A_i = R W_i` and `P` the pan image repeated `K` times. Minimised by
//! FISTA: gradient step on the fidelity, then the VTV prox applied to the
//! residual `Y - P`.

use crate::cube::BandImage;
use crate::error::{Result, SsrError};
use crate::operators::{build_aperture_operator, power_norm_sq, upsample_bilinear, warp_image, SparseOperator};
use crate::params::{Momentum, PansharpenParams, VtvParams};
use crate::simulate::ApertureStack;
use crate::vtv::{vtv_denoise_with, vtv_norm, DualField, MultiBandField};

/// `t_{j+1} = (1 + sqrt(1 + 4 t_j^2)) / 2`.
pub fn fista_stepsize(t_j: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t_j * t_j).sqrt()) / 2.0
}

#[derive(Debug, Clone)]
pub struct PansharpenProblem {
    pub observations: Vec<BandImage>,
    pub pan: BandImage,
    pub operators: Vec<SparseOperator>,
    adjoints: Vec<SparseOperator>,
    pub params: PansharpenParams,
    pub vtv: VtvParams,
    /// High-resolution starting point, one band per aperture.
    pub init: MultiBandField,
}

#[derive(Debug, Clone)]
pub struct PansharpenOutput {
    pub field: MultiBandField,
    /// Energy of the accepted iterate after each iteration.
    pub energy_history: Vec<f64>,
    pub iterations: usize,
}

impl PansharpenProblem {
    pub fn new(
        observations: Vec<BandImage>,
        pan: BandImage,
        operators: Vec<SparseOperator>,
        init: MultiBandField,
        params: PansharpenParams,
        vtv: VtvParams,
    ) -> Result<Self> {
        params.validate()?;
        vtv.validate()?;
        let k = observations.len();
        if k == 0 || operators.len() != k {
            return Err(SsrError::Shape(format!(
                "{k} observations but {} operators",
                operators.len()
            )));
        }
        let hw = pan.len();
        for (i, (obs, op)) in observations.iter().zip(&operators).enumerate() {
            if op.n_cols() != hw || op.n_rows() != obs.len() {
                return Err(SsrError::Shape(format!(
                    "aperture {i}: operator {}x{} does not map {hw} pixels to {}",
                    op.n_rows(),
                    op.n_cols(),
                    obs.len()
                )));
            }
        }
        if init.bands != k || init.height != pan.height || init.width != pan.width {
            return Err(SsrError::Shape("initial field does not match the pan grid".into()));
        }
        let adjoints: Vec<SparseOperator> = operators.iter().map(SparseOperator::transpose).collect();
        // 1/L must be a valid step for every aperture block
        for (i, (a, at)) in operators.iter().zip(&adjoints).enumerate() {
            let lam = power_norm_sq(a, at, 20);
            if lam > params.lipschitz * (1.0 + 1e-9) {
                return Err(SsrError::InvalidParam(format!(
                    "aperture {i}: |A|^2 = {lam} exceeds L = {}",
                    params.lipschitz
                )));
            }
        }
        Ok(Self {
            observations,
            pan,
            operators,
            adjoints,
            params,
            vtv,
            init,
        })
    }

    /// Builds operators from the stack geometry and starts from each capture
    /// registered to the reference grid and bilinearly upsampled.
    pub fn from_stack(
        stack: &ApertureStack,
        pan: &BandImage,
        params: PansharpenParams,
        vtv: VtvParams,
    ) -> Result<Self> {
        let (h, w) = stack.high_dims();
        if pan.height != h || pan.width != w {
            return Err(SsrError::Shape(format!(
                "pan image is {}x{}, expected {h}x{w}",
                pan.height, pan.width
            )));
        }
        let mut operators = Vec::with_capacity(stack.k());
        let mut init = Vec::with_capacity(stack.k() * h * w);
        for c in &stack.captures {
            operators.push(build_aperture_operator(&c.transform, stack.r, h, w)?);
            let t = c.transform.scaled(1.0 / stack.r as f64).inverse();
            let reg = if t.is_identity() {
                c.image.clone()
            } else {
                warp_image(&c.image, &t)?
            };
            init.extend(upsample_bilinear(&reg, stack.r).data);
        }
        let init = MultiBandField::new(stack.k(), h, w, init)?;
        Self::new(
            stack.captures.iter().map(|c| c.image.clone()).collect(),
            pan.clone(),
            operators,
            init,
            params,
            vtv,
        )
    }

    pub fn k(&self) -> usize {
        self.observations.len()
    }

    /// `1/2 sum |A_i Y_i - y_i|^2`.
    pub fn fidelity(&self, y: &MultiBandField) -> f64 {
        (0..self.k())
            .map(|i| {
                self.operators[i]
                    .apply(y.band(i))
                    .iter()
                    .zip(&self.observations[i].data)
                    .map(|(p, o)| (p - o) * (p - o))
                    .sum::<f64>()
            })
            .sum::<f64>()
            * 0.5
    }

    pub fn energy(&self, y: &MultiBandField) -> f64 {
        self.fidelity(y) + self.params.gamma * vtv_norm(&self.minus_pan(y))
    }

    fn minus_pan(&self, y: &MultiBandField) -> MultiBandField {
        let mut z = y.clone();
        for b in 0..z.bands {
            z.band_mut(b)
                .iter_mut()
                .zip(&self.pan.data)
                .for_each(|(v, p)| *v -= p);
        }
        z
    }

    /// Gradient step `I - (1/L) A^T (A I - y)`.
    fn gradient_step(&self, point: &MultiBandField) -> MultiBandField {
        let mut out = point.clone();
        let step = 1.0 / self.params.lipschitz;
        for i in 0..self.k() {
            let mut resid = self.operators[i].apply(point.band(i));
            resid
                .iter_mut()
                .zip(&self.observations[i].data)
                .for_each(|(r, o)| *r -= o);
            let g = self.adjoints[i].apply(&resid);
            out.band_mut(i)
                .iter_mut()
                .zip(&g)
                .for_each(|(v, d)| *v -= step * d);
        }
        out
    }

    /// Prox of `(gamma / L) VTV(. - P)` via the shift `Z = Y - P`.
    fn prox(&self, v: &MultiBandField, dual: &mut DualField) -> Result<MultiBandField> {
        let shifted = self.minus_pan(v);
        if !self.vtv.warm_start {
            *dual = DualField::zeros(shifted.data.len());
        }
        let mut z = vtv_denoise_with(
            &shifted,
            self.params.gamma / self.params.lipschitz,
            &self.vtv,
            dual,
            |_, _| {},
        )?;
        for b in 0..z.bands {
            z.band_mut(b)
                .iter_mut()
                .zip(&self.pan.data)
                .for_each(|(v, p)| *v += p);
        }
        Ok(z)
    }
}

pub fn pansharpen(problem: &PansharpenProblem) -> Result<MultiBandField> {
    Ok(pansharpen_with_history(problem)?.field)
}

pub fn pansharpen_with_history(problem: &PansharpenProblem) -> Result<PansharpenOutput> {
    let p = &problem.params;
    let mut dual = DualField::zeros(problem.init.data.len());
    let mut point = problem.init.clone();
    let mut prev = problem.init.clone();
    let mut prev_energy = problem.energy(&prev);
    let mut t = p.t1;
    let mut history = Vec::with_capacity(p.iter_max);
    let mut iterations = 0;

    for _ in 0..p.iter_max {
        iterations += 1;
        let candidate = problem.prox(&problem.gradient_step(&point), &mut dual)?;
        let cand_energy = problem.energy(&candidate);
        let t_next = fista_stepsize(t);

        let (accepted, acc_energy) = match p.momentum {
            Momentum::Monotone if cand_energy > prev_energy => (prev.clone(), prev_energy),
            _ => (candidate.clone(), cand_energy),
        };
        point = match p.momentum {
            Momentum::None => accepted.clone(),
            Momentum::Fista => extrapolate(&accepted, &prev, (t - 1.0) / t_next, None),
            Momentum::Monotone => {
                extrapolate(&accepted, &prev, (t - 1.0) / t_next, Some((&candidate, t / t_next)))
            }
        };
        if p.momentum != Momentum::None {
            t = t_next;
        }
        history.push(acc_energy);

        let change = rel_change(&accepted, &prev);
        prev = accepted;
        prev_energy = acc_energy;
        if change < p.rel_tol {
            break;
        }
    }
    Ok(PansharpenOutput {
        field: prev,
        energy_history: history,
        iterations,
    })
}

/// `x + beta (x - x_prev)`, plus `alpha (cand - x)` for the monotone variant.
fn extrapolate(
    x: &MultiBandField,
    x_prev: &MultiBandField,
    beta: f64,
    cand: Option<(&MultiBandField, f64)>,
) -> MultiBandField {
    let mut out = x.clone();
    for (k, o) in out.data.iter_mut().enumerate() {
        let xv = x.data[k];
        *o = xv + beta * (xv - x_prev.data[k]);
        if let Some((c, alpha)) = cand {
            *o += alpha * (c.data[k] - xv);
        }
    }
    out
}

fn rel_change(a: &MultiBandField, b: &MultiBandField) -> f64 {
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data.iter().map(|y| y * y).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}
