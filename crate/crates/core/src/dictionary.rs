//! Spectral dictionary learning: K-SVD with batch orthogonal matching pursuit.
//!
//! Training spectra and atoms are stored column-major (`q` contiguous values
//! per column).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SsrError};
use crate::par;

const MAGIC: &[u8; 4] = b"SSRD";
/// Atoms closer than this (absolute cosine) count as duplicates.
const DUPLICATE_CORR: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    q: usize,
    n_atoms: usize,
    atoms: Vec<f64>,
    pub source_scenes: Vec<String>,
    pub sparsity: usize,
    pub iters: usize,
}

impl Dictionary {
    /// `atoms` is `q x n_atoms` column-major; every column must be unit norm.
    pub fn new(q: usize, n_atoms: usize, atoms: Vec<f64>) -> Result<Self> {
        if q == 0 || n_atoms == 0 || atoms.len() != q * n_atoms {
            return Err(SsrError::Shape(format!(
                "dictionary data has {} values, expected {q}x{n_atoms}",
                atoms.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(SsrError::InvalidValue("non-finite dictionary entry".into()));
        }
        for (k, col) in atoms.chunks(q).enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(SsrError::InvalidValue(format!(
                    "atom {k} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            q,
            n_atoms,
            atoms,
            source_scenes: Vec::new(),
            sparsity: 0,
            iters: 0,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }
    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.q..(k + 1) * self.q]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.q, self.n_atoms, &self.atoms)
    }

    /// Largest absolute cosine between two distinct atoms.
    pub fn max_coherence(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n_atoms {
            for b in a + 1..self.n_atoms {
                worst = worst.max(dot(self.atom(a), self.atom(b)).abs());
            }
        }
        worst
    }

    /// `"SSRD"`, `u32` q, `u32` n_atoms, then atoms column-major as `f64`, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.atoms.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.q as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_atoms as u32).to_le_bytes());
        for v in &self.atoms {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(SsrError::Format("missing SSRD header".into()));
        }
        let q = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expect = 12 + 8 * q * n;
        if bytes.len() != expect {
            return Err(SsrError::Format(format!(
                "dictionary blob is {} bytes, header implies {expect}",
                bytes.len()
            )));
        }
        let atoms = bytes[12..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(q, n, atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdConfig {
    pub n_atoms: usize,
    pub sparsity: usize,
    pub iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KsvdReport {
    /// `|X - D theta|_F` after each atom-update sweep.
    pub error_history: Vec<f64>,
    pub replaced_atoms: usize,
}

/// A sparse code: `(atom, coefficient)` pairs.
pub type SparseCode = Vec<(usize, f64)>;

/// Orthogonal matching pursuit of one signal, using the precomputed Gram
/// matrix `D^T D` (batch-OMP form).
pub fn omp(dict: &Dictionary, gram: &DMatrix<f64>, x: &[f64], sparsity: usize) -> SparseCode {
    let n = dict.n_atoms;
    let alpha0: Vec<f64> = (0..n).map(|k| dot(dict.atom(k), x)).collect();
    let x_norm2 = dot(x, x);
    if x_norm2 == 0.0 {
        return Vec::new();
    }
    let mut alpha = alpha0.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coef: Vec<f64> = Vec::new();
    for _ in 0..sparsity.min(n) {
        let (best, val) = alpha
            .iter()
            .enumerate()
            .filter(|(k, _)| !selected.contains(k))
            .map(|(k, a)| (k, a.abs()))
            .fold((usize::MAX, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best == usize::MAX || val <= 1e-12 * x_norm2.sqrt() {
            break;
        }
        selected.push(best);
        let s = selected.len();
        let g = DMatrix::from_fn(s, s, |i, j| gram[(selected[i], selected[j])]);
        let rhs = DVector::from_iterator(s, selected.iter().map(|&k| alpha0[k]));
        let sol = match g.cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                selected.pop();
                break;
            }
        };
        coef = sol.iter().copied().collect();
        // alpha = alpha0 - G[:, S] coef
        for (k, a) in alpha.iter_mut().enumerate() {
            *a = alpha0[k]
                - selected
                    .iter()
                    .zip(&coef)
                    .map(|(&j, c)| gram[(k, j)] * c)
                    .sum::<f64>();
        }
        if alpha.iter().all(|a| a.abs() <= 1e-14 * x_norm2.sqrt()) {
            break;
        }
    }
    selected.into_iter().zip(coef).collect()
}

/// Writes `x - D code` into `out`.
fn residual_into(dict: &Dictionary, x: &[f64], code: &SparseCode, out: &mut [f64]) {
    out.copy_from_slice(x);
    for &(k, c) in code {
        for (o, d) in out.iter_mut().zip(dict.atom(k)) {
            *o -= c * d;
        }
    }
}

/// K-SVD: alternate OMP sparse coding with per-atom rank-one updates from the
/// leading singular pair of the restricted residual. Unused or duplicated
/// atoms are replaced by the worst-represented training spectrum.
pub fn train_dictionary(
    samples: &[f64],
    q: usize,
    cfg: &KsvdConfig,
) -> Result<(Dictionary, KsvdReport)> {
    if q == 0 || !samples.len().is_multiple_of(q) {
        return Err(SsrError::Shape(format!(
            "{} sample values do not split into {q}-vectors",
            samples.len()
        )));
    }
    let n = samples.len() / q;
    if cfg.n_atoms == 0 || cfg.iters == 0 {
        return Err(SsrError::InvalidParam("n_atoms and iters must be >= 1".into()));
    }
    if cfg.sparsity == 0 || cfg.sparsity >= q {
        return Err(SsrError::InvalidParam(format!(
            "sparsity must lie in [1, {q}), got {}",
            cfg.sparsity
        )));
    }
    if n < 10 * cfg.n_atoms {
        return Err(SsrError::TooFewSamples {
            got: n,
            need: 10 * cfg.n_atoms,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(SsrError::InvalidValue("non-finite training sample".into()));
    }
    if samples.iter().all(|&v| v == 0.0) {
        return Err(SsrError::DegenerateTraining("every training spectrum is zero".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dict = Dictionary {
        q,
        n_atoms: cfg.n_atoms,
        atoms: initial_atoms(samples, q, cfg.n_atoms, &mut rng),
        source_scenes: Vec::new(),
        sparsity: cfg.sparsity,
        iters: cfg.iters,
    };
    let mut resid = samples.to_vec();
    let mut codes: Vec<SparseCode> = vec![Vec::new(); n];
    let mut history = Vec::with_capacity(cfg.iters);
    let mut replaced = 0;

    for iter in 0..cfg.iters {
        let mut stale = vec![false; cfg.n_atoms];
        if iter > 0 {
            for k in replace_dead_atoms(&mut dict, samples, &resid, &codes) {
                stale[k] = true;
                replaced += 1;
            }
        }
        let gram = gram_matrix(&dict);
        // keep the previous code when OMP does worse, so the error never rises
        // through the coding step
        let first = iter == 0;
        codes = {
            let (d, prev, resid, stale) = (&dict, &codes, &resid, &stale);
            par::map_range(n, |j| {
                let x = &samples[j * q..(j + 1) * q];
                let code = omp(d, &gram, x, cfg.sparsity);
                if first || prev[j].iter().any(|&(k, _)| stale[k]) {
                    return code;
                }
                let mut r = vec![0.0; q];
                residual_into(d, x, &code, &mut r);
                let old_r = &resid[j * q..(j + 1) * q];
                if dot(old_r, old_r) <= dot(&r, &r) {
                    prev[j].clone()
                } else {
                    code
                }
            })
        };
        {
            let d = &dict;
            let codes = &codes;
            par::for_each_chunk(&mut resid, q, |j, out| {
                residual_into(d, &samples[j * q..(j + 1) * q], &codes[j], out)
            });
        }

        // users[k] = (sample, slot within that sample's code)
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cfg.n_atoms];
        for (j, code) in codes.iter().enumerate() {
            for (slot, &(k, _)) in code.iter().enumerate() {
                users[k].push((j, slot));
            }
        }
        for k in 0..cfg.n_atoms {
            if users[k].is_empty() {
                continue;
            }
            update_atom(&mut dict, k, &users[k], &mut codes, &mut resid);
        }
        history.push(dot(&resid, &resid).sqrt());
    }
    Ok((
        dict,
        KsvdReport {
            error_history: history,
            replaced_atoms: replaced,
        },
    ))
}

pub fn gram_matrix(dict: &Dictionary) -> DMatrix<f64> {
    let d = dict.matrix();
    d.transpose() * d
}

/// Distinct normalised training spectra in random order, padded with random
/// unit vectors if the set has too few distinct directions.
fn initial_atoms(samples: &[f64], q: usize, n_atoms: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len() / q;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut atoms: Vec<f64> = Vec::with_capacity(q * n_atoms);
    for j in order {
        if atoms.len() == q * n_atoms {
            break;
        }
        if let Some(u) = unit(&samples[j * q..(j + 1) * q]) {
            let distinct = atoms
                .chunks(q)
                .all(|a| dot(a, &u).abs() < DUPLICATE_CORR);
            if distinct {
                atoms.extend(u);
            }
        }
    }
    while atoms.len() < q * n_atoms {
        let v: Vec<f64> = (0..q).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = unit(&v) {
            atoms.extend(u);
        }
    }
    atoms
}

/// Returns the indices of the replaced atoms.
fn replace_dead_atoms(
    dict: &mut Dictionary,
    samples: &[f64],
    resid: &[f64],
    codes: &[SparseCode],
) -> Vec<usize> {
    let q = dict.q;
    let mut used = vec![false; dict.n_atoms];
    for code in codes {
        for &(k, _) in code {
            used[k] = true;
        }
    }
    let mut err: Vec<(usize, f64)> = resid
        .chunks(q)
        .enumerate()
        .map(|(j, r)| (j, dot(r, r)))
        .collect();
    // worst first; ties broken by index
    err.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut candidates = err.into_iter().map(|(j, _)| j);
    let mut replaced = Vec::new();
    for k in 0..dict.n_atoms {
        let dup = (0..k).any(|j| dot(dict.atom(j), dict.atom(k)).abs() > DUPLICATE_CORR);
        if used[k] && !dup {
            continue;
        }
        for j in candidates.by_ref() {
            let Some(u) = unit(&samples[j * q..(j + 1) * q]) else {
                continue;
            };
            if (0..dict.n_atoms).all(|a| a == k || dot(dict.atom(a), &u).abs() < DUPLICATE_CORR) {
                dict.atoms[k * q..(k + 1) * q].copy_from_slice(&u);
                replaced.push(k);
                break;
            }
        }
    }
    replaced
}

fn update_atom(
    dict: &mut Dictionary,
    k: usize,
    users: &[(usize, usize)],
    codes: &mut [SparseCode],
    resid: &mut [f64],
) {
    let q = dict.q;
    let old: Vec<f64> = dict.atom(k).to_vec();
    // E = R_w + d_k theta_k,w, one column per user
    let mut e = vec![0.0; q * users.len()];
    for (col, &(j, slot)) in users.iter().enumerate() {
        let c = codes[j][slot].1;
        let dst = &mut e[col * q..(col + 1) * q];
        for i in 0..q {
            dst[i] = resid[j * q + i] + old[i] * c;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(q, q);
    for col in e.chunks(q) {
        for a in 0..q {
            let va = col[a];
            for b in a..q {
                cov[(a, b)] += va * col[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > eig.eigenvalues[best] { i } else { best });
    let mut u: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let Some(un) = unit(&u) else { return };
    u = un;
    if dot(&u, &old) < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    for (col, &(j, slot)) in users.iter().enumerate() {
        let ecol = &e[col * q..(col + 1) * q];
        let g = dot(ecol, &u);
        codes[j][slot].1 = g;
        for i in 0..q {
            resid[j * q + i] = ecol[i] - u[i] * g;
        }
    }
    dict.atoms[k * q..(k + 1) * q].copy_from_slice(&u);
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = dot(v, v).sqrt();
    if n > 1e-12 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}
