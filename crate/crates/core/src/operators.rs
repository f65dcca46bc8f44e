//! Linear operators of the observation model.
//!
//! Images are flattened row-major and operators act on column vectors:
//! a low-resolution prediction is `R * W * x`. The composite system matrix
//! stacks the `K` per-aperture blocks vertically.

use crate::cube::{BandImage, GeometricTransform};
use crate::error::{Result, SsrError};
use crate::par;

/// Compressed sparse row matrix. Column indices within a row are sorted and
/// unique, so iterating rows yields triplets in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds from arbitrary triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n_rows || *c >= n_cols) {
            return Err(SsrError::Shape(format!(
                "entry ({r}, {c}) outside {n_rows}x{n_cols}"
            )));
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        };
        op.drop_zeros();
        Ok(op)
    }

    /// Assembles directly from per-row entry lists (each sorted, unique).
    fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    fn drop_zeros(&mut self) {
        if self.vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..self.n_rows).map(|r| self.row(r).collect()).collect();
        *self = Self::from_rows(self.n_cols, rows);
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// `(row, col, weight)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`. Each output row is summed in column order regardless of
    /// how rows are distributed across workers.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "operator input length");
        assert_eq!(y.len(), self.n_rows, "operator output length");
        const CHUNK: usize = 4096;
        par::for_each_chunk(y, CHUNK, |ci, out| {
            let r0 = ci * CHUNK;
            for (k, o) in out.iter_mut().enumerate() {
                let r = r0 + k;
                let mut acc = 0.0;
                for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[idx] * x[self.cols[idx]];
                }
                *o = acc;
            }
        });
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                cols[slot] = r;
                vals[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Sparse product `self * rhs`.
    pub fn compose(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.n_cols != rhs.n_rows {
            return Err(SsrError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n_rows, self.n_cols, rhs.n_rows, rhs.n_cols
            )));
        }
        let rows = par::map_range(self.n_rows, |r| {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    acc.push((c, a * b));
                }
            }
            acc.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (c, v) in acc {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged
        });
        Ok(Self::from_rows(rhs.n_cols, rows))
    }

    /// Stacks operators with equal column counts on top of each other.
    pub fn vstack(blocks: &[SparseOperator]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| SsrError::Shape("no blocks to stack".into()))?;
        if blocks.iter().any(|b| b.n_cols != first.n_cols) {
            return Err(SsrError::Shape("stacked blocks differ in column count".into()));
        }
        let mut row_ptr = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for b in blocks {
            let base = cols.len();
            cols.extend_from_slice(&b.cols);
            vals.extend_from_slice(&b.vals);
            row_ptr.extend(b.row_ptr[1..].iter().map(|p| p + base));
        }
        Ok(Self {
            n_rows: row_ptr.len() - 1,
            n_cols: first.n_cols,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }
}

/// Bilinear warp with replicate-edge boundary: `out(p) = src(T(p))`.
pub fn build_warp(t: &GeometricTransform, h: usize, w: usize) -> Result<SparseOperator> {
    if h == 0 || w == 0 {
        return Err(SsrError::Shape("warp needs a non-empty grid".into()));
    }
    t.validate(h, w)?;
    if t.is_identity() {
        return Ok(SparseOperator::identity(h * w));
    }
    let (s, c) = t.rotation_deg.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let rows = par::map_range(h * w, |p| {
        let (y, x) = ((p / w) as f64, (p % w) as f64);
        let (sx, sy) = if t.rotation_deg == 0.0 {
            (x + t.dx, y + t.dy)
        } else {
            let (ux, uy) = (x - cx, y - cy);
            (c * ux - s * uy + cx + t.dx, s * ux + c * uy + cy + t.dy)
        };
        bilinear_taps(sy, sx, h, w)
    });
    Ok(SparseOperator::from_rows(h * w, rows))
}

/// Interpolation weights at `(sy, sx)` after clamping into the grid; sorted
/// by column, duplicates merged, zero weights removed.
fn bilinear_taps(sy: f64, sx: f64, h: usize, w: usize) -> Vec<(usize, f64)> {
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let mut taps = [
        (y0 * w + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * w + x1, fx * (1.0 - fy)),
        (y1 * w + x0, (1.0 - fx) * fy),
        (y1 * w + x1, fx * fy),
    ];
    taps.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (c, v) in taps {
        if v == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// Area average over non-overlapping `r x r` blocks.
pub fn build_decimation(r: usize, h: usize, w: usize) -> Result<SparseOperator> {
    if r == 0 || !h.is_multiple_of(r) || !w.is_multiple_of(r) {
        return Err(SsrError::NotDivisible { h, w, r });
    }
    let (m, n) = (h / r, w / r);
    let weight = 1.0 / (r * r) as f64;
    let rows = (0..m * n)
        .map(|q| {
            let (by, bx) = (q / n, q % n);
            let mut row = Vec::with_capacity(r * r);
            for dy in 0..r {
                for dx in 0..r {
                    row.push(((by * r + dy) * w + bx * r + dx, weight));
                }
            }
            row
        })
        .collect();
    Ok(SparseOperator::from_rows(h * w, rows))
}

/// Per-aperture composite `R * W_i`.
pub fn build_aperture_operator(
    t: &GeometricTransform,
    r: usize,
    h: usize,
    w: usize,
) -> Result<SparseOperator> {
    let dec = build_decimation(r, h, w)?;
    let warp = build_warp(t, h, w)?;
    dec.compose(&warp)
}

/// Vertical stack of the `K` composites `R * W_i`: applied to a flattened
/// high-resolution image it yields the `K` low-resolution predictions
/// concatenated in aperture order.
pub fn build_system_matrix(
    transforms: &[GeometricTransform],
    r: usize,
    h: usize,
    w: usize,
) -> Result<SparseOperator> {
    if transforms.is_empty() {
        return Err(SsrError::Shape("system matrix needs at least one aperture".into()));
    }
    let blocks = transforms
        .iter()
        .map(|t| build_aperture_operator(t, r, h, w))
        .collect::<Result<Vec<_>>>()?;
    SparseOperator::vstack(&blocks)
}

/// Forward differences with Neumann boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub height: usize,
    pub width: usize,
    /// x-direction; last column is zero.
    pub horizontal: Vec<f64>,
    /// y-direction; last row is zero.
    pub vertical: Vec<f64>,
}

pub fn gradient(img: &BandImage) -> GradientPair {
    let (h, w) = (img.height, img.width);
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    gradient_into(&img.data, h, w, &mut gx, &mut gy);
    GradientPair {
        height: h,
        width: w,
        horizontal: gx,
        vertical: gy,
    }
}

pub fn divergence(g: &GradientPair) -> Result<BandImage> {
    let n = g.height * g.width;
    if g.horizontal.len() != n || g.vertical.len() != n {
        return Err(SsrError::Shape("gradient planes do not match their size".into()));
    }
    let mut out = vec![0.0; n];
    divergence_into(&g.horizontal, &g.vertical, g.height, g.width, &mut out);
    Ok(BandImage {
        height: g.height,
        width: g.width,
        data: out,
    })
}

#[inline]
pub(crate) fn gradient_into(u: &[f64], h: usize, w: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            gx[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            gy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`gradient_into`] for any input field.
#[inline]
pub(crate) fn divergence_into(px: &[f64], py: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let mut d = 0.0;
            if x + 1 < w {
                d += px[i];
            }
            if x > 0 {
                d -= px[i - 1];
            }
            if y + 1 < h {
                d += py[i];
            }
            if y > 0 {
                d -= py[i - w];
            }
            out[i] = d;
        }
    }
}

/// Bilinear resampling by an integer factor with pixel-center alignment and
/// replicate-edge boundary.
pub fn upsample_bilinear(img: &BandImage, r: usize) -> BandImage {
    let (h, w) = (img.height * r, img.width * r);
    let inv = 1.0 / r as f64;
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        let sy = (y as f64 + 0.5) * inv - 0.5;
        for x in 0..w {
            let sx = (x as f64 + 0.5) * inv - 0.5;
            data[y * w + x] = bilinear_taps(sy, sx, img.height, img.width)
                .into_iter()
                .map(|(c, v)| v * img.data[c])
                .sum();
        }
    }
    BandImage {
        height: h,
        width: w,
        data,
    }
}

/// Applies `build_warp(t)` to `img` without keeping the operator.
pub fn warp_image(img: &BandImage, t: &GeometricTransform) -> Result<BandImage> {
    let op = build_warp(t, img.height, img.width)?;
    Ok(BandImage {
        height: img.height,
        width: img.width,
        data: op.apply(&img.data),
    })
}

/// Largest eigenvalue of `A^T A` estimated by power iteration.
pub fn power_norm_sq(a: &SparseOperator, at: &SparseOperator, iters: usize) -> f64 {
    let n = a.n_cols();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i * 7919 % 97) as f64 / 97.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let av = a.apply(&v);
        let atav = at.apply(&av);
        lambda = v.iter().zip(&atav).map(|(x, y)| x * y).sum();
        v = atav;
    }
    lambda
}
