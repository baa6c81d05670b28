use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::C64;

/// Relative threshold under which singular values are treated as zero.
pub const CLIP_RELATIVE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Singular,
    Eigen,
}

/// Nonincreasing, nonnegative list of singular values or PSD eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
}

impl Spectrum {
    /// Sorts descending and zeroes entries below `CLIP_RELATIVE * max`.
    pub fn from_raw(mut values: Vec<f64>, kind: SpectrumKind) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let cut = CLIP_RELATIVE * top;
        for v in &mut values {
            if *v < cut {
                *v = 0.0;
            }
        }
        Self { values, kind }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Number of entries surviving the clip.
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum of the entries beyond the leading `chi`.
    pub fn tail(&self, chi: usize) -> f64 {
        self.values.iter().skip(chi).sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Thin singular value decomposition `m = left * diag(s) * right_h`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub left: Mat<C64>,
    pub s: Spectrum,
    pub right_h: Mat<C64>,
}

/// `out = a * b` for row-major `a` (m x k) and `b` (k x n).
pub fn matmul_into(out: &mut [C64], a: &[C64], b: &[C64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return;
    }
    let a = MatRef::from_row_major_slice(a, m, k);
    let b = MatRef::from_row_major_slice(b, k, n);
    let dst = faer::MatMut::from_row_major_slice_mut(out, m, n);
    matmul(dst, Accum::Replace, a, b, C64::new(1.0, 0.0), Par::Seq);
}

pub fn matmul_mat(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Result<Mat<C64>> {
    if a.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "matrix product {}x{} * {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut out = Mat::<C64>::zeros(a.nrows(), b.ncols());
    if a.ncols() > 0 {
        matmul(out.as_mut(), Accum::Replace, a, b, C64::new(1.0, 0.0), Par::Seq);
    }
    Ok(out)
}

/// Copies a row-major buffer into an owned matrix.
pub fn mat_from_row_major(data: &[C64], nrows: usize, ncols: usize) -> Mat<C64> {
    MatRef::from_row_major_slice(data, nrows, ncols).to_owned()
}

pub fn mat_to_row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn check_finite(m: MatRef<'_, C64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({i},{j})")));
            }
        }
    }
    Ok(())
}

pub fn svd(m: MatRef<'_, C64>) -> Result<Svd> {
    check_finite(m)?;
    let r = m.nrows().min(m.ncols());
    if r == 0 {
        return Ok(Svd {
            left: Mat::zeros(m.nrows(), 0),
            s: Spectrum::from_raw(Vec::new(), SpectrumKind::Singular),
            right_h: Mat::zeros(0, m.ncols()),
        });
    }
    let dec = m
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd did not converge within the iteration limit: {e:?}")))?;
    let s: Vec<f64> = (0..r).map(|i| dec.S()[i].re).collect();
    let u = dec.U();
    let v = dec.V();
    // faer returns nonincreasing values; keep that order explicitly
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let left = Mat::from_fn(m.nrows(), r, |i, j| u[(i, order[j])]);
    let right_h = Mat::from_fn(r, m.ncols(), |i, j| v[(j, order[i])].conj());
    let vals = order.iter().map(|&i| s[i]).collect();
    Ok(Svd { left, s: Spectrum::from_raw(vals, SpectrumKind::Singular), right_h })
}

pub fn singular_values(m: MatRef<'_, C64>) -> Result<Spectrum> {
    check_finite(m)?;
    if m.nrows().min(m.ncols()) == 0 {
        return Ok(Spectrum::from_raw(Vec::new(), SpectrumKind::Singular));
    }
    let vals = m
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge within the iteration limit: {e:?}")))?;
    Ok(Spectrum::from_raw(vals, SpectrumKind::Singular))
}

/// Hermitian eigendecomposition through the SVD of the symmetrized input.
/// Eigenvalues come back descending; signs are recovered from `v_i^† u_i`.
pub fn eigh(h: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::Dimension(format!("eigh needs a square matrix, got {}x{}", n, h.ncols())));
    }
    let sym = Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let dec = svd(sym.as_ref())?;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..dec.s.len() {
        let mut ov = C64::new(0.0, 0.0);
        for r in 0..n {
            ov += dec.right_h[(i, r)] * dec.left[(r, i)];
        }
        let sign = if ov.re < 0.0 { -1.0 } else { 1.0 };
        pairs.push((sign * dec.s.values[i], i));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let vals = pairs.iter().map(|p| p.0).collect();
    let vecs = Mat::from_fn(n, pairs.len(), |r, c| dec.left[(r, pairs[c].1)]);
    Ok((vals, vecs))
}

/// Upper-triangular factor of the thin QR decomposition.
pub fn qr_r(m: MatRef<'_, C64>) -> Mat<C64> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Mat::zeros(0, m.ncols());
    }
    m.qr().thin_R().to_owned()
}

/// Eigenvalues of a general square matrix, sorted by decreasing modulus.
pub fn eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    let mut ev = m.eigenvalues().map_err(|e| Error::Numerical(format!("eigenvalue iteration failed: {e:?}")))?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(ev)
}

/// Haar-distributed unitary: Ginibre sample, QR, phases of diag(R) absorbed.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat<C64> {
    let mut z = Mat::<C64>::zeros(d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in 0..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            z[(i, j)] = C64::new(re * s, im * s);
        }
    }
    let qr = z.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    Mat::from_fn(d, d, |i, j| {
        let rj = r[(j, j)];
        let ph = if rj.norm() > 0.0 { rj / rj.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(m: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let dec = svd(m)?;
    matmul_mat(dec.left.as_ref(), dec.right_h.as_ref())
}

/// `‖m† m − 1‖_max`.
pub fn unitarity_residual(m: MatRef<'_, C64>) -> f64 {
    let n = m.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..m.nrows() {
                acc += m[(r, i)].conj() * m[(r, j)];
            }
            if i == j {
                acc -= C64::new(1.0, 0.0);
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

pub fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn adjoint(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// Largest singular value.
pub fn operator_norm(m: MatRef<'_, C64>) -> Result<f64> {
    Ok(singular_values(m)?.max())
}
