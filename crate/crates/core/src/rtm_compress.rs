//! Optimal low-rank truncation of RTMs, the joint bottom-to-top compression
//! sweep with its trace-norm certificate, and spectral entropies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::{one_point_im, ImSide, InfluenceMatrix, Rtm, RtmRepr};
use crate::numkernel::{
    adjoint, eigh, matmul_mat, operator_norm, svd, Budget, DenseTensor, Mat, MatRef, Spectrum, SpectrumKind, Svd, C64,
};

/// Keeps the leading `chi` singular triples; returns the truncated RTM and
/// the discarded trace norm `Σ_{n>χ} τ_n`.
pub fn truncate_mirsky(t: &Rtm, chi: usize, budget: &Budget) -> Result<(Rtm, f64)> {
    if chi == 0 {
        return Err(Error::Domain("truncation rank must be at least 1".into()));
    }
    let dense = t.to_dense(budget)?;
    let dec = canonical_svd(dense.as_ref())?;
    let tail = dec.s.tail(chi);
    let keep = chi.min(dec.s.len());
    let m = low_rank(&dec, keep)?;
    Ok((Rtm { repr: RtmRepr::Dense(m), ..t.clone() }, tail))
}

fn low_rank(dec: &Svd, keep: usize) -> Result<Mat<C64>> {
    let u = Mat::from_fn(dec.left.nrows(), keep, |i, j| dec.left[(i, j)] * dec.s.values[j]);
    let vh = Mat::from_fn(keep, dec.right_h.ncols(), |i, j| dec.right_h[(i, j)]);
    matmul_mat(u.as_ref(), vh.as_ref())
}

/// SVD with a reproducible order inside groups of (numerically) equal
/// singular values: left vectors are phase-fixed so their first significant
/// entry is real positive, then compared lexicographically by modulus.
pub fn canonical_svd(m: MatRef<'_, C64>) -> Result<Svd> {
    let mut dec = svd(m)?;
    let r = dec.s.len();
    for j in 0..r {
        let lead = (0..dec.left.nrows()).map(|i| dec.left[(i, j)]).find(|z| z.norm() > 1e-8);
        if let Some(z) = lead {
            let ph = z.conj() / z.norm();
            for i in 0..dec.left.nrows() {
                dec.left[(i, j)] *= ph;
            }
            for c in 0..dec.right_h.ncols() {
                dec.right_h[(j, c)] *= ph.conj();
            }
        }
    }
    let key = |j: usize| -> Vec<f64> { (0..dec.left.nrows()).map(|i| -dec.left[(i, j)].norm()).collect() };
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (dec.s.values[a], dec.s.values[b]);
        let tol = 1e-12 * dec.s.max().max(f64::MIN_POSITIVE);
        if (sa - sb).abs() > tol {
            sb.total_cmp(&sa)
        } else {
            key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        }
    });
    let left = Mat::from_fn(dec.left.nrows(), r, |i, j| dec.left[(i, order[j])]);
    let right_h = Mat::from_fn(r, dec.right_h.ncols(), |i, j| dec.right_h[(order[i], j)]);
    let values = order.iter().map(|&j| dec.s.values[j]).collect();
    Ok(Svd { left, s: Spectrum { values, kind: SpectrumKind::Singular }, right_h })
}

/// Normalized density operator `ρ = T†T / tr(T†T)` through its spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOp {
    /// `λ_n = τ_n² / Σ τ_m²`, nonincreasing, zeros excluded.
    pub eigenvalues: Vec<f64>,
}

impl DensityOp {
    pub fn from_spectrum(s: &Spectrum) -> Result<Self> {
        let sq: Vec<f64> = s.values.iter().filter(|&&v| v > 0.0).map(|v| v * v).collect();
        let total: f64 = sq.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Numerical("entropy of an all-zero transition matrix is undefined".into()));
        }
        Ok(Self { eigenvalues: sq.into_iter().map(|v| v / total).collect() })
    }

    pub fn from_rtm(t: &Rtm) -> Result<Self> {
        Self::from_spectrum(&t.singular_values()?)
    }

    /// Eigenvalues of the explicitly formed `T†T / tr(T†T)`; for small matrices.
    pub fn explicit_eigenvalues(t: &Rtm, budget: &Budget) -> Result<Vec<f64>> {
        let m = t.to_dense(budget)?;
        let rho = matmul_mat(adjoint(m.as_ref()).as_ref(), m.as_ref())?;
        let tr: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
        let scaled = Mat::from_fn(rho.nrows(), rho.ncols(), |i, j| rho[(i, j)] / tr);
        Ok(eigh(scaled.as_ref())?.0)
    }

    pub fn entropy(&self, alpha: f64) -> Result<f64> {
        renyi(&self.eigenvalues, alpha)
    }
}

/// Rényi entropy of a probability vector; `α = 1` is von Neumann, `α = 0`
/// is the log of the support size. `0 ln 0 = 0`.
pub fn renyi(lambda: &[f64], alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Domain(format!("Rényi index {alpha} must be nonnegative")));
    }
    let support: Vec<f64> = lambda.iter().copied().filter(|&x| x > 0.0).collect();
    if support.is_empty() {
        return Err(Error::Numerical("entropy of an empty spectrum is undefined".into()));
    }
    // `+ 0.0` maps a pure state's `-0.0` to `0.0`.
    Ok(0.0
        + if alpha == 0.0 {
            (support.len() as f64).ln()
        } else if (alpha - 1.0).abs() < 1e-12 {
            -support.iter().map(|&x| x * x.ln()).sum::<f64>()
        } else {
            support.iter().map(|&x| x.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
        })
}

/// Entropy of the normalized squared singular values of `T`.
pub fn entropy(t: &Rtm, alpha: f64) -> Result<f64> {
    DensityOp::from_rtm(t)?.entropy(alpha)
}

pub fn spectrum_entropy(s: &Spectrum, alpha: f64) -> Result<f64> {
    DensityOp::from_spectrum(s)?.entropy(alpha)
}

/// Per-bond truncation rule for [`joint_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Keep at most `chi[j]` singular values at bond `j`.
    Chi(Vec<usize>),
    /// Keep the fewest singular values whose discarded sum is at most `eps[j]`.
    Epsilon(Vec<f64>),
}

impl Schedule {
    fn len(&self) -> usize {
        match self {
            Schedule::Chi(v) => v.len(),
            Schedule::Epsilon(v) => v.len(),
        }
    }

    fn rank_for(&self, j: usize, s: &Spectrum) -> usize {
        match self {
            Schedule::Chi(v) => v[j].max(1).min(s.len()),
            Schedule::Epsilon(v) => {
                let mut chi = s.len();
                while chi > 1 && s.tail(chi - 1) <= v[j] {
                    chi -= 1;
                }
                chi
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    /// Number of contracted legs when the truncation is applied.
    pub bond: usize,
    pub chi: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeError {
    pub name: String,
    pub measured_error: f64,
    /// `‖O‖_∞ · Σ ε_i`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub steps: Vec<SweepStep>,
    pub total_bound: f64,
    pub probes: Vec<ProbeError>,
}

/// Joint bottom-to-top compression. At bond `j = 1..=t` the current RTM over
/// the lowest `j` legs is truncated and the rank projectors are written into
/// both influence matrices, so later bonds see the compressed pair. `probes`
/// are local observables on the top leg whose error is measured against the
/// uncompressed pair.
pub fn joint_sweep(
    l: &InfluenceMatrix,
    r: &InfluenceMatrix,
    schedule: &Schedule,
    probes: &[(String, Mat<C64>)],
    budget: &Budget,
) -> Result<(InfluenceMatrix, InfluenceMatrix, SweepReport)> {
    if l.t != r.t || l.d != r.d || l.side != ImSide::Left || r.side != ImSide::Right {
        return Err(Error::Dimension("joint sweep needs a compatible (left, right) pair".into()));
    }
    let n = l.n_legs();
    let bonds = n - 1;
    if schedule.len() < bonds {
        return Err(Error::Config(format!("schedule has {} entries for {bonds} bonds", schedule.len())));
    }
    let dd = l.d * l.d;
    let mut ld = l.tensor.data().to_vec();
    let mut rd = r.tensor.data().to_vec();
    let mut steps = Vec::with_capacity(bonds);
    for (j, bond) in (1..=bonds).enumerate() {
        let c = dd.pow(bond as u32);
        let rest = ld.len() / c;
        budget.check_elements((rest * rest) as f64, "intermediate RTM in the joint sweep")?;
        let lm = MatRef::from_row_major_slice(&ld, c, rest);
        let rm = MatRef::from_row_major_slice(&rd, c, rest);
        let t = matmul_mat(lm.transpose(), rm)?;
        let dec = canonical_svd(t.as_ref())?;
        let chi = schedule.rank_for(j, &dec.s);
        let eps = dec.s.tail(chi);
        // L ← L conj(U_χ) U_χᵀ ; R ← R V_χ V_χ†
        let u = Mat::from_fn(rest, chi, |a, b| dec.left[(a, b)]);
        let vh = Mat::from_fn(chi, rest, |a, b| dec.right_h[(a, b)]);
        let l_small = matmul_mat(lm, conj(u.as_ref()).as_ref())?;
        let l_new = matmul_mat(l_small.as_ref(), u.transpose())?;
        let r_small = matmul_mat(rm, adjoint(vh.as_ref()).as_ref())?;
        let r_new = matmul_mat(r_small.as_ref(), vh.as_ref())?;
        ld = to_row_major(l_new.as_ref());
        rd = to_row_major(r_new.as_ref());
        steps.push(SweepStep { bond, chi, epsilon: eps });
    }
    let total: f64 = steps.iter().map(|s| s.epsilon).sum();
    let shape = vec![dd; n];
    let l2 = InfluenceMatrix { tensor: DenseTensor::new(shape.clone(), ld)?, ..l.clone() };
    let r2 = InfluenceMatrix { tensor: DenseTensor::new(shape, rd)?, ..r.clone() };
    let mut out = Vec::with_capacity(probes.len());
    for (name, op) in probes {
        let exact = one_point_im(l, r, op.as_ref())?;
        let approx = one_point_im(&l2, &r2, op.as_ref())?;
        out.push(ProbeError {
            name: name.clone(),
            measured_error: (exact - approx).norm(),
            bound: operator_norm(op.as_ref())? * total,
        });
    }
    Ok((l2, r2, SweepReport { steps, total_bound: total, probes: out }))
}

fn to_row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    crate::numkernel::mat_to_row_major(m)
}

fn conj(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}
