//! Projector decomposition of the RTM state and the resulting sandwich
//! `Σ p_k S(σ_k) ≤ S(ρ) ≤ Σ p_k S(σ_k) + H(p)`.
//!
//! The state is a matrix `M` whose columns run over `ℓ` folded legs (bottom
//! leg most significant). `P_k` is `ô ô†` on the top `ℓ − k` legs,
//! `1 − ô ô†` on leg `k − 1` and the identity below, with `ô = ○/√d`.

use serde::{Deserialize, Serialize};

use crate::circuit::BrickworkSpec;
use crate::error::{Error, Result};
use crate::gates::{dual_unitarity_residual, fold, ReplicaStates, TOL};
use crate::influence::{
    build_influence, build_rtm, circle, cone_gate, fold_dimer, reduce_rtm_dual_unitary, ConeGeometry, ImSide, NodeKind,
    Rtm,
};
use crate::numkernel::{adjoint, matmul_mat, singular_values, Budget, Mat, MatRef, TensorNetwork, C64};
use crate::rtm_compress::{entropy, spectrum_entropy};

/// Complete orthogonal family `P_0 … P_ℓ` on `(d²)^{⊗ℓ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectorFamily {
    pub d: usize,
    pub ell: usize,
}

pub fn projector_family(d: usize, ell: usize) -> Result<ProjectorFamily> {
    if ell == 0 {
        return Err(Error::Domain("projector family needs at least one leg".into()));
    }
    if d < 2 {
        return Err(Error::Domain(format!("local dimension {d} < 2")));
    }
    Ok(ProjectorFamily { d, ell })
}

impl ProjectorFamily {
    pub fn len(&self) -> usize {
        self.ell + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        (self.d * self.d).pow(self.ell as u32)
    }

    /// `rank(P_0) = 1`, `rank(P_k) = (d² − 1) d^{2(k−1)}`.
    pub fn rank(&self, k: usize) -> usize {
        let dd = self.d * self.d;
        if k == 0 {
            1
        } else {
            (dd - 1) * dd.pow(k as u32 - 1)
        }
    }

    /// `M P_k` with the projected legs stripped: an isometric image with
    /// `d^{2k}` columns, so norms and singular values are those of `M P_k`.
    pub fn apply(&self, state: MatRef<'_, C64>, k: usize) -> Result<Mat<C64>> {
        if k > self.ell {
            return Err(Error::Domain(format!("k={k} exceeds ℓ={}", self.ell)));
        }
        if state.ncols() != self.dim() {
            return Err(Error::Dimension(format!("state has {} columns, expected {}", state.ncols(), self.dim())));
        }
        let d = self.d;
        let dd = d * d;
        let drop = self.ell - k;
        let block = dd.pow(drop as u32);
        let keep = dd.pow(k as u32);
        // Column offsets of ô^{⊗drop}: every dropped leg diagonal (ket = bra).
        let mut diag = vec![0usize];
        for _ in 0..drop {
            diag = diag.iter().flat_map(|&a| (0..d).map(move |i| a * dd + i * d + i)).collect();
        }
        let w = (d as f64).powf(-(drop as f64) / 2.0);
        let mut out = Mat::from_fn(state.nrows(), keep, |r, c| {
            let base = c * block;
            diag.iter().map(|&o| state[(r, base + o)]).sum::<C64>() * w
        });
        if k > 0 {
            // 1 − ô ô† on the lowest-significance remaining leg.
            let s = 1.0 / d as f64;
            for r in 0..out.nrows() {
                for g in 0..keep / dd {
                    let tr: C64 = (0..d).map(|i| out[(r, g * dd + i * d + i)]).sum();
                    for i in 0..d {
                        out[(r, g * dd + i * d + i)] -= tr * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Explicit `d^{2ℓ} × d^{2ℓ}` projector `E E†` with `E` the image of
    /// the identity under [`ProjectorFamily::apply`]; small `ℓ` only.
    pub fn dense(&self, k: usize) -> Result<Mat<C64>> {
        let n = self.dim();
        Budget::default().check_elements((n * n) as f64, "dense projector")?;
        let eye = Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let e = self.apply(eye.as_ref(), k)?;
        matmul_mat(e.as_ref(), adjoint(e.as_ref()).as_ref())
    }
}

/// Result of [`decompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: Vec<f64>,
    pub s_sigma: Vec<f64>,
    pub shannon: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
}

const NEG_CLIP: f64 = 1e-10;

/// Decomposes the state `M` (rows: unprojected side, columns: the `ℓ`
/// projected legs) and evaluates the entropy sandwich. `exact` is the von
/// Neumann entropy of `M`'s normalized squared singular values.
pub fn decompose(state: MatRef<'_, C64>, fam: &ProjectorFamily) -> Result<BoundReport> {
    decompose_legs(state, fam.d, fam.ell)
}

fn decompose_legs(state: MatRef<'_, C64>, d: usize, ell: usize) -> Result<BoundReport> {
    let (p, sectors) = weights_legs(state, d, ell, true)?;
    let s = sectors
        .iter()
        .map(|mk| {
            let sv = singular_values(mk.as_ref())?;
            if sv.rank() == 0 {
                Ok(0.0)
            } else {
                spectrum_entropy(&sv, 1.0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let shannon = 0.0 - p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
    let lower: f64 = p.iter().zip(&s).map(|(a, b)| a * b).sum();
    let exact = spectrum_entropy(&singular_values(state)?, 1.0)?;
    Ok(BoundReport { p, s_sigma: s, shannon, lower, upper: lower + shannon, exact: Some(exact) })
}

/// Normalized sector weights, optionally with the projected blocks `M P_k`.
fn weights_legs(state: MatRef<'_, C64>, d: usize, ell: usize, keep: bool) -> Result<(Vec<f64>, Vec<Mat<C64>>)> {
    let fam = ProjectorFamily { d, ell };
    if state.ncols() != fam.dim() {
        return Err(Error::Dimension(format!("state has {} columns, expected {}", state.ncols(), fam.dim())));
    }
    let total = state.norm_l2().powi(2);
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Precondition(format!("state with squared norm {total} cannot be normalized")));
    }
    let mut p = Vec::with_capacity(ell + 1);
    let mut blocks = Vec::new();
    for k in 0..=ell {
        let mk = fam.apply(state, k)?;
        let w = mk.norm_l2().powi(2) / total;
        if w < -NEG_CLIP {
            return Err(Error::Numerical(format!("negative sector weight p_{k} = {w:e}")));
        }
        p.push(w.max(0.0));
        if keep {
            blocks.push(mk);
        }
    }
    let norm: f64 = p.iter().sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!("sector weights sum to {norm}")));
    }
    p.iter_mut().for_each(|x| *x /= norm);
    Ok((p, blocks))
}

/// Bound report for `T_{t0}`: the reduced trapezoid state with the family on
/// its right legs for dual-unitary circuits, otherwise the full RTM with the
/// family on the remaining cut legs.
pub fn bounds_for(spec: &BrickworkSpec, t0: usize, budget: &Budget) -> Result<BoundReport> {
    let rtm = state_rtm(spec, t0, budget)?;
    let m = rtm.row_compressed()?;
    let mut rep = decompose_legs(m.as_ref(), spec.d, rtm.col_legs)?;
    rep.exact = Some(entropy(&rtm, 1.0)?);
    Ok(rep)
}

/// Sector weights `p_0 … p_ℓ` of [`bounds_for`] without the sector entropies.
pub fn sector_weights(spec: &BrickworkSpec, t0: usize, budget: &Budget) -> Result<Vec<f64>> {
    let rtm = state_rtm(spec, t0, budget)?;
    let m = rtm.row_compressed()?;
    Ok(weights_legs(m.as_ref(), spec.d, rtm.col_legs, false)?.0)
}

fn state_rtm(spec: &BrickworkSpec, t0: usize, budget: &Budget) -> Result<Rtm> {
    let core = match &spec.gates {
        crate::circuit::GateField::Uniform(g) => g,
        crate::circuit::GateField::Dressed { core, .. } => core,
    };
    if dual_unitarity_residual(core) <= TOL {
        reduce_rtm_dual_unitary(spec, t0, budget)
    } else {
        let l = build_influence(spec, ImSide::Left, budget)?;
        let r = build_influence(spec, ImSide::Right, budget)?;
        build_rtm(&l, &r, t0)
    }
}

/// `𝒜_k = d^{−(ℓ−k)} ⟨Ψ ⊗ Ψ*| (□ on the unprojected and lowest k projected
/// legs, ○ on the top ℓ − k) ⟩` for the unscaled trapezoid state `Ψ` of the
/// dual-unitary reduction; `𝒜_ℓ = ⟨Ψ|Ψ⟩` and `p_k = (𝒜_k − 𝒜_{k−1}) / 𝒜_ℓ`.
pub fn amplitude_ak(spec: &BrickworkSpec, t0: usize, k: usize, budget: &Budget) -> Result<f64> {
    let core = match &spec.gates {
        crate::circuit::GateField::Uniform(g) => g,
        crate::circuit::GateField::Dressed { core, .. } => core,
    };
    let res = dual_unitarity_residual(core);
    if res > TOL {
        return Err(Error::Precondition(format!("gate is not dual-unitary (residual {res:.3e})")));
    }
    if t0 > spec.t {
        return Err(Error::Domain(format!("t0={t0} leaves no open leg for t={}", spec.t)));
    }
    let d = spec.d;
    let geom = ConeGeometry::new(spec.t);
    let red = geom.reduce(t0);
    let ell = red.a_bar.len();
    if k > ell {
        return Err(Error::Domain(format!("k={k} exceeds ℓ={ell}")));
    }
    let states = ReplicaStates::new(d);
    let d4 = d.pow(4);
    let d1 = fold_dimer(&spec.init, d);
    let dimer2 = d1.outer(&d1).permute(&[0, 2, 1, 3])?.reshape(vec![d4, d4])?;
    let cap2 = circle(d).outer(&circle(d)).reshape(vec![d4])?;
    let mut net = TensorNetwork::new();
    for &i in &red.kept {
        let node = &geom.nodes[i];
        let t = match node.kind {
            NodeKind::Dimer => dimer2.clone(),
            NodeKind::Cap | NodeKind::TopCap => cap2.clone(),
            NodeKind::Gate => fold(&cone_gate(spec, &geom, node)?, 2)?.tensor,
        };
        net.push(t, node.legs.clone())?;
    }
    for &l in red.a_prime.iter().chain(&red.a_bar[..k]) {
        net.push(states.square.clone(), vec![l])?;
    }
    for &l in &red.a_bar[k..] {
        net.push(states.circle.clone(), vec![l])?;
    }
    let z = net.contract(&[], budget)?.to_scalar()?;
    if z.im.abs() > 1e-10 * z.norm().max(1.0) {
        return Err(Error::Numerical(format!("amplitude has imaginary part {:e}", z.im)));
    }
    Ok(z.re * (d as f64).powi(-((ell - k) as i32)))
}

/// Number of projected legs `ℓ` of the reduced state at `t0`.
pub fn projected_legs(t: usize, t0: usize) -> usize {
    if t0 > t {
        0
    } else {
        ConeGeometry::new(t).reduce(t0).a_bar.len()
    }
}
