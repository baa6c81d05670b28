//! Haar-averaged two-replica amplitudes.
//!
//! Averaging every gate over independent single-site dressings projects each
//! two-replica leg onto span{○, ●}, so the averaged amplitude network lives
//! on 2-dimensional legs. The initial dimer enters only through
//! `c = d · tr(ρ₁²)`. At `p = p_c` the network has a closed form, which the
//! contraction reproduces exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{averaged_gate, critical_p};
use crate::influence::{ConeGeometry, NodeKind};
use crate::numkernel::{Budget, DenseTensor, TensorNetwork, C64};

/// Closed-form validity tolerance on `p − p_c`.
const CRITICAL_TOL: f64 = 1e-12;

/// One averaged amplitude `E[𝒜_k]`. The reduced network has `a_prime`
/// unprojected legs and `t1` projected legs at contraction depth `t0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedNetworkParams {
    pub d: usize,
    pub p: f64,
    pub t0: usize,
    pub t1: usize,
    pub k: usize,
    pub c: f64,
    pub a_prime: usize,
}

impl AveragedNetworkParams {
    /// Symmetric split `|A′| = t1`, the setting of the closed form.
    pub fn symmetric(d: usize, p: f64, c: f64, t0: usize, t1: usize, k: usize) -> Self {
        Self { d, p, t0, t1, k, c, a_prime: t1 }
    }

    /// `|A| = |A′| + t1`.
    pub fn region_size(&self) -> usize {
        self.a_prime + self.t1
    }

    /// Gate rows of the circuit whose reduction at `t0` has this shape.
    pub fn rows(&self) -> Option<usize> {
        (self.t0 + self.a_prime + self.t1).checked_sub(1)
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Domain(format!("local dimension {} < 2", self.d)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Domain(format!("entangling power {} outside [0, 1]", self.p)));
        }
        if self.k > self.t1 {
            return Err(Error::Domain(format!("k={} exceeds t1={}", self.k, self.t1)));
        }
        if !self.c.is_finite() {
            return Err(Error::Domain("initial-state constant is not finite".into()));
        }
        Ok(())
    }
}

/// `c = d · ⟨○| ⊗ ⟨□| (ψ ⊗ ψ*)^{⊗2}`, equal to `d · tr(ρ₁²)`.
pub fn c_constant(psi: &[C64], d: usize) -> Result<f64> {
    if psi.len() != d * d {
        return Err(Error::Dimension(format!("dimer needs {} amplitudes", d * d)));
    }
    let at = |a: usize, b: usize| psi[a * d + b];
    let mut acc = C64::new(0.0, 0.0);
    // ○ on the left leg ties ket to bra within each replica; □ on the right
    // leg ties ket of one replica to bra of the other.
    for k1 in 0..d {
        for k2 in 0..d {
            for r1 in 0..d {
                for r2 in 0..d {
                    acc += at(k1, r1) * at(k1, r2).conj() * at(k2, r2) * at(k2, r1).conj();
                }
            }
        }
    }
    if acc.im.abs() > 1e-12 {
        return Err(Error::Numerical(format!("initial-state constant has imaginary part {:e}", acc.im)));
    }
    Ok(d as f64 * acc.re)
}

/// Averaged dimer in the orthonormal `(○/d, ●/d)` basis.
pub fn averaged_dimer(d: usize, c: f64) -> [[f64; 2]; 2] {
    let dd = (d * d) as f64;
    let s = (dd - 1.0).sqrt();
    let off = (c - 1.0) / (dd * s);
    [[1.0 / dd, off], [off, (dd + 1.0 - 2.0 * c) / (dd * (dd - 1.0))]]
}

fn vec2(v: [f64; 2]) -> DenseTensor {
    DenseTensor::from_real(vec![2], &v).expect("2 entries")
}

/// Contracts the averaged amplitude network: averaged gates on every kept
/// vertex, averaged dimers, ○ caps, □ on the unprojected and lowest `k`
/// projected legs, ○ on the rest, times `d^{−(t1−k)}`.
pub fn averaged_ak_contract(params: &AveragedNetworkParams) -> Result<f64> {
    params.validate()?;
    let d = params.d;
    let Some(t) = params.rows() else { return Ok(1.0) };
    if params.region_size() == 0 {
        return Ok(1.0);
    }
    let geom = ConeGeometry::new(t);
    let red = geom.reduce(params.t0);
    if red.a_prime.len() != params.a_prime || red.a_bar.len() != params.t1 {
        return Err(Error::Domain(format!(
            "no reduced network with |A′|={} and t1={} at t0={} (got {} and {})",
            params.a_prime,
            params.t1,
            params.t0,
            red.a_prime.len(),
            red.a_bar.len()
        )));
    }
    let m = averaged_gate(d, params.p);
    let gate = DenseTensor::from_fn(vec![2, 2, 2, 2], |ix| C64::new(m[ix[0] * 2 + ix[1]][ix[2] * 2 + ix[3]], 0.0));
    let dm = averaged_dimer(d, params.c);
    let dimer = DenseTensor::from_fn(vec![2, 2], |ix| C64::new(dm[ix[0]][ix[1]], 0.0));
    let circ = vec2([d as f64, 0.0]);
    let square = vec2([1.0, ((d * d - 1) as f64).sqrt()]);

    let mut net = TensorNetwork::new();
    for &i in &red.kept {
        let node = &geom.nodes[i];
        let t = match node.kind {
            NodeKind::Gate => gate.clone(),
            NodeKind::Dimer => dimer.clone(),
            NodeKind::Cap | NodeKind::TopCap => circ.clone(),
        };
        net.push(t, node.legs.clone())?;
    }
    for &l in red.a_prime.iter().chain(&red.a_bar[..params.k]) {
        net.push(square.clone(), vec![l])?;
    }
    for &l in &red.a_bar[params.k..] {
        net.push(circ.clone(), vec![l])?;
    }
    let z = net.contract(&[], &Budget::default())?.to_scalar()?;
    Ok(z.re * (d as f64).powi(-((params.t1 - params.k) as i32)))
}

fn require_critical(params: &AveragedNetworkParams) -> Result<()> {
    params.validate()?;
    let pc = critical_p(params.d);
    if (params.p - pc).abs() > CRITICAL_TOL {
        return Err(Error::Domain(format!("closed form holds only at p = p_c = {pc}, got p = {}", params.p)));
    }
    Ok(())
}

/// `B_x = d^{−x} (1 + (c − 1) x)`.
pub fn b_x(d: usize, c: f64, x: usize) -> f64 {
    (d as f64).powi(-(x as i32)) * (1.0 + (c - 1.0) * x as f64)
}

/// `C_y = d^{t0−y} + (c − 1)(y − t0) B_{t0} d^{−y}`, so `C_{t0} = 1`.
pub fn c_y(d: usize, c: f64, t0: usize, y: usize) -> f64 {
    let df = d as f64;
    df.powi(t0 as i32 - y as i32) + (c - 1.0) * (y as f64 - t0 as f64) * b_x(d, c, t0) * df.powi(-(y as i32))
}

/// Closed form of `E[𝒜_k]` at `p = p_c`:
/// `d^{−|A|} + (c−1)(u + k + (c−1)(u t0 + k t0 + k u)) d^{−(|A|+2t0)}` with
/// `u = |A′|`.
pub fn closed_form_eak(params: &AveragedNetworkParams) -> Result<f64> {
    require_critical(params)?;
    let df = params.d as f64;
    let (u, k, t0) = (params.a_prime as f64, params.k as f64, params.t0 as f64);
    let a = params.region_size() as i32;
    let c1 = params.c - 1.0;
    Ok(df.powi(-a) + c1 * (u + k + c1 * (u * t0 + k * t0 + k * u)) * df.powi(-(a + 2 * params.t0 as i32)))
}

/// `E[𝒜_k] = C_{t1+t0} d^{−|A′|} + k (c−1) B_{t0+t1} d^{−(t0+|A′|)}`; the
/// symmetric split `|A′| = t1` only.
pub fn recursion_eak(params: &AveragedNetworkParams) -> Result<f64> {
    require_critical(params)?;
    if params.a_prime != params.t1 {
        return Err(Error::Domain("the recursion form assumes |A′| = t1".into()));
    }
    let (d, c, t0, t1) = (params.d, params.c, params.t0, params.t1);
    let df = d as f64;
    Ok(c_y(d, c, t0, t1 + t0) * df.powi(-(t1 as i32))
        + params.k as f64 * (c - 1.0) * b_x(d, c, t0 + t1) * df.powi(-((t0 + t1) as i32)))
}

/// Critical-point prediction for the sector weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkPrediction {
    pub p0: f64,
    /// Common value of every `p_k`, `k ≥ 1`.
    pub pk: f64,
    pub t1: usize,
}

impl PkPrediction {
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.p0).chain(std::iter::repeat_n(self.pk, self.t1)).collect()
    }
}

/// `p_k = (E[𝒜_k] − E[𝒜_{k−1}]) / E[𝒜_{t1}]` from the closed form; `params.k`
/// is ignored.
pub fn predicted_pk_critical(params: &AveragedNetworkParams) -> Result<PkPrediction> {
    let at = |k| closed_form_eak(&AveragedNetworkParams { k, ..*params });
    let total = at(params.t1)?;
    let a0 = at(0)?;
    let pk = if params.t1 == 0 { 0.0 } else { (at(1)? - a0) / total };
    Ok(PkPrediction { p0: a0 / total, pk, t1: params.t1 })
}

/// Sector weights from the contracted averaged network, for any `p`.
pub fn contracted_pk(params: &AveragedNetworkParams) -> Result<Vec<f64>> {
    let a: Vec<f64> = (0..=params.t1)
        .map(|k| averaged_ak_contract(&AveragedNetworkParams { k, ..*params }))
        .collect::<Result<_>>()?;
    let total = a[params.t1];
    Ok((0..=params.t1).map(|k| (a[k] - if k == 0 { 0.0 } else { a[k - 1] }) / total).collect())
}

/// One row of the replica comparison grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub d: usize,
    pub p: f64,
    pub c: f64,
    pub t0: usize,
    pub t1: usize,
    pub k: usize,
    pub a_contract: f64,
    pub a_closed: f64,
    pub abs_diff: f64,
}

/// Contraction vs closed form at `p_c` over `t0, t1 ∈ [0, max]`, `k ≤ t1`.
pub fn replica_grid(d: usize, c: f64, max: usize) -> Result<Vec<ReplicaRow>> {
    let p = critical_p(d);
    let mut rows = Vec::new();
    for t0 in 0..=max {
        for t1 in 0..=max {
            for k in 0..=t1 {
                let prm = AveragedNetworkParams::symmetric(d, p, c, t0, t1, k);
                let a_contract = averaged_ak_contract(&prm)?;
                let a_closed = closed_form_eak(&prm)?;
                rows.push(ReplicaRow {
                    d,
                    p,
                    c,
                    t0,
                    t1,
                    k,
                    a_contract,
                    a_closed,
                    abs_diff: (a_contract - a_closed).abs(),
                });
            }
        }
    }
    Ok(rows)
}
