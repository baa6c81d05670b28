//! Influence matrices `⟨L|`, `|R⟩` and reduced transition matrices
//! `T_{t0}` obtained by contracting the lowest `t0` cut legs.
//!
//! With `t` gate rows there are `n = t + 1` folded cut legs (dimension `d²`),
//! ordered bottom to top; `t0` ranges over `0..=n`. Row and column indices of
//! an RTM are row-major over the remaining legs with the lowest leg most
//! significant.

mod geometry;

pub use geometry::{ConeGeometry, Node, NodeKind, ReducedNetwork, Side};

use serde::{Deserialize, Serialize};

use crate::circuit::{BrickworkSpec, GateField};
use crate::error::{Error, Result};
use crate::gates::{dual_unitarity_residual, fold, Gate, TOL};
use crate::numkernel::{
    mat_from_row_major, matmul_mat, qr_r, singular_values, svd, Budget, DenseTensor, Label, Mat, MatRef, Spectrum,
    TensorNetwork, C64,
};

/// `δ_{ket, bra}` on one folded leg.
pub fn circle(d: usize) -> DenseTensor {
    DenseTensor::from_fn(vec![d * d], |ix| if ix[0] / d == ix[0] % d { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `ψ ⊗ ψ*` on two folded legs `(left, right)`.
pub fn fold_dimer(psi: &[C64], d: usize) -> DenseTensor {
    let dd = d * d;
    DenseTensor::from_fn(vec![dd, dd], |ix| {
        let (k1, b1) = (ix[0] / d, ix[0] % d);
        let (k2, b2) = (ix[1] / d, ix[1] % d);
        psi[k1 * d + k2] * psi[b1 * d + b2].conj()
    })
}

/// Maps geometry nodes to folded tensors of a concrete circuit.
struct ConeTensors<'a> {
    field: &'a GateField,
    offset: isize,
    dimer: DenseTensor,
    circle: DenseTensor,
    uniform: Option<DenseTensor>,
}

impl<'a> ConeTensors<'a> {
    fn new(spec: &'a BrickworkSpec, geom: &ConeGeometry) -> Result<Self> {
        if !spec.cone_fits() {
            return Err(Error::Precondition(format!(
                "light cone of depth {} does not fit in 2L = {} sites",
                spec.t,
                spec.sites()
            )));
        }
        let offset = spec.observable_site() as isize - geom.x0 as isize;
        let uniform = match &spec.gates {
            GateField::Uniform(g) => Some(fold(g, 1)?.tensor),
            GateField::Dressed { .. } => None,
        };
        Ok(Self { field: &spec.gates, offset, dimer: fold_dimer(&spec.init, spec.d), circle: circle(spec.d), uniform })
    }

    fn tensor(&self, node: &Node) -> Result<DenseTensor> {
        Ok(match node.kind {
            NodeKind::Dimer => self.dimer.clone(),
            NodeKind::Cap | NodeKind::TopCap => self.circle.clone(),
            NodeKind::Gate => match &self.uniform {
                Some(f) => f.clone(),
                None => fold(&field_gate(self.field, self.offset, node), 1)?.tensor,
            },
        })
    }
}

fn field_gate(field: &GateField, offset: isize, node: &Node) -> Gate {
    field.gate_at((node.x as isize + offset) as usize, node.row)
}

/// Gate of `spec` at a gate node of `ConeGeometry::new(spec.t)`, placed so
/// that the cone's observable sits on [`BrickworkSpec::observable_site`].
pub fn cone_gate(spec: &BrickworkSpec, geom: &ConeGeometry, node: &Node) -> Result<Gate> {
    if node.kind != NodeKind::Gate {
        return Err(Error::Precondition("node is not a gate".into()));
    }
    if !spec.cone_fits() {
        return Err(Error::Precondition("light cone does not fit in the chain".into()));
    }
    let offset = spec.observable_site() as isize - geom.x0 as isize;
    Ok(field_gate(&spec.gates, offset, node))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImSide {
    Left,
    Right,
}

/// Exact influence matrix over the `t + 1` cut legs. The left matrix includes
/// the trace on the top leg, so `⟨L|R⟩ = 1`.
#[derive(Clone, Debug)]
pub struct InfluenceMatrix {
    pub side: ImSide,
    pub t: usize,
    pub d: usize,
    pub tensor: DenseTensor,
}

impl InfluenceMatrix {
    pub fn n_legs(&self) -> usize {
        self.t + 1
    }

    /// Exact open-chain (matrix product) form, bottom to top. Each site tensor
    /// has shape `(bond_left, d², bond_right)`; no truncation beyond the
    /// numerical-zero clip.
    pub fn to_chain(&self) -> Result<Vec<DenseTensor>> {
        let dd = self.d * self.d;
        let n = self.n_legs();
        let mut sites = Vec::with_capacity(n);
        let mut rest = self.tensor.data().to_vec();
        let mut bond = 1;
        for _ in 0..n - 1 {
            let rows = bond * dd;
            let cols = rest.len() / rows;
            let m = mat_from_row_major(&rest, rows, cols);
            let dec = svd(m.as_ref())?;
            let r = dec.s.rank().max(1);
            let site = DenseTensor::from_fn(vec![bond, dd, r], |ix| dec.left[(ix[0] * dd + ix[1], ix[2])]);
            sites.push(site);
            rest = Vec::with_capacity(r * cols);
            for a in 0..r {
                for c in 0..cols {
                    rest.push(dec.right_h[(a, c)] * dec.s.values[a]);
                }
            }
            bond = r;
        }
        sites.push(DenseTensor::new(vec![bond, dd, 1], rest)?);
        Ok(sites)
    }

    /// Contracts a chain produced by [`InfluenceMatrix::to_chain`] back to dense form.
    pub fn from_chain(side: ImSide, t: usize, d: usize, chain: &[DenseTensor]) -> Result<Self> {
        let mut acc = DenseTensor::scalar(C64::new(1.0, 0.0)).reshape(vec![1])?;
        for site in chain {
            let r = acc.rank();
            acc = crate::numkernel::contract(&acc, site, &[(r - 1, 0)])?;
        }
        let dd = d * d;
        let tensor = acc.reshape(vec![dd; chain.len()])?;
        Ok(Self { side, t, d, tensor })
    }

    /// Bond dimensions of the exact chain form.
    pub fn bond_dimensions(&self) -> Result<Vec<usize>> {
        Ok(self.to_chain()?.iter().map(|s| s.shape()[2]).collect())
    }
}

/// Contracts the left or right half of the folded light cone.
pub fn build_influence(spec: &BrickworkSpec, side: ImSide, budget: &Budget) -> Result<InfluenceMatrix> {
    let geom = ConeGeometry::new(spec.t);
    let tensors = ConeTensors::new(spec, &geom)?;
    let dd = (spec.d * spec.d) as f64;
    budget.check_elements(dd.powi(geom.n_legs() as i32), "dense influence matrix")?;
    let want = match side {
        ImSide::Left => Side::Left,
        ImSide::Right => Side::Right,
    };
    let mut net = TensorNetwork::new();
    for node in &geom.nodes {
        if node.side == want {
            net.push(tensors.tensor(node)?, node.legs.clone())?;
        }
    }
    let tensor = net.contract(&geom.cut, budget)?;
    Ok(InfluenceMatrix { side, t: spec.t, d: spec.d, tensor })
}

/// Superoperator of a local observable on the top folded leg,
/// `Ô[(k, b), (k', b')] = δ_{k k'} O[b, b']`.
pub fn top_operator(op: MatRef<'_, C64>) -> Mat<C64> {
    let d = op.nrows();
    Mat::from_fn(d * d, d * d, |r, c| {
        let (k, b) = (r / d, r % d);
        let (k2, b2) = (c / d, c % d);
        if k == k2 {
            op[(b, b2)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `⟨L|O|R⟩`, with `O` acting on the top leg as [`top_operator`].
pub fn one_point_im(l: &InfluenceMatrix, r: &InfluenceMatrix, op: MatRef<'_, C64>) -> Result<C64> {
    if l.t != r.t || l.d != r.d || l.tensor.shape() != r.tensor.shape() {
        return Err(Error::Dimension("influence matrices are incompatible".into()));
    }
    let dd = l.d * l.d;
    let rest = l.tensor.len() / dd;
    let lm = MatRef::from_row_major_slice(l.tensor.data(), rest, dd);
    let rm = MatRef::from_row_major_slice(r.tensor.data(), rest, dd);
    let g = matmul_mat(lm.transpose(), rm)?;
    let o = top_operator(op);
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..dd {
        for b in 0..dd {
            acc += g[(a, b)] * o[(b, a)];
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub enum RtmRepr {
    Dense(Mat<C64>),
    /// `T = x * y` with a narrow inner dimension.
    Factored {
        x: Mat<C64>,
        y: Mat<C64>,
    },
}

/// Reduced transition matrix and its bookkeeping.
#[derive(Clone, Debug)]
pub struct Rtm {
    pub t: usize,
    pub t0: usize,
    pub d: usize,
    pub reduced: bool,
    /// Number of folded legs on the row (left) side.
    pub row_legs: usize,
    /// Number of folded legs on the column (right) side.
    pub col_legs: usize,
    pub repr: RtmRepr,
}

impl Rtm {
    pub fn nrows(&self) -> usize {
        match &self.repr {
            RtmRepr::Dense(m) => m.nrows(),
            RtmRepr::Factored { x, .. } => x.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.repr {
            RtmRepr::Dense(m) => m.ncols(),
            RtmRepr::Factored { y, .. } => y.ncols(),
        }
    }

    pub fn singular_values(&self) -> Result<Spectrum> {
        match &self.repr {
            RtmRepr::Dense(m) => singular_values(m.as_ref()),
            RtmRepr::Factored { x, y } => {
                let c = x.ncols();
                if c < x.nrows().min(y.ncols()) {
                    let r1 = qr_r(x.as_ref());
                    let r2 = qr_r(y.transpose());
                    singular_values(matmul_mat(r1.as_ref(), r2.transpose())?.as_ref())
                } else {
                    singular_values(matmul_mat(x.as_ref(), y.as_ref())?.as_ref())
                }
            }
        }
    }

    pub fn to_dense(&self, budget: &Budget) -> Result<Mat<C64>> {
        match &self.repr {
            RtmRepr::Dense(m) => Ok(m.clone()),
            RtmRepr::Factored { x, y } => {
                budget.check_elements((x.nrows() * y.ncols()) as f64, "dense RTM")?;
                matmul_mat(x.as_ref(), y.as_ref())
            }
        }
    }

    /// A matrix `M` with `T = Q M` for an isometry `Q`: same singular values
    /// and the same action of column-side operators, with at most
    /// `min(nrows, ncols, inner)` rows.
    pub fn row_compressed(&self) -> Result<Mat<C64>> {
        match &self.repr {
            RtmRepr::Dense(m) => {
                if m.nrows() > m.ncols() {
                    Ok(qr_r(m.as_ref()))
                } else {
                    Ok(m.clone())
                }
            }
            RtmRepr::Factored { x, y } => {
                if x.ncols() < x.nrows() {
                    matmul_mat(qr_r(x.as_ref()).as_ref(), y.as_ref())
                } else {
                    matmul_mat(x.as_ref(), y.as_ref())
                }
            }
        }
    }

    /// `tr(T · O_ext)` with `O_ext` the identity on all remaining legs but the
    /// top one, where it acts as [`top_operator`]. Needs at least one open leg
    /// on each side, the top one last.
    pub fn trace_with_top(&self, op: MatRef<'_, C64>, budget: &Budget) -> Result<C64> {
        if self.row_legs == 0 || self.col_legs != self.row_legs || self.reduced {
            return Err(Error::Precondition("top-leg trace needs an unreduced RTM with open legs".into()));
        }
        let t = self.to_dense(budget)?;
        let o = top_operator(op);
        let dd = self.d * self.d;
        let rest = t.nrows() / dd;
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..rest {
            for a in 0..dd {
                for b in 0..dd {
                    acc += t[(r * dd + a, r * dd + b)] * o[(b, a)];
                }
            }
        }
        Ok(acc)
    }
}

/// `T_{t0}[i, j] = Σ_c L(c, i) R(c, j)` over the lowest `t0` legs.
pub fn build_rtm(l: &InfluenceMatrix, r: &InfluenceMatrix, t0: usize) -> Result<Rtm> {
    if l.t != r.t || l.d != r.d || l.side != ImSide::Left || r.side != ImSide::Right {
        return Err(Error::Dimension("build_rtm needs a compatible (left, right) pair".into()));
    }
    let n = l.n_legs();
    if t0 > n {
        return Err(Error::Domain(format!("t0={t0} exceeds the {n} cut legs")));
    }
    let dd = l.d * l.d;
    let c = dd.pow(t0 as u32);
    let rest = dd.pow((n - t0) as u32);
    let lm = MatRef::from_row_major_slice(l.tensor.data(), c, rest);
    let rm = MatRef::from_row_major_slice(r.tensor.data(), c, rest);
    let repr = if c < rest {
        RtmRepr::Factored { x: lm.transpose().to_owned(), y: rm.to_owned() }
    } else {
        RtmRepr::Dense(matmul_mat(lm.transpose(), rm)?)
    };
    Ok(Rtm { t: l.t, t0, d: l.d, reduced: false, row_legs: n - t0, col_legs: n - t0, repr })
}

/// Contraction route for the reduced network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Contract each side to a matrix over (open legs, contracted cut legs).
    Factored,
    /// Contract the joined network directly to the dense RTM.
    Joined,
}

/// RTM of the trapezoid network left by the dual-unitary reduction. Its
/// nonzero singular values equal those of [`build_rtm`] for the same `t0`.
pub fn reduce_rtm_dual_unitary(spec: &BrickworkSpec, t0: usize, budget: &Budget) -> Result<Rtm> {
    reduce_rtm_dual_unitary_with(spec, t0, budget, None)
}

pub fn reduce_rtm_dual_unitary_with(
    spec: &BrickworkSpec,
    t0: usize,
    budget: &Budget,
    route: Option<Route>,
) -> Result<Rtm> {
    let core = match &spec.gates {
        GateField::Uniform(g) => g,
        GateField::Dressed { core, .. } => core,
    };
    let res = dual_unitarity_residual(core);
    if res > TOL {
        return Err(Error::Precondition(format!("gate is not dual-unitary (residual {res:.3e})")));
    }
    let n = spec.t + 1;
    if t0 > n {
        return Err(Error::Domain(format!("t0={t0} exceeds the {n} cut legs")));
    }
    if t0 == n {
        let one = Mat::from_fn(1, 1, |_, _| C64::new(1.0, 0.0));
        return Ok(Rtm {
            t: spec.t,
            t0,
            d: spec.d,
            reduced: true,
            row_legs: 0,
            col_legs: 0,
            repr: RtmRepr::Dense(one),
        });
    }
    let geom = ConeGeometry::new(spec.t);
    let tensors = ConeTensors::new(spec, &geom)?;
    let red = geom.reduce(t0);
    let contracted: Vec<Label> = geom.cut[..t0].to_vec();
    let mut left = TensorNetwork::new();
    let mut right = TensorNetwork::new();
    let mut joined = TensorNetwork::new();
    for &i in &red.kept {
        let node = &geom.nodes[i];
        let t = tensors.tensor(node)?;
        joined.push(t.clone(), node.legs.clone())?;
        match node.side {
            Side::Left => left.push(t, node.legs.clone())?,
            Side::Right => right.push(t, node.legs.clone())?,
        }
    }
    let x_out: Vec<Label> = red.a_prime.iter().chain(&contracted).copied().collect();
    let y_out: Vec<Label> = contracted.iter().chain(&red.a_bar).copied().collect();
    let t_out: Vec<Label> = red.a_prime.iter().chain(&red.a_bar).copied().collect();

    let dd = spec.d * spec.d;
    let rows = dd.pow(red.a_prime.len() as u32);
    let cols = dd.pow(red.a_bar.len() as u32);
    let inner = dd.pow(t0 as u32);

    let route = match route {
        Some(r) => r,
        None => {
            let cap = budget.max_elements();
            let px = left.plan_within(&x_out, cap)?;
            let py = right.plan_within(&y_out, cap)?;
            let pj = joined.plan_within(&t_out, cap)?;
            let fact_peak = px.peak_elements.max(py.peak_elements);
            let fact_cost = px.flops + py.flops;
            let fact_ok = fact_peak <= budget.max_elements();
            let join_ok = pj.peak_elements <= budget.max_elements();
            if fact_ok && (!join_ok || fact_cost <= pj.flops) {
                Route::Factored
            } else {
                Route::Joined
            }
        }
    };
    // Each removed triangle folds into unit-normalized trace vectors; the
    // raw trapezoid is smaller than T_{t0} by d^{-1/2} per open cut leg.
    let scale = C64::new((spec.d as f64).powf((n - t0) as f64 / 2.0), 0.0);
    let repr = match route {
        Route::Factored => {
            let x = contract_or_unit(left, &x_out, budget)?;
            let y = contract_or_unit(right, &y_out, budget)?;
            let x = mat_from_row_major(x.scale(scale).data(), rows, inner);
            let y = mat_from_row_major(y.data(), inner, cols);
            if inner < rows.min(cols) {
                RtmRepr::Factored { x, y }
            } else {
                RtmRepr::Dense(matmul_mat(x.as_ref(), y.as_ref())?)
            }
        }
        Route::Joined => {
            let t = joined.contract(&t_out, budget)?;
            RtmRepr::Dense(mat_from_row_major(t.scale(scale).data(), rows, cols))
        }
    };
    Ok(Rtm { t: spec.t, t0, d: spec.d, reduced: true, row_legs: red.a_prime.len(), col_legs: red.a_bar.len(), repr })
}

fn contract_or_unit(net: TensorNetwork, out: &[Label], budget: &Budget) -> Result<DenseTensor> {
    if net.is_empty() {
        if !out.is_empty() {
            return Err(Error::Numerical("empty side of the reduced network has open legs".into()));
        }
        return Ok(DenseTensor::scalar(C64::new(1.0, 0.0)));
    }
    net.contract(out, budget)
}
