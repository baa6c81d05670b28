//! Two-qudit gates: dual-unitary families, folding, replica boundary states
//! and entangling power.
//!
//! Conventions used throughout the crate:
//! * a gate matrix acts on `left ⊗ right`, index `left * d + right`;
//! * a folded leg joins a ket and a bra index as `ket * d + bra`; with `n`
//!   replicas the copies are ordered `(ket1, bra1, …, ketn, bran)`;
//! * folded gate tensors carry legs `(out_left, out_right, in_left, in_right)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    haar_unitary, identity, kron, matmul_mat, polar_unitary, unitarity_residual, Budget, DenseTensor, Mat, MatRef,
    TensorNetwork, C64,
};

/// Default tolerance for unitarity, dual-unitarity and template residuals.
pub const TOL: f64 = 1e-9;
/// Tolerance for matrices printed to five significant digits.
pub const FIXTURE_TOL: f64 = 1e-4;

const SM_FIXTURE: &str = include_str!("../fixtures/sm_single_qubit.json");

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    d: usize,
    m: Mat<C64>,
}

impl Gate {
    /// Wraps a `d² × d²` matrix, which must be unitary within 1e-10.
    pub fn new(d: usize, m: Mat<C64>) -> Result<Self> {
        Self::with_tolerance(d, m, 1e-10)
    }

    /// Accepts a matrix unitary within `tol` and replaces it by its polar
    /// factor, so the stored gate is unitary to machine precision.
    pub fn with_tolerance(d: usize, m: Mat<C64>, tol: f64) -> Result<Self> {
        if d == 0 || m.nrows() != d * d || m.ncols() != d * d {
            return Err(Error::Dimension(format!(
                "gate for d={d} must be {0}x{0}, got {1}x{2}",
                d * d,
                m.nrows(),
                m.ncols()
            )));
        }
        let res = unitarity_residual(m.as_ref());
        if res > tol {
            return Err(Error::Precondition(format!("gate is not unitary: residual {res:.3e} > {tol:.1e}")));
        }
        let m = if res > 1e-13 { polar_unitary(m.as_ref())? } else { m };
        Ok(Self { d, m })
    }

    pub fn identity(d: usize) -> Self {
        Self { d, m: identity(d * d) }
    }

    pub fn swap(d: usize) -> Self {
        let m = Mat::from_fn(d * d, d * d, |i, j| {
            let (a, b) = (i / d, i % d);
            if j == b * d + a {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { d, m }
    }

    /// Haar-random two-qudit gate.
    pub fn haar(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { d, m: haar_unitary(d * d, &mut rng) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.m.as_ref()
    }

    /// Matrix element `⟨ol, or| g |il, ir⟩`.
    pub fn entry(&self, ol: usize, or: usize, il: usize, ir: usize) -> C64 {
        self.m[(ol * self.d + or, il * self.d + ir)]
    }

    /// `(a ⊗ b) g (c ⊗ e)` for single-site unitaries.
    pub fn dressed(
        &self,
        a: MatRef<'_, C64>,
        b: MatRef<'_, C64>,
        c: MatRef<'_, C64>,
        e: MatRef<'_, C64>,
    ) -> Result<Self> {
        for (name, u) in [("a", a), ("b", b), ("c", c), ("e", e)] {
            if u.nrows() != self.d || u.ncols() != self.d {
                return Err(Error::Dimension(format!("dressing {name} must be {0}x{0}", self.d)));
            }
            let r = unitarity_residual(u);
            if r > 1e-10 {
                return Err(Error::Precondition(format!("dressing {name} is not unitary (residual {r:.3e})")));
            }
        }
        let left = kron(a, b);
        let right = kron(c, e);
        let m = matmul_mat(matmul_mat(left.as_ref(), self.m.as_ref())?.as_ref(), right.as_ref())?;
        Ok(Self { d: self.d, m })
    }

    pub fn to_fixture(&self) -> MatrixFixture {
        MatrixFixture::from_mat(self.d, self.m.as_ref())
    }
}

/// JSON form `{d, matrix: [[re, im], …]}` with row-major entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFixture {
    pub d: usize,
    pub matrix: Vec<[f64; 2]>,
}

impl MatrixFixture {
    pub fn from_mat(d: usize, m: MatRef<'_, C64>) -> Self {
        let mut matrix = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                matrix.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self { d, matrix }
    }

    fn to_square(&self, n: usize) -> Result<Mat<C64>> {
        if self.matrix.len() != n * n {
            return Err(Error::Config(format!(
                "fixture for d={} has {} entries, expected {}",
                self.d,
                self.matrix.len(),
                n * n
            )));
        }
        Ok(Mat::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i * n + j];
            C64::new(re, im)
        }))
    }

    /// Interprets the fixture as a `d² × d²` gate, accepting residuals up to `tol`.
    pub fn to_gate(&self, tol: f64) -> Result<Gate> {
        Gate::with_tolerance(self.d, self.to_square(self.d * self.d)?, tol)
    }

    /// Interprets the fixture as a single-site `d × d` unitary, projected to the
    /// nearest exact unitary once it passes the `tol` check.
    pub fn to_single_site(&self, tol: f64) -> Result<Mat<C64>> {
        let m = self.to_square(self.d)?;
        let r = unitarity_residual(m.as_ref());
        if r > tol {
            return Err(Error::Precondition(format!("single-site fixture is not unitary (residual {r:.3e})")));
        }
        polar_unitary(m.as_ref())
    }
}

/// The four single-qubit dressings `(v+, v-, u+, u-)` of the fixed-dressing gate.
#[derive(Clone, Debug)]
pub struct FixedDressings {
    pub v_plus: Mat<C64>,
    pub v_minus: Mat<C64>,
    pub u_plus: Mat<C64>,
    pub u_minus: Mat<C64>,
}

#[derive(Deserialize)]
struct FixtureFile {
    v_plus: MatrixFixture,
    v_minus: MatrixFixture,
    u_plus: MatrixFixture,
    u_minus: MatrixFixture,
}

/// Loads the bundled dressing fixture (5 significant digits, polar-projected).
pub fn fixed_dressings() -> FixedDressings {
    let f: FixtureFile = serde_json::from_str(SM_FIXTURE).expect("bundled fixture parses");
    let load = |m: &MatrixFixture| m.to_single_site(FIXTURE_TOL).expect("bundled fixture is unitary");
    FixedDressings {
        v_plus: load(&f.v_plus),
        v_minus: load(&f.v_minus),
        u_plus: load(&f.u_plus),
        u_minus: load(&f.u_minus),
    }
}

/// Raw bundled fixture entries, before projection.
pub fn fixed_dressings_raw() -> [MatrixFixture; 4] {
    let f: FixtureFile = serde_json::from_str(SM_FIXTURE).expect("bundled fixture parses");
    [f.v_plus, f.v_minus, f.u_plus, f.u_minus]
}

/// Dual-unitary qubit gate `U(p)` with coupling `J(p) = arcsin(sqrt(1 - 3p/2)) / 2`.
pub fn du_gate_u(p: f64) -> Result<Gate> {
    if !(0.0..=2.0 / 3.0 + 1e-15).contains(&p) {
        return Err(Error::Domain(format!("entangling power p={p} outside [0, 2/3]")));
    }
    let j = 0.5 * (1.0 - 1.5 * p).max(0.0).sqrt().asin();
    let e = C64::from_polar(1.0, -j);
    let f = C64::new(0.0, -1.0) * C64::from_polar(1.0, j);
    let z = C64::new(0.0, 0.0);
    let rows = [[e, z, z, z], [z, z, f, z], [z, f, z, z], [z, z, z, e]];
    Ok(Gate { d: 2, m: Mat::from_fn(4, 4, |i, k| rows[i][k]) })
}

/// Single-site dressing applied around `U(p)`.
#[derive(Clone, Debug)]
pub enum Dressing {
    Identity,
    /// The bundled fixture matrices: `(v+ ⊗ v-) U(p) (u+ ⊗ u-)`.
    Fixed,
    /// Left-right symmetric form `(u ⊗ u) U(p) (v ⊗ v)`.
    Symmetric {
        u: Mat<C64>,
        v: Mat<C64>,
    },
    /// Four independent Haar dressings drawn from `seed`.
    Random {
        seed: u64,
    },
}

pub fn du_gate_w(p: f64, dressing: &Dressing) -> Result<Gate> {
    let u = du_gate_u(p)?;
    match dressing {
        Dressing::Identity => Ok(u),
        Dressing::Fixed => {
            let f = fixed_dressings();
            u.dressed(f.v_plus.as_ref(), f.v_minus.as_ref(), f.u_plus.as_ref(), f.u_minus.as_ref())
        }
        Dressing::Symmetric { u: a, v: b } => u.dressed(a.as_ref(), a.as_ref(), b.as_ref(), b.as_ref()),
        Dressing::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let m: Vec<Mat<C64>> = (0..4).map(|_| haar_unitary(2, &mut rng)).collect();
            u.dressed(m[0].as_ref(), m[1].as_ref(), m[2].as_ref(), m[3].as_ref())
        }
    }
}

/// Space-time reshuffle: the matrix mapping `(out_left, in_left)` to
/// `(out_right, in_right)`.
pub fn reshuffle(g: &Gate) -> Mat<C64> {
    let d = g.d;
    Mat::from_fn(d * d, d * d, |row, col| {
        let (or, ir) = (row / d, row % d);
        let (ol, il) = (col / d, col % d);
        g.entry(ol, or, il, ir)
    })
}

pub fn dual_unitarity_residual(g: &Gate) -> f64 {
    unitarity_residual(reshuffle(g).as_ref())
}

pub fn is_dual_unitary(g: &Gate, tol: f64) -> bool {
    dual_unitarity_residual(g) <= tol
}

/// `(g ⊗ g*)^{⊗n}` with four legs of dimension `d^{2n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedGate {
    pub d: usize,
    pub n: usize,
    pub tensor: DenseTensor,
}

fn fold1(g: &Gate) -> DenseTensor {
    let d = g.d;
    let dd = d * d;
    DenseTensor::from_fn(vec![dd, dd, dd, dd], |ix| {
        let (ok, ob) = (ix[0] / d, ix[0] % d);
        let (rk, rb) = (ix[1] / d, ix[1] % d);
        let (ik, ib) = (ix[2] / d, ix[2] % d);
        let (jk, jb) = (ix[3] / d, ix[3] % d);
        g.entry(ok, rk, ik, jk) * g.entry(ob, rb, ib, jb).conj()
    })
}

pub fn fold(g: &Gate, n: usize) -> Result<FoldedGate> {
    if n == 0 {
        return Err(Error::Domain("replica count must be at least 1".into()));
    }
    let f1 = fold1(g);
    let mut t = f1.clone();
    for _ in 1..n {
        t = t.outer(&f1);
    }
    // axes (ol_1, or_1, il_1, ir_1, ol_2, …) → (ol_1 … ol_n, or_1 …, il_1 …, ir_1 …)
    let perm: Vec<usize> = (0..4).flat_map(|leg| (0..n).map(move |r| 4 * r + leg)).collect();
    let dim = (g.d * g.d).pow(n as u32);
    let tensor = t.permute(&perm)?.reshape(vec![dim; 4])?;
    Ok(FoldedGate { d: g.d, n, tensor })
}

/// Replica pairing states on a two-replica folded leg (dimension `d⁴`).
#[derive(Clone, Debug)]
pub struct ReplicaStates {
    pub d: usize,
    pub circle: DenseTensor,
    pub square: DenseTensor,
    pub bullet: DenseTensor,
}

impl ReplicaStates {
    pub fn new(d: usize) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let d4 = d.pow(4);
        let split = |i: usize| (i / (d * d * d), (i / (d * d)) % d, (i / d) % d, i % d);
        let circle = DenseTensor::from_fn(vec![d4], |ix| {
            let (k1, b1, k2, b2) = split(ix[0]);
            if k1 == b1 && k2 == b2 {
                one
            } else {
                zero
            }
        });
        let square = DenseTensor::from_fn(vec![d4], |ix| {
            let (k1, b1, k2, b2) = split(ix[0]);
            if k1 == b2 && b1 == k2 {
                one
            } else {
                zero
            }
        });
        let norm = ((d * d - 1) as f64).sqrt();
        let bullet =
            DenseTensor::from_fn(vec![d4], |ix| (square.data()[ix[0]] * d as f64 - circle.data()[ix[0]]) / norm);
        Self { d, circle, square, bullet }
    }

    /// The orthonormal pair `(○/d, ●/d)` written as `d² × d²` matrices over
    /// (replica-1 leg, replica-2 leg).
    fn basis_matrices(&self) -> [DenseTensor; 2] {
        let dd = self.d * self.d;
        let s = 1.0 / self.d as f64;
        [
            self.circle.scale(C64::new(s, 0.0)).reshape(vec![dd, dd]).expect("d⁴ = d²·d²"),
            self.bullet.scale(C64::new(s, 0.0)).reshape(vec![dd, dd]).expect("d⁴ = d²·d²"),
        ]
    }
}

/// Two-replica folded gate projected on span{○, ●} on all four legs, in the
/// orthonormal basis `(○/d, ●/d)`. Row index `(out_left, out_right)`, column
/// index `(in_left, in_right)`, each ordered `(○○, ○●, ●○, ●●)`.
pub fn projected_two_replica(g: &Gate) -> Result<[[C64; 4]; 4]> {
    let f1 = fold1(g);
    let basis = ReplicaStates::new(g.d).basis_matrices();
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    let budget = Budget::default();
    for (row, slot) in out.iter_mut().enumerate() {
        for (col, entry) in slot.iter_mut().enumerate() {
            let sel = [row >> 1, row & 1, col >> 1, col & 1];
            let mut net = TensorNetwork::new();
            // labels: leg L of replica r is 10*L + r
            net.push(f1.clone(), vec![0, 10, 20, 30])?;
            net.push(f1.clone(), vec![1, 11, 21, 31])?;
            for (leg, &s) in sel.iter().enumerate() {
                net.push(basis[s].clone(), vec![10 * leg, 10 * leg + 1])?;
            }
            *entry = net.contract(&[], &budget)?.to_scalar()?;
        }
    }
    Ok(out)
}

/// Averaged two-replica gate for entangling power `p` in the orthonormal
/// `{○, ●}` basis; same index layout as [`projected_two_replica`].
pub fn averaged_gate(d: usize, p: f64) -> [[f64; 4]; 4] {
    let q = p / ((d * d - 1) as f64).sqrt();
    let w = 1.0 - 2.0 * p / ((d * d - 1) as f64);
    [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0 - p, q], [0.0, 1.0 - p, 0.0, q], [0.0, q, q, w]]
}

/// Entangling power read off the projected two-replica gate, after checking
/// that the projection has the dual-unitary template form.
pub fn entangling_power(g: &Gate) -> Result<f64> {
    entangling_power_with_tol(g, TOL)
}

pub fn entangling_power_with_tol(g: &Gate, tol: f64) -> Result<f64> {
    let m = projected_two_replica(g)?;
    let s = ((g.d * g.d - 1) as f64).sqrt();
    let p = m[1][3].re * s;
    let p_alt = 1.0 - m[2][1].re;
    let tpl = averaged_gate(g.d, p);
    let mut res: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            res = res.max((m[i][j] - C64::new(tpl[i][j], 0.0)).norm());
        }
    }
    if res > tol {
        return Err(Error::Precondition(format!(
            "projected gate deviates from the dual-unitary template by {res:.3e}"
        )));
    }
    if (p - p_alt).abs() > tol {
        return Err(Error::Numerical(format!("inconsistent entangling power readouts {p} vs {p_alt}")));
    }
    Ok(p)
}

/// Critical entangling power `1 - 1/d²`.
pub fn critical_p(d: usize) -> f64 {
    1.0 - 1.0 / (d * d) as f64
}

/// Named gate families reachable from configuration files and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateFamily {
    /// `U(p)` without dressing.
    DuU,
    /// `U(p)` with the bundled fixed dressing.
    DuFixed,
    /// Left-right symmetric dressing with Haar `u, v` from the seed.
    DuSym,
    /// Four independent Haar dressings from the seed.
    DuRandom,
    /// Haar-random two-qubit gate from the seed (not dual-unitary).
    Haar,
}

impl std::str::FromStr for GateFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown gate family {s:?}")))
    }
}

impl GateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GateFamily::DuU => "du-u",
            GateFamily::DuFixed => "du-fixed",
            GateFamily::DuSym => "du-sym",
            GateFamily::DuRandom => "du-random",
            GateFamily::Haar => "haar",
        }
    }

    pub fn is_dual_unitary(&self) -> bool {
        !matches!(self, GateFamily::Haar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub family: GateFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GateSpec {
    pub fn new(family: GateFamily, p: Option<f64>, seed: Option<u64>) -> Self {
        Self { family, p, seed }
    }

    pub fn du_fixed(p: f64) -> Self {
        Self::new(GateFamily::DuFixed, Some(p), None)
    }

    pub fn haar(seed: u64) -> Self {
        Self::new(GateFamily::Haar, None, Some(seed))
    }

    fn need_p(&self) -> Result<f64> {
        self.p.ok_or_else(|| Error::Config(format!("gate family {} needs p", self.family.name())))
    }

    fn need_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config(format!("gate family {} needs a seed", self.family.name())))
    }

    pub fn build(&self) -> Result<Gate> {
        match self.family {
            GateFamily::DuU => du_gate_u(self.need_p()?),
            GateFamily::DuFixed => du_gate_w(self.need_p()?, &Dressing::Fixed),
            GateFamily::DuSym => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.need_seed()?);
                let u = haar_unitary(2, &mut rng);
                let v = haar_unitary(2, &mut rng);
                du_gate_w(self.need_p()?, &Dressing::Symmetric { u, v })
            }
            GateFamily::DuRandom => du_gate_w(self.need_p()?, &Dressing::Random { seed: self.need_seed()? }),
            GateFamily::Haar => Ok(Gate::haar(2, self.need_seed()?)),
        }
    }
}
