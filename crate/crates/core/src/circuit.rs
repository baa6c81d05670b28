//! Brickwork circuits on a chain of `2L` qudits and dense state-vector oracles.
//!
//! Row `r = 1..=t` applies gates on pairs `(x, x+1)` with `x ≡ r (mod 2)`;
//! the initial dimers sit on `(2i, 2i+1)`. Site 0 is the most significant
//! digit of the state index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{Gate, GateSpec, MatrixFixture, FIXTURE_TOL};
use crate::numkernel::{derive_seed, haar_unitary, Budget, Mat, MatRef, C64};

/// Gate assignment over the space-time lattice.
#[derive(Clone, Debug)]
pub enum GateField {
    Uniform(Gate),
    /// `core` dressed by independent Haar single-site unitaries at every
    /// position, drawn deterministically from `(seed, x, row)`.
    Dressed {
        core: Gate,
        seed: u64,
    },
}

impl GateField {
    pub fn d(&self) -> usize {
        match self {
            GateField::Uniform(g) => g.d(),
            GateField::Dressed { core, .. } => core.d(),
        }
    }

    /// Gate on sites `(x, x+1)` in row `row`.
    pub fn gate_at(&self, x: usize, row: usize) -> Gate {
        match self {
            GateField::Uniform(g) => g.clone(),
            GateField::Dressed { core, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, &[x as u64, row as u64]));
                let d = core.d();
                let m: Vec<Mat<C64>> = (0..4).map(|_| haar_unitary(d, &mut rng)).collect();
                core.dressed(m[0].as_ref(), m[1].as_ref(), m[2].as_ref(), m[3].as_ref())
                    .expect("Haar dressings are unitary and correctly sized")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BrickworkSpec {
    pub d: usize,
    /// Half system size: the chain has `2L` sites.
    pub l: usize,
    /// Number of gate rows.
    pub t: usize,
    pub gates: GateField,
    /// Dimer state on `d²` amplitudes, index `left * d + right`.
    pub init: Vec<C64>,
}

impl BrickworkSpec {
    pub fn new(l: usize, t: usize, gates: GateField, init: Vec<C64>) -> Result<Self> {
        let d = gates.d();
        if init.len() != d * d {
            return Err(Error::Dimension(format!("dimer must have {} amplitudes, got {}", d * d, init.len())));
        }
        let norm: f64 = init.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Precondition(format!("dimer state has norm {norm}")));
        }
        if l == 0 {
            return Err(Error::Domain("half system size must be positive".into()));
        }
        Ok(Self { d, l, t, gates, init })
    }

    /// Smallest chain for which the past light cone of
    /// [`BrickworkSpec::observable_site`] stays inside the system.
    pub fn light_cone_complete(t: usize, gates: GateField, init: Vec<C64>) -> Result<Self> {
        Self::new(t + 1, t, gates, init)
    }

    pub fn sites(&self) -> usize {
        2 * self.l
    }

    /// Site on which one-point functions are evaluated: the site next to the
    /// central bond whose top-row gate is `(x0, x0 + 1)`.
    pub fn observable_site(&self) -> usize {
        let x = self.l - 1;
        if x % 2 == self.t % 2 {
            x
        } else {
            self.l
        }
    }

    /// True when the backward light cone of the observable site stays inside the chain.
    pub fn cone_fits(&self) -> bool {
        let x0 = self.observable_site();
        x0 >= self.t && x0 + self.t + 1 < self.sites()
    }

    /// Gate positions `x` of row `row`.
    pub fn row_pairs(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        (row % 2..self.sites().saturating_sub(1)).step_by(2)
    }
}

/// Local Hermitian operator on one site.
#[derive(Clone, Debug)]
pub struct LocalObservable {
    pub site: usize,
    pub op: Mat<C64>,
}

impl LocalObservable {
    pub fn new(site: usize, op: Mat<C64>) -> Result<Self> {
        if op.nrows() != op.ncols() {
            return Err(Error::Dimension("observable must be square".into()));
        }
        for i in 0..op.nrows() {
            for j in 0..op.ncols() {
                if (op[(i, j)] - op[(j, i)].conj()).norm() > 1e-12 {
                    return Err(Error::Precondition("observable is not Hermitian".into()));
                }
            }
        }
        Ok(Self { site, op })
    }
}

/// Single-qubit Pauli matrices `(name, matrix)` for X, Y, Z.
pub fn paulis() -> Vec<(&'static str, Mat<C64>)> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = |a: [[C64; 2]; 2]| Mat::from_fn(2, 2, |r, c| a[r][c]);
    vec![("X", m([[z, o], [o, z]])), ("Y", m([[z, -i], [i, z]])), ("Z", m([[o, z], [z, -o]]))]
}

/// Fixed generic entangled qubit dimer used by default in the experiments.
pub fn reference_dimer() -> Vec<C64> {
    let raw = [
        C64::new(-0.363785, 0.515352),
        C64::new(-0.600778, 0.049767),
        C64::new(-0.112666, -0.250701),
        C64::new(0.190729, -0.356005),
    ];
    normalized(&raw)
}

/// `|00…⟩` dimer.
pub fn product_dimer(d: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    v[0] = C64::new(1.0, 0.0);
    v
}

/// `Σ_i |ii⟩ / √d`.
pub fn bell_dimer(d: usize) -> Vec<C64> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d * d).map(|k| if k / d == k % d { C64::new(s, 0.0) } else { C64::new(0.0, 0.0) }).collect()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / n).collect()
}

fn product_state(spec: &BrickworkSpec) -> Vec<C64> {
    let mut psi = vec![C64::new(1.0, 0.0)];
    for _ in 0..spec.l {
        let mut next = Vec::with_capacity(psi.len() * spec.init.len());
        for a in &psi {
            next.extend(spec.init.iter().map(|b| a * b));
        }
        psi = next;
    }
    psi
}

fn apply_two_site(psi: &mut [C64], g: MatRef<'_, C64>, d: usize, x: usize, n_sites: usize) {
    let outer = d.pow(x as u32);
    let inner = d.pow((n_sites - x - 2) as u32);
    let dd = d * d;
    let mut buf = vec![C64::new(0.0, 0.0); dd];
    for a in 0..outer {
        for b in 0..inner {
            let base = a * dd * inner + b;
            for (k, v) in buf.iter_mut().enumerate() {
                *v = psi[base + k * inner];
            }
            for r in 0..dd {
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in buf.iter().enumerate() {
                    acc += g[(r, k)] * v;
                }
                psi[base + r * inner] = acc;
            }
        }
    }
}

/// Dense state after all `t` rows.
pub fn evolve_dense(spec: &BrickworkSpec, budget: &Budget) -> Result<Vec<C64>> {
    evolve_dense_masked(spec, budget, |_, _| true)
}

/// Dense evolution applying only the gates for which `keep(x, row)` holds;
/// the others are replaced by the identity.
pub fn evolve_dense_masked(
    spec: &BrickworkSpec,
    budget: &Budget,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<Vec<C64>> {
    let n = spec.sites();
    let amps = (spec.d as f64).powi(n as i32);
    budget.check_elements(amps, "dense state vector")?;
    let mut psi = product_state(spec);
    for row in 1..=spec.t {
        for x in spec.row_pairs(row) {
            if keep(x, row) {
                let g = spec.gates.gate_at(x, row);
                apply_two_site(&mut psi, g.matrix(), spec.d, x, n);
            }
        }
    }
    Ok(psi)
}

/// `⟨Ψ|O_x|Ψ⟩` for a state from [`evolve_dense`].
pub fn expectation(psi: &[C64], d: usize, n_sites: usize, obs: &LocalObservable) -> Result<C64> {
    if obs.site >= n_sites {
        return Err(Error::Domain(format!("site {} outside a chain of {n_sites} sites", obs.site)));
    }
    if obs.op.nrows() != d {
        return Err(Error::Dimension(format!("observable must be {d}x{d}")));
    }
    let outer = d.pow(obs.site as u32);
    let inner = d.pow((n_sites - obs.site - 1) as u32);
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..outer {
        for b in 0..inner {
            let base = a * d * inner + b;
            for i in 0..d {
                for j in 0..d {
                    acc += psi[base + i * inner].conj() * obs.op[(i, j)] * psi[base + j * inner];
                }
            }
        }
    }
    Ok(acc)
}

pub fn one_point_dense(spec: &BrickworkSpec, obs: &LocalObservable, budget: &Budget) -> Result<C64> {
    if obs.site >= spec.sites() {
        return Err(Error::Domain(format!("site {} outside a chain of {} sites", obs.site, spec.sites())));
    }
    let psi = evolve_dense(spec, budget)?;
    expectation(&psi, spec.d, spec.sites(), obs)
}

/// Gate source in a serialized circuit: a named family or an inline matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateSource {
    Named(GateSpec),
    Inline(MatrixFixture),
}

/// JSON form of [`BrickworkSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrickworkConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub t: usize,
    pub init: Vec<[f64; 2]>,
    pub gates: GateSource,
    #[serde(default)]
    pub disorder: Option<u64>,
}

impl BrickworkConfig {
    pub fn to_spec(&self) -> Result<BrickworkSpec> {
        let core = match &self.gates {
            GateSource::Named(s) => s.build()?,
            GateSource::Inline(f) => f.to_gate(FIXTURE_TOL)?,
        };
        if core.d() != self.d {
            return Err(Error::Config(format!("gate has d={}, circuit has d={}", core.d(), self.d)));
        }
        let gates = match self.disorder {
            None => GateField::Uniform(core),
            Some(seed) => GateField::Dressed { core, seed },
        };
        let init = self.init.iter().map(|&[re, im]| C64::new(re, im)).collect();
        BrickworkSpec::new(self.l, self.t, gates, init)
    }
}
