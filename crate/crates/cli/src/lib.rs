//! Experiment driver: validated configuration, deterministic parallel cell
//! evaluation and CSV/JSON emitters.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use rtm_core::circuit::{bell_dimer, paulis, product_dimer, reference_dimer, BrickworkSpec, GateField};
use rtm_core::decay_rates::{annealed_weight, fit_pk_decay, r_mag_avg, r_mag_gate, RateReport};
use rtm_core::entropy_bounds::{bounds_for, sector_weights};
use rtm_core::gates::{GateFamily, GateSpec};
use rtm_core::influence::{build_influence, build_rtm, reduce_rtm_dual_unitary, ImSide, Rtm};
use rtm_core::numkernel::{derive_seed, Budget, C64};
use rtm_core::replica_average::{c_constant, replica_grid};
use rtm_core::rtm_compress::{entropy, joint_sweep, Schedule, SweepReport};
use rtm_core::ErrorKind;

/// Largest circuit depth accepted by the validator.
pub const T_MAX: usize = 24;
/// Replica grid rows must agree to this absolute tolerance.
pub const REPLICA_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rtm_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Resource => 3,
                ErrorKind::Numerical => 4,
            },
            CliError::Config(_) | CliError::Io { .. } => 2,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.exit_code() {
            3 => "resource",
            4 => "numerical",
            _ => "config",
        }
    }

    /// Single-line machine-readable form printed on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind_name(), "exit_code": self.exit_code(), "message": self.to_string() } })
            .to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Pk,
    Bounds,
    Spectrum,
    Sweep,
    Replica,
    Rates,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Pk => "pk",
            Experiment::Bounds => "bounds",
            Experiment::Spectrum => "spectrum",
            Experiment::Sweep => "sweep",
            Experiment::Replica => "replica",
            Experiment::Rates => "rates",
        }
    }
}

/// Inclusive depth range, written `lo..hi` or as a single depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TRange {
    pub lo: usize,
    pub hi: usize,
}

impl TRange {
    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

impl std::str::FromStr for TRange {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| x.trim().parse::<usize>().map_err(|_| bad(format!("bad depth {x:?} in range {s:?}")));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let v = num(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad(format!("empty depth range {s:?}")));
        }
        Ok(Self { lo, hi })
    }
}

impl TryFrom<String> for TRange {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TRange> for String {
    fn from(r: TRange) -> String {
        format!("{}..{}", r.lo, r.hi)
    }
}

/// Which contraction depths to evaluate for each `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum T0Policy {
    All,
    /// Only the depth maximizing the von Neumann entropy.
    MaxEntropy,
    List(Vec<usize>),
}

impl std::str::FromStr for T0Policy {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(T0Policy::All),
            "max-entropy" => Ok(T0Policy::MaxEntropy),
            _ => s
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| bad(format!("bad t0 {x:?}"))))
                .collect::<Result<Vec<_>>>()
                .map(T0Policy::List),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitState {
    Reference,
    Bell,
    Product,
}

impl InitState {
    pub fn dimer(&self) -> Vec<C64> {
        match self {
            InitState::Reference => reference_dimer(),
            InitState::Bell => bell_dimer(2),
            InitState::Product => product_dimer(2),
        }
    }
}

/// Fully resolved experiment description. `out` and `jobs` do not enter the
/// config hash since they cannot change results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub gate: Option<GateSpec>,
    pub t: Option<TRange>,
    pub t0: T0Policy,
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    /// Secondary JSON output for `pk` fits.
    pub fit_out: Option<PathBuf>,
    pub init: InitState,
    /// Uniform bond dimension for `sweep`.
    pub chi: Option<usize>,
    /// Uniform per-bond tolerance for `sweep`.
    pub eps: Option<f64>,
    /// Entangling powers for `rates`.
    pub p_grid: Vec<f64>,
    /// Dressing samples per `p` for `rates`.
    pub samples: usize,
    /// Local dimensions for `replica`.
    pub dims: Vec<usize>,
    /// Initial-state constant for `replica`; derived from `init` if absent.
    pub c: Option<f64>,
    /// Largest `t0` and `t1` of the replica grid.
    pub max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            gate: None,
            t: None,
            t0: T0Policy::All,
            seed: 0,
            jobs: 1,
            out: None,
            fit_out: None,
            init: InitState::Reference,
            chi: None,
            eps: None,
            p_grid: Vec::new(),
            samples: 64,
            dims: vec![2, 3],
            c: None,
            max: 6,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(format!("config file: {e}")))
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment.ok_or_else(|| bad("no experiment selected"))
    }

    fn gate_spec(&self) -> Result<&GateSpec> {
        self.gate.as_ref().ok_or_else(|| bad("no gate given (--gate)"))
    }

    fn depths(&self) -> Result<TRange> {
        self.t.ok_or_else(|| bad("no depth range given (--t)"))
    }

    /// Schema and consistency checks; nothing heavy is computed.
    pub fn validate(&self) -> Result<()> {
        let exp = self.experiment()?;
        if self.jobs == 0 {
            return Err(bad("jobs must be at least 1"));
        }
        match exp {
            Experiment::Pk | Experiment::Bounds | Experiment::Spectrum | Experiment::Sweep => {
                let g = self.gate_spec()?;
                g.build()?;
                let t = self.depths()?;
                if t.lo == 0 || t.hi > T_MAX {
                    return Err(bad(format!("depths must lie in 1..{T_MAX}")));
                }
                if let T0Policy::List(v) = &self.t0 {
                    if let Some(bad_t0) = v.iter().find(|&&x| x > t.lo + 1) {
                        return Err(bad(format!("t0={bad_t0} exceeds the {} cut legs at t={}", t.lo + 1, t.lo)));
                    }
                }
                if exp == Experiment::Pk && !g.family.is_dual_unitary() {
                    return Err(bad("pk needs a dual-unitary gate family"));
                }
                if exp == Experiment::Sweep {
                    if t.lo != t.hi {
                        return Err(bad("sweep takes a single depth"));
                    }
                    match (self.chi, self.eps) {
                        (Some(0), _) => return Err(bad("chi must be positive")),
                        (Some(_), None) => {}
                        (None, Some(e)) if e >= 0.0 && e.is_finite() => {}
                        (None, Some(e)) => return Err(bad(format!("eps={e} must be a finite nonnegative number"))),
                        _ => return Err(bad("sweep needs exactly one of --chi and --eps")),
                    }
                }
            }
            Experiment::Replica => {
                if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
                    return Err(bad("replica dims must be at least 2"));
                }
                if self.max > 12 {
                    return Err(bad("replica grid max is limited to 12"));
                }
                if let Some(c) = self.c {
                    if !c.is_finite() {
                        return Err(bad("c must be finite"));
                    }
                }
            }
            Experiment::Rates => {
                let g = self.gate_spec()?;
                if !g.family.is_dual_unitary() {
                    return Err(bad("rates needs a dual-unitary gate family"));
                }
                if self.p_grid.is_empty() {
                    return Err(bad("rates needs at least one p (--p)"));
                }
                if let Some(p) = self.p_grid.iter().find(|p| !(0.0..1.0).contains(*p)) {
                    return Err(bad(format!("p={p} outside [0, 1)")));
                }
                if self.samples == 0 {
                    return Err(bad("samples must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the result-relevant fields.
    pub fn hash(&self) -> String {
        let canon = ExperimentConfig { out: None, fit_out: None, jobs: 1, ..self.clone() };
        let json = serde_json::to_string(&canon).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Produced files: the primary body plus an optional secondary JSON file.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub body: String,
    pub secondary: Option<(PathBuf, String)>,
}

/// Validates and runs one experiment.
pub fn run(cfg: &ExperimentConfig, budget: &Budget) -> Result<Artifacts> {
    cfg.validate()?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| bad(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.experiment()? {
        Experiment::Pk => run_pk(cfg, budget),
        Experiment::Bounds => run_bounds(cfg, budget),
        Experiment::Spectrum => run_spectrum(cfg, budget),
        Experiment::Sweep => run_sweep(cfg, budget),
        Experiment::Replica => run_replica(cfg),
        Experiment::Rates => run_rates(cfg),
    })
}

fn csv_header(cfg: &ExperimentConfig) -> Result<String> {
    Ok(format!("# rtm {}\n# config_hash={}\n# seed={}\n", cfg.experiment()?.name(), cfg.hash(), cfg.seed))
}

fn csv_body<R: Serialize>(cfg: &ExperimentConfig, rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| bad(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| bad(format!("csv: {e}")))?;
    Ok(csv_header(cfg)? + &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn spec_for(cfg: &ExperimentConfig, t: usize) -> Result<BrickworkSpec> {
    let gate = cfg.gate_spec()?.build()?;
    Ok(BrickworkSpec::light_cone_complete(t, GateField::Uniform(gate), cfg.init.dimer())?)
}

fn rtm_for(spec: &BrickworkSpec, t0: usize, budget: &Budget) -> Result<Rtm> {
    let g = match &spec.gates {
        GateField::Uniform(g) => g,
        GateField::Dressed { core, .. } => core,
    };
    if rtm_core::gates::is_dual_unitary(g, rtm_core::gates::TOL) {
        Ok(reduce_rtm_dual_unitary(spec, t0, budget)?)
    } else {
        let l = build_influence(spec, ImSide::Left, budget)?;
        let r = build_influence(spec, ImSide::Right, budget)?;
        Ok(build_rtm(&l, &r, t0)?)
    }
}

/// `(t, t0)` cells in output order. `max-entropy` is resolved per `t`.
fn cells(cfg: &ExperimentConfig, budget: &Budget) -> Result<Vec<(usize, usize)>> {
    let depths: Vec<usize> = cfg.depths()?.iter().collect();
    match &cfg.t0 {
        T0Policy::All => Ok(depths.iter().flat_map(|&t| (0..=t).map(move |t0| (t, t0))).collect()),
        T0Policy::List(v) => Ok(depths.iter().flat_map(|&t| v.iter().map(move |&t0| (t, t0))).collect()),
        T0Policy::MaxEntropy => depths
            .iter()
            .map(|&t| {
                let spec = spec_for(cfg, t)?;
                let s: Vec<f64> = (0..=t)
                    .into_par_iter()
                    .map(|t0| Ok(entropy(&rtm_for(&spec, t0, budget)?, 1.0)?))
                    .collect::<Result<_>>()?;
                // first maximum wins
                let best = s.iter().enumerate().fold(0, |b, (i, &v)| if v > s[b] { i } else { b });
                Ok((t, best))
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct PkRow {
    t: usize,
    t0: usize,
    k: usize,
    p_k: f64,
}

#[derive(Serialize)]
struct FitEntry {
    t: usize,
    report: RateReport,
}

fn run_pk(cfg: &ExperimentConfig, budget: &Budget) -> Result<Artifacts> {
    let cells = cells(cfg, budget)?;
    let weights: Vec<Vec<f64>> =
        cells.par_iter().map(|&(t, t0)| Ok(sector_weights(&spec_for(cfg, t)?, t0, budget)?)).collect::<Result<_>>()?;
    let rows: Vec<PkRow> = cells
        .iter()
        .zip(&weights)
        .flat_map(|(&(t, t0), p)| p.iter().enumerate().map(move |(k, &p_k)| PkRow { t, t0, k, p_k }))
        .collect();
    let body = csv_body(cfg, &rows)?;
    let secondary = match &cfg.fit_out {
        None => None,
        Some(path) => {
            let g = cfg.gate_spec()?;
            let gate_rate = r_mag_gate(&g.build()?)?.rate;
            let avg = g.p.map(|p| r_mag_avg(p, 2)).transpose()?;
            let mut fits = Vec::new();
            for t in cfg.depths()?.iter() {
                let series = top_series(&cells, &weights, t);
                let mut report = fit_pk_decay(&series, None, 2)?;
                report.r_mag_gate = Some(gate_rate);
                report.r_mag_avg = avg;
                fits.push(FitEntry { t, report });
            }
            let doc = serde_json::json!({ "config_hash": cfg.hash(), "seed": cfg.seed, "fits": fits });
            Some((path.clone(), serde_json::to_string_pretty(&doc).expect("json") + "\n"))
        }
    };
    Ok(Artifacts { body, secondary })
}

/// `(t0, p_{t1})` for one depth; cells with no projected leg are skipped.
pub fn top_series(cells: &[(usize, usize)], weights: &[Vec<f64>], t: usize) -> Vec<(usize, f64)> {
    cells
        .iter()
        .zip(weights)
        .filter(|((ct, _), p)| *ct == t && p.len() > 1)
        .map(|(&(_, t0), p)| (t0, *p.last().expect("nonempty")))
        .collect()
}

#[derive(Serialize)]
struct BoundsRow {
    t: usize,
    t0: usize,
    lower: f64,
    exact: f64,
    upper: f64,
    shannon: f64,
}

fn run_bounds(cfg: &ExperimentConfig, budget: &Budget) -> Result<Artifacts> {
    let rows: Vec<BoundsRow> = cells(cfg, budget)?
        .par_iter()
        .map(|&(t, t0)| {
            let r = bounds_for(&spec_for(cfg, t)?, t0, budget)?;
            Ok(BoundsRow {
                t,
                t0,
                lower: r.lower,
                exact: r.exact.unwrap_or(f64::NAN),
                upper: r.upper,
                shannon: r.shannon,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Artifacts { body: csv_body(cfg, &rows)?, secondary: None })
}

#[derive(Serialize)]
struct SpectrumRow {
    t: usize,
    t0: usize,
    index: usize,
    sigma: f64,
}

fn run_spectrum(cfg: &ExperimentConfig, budget: &Budget) -> Result<Artifacts> {
    let cells = cells(cfg, budget)?;
    let spectra: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(t, t0)| {
            let s = rtm_for(&spec_for(cfg, t)?, t0, budget)?.singular_values()?;
            Ok(s.values[..s.rank()].to_vec())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SpectrumRow> = cells
        .iter()
        .zip(&spectra)
        .flat_map(|(&(t, t0), s)| s.iter().enumerate().map(move |(index, &sigma)| SpectrumRow { t, t0, index, sigma }))
        .collect();
    Ok(Artifacts { body: csv_body(cfg, &rows)?, secondary: None })
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    config_hash: String,
    seed: u64,
    t: usize,
    report: &'a SweepReport,
}

fn run_sweep(cfg: &ExperimentConfig, budget: &Budget) -> Result<Artifacts> {
    let t = cfg.depths()?.lo;
    let spec = spec_for(cfg, t)?;
    let (l, r) =
        rayon::join(|| build_influence(&spec, ImSide::Left, budget), || build_influence(&spec, ImSide::Right, budget));
    let (l, r) = (l?, r?);
    let bonds = t;
    let schedule = match (cfg.chi, cfg.eps) {
        (Some(chi), _) => Schedule::Chi(vec![chi; bonds]),
        (None, Some(e)) => Schedule::Epsilon(vec![e; bonds]),
        (None, None) => unreachable!("validated"),
    };
    let probes: Vec<(String, _)> = paulis().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
    let (_, _, report) = joint_sweep(&l, &r, &schedule, &probes, budget)?;
    let doc = SweepDoc { config_hash: cfg.hash(), seed: cfg.seed, t, report: &report };
    Ok(Artifacts { body: serde_json::to_string_pretty(&doc).expect("json") + "\n", secondary: None })
}

fn run_replica(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let c = match cfg.c {
        Some(c) => c,
        None => c_constant(&cfg.init.dimer(), 2)?,
    };
    let grids: Vec<_> =
        cfg.dims.par_iter().map(|&d| replica_grid(d, c, cfg.max)).collect::<std::result::Result<_, _>>()?;
    let rows: Vec<_> = grids.into_iter().flatten().collect();
    let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    if worst >= REPLICA_TOL {
        return Err(rtm_core::Error::Numerical(format!("contraction and closed form differ by {worst:e}")).into());
    }
    #[derive(Serialize)]
    struct Row {
        d: usize,
        p: f64,
        c: f64,
        t0: usize,
        t1: usize,
        k: usize,
        #[serde(rename = "A_contract")]
        a_contract: f64,
        #[serde(rename = "A_closed")]
        a_closed: f64,
        abs_diff: f64,
    }
    let out: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            d: r.d,
            p: r.p,
            c: r.c,
            t0: r.t0,
            t1: r.t1,
            k: r.k,
            a_contract: r.a_contract,
            a_closed: r.a_closed,
            abs_diff: r.abs_diff,
        })
        .collect();
    Ok(Artifacts { body: csv_body(cfg, &out)?, secondary: None })
}

#[derive(Serialize)]
struct RateRow {
    p: f64,
    seed: u64,
    r_mag_gate: f64,
    r_left: f64,
    r_right: f64,
    degenerate: bool,
    w_left: f64,
    w_right: f64,
    r_mag_avg: f64,
}

fn run_rates(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let family = cfg.gate_spec()?.family;
    let jobs: Vec<(f64, u64)> = cfg
        .p_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| (0..cfg.samples as u64).map(move |s| (p, derive_seed(cfg.seed, &[i as u64, s]))))
        .collect();
    let rows: Vec<RateRow> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            // Families without a seed ignore it; the column still records it.
            let seeded = !matches!(family, GateFamily::DuU | GateFamily::DuFixed);
            let g = GateSpec::new(family, Some(p), seeded.then_some(seed)).build()?;
            let r = r_mag_gate(&g)?;
            let w = annealed_weight(&g)?;
            Ok(RateRow {
                p,
                seed,
                r_mag_gate: r.rate,
                r_left: r.left,
                r_right: r.right,
                degenerate: r.degenerate,
                w_left: w[0],
                w_right: w[1],
                r_mag_avg: r_mag_avg(p, 2)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Artifacts { body: csv_body(cfg, &rows)?, secondary: None })
}

/// Strips `#` header lines, leaving the CSV body.
pub fn csv_rows(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}
