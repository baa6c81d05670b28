use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtm_cli::{run, CliError, Experiment, ExperimentConfig, InitState, T0Policy, TRange};
use rtm_core::gates::{GateFamily, GateSpec};
use rtm_core::numkernel::Budget;

/// Reduced transition matrix experiments. Results go to CSV (JSON for
/// sweep reports); flags override values from `--config`.
#[derive(Parser, Debug)]
#[command(name = "rtm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sector weights p_k for every (t, t0).
    Pk(Common),
    /// Entropy sandwich lower/exact/upper for every (t, t0).
    Bounds(Common),
    /// Nonzero singular values of the RTM.
    Spectrum(Common),
    /// Joint IM compression with certified probe errors (JSON).
    Sweep(Common),
    /// Averaged replica network against the closed form at p_c.
    Replica(Common),
    /// Per-gate magnon rates over sampled dressings.
    Rates(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gate family: du-u, du-fixed, du-sym, du-random, haar.
    #[arg(long)]
    gate: Option<String>,
    /// Entangling power; a comma list for `rates`.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Depth or inclusive range `lo..hi`.
    #[arg(long)]
    t: Option<String>,
    /// all, max-entropy, or a comma list.
    #[arg(long)]
    t0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON fit report path (`pk`).
    #[arg(long)]
    fit_out: Option<PathBuf>,
    /// Initial dimer: reference, bell, product.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    chi: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Local dimensions for `replica`, comma separated.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max: Option<usize>,
}

fn parse_json_str<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown {what} {s:?}")))
}

fn resolve(exp: Experiment, f: Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &f.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if cfg.experiment.is_some_and(|e| e != exp) {
        return Err(CliError::Config(format!("config file is for another experiment than {}", exp.name())));
    }
    cfg.experiment = Some(exp);
    if let Some(name) = &f.gate {
        let family: GateFamily = name.parse()?;
        let old = cfg.gate.take();
        cfg.gate = Some(GateSpec::new(family, old.as_ref().and_then(|g| g.p), old.as_ref().and_then(|g| g.seed)));
    }
    match f.p.len() {
        0 => {}
        1 if exp != Experiment::Rates => {
            let g = cfg.gate.as_mut().ok_or_else(|| CliError::Config("--p given without a gate".into()))?;
            g.p = Some(f.p[0]);
        }
        _ if exp == Experiment::Rates => cfg.p_grid = f.p.clone(),
        _ => return Err(CliError::Config(format!("{} takes a single --p", exp.name()))),
    }
    if exp == Experiment::Rates && cfg.p_grid.is_empty() {
        if let Some(p) = cfg.gate.as_ref().and_then(|g| g.p) {
            cfg.p_grid = vec![p];
        }
    }
    if let Some(t) = &f.t {
        cfg.t = Some(t.parse::<TRange>()?);
    }
    if let Some(t0) = &f.t0 {
        cfg.t0 = t0.parse::<T0Policy>()?;
    }
    if let Some(seed) = f.seed {
        cfg.seed = seed;
        if let Some(g) = cfg.gate.as_mut() {
            if matches!(g.family, GateFamily::DuSym | GateFamily::DuRandom | GateFamily::Haar) {
                g.seed = Some(seed);
            }
        }
    }
    if let Some(g) = cfg.gate.as_mut() {
        if g.seed.is_none() && matches!(g.family, GateFamily::DuSym | GateFamily::DuRandom | GateFamily::Haar) {
            g.seed = Some(cfg.seed);
        }
    }
    if let Some(init) = &f.init {
        cfg.init = parse_json_str::<InitState>("initial state", init)?;
    }
    cfg.jobs = f.jobs.unwrap_or(cfg.jobs);
    cfg.out = f.out.or(cfg.out);
    cfg.fit_out = f.fit_out.or(cfg.fit_out);
    cfg.chi = f.chi.or(cfg.chi);
    cfg.eps = f.eps.or(cfg.eps);
    cfg.samples = f.samples.unwrap_or(cfg.samples);
    if !f.dims.is_empty() {
        cfg.dims = f.dims;
    }
    cfg.c = f.c.or(cfg.c);
    cfg.max = f.max.unwrap_or(cfg.max);
    Ok(cfg)
}

fn write(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let (exp, flags) = match cli.command {
        Command::Pk(f) => (Experiment::Pk, f),
        Command::Bounds(f) => (Experiment::Bounds, f),
        Command::Spectrum(f) => (Experiment::Spectrum, f),
        Command::Sweep(f) => (Experiment::Sweep, f),
        Command::Replica(f) => (Experiment::Replica, f),
        Command::Rates(f) => (Experiment::Rates, f),
    };
    let cfg = resolve(exp, flags)?;
    let budget = Budget::from_env()?;
    let art = run(&cfg, &budget)?;
    match &cfg.out {
        Some(path) => write(path, &art.body)?,
        None => print!("{}", art.body),
    }
    if let Some((path, text)) = &art.secondary {
        write(path, text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
