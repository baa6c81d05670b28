//! Magnon decay rates of dual-unitary gates and exponential fits of the
//! top-sector weight `p_{t1}` against `t0`.
//!
//! Rates are in units of `ln d` per contracted leg and refer to two-replica
//! weights: a one-replica channel eigenvalue `λ` contributes `|λ|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{dual_unitarity_residual, fold, Gate, TOL};
use crate::influence::circle;
use crate::numkernel::{eigenvalues, Mat, C64};

/// Eigenvalue moduli within this distance of 1 count as unit eigenvalues.
pub const UNIT_TOL: f64 = 1e-9;

/// `−ln(1 − p) / ln d`; infinite at `p = 1`.
pub fn r_mag_avg(p: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("local dimension {d} < 2")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("entangling power {p} outside [0, 1]")));
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(1.0 - p).ln() / (d as f64).ln())
}

/// The two single-gate light-cone channels on one folded leg (`d² × d²`):
/// `left` maps `in_left → out_right` with traces on `out_left` and
/// `in_right`; `right` maps `in_right → out_left`.
pub fn gate_channels(g: &Gate) -> Result<[Mat<C64>; 2]> {
    let d = g.d();
    let dd = d * d;
    let f = fold(g, 1)?.tensor;
    let circ = circle(d);
    let c = circ.data();
    let at = |ol: usize, or: usize, il: usize, ir: usize| f.data()[((ol * dd + or) * dd + il) * dd + ir];
    let s = 1.0 / d as f64;
    let left = Mat::from_fn(dd, dd, |b, cc| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..dd {
            for e in 0..dd {
                acc += at(a, b, cc, e) * c[a] * c[e];
            }
        }
        acc * s
    });
    let right = Mat::from_fn(dd, dd, |a, e| {
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..dd {
            for cc in 0..dd {
                acc += at(a, b, cc, e) * c[b] * c[cc];
            }
        }
        acc * s
    });
    Ok([left, right])
}

/// Per-gate magnon rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRate {
    /// `min` over the two channels; 0 when a channel is degenerate.
    pub rate: f64,
    pub left: f64,
    pub right: f64,
    /// A channel has a second unit-modulus eigenvalue (no decay).
    pub degenerate: bool,
}

/// `−2 ln|λ_sub| / ln d` per channel, with `λ_sub` the largest eigenvalue
/// after the trivial unit one.
pub fn r_mag_gate(g: &Gate) -> Result<GateRate> {
    let res = dual_unitarity_residual(g);
    if res > TOL {
        return Err(Error::Precondition(format!("gate is not dual-unitary (residual {res:.3e})")));
    }
    let ln_d = (g.d() as f64).ln();
    let mut rates = [0.0; 2];
    let mut degenerate = false;
    for (slot, ch) in rates.iter_mut().zip(gate_channels(g)?) {
        let ev = eigenvalues(ch.as_ref())?;
        if (ev[0].norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!("leading channel eigenvalue {} is not unit", ev[0])));
        }
        let sub = ev.get(1).map_or(0.0, |z| z.norm());
        if (sub - 1.0).abs() <= UNIT_TOL {
            degenerate = true;
            *slot = 0.0;
        } else {
            *slot = if sub == 0.0 { f64::INFINITY } else { -2.0 * sub.ln() / ln_d };
        }
    }
    Ok(GateRate { rate: rates[0].min(rates[1]), left: rates[0], right: rates[1], degenerate })
}

/// `‖Φ − |ô⟩⟨ô|‖_F² / (d² − 1)` per channel: the weight a traceless
/// excitation keeps across one gate, averaged over the traceless subspace.
/// Invariant under single-site dressings and equal to `1 − p`.
pub fn annealed_weight(g: &Gate) -> Result<[f64; 2]> {
    let d = g.d();
    let dd = d * d;
    let circ = circle(d);
    let o = |i: usize| circ.data()[i].re / (d as f64).sqrt();
    let mut out = [0.0; 2];
    for (slot, ch) in out.iter_mut().zip(gate_channels(g)?) {
        let mut acc = 0.0;
        for i in 0..dd {
            for j in 0..dd {
                acc += (ch[(i, j)] - C64::new(o(i) * o(j), 0.0)).norm_sqr();
            }
        }
        *slot = acc / (dd - 1) as f64;
    }
    Ok(out)
}

/// Rate of the annealed (sample-averaged) weight, `−ln(mean w) / ln d`.
pub fn annealed_rate(weights: &[f64], d: usize) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::Domain(format!("mean weight {mean} is not positive")));
    }
    Ok(-mean.ln() / (d as f64).ln())
}

/// Fit summary. `r_mag_avg`/`r_mag_gate` are filled in by callers that know
/// the gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_mag_avg: Option<f64>,
    pub r_mag_gate: Option<f64>,
    pub r_fit: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals of `ln p`.
    pub residual: f64,
    pub r_squared: f64,
    /// Inclusive `t0` range of the points used.
    pub window: (usize, usize),
    pub points: usize,
}

/// Least-squares line through `(t0, ln p)` in the window (default: the
/// largest-`t0` half, at least three points); `r_fit = −slope / ln d`.
pub fn fit_pk_decay(series: &[(usize, f64)], window: Option<(usize, usize)>, d: usize) -> Result<RateReport> {
    let mut pts: Vec<(usize, f64)> = series.to_vec();
    pts.sort_by_key(|p| p.0);
    let (lo, hi) = match window {
        Some(w) => w,
        None => {
            if pts.len() < 3 {
                return Err(Error::Domain(format!("fit needs at least 3 points, got {}", pts.len())));
            }
            let take = pts.len().div_ceil(2).max(3);
            (pts[pts.len() - take].0, pts[pts.len() - 1].0)
        }
    };
    let sel: Vec<(usize, f64)> = pts.into_iter().filter(|p| p.0 >= lo && p.0 <= hi).collect();
    if sel.len() < 3 {
        return Err(Error::Domain(format!("fit window [{lo}, {hi}] holds {} points, need 3", sel.len())));
    }
    if let Some(bad) = sel.iter().find(|p| !p.1.is_finite() || p.1 <= 0.0) {
        return Err(Error::Domain(format!("nonpositive value {} at t0={} in fit window", bad.1, bad.0)));
    }
    let n = sel.len() as f64;
    let xs: Vec<f64> = sel.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = sel.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateReport {
        r_mag_avg: None,
        r_mag_gate: None,
        r_fit: -slope / (d as f64).ln(),
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        r_squared,
        window: (lo, hi),
        points: sel.len(),
    })
}
