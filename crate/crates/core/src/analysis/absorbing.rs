//! Surviving mass of the absorbing problem and its weighted decay bounds.

use super::Verdict;
use crate::error::{Error, Result};
use crate::geometry::{Domain, PhaseState};
use crate::stats::Estimate;
use crate::transport::{rqmc_moments, InitialData, Rqmc};
use crate::weights::WeightSpec;
use serde::{Deserialize, Serialize};

type Integrand = Box<dyn Fn(&PhaseState, f64) -> f64 + Sync>;

/// `∫ f₀ 1{σ(x,v) > t}`, the mass still inside at time `t`.
pub fn absorbing_mass(data: &InitialData, t: f64, domain: &Domain, rq: Rqmc) -> Result<Estimate> {
    let g: Vec<Integrand> = vec![Box::new(move |_, s| if s > t { 1.0 } else { 0.0 })];
    Ok(rqmc_moments(data, domain, rq, &g)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub verdict: Verdict,
    pub weight: WeightSpec,
    pub norm: Estimate,
    pub times: Vec<f64>,
    pub masses: Vec<Estimate>,
    /// `Θ(t)·‖f₀‖_m`.
    pub bounds: Vec<f64>,
    /// `bound + tolerance − mass`; nonnegative where the bound holds.
    pub margins: Vec<f64>,
    pub tolerance: Vec<f64>,
}

fn decay_factor(weight: &WeightSpec, t: f64) -> f64 {
    match *weight {
        WeightSpec::ExpSigma => (-t).exp(),
        WeightSpec::RPoly { nu } => (1.0 + t).powf(-nu),
        _ => unreachable!("validated"),
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::param("times", "need finite nonnegative times"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    Ok(())
}

/// Checks `mass(t) ≤ Θ(t)‖f₀‖_m` with `Θ(t) = e^{−t}` for `m = e^σ` and
/// `Θ(t) = (1+t)^{−ν}` for `m = (1+σ)^ν`, `ν > 1`. Both sides share the
/// RQMC nodes; the tolerance is three combined standard errors.
pub fn absorbing_bound_check(
    data: &InitialData,
    weight: &WeightSpec,
    times: &[f64],
    domain: &Domain,
    rq: Rqmc,
) -> Result<AbsorbingReport> {
    check_times(times)?;
    let name = weight.column_name();
    match *weight {
        WeightSpec::ExpSigma => {
            if data.min_speed() <= 0.0 {
                return Err(Error::InfiniteNorm { weight: name });
            }
        }
        WeightSpec::RPoly { nu } => {
            if !(nu > 1.0 && nu.is_finite()) {
                return Err(Error::param("weight.nu", "need nu > 1"));
            }
            if data.min_speed() <= 0.0 && nu >= domain.dim() as f64 {
                return Err(Error::InfiniteNorm { weight: name });
            }
        }
        _ => return Err(Error::param("weight", "absorbing bounds use exp_sigma or r_poly")),
    }
    let w = *weight;
    let mut g: Vec<Integrand> = vec![Box::new(move |_, s| match w {
        WeightSpec::ExpSigma => s.exp(),
        WeightSpec::RPoly { nu } => (1.0 + s).powf(nu),
        _ => unreachable!(),
    })];
    for &t in times {
        g.push(Box::new(move |_, s| if s > t { 1.0 } else { 0.0 }));
    }
    let est = rqmc_moments(data, domain, rq, &g)?;
    let norm = est[0];
    let masses = est[1..].to_vec();
    let mut bounds = Vec::new();
    let mut margins = Vec::new();
    let mut tolerance = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let f = decay_factor(weight, t);
        let b = f * norm.value;
        let tol = 3.0 * (masses[k].std_error + f * norm.std_error);
        bounds.push(b);
        tolerance.push(tol);
        margins.push(b + tol - masses[k].value);
    }
    Ok(AbsorbingReport {
        verdict: Verdict::from_pass(margins.iter().all(|m| *m >= 0.0)),
        weight: *weight,
        norm,
        times: times.to_vec(),
        masses,
        bounds,
        margins,
        tolerance,
    })
}

/// Whether surviving mass decays like a power or like an exponential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayShape {
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    /// `Δ ln mass / Δ ln t` between consecutive times.
    pub loglog_slopes: Vec<f64>,
    /// `Δ ln mass / Δ t` between consecutive times.
    pub semilog_rates: Vec<f64>,
    /// Log-log slopes vary less than semilog rates.
    pub polynomial: bool,
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().fold(0f64, |a, v| a.max(v.abs()));
    let min = values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    max / min
}

/// Surviving mass at positive increasing `times` and its decay shape.
pub fn mass_decay_shape(data: &InitialData, times: &[f64], domain: &Domain, rq: Rqmc) -> Result<DecayShape> {
    check_times(times)?;
    if times.len() < 3 || times[0] <= 0.0 {
        return Err(Error::param("times", "need at least three positive times"));
    }
    let g: Vec<Integrand> = times
        .iter()
        .map(|&t| Box::new(move |_: &PhaseState, s: f64| if s > t { 1.0 } else { 0.0 }) as Integrand)
        .collect();
    let masses: Vec<f64> = rqmc_moments(data, domain, rq, &g)?.iter().map(|e| e.value).collect();
    if masses.iter().any(|m| *m <= 0.0) {
        return Err(Error::param("times", "surviving mass vanished; use earlier times"));
    }
    let loglog: Vec<f64> = (1..times.len())
        .map(|k| (masses[k] / masses[k - 1]).ln() / (times[k] / times[k - 1]).ln())
        .collect();
    let semilog: Vec<f64> = (1..times.len())
        .map(|k| (masses[k] / masses[k - 1]).ln() / (times[k] - times[k - 1]))
        .collect();
    Ok(DecayShape {
        polynomial: spread(&loglog) < spread(&semilog),
        times: times.to_vec(),
        masses,
        loglog_slopes: loglog,
        semilog_rates: semilog,
    })
}
