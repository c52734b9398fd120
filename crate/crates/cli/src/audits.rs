//! Verdict records and the config-driven audits.

use crate::config::VerificationConfig;
use anyhow::Result;
use knudsen::analysis::{
    absorbing_bound_check, doeblin_probe, h_p_check, lyapunov_audit, stationarity_test, EquilibriumModel, Verdict,
};
use knudsen::weights::LyapunovCase;
use knudsen::{Domain, Error, InitialData, WallModel};
use serde::{Deserialize, Serialize};

/// One named verdict with its margin and the full audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub name: String,
    pub verdict: Verdict,
    /// Positive when the check holds with room to spare.
    pub margin: Option<f64>,
    pub summary: String,
    pub record: serde_json::Value,
}

impl VerdictRecord {
    pub fn new(name: impl Into<String>, verdict: Verdict, margin: Option<f64>, summary: impl Into<String>) -> Self {
        VerdictRecord {
            name: name.into(),
            verdict,
            margin,
            summary: summary.into(),
            record: serde_json::Value::Null,
        }
    }

    pub fn with_record<T: Serialize>(mut self, record: &T) -> Self {
        self.record = serde_json::to_value(record).unwrap_or(serde_json::Value::Null);
        self
    }

    /// Pass iff `value ≤ limit`; the margin is `limit − value`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64, what: &str) -> Self {
        let pass = value <= limit;
        VerdictRecord::new(
            name,
            Verdict::from_pass(pass),
            Some(limit - value),
            format!("{what} = {value:.3e} (limit {limit:.1e})"),
        )
    }

    pub fn line(&self) -> String {
        match self.margin {
            Some(m) => format!("{:<12} {:<44} margin {:>11.4e}  {}", self.verdict.as_str(), self.name, m, self.summary),
            None => format!("{:<12} {:<44} {:>18}  {}", self.verdict.as_str(), self.name, "", self.summary),
        }
    }
}

/// Conjunction of all verdicts; PASS for an empty list.
pub fn aggregate(records: &[VerdictRecord]) -> Verdict {
    records.iter().fold(Verdict::Pass, |a, r| a.and(r.verdict))
}

/// Runs one resolved verification against the experiment's domain and wall.
pub fn run_verification(
    v: &VerificationConfig,
    domain: &Domain,
    wall: &WallModel,
    initial: &InitialData,
    equilibrium: Option<&EquilibriumModel>,
    seed: u64,
) -> Result<VerdictRecord> {
    Ok(match v {
        VerificationConfig::Lyapunov {
            case,
            i,
            eps,
            t_end,
            n_particles,
            checkpoints,
            initial,
        } => {
            let case = LyapunovCase::from_number(*case, i.unwrap_or(0.0), eps.unwrap_or(0.0))?;
            let data = initial.as_ref().expect("resolved");
            lyapunov_record("lyapunov", data, *t_end, case, n_particles.expect("resolved"), seed, *checkpoints, domain, wall)?
        }
        VerificationConfig::Doeblin(cfg) => {
            let r = doeblin_probe(cfg, domain, wall)?;
            let summary = format!(
                "min density {:.3e}, constant {:.3e}, empty pairs {}",
                r.min_density, r.minorization_constant, r.empty_pairs
            );
            VerdictRecord::new("doeblin", r.verdict, Some(r.min_density - cfg.tau_min), summary).with_record(&r)
        }
        VerificationConfig::Stationarity { horizon, n_particles } => {
            let Some(eq) = equilibrium else {
                return Ok(VerdictRecord::new(
                    "stationarity",
                    Verdict::Inconclusive,
                    None,
                    "no equilibrium configured",
                ));
            };
            let r = stationarity_test(eq, *horizon, n_particles.expect("resolved"), seed, domain, wall)?;
            let summary = format!(
                "KS {:.4} (crit {:.4}), spatial chi2 {:.1}/{:.1}, direction chi2 {:.1}/{:.1}",
                r.speed_ks,
                r.speed_ks_critical,
                r.spatial_chi2.statistic,
                r.spatial_chi2.critical,
                r.direction_chi2.statistic,
                r.direction_chi2.critical
            );
            VerdictRecord::new("stationarity", r.verdict, Some(r.speed_ks_critical - r.speed_ks), summary).with_record(&r)
        }
        VerificationConfig::Absorbing { weight, times, rqmc } => {
            return absorbing_record(&format!("absorbing/{}", weight.column_name()), initial, weight, times, domain, rqmc.unwrap_or_default());
        }
        VerificationConfig::HP { pairs, r } => {
            let rep = h_p_check(wall.theta_min, wall.theta_max, *r, *pairs, seed)?;
            let summary = format!(
                "stated set: {} empty, {} chord violations of {} nodes; full circle kappa {:.3e}",
                rep.literal_empty_pairs, rep.chord_violations, rep.literal_nodes, rep.kappa
            );
            VerdictRecord::new("h_p", rep.literal_verdict, Some(rep.literal_min), summary).with_record(&rep)
        }
    })
}

/// Lyapunov audit as a record; PASS needs a positive margin, an aborted
/// audit is INCONCLUSIVE.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_record(
    name: &str,
    data: &InitialData,
    t_end: f64,
    case: LyapunovCase,
    n: usize,
    seed: u64,
    checkpoints: usize,
    domain: &Domain,
    wall: &WallModel,
) -> Result<VerdictRecord> {
    match lyapunov_audit(data, t_end, case, n, seed, checkpoints, domain, wall) {
        Ok(a) => {
            let verdict = if a.verdict == Verdict::Pass && a.margin > 0.0 { Verdict::Pass } else { Verdict::Fail };
            let summary = format!(
                "lhs {:.4e} rhs {:.4e} se {:.2e} (C {:.3e}, b {:.3e})",
                a.lhs, a.rhs, a.std_error, a.constants.c, a.constants.b
            );
            Ok(VerdictRecord::new(name, verdict, Some(a.margin), summary).with_record(&a))
        }
        Err(Error::AuditAborted(msg)) => Ok(VerdictRecord::new(name, Verdict::Inconclusive, None, msg)),
        Err(e) => Err(e.into()),
    }
}

/// Absorbing bound check as a record; the margin is the smallest slack.
pub fn absorbing_record(
    name: &str,
    data: &InitialData,
    weight: &knudsen::WeightSpec,
    times: &[f64],
    domain: &Domain,
    rq: knudsen::transport::Rqmc,
) -> Result<VerdictRecord> {
    let r = absorbing_bound_check(data, weight, times, domain, rq)?;
    let margin = r.margins.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = format!(
        "norm {:.4e} +- {:.1e}; mass/bound at t={}: {:.3e}/{:.3e}",
        r.norm.value,
        r.norm.std_error,
        times[times.len() - 1],
        r.masses[times.len() - 1].value,
        r.bounds[times.len() - 1]
    );
    Ok(VerdictRecord::new(name, r.verdict, Some(margin), summary).with_record(&r))
}
