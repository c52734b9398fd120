//! Monte Carlo audit of the integrated Lyapunov inequality
//! `‖S_T f‖_{m₁} + C ∫₀^T ‖S_s f‖_{m₀} ds ≤ ‖f‖_{m₁} + b(1+T)‖f‖_{L¹}`.

use super::Verdict;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::stats::{hill_tail_index, pairwise_sum};
use crate::transport::{Ensemble, InitialData};
use crate::wall::WallModel;
use crate::weights::{lyapunov_constants, tail_sample_size, weight_values, LyapunovCase, LyapunovConstants, WeightContext};
use serde::{Deserialize, Serialize};

/// Minimum trapezoid intervals for the time integral.
pub const MIN_CHECKPOINTS: usize = 32;
/// Largest tolerated fraction of particles with an infinite weight.
pub const MAX_INFINITE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAudit {
    pub verdict: Verdict,
    pub constants: LyapunovConstants,
    pub t_end: f64,
    pub checkpoints: usize,
    pub n_particles: usize,
    pub seed: u64,
    pub mass: f64,
    pub m1_initial: f64,
    pub m1_final: f64,
    pub m0_time_integral: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `lhs − rhs` from paired per-particle differences.
    pub std_error: f64,
    /// `rhs − lhs`; positive when the inequality holds pointwise in expectation.
    pub margin: f64,
    pub relative_margin: f64,
    pub infinite_fraction: f64,
    /// Hill tail index of the initial `m₁` values.
    pub m1_tail_index: f64,
}

/// Evolves `n_particles` drawn from `initial` to `t_end`, integrating `m₀`
/// over `checkpoints` equal trapezoid intervals, and compares both sides.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_audit(
    initial: &InitialData,
    t_end: f64,
    case: LyapunovCase,
    n_particles: usize,
    seed: u64,
    checkpoints: usize,
    domain: &Domain,
    wall: &WallModel,
) -> Result<LyapunovAudit> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("lyapunov.t_end", "must be finite and nonnegative"));
    }
    if checkpoints < MIN_CHECKPOINTS {
        return Err(Error::param(
            "lyapunov.checkpoints",
            format!("need at least {MIN_CHECKPOINTS} trapezoid intervals"),
        ));
    }
    let constants = lyapunov_constants(case, domain, wall)?;
    let ctx = WeightContext::new(domain, wall.c4);
    let (m1, m0) = (case.m1(), case.m0());
    let mut ens = Ensemble::sample(initial, domain, n_particles, seed)?;
    let weights: Vec<f64> = ens.particles.iter().map(|p| p.weight).collect();
    let m1_start = weight_values(&ens, &ctx, &m1)?;
    let mut m0_prev = weight_values(&ens, &ctx, &m0)?;
    let infinite: Vec<bool> = m1_start.iter().zip(&m0_prev).map(|(a, b)| !a.is_finite() || !b.is_finite()).collect();
    let n_inf = infinite.iter().filter(|&&b| b).count();
    let infinite_fraction = n_inf as f64 / n_particles as f64;
    if infinite_fraction > MAX_INFINITE_FRACTION {
        return Err(Error::AuditAborted(format!(
            "{n_inf} of {n_particles} particles carry an infinite weight"
        )));
    }
    let mut integral = vec![0.0; n_particles];
    let dt = t_end / checkpoints as f64;
    let m1_end = if t_end > 0.0 {
        for _ in 0..checkpoints {
            ens.advance(dt, domain, wall)?;
            let m0_next = weight_values(&ens, &ctx, &m0)?;
            for p in 0..n_particles {
                integral[p] += 0.5 * dt * (m0_prev[p] + m0_next[p]);
            }
            m0_prev = m0_next;
        }
        weight_values(&ens, &ctx, &m1)?
    } else {
        m1_start.clone()
    };
    let c = constants.c;
    let b = constants.b;
    let keep = |p: usize| !infinite[p];
    let sum = |f: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..n_particles).map(|p| if keep(p) { f(p) } else { 0.0 }).collect();
        pairwise_sum(&v)
    };
    let mass = sum(&|p| weights[p]);
    let m1_initial = sum(&|p| weights[p] * m1_start[p]);
    let m1_final = sum(&|p| weights[p] * m1_end[p]);
    let m0_time_integral = sum(&|p| weights[p] * integral[p]);
    let lhs = m1_final + c * m0_time_integral;
    let rhs = m1_initial + b * (1.0 + t_end) * mass;
    let diffs: Vec<f64> = (0..n_particles)
        .filter(|&p| keep(p))
        .map(|p| weights[p] * (m1_end[p] + c * integral[p] - m1_start[p] - b * (1.0 + t_end)))
        .collect();
    let n = diffs.len() as f64;
    let mean = pairwise_sum(&diffs) / n;
    let sq: Vec<f64> = diffs.iter().map(|d| (d - mean) * (d - mean)).collect();
    let var = if n > 1.0 { pairwise_sum(&sq) / (n - 1.0) } else { 0.0 };
    let std_error = (var * n).sqrt();
    let margin = rhs - lhs;
    let finite_m1: Vec<f64> = m1_start.iter().copied().filter(|v| v.is_finite()).collect();
    Ok(LyapunovAudit {
        verdict: Verdict::from_pass(lhs <= rhs + 3.0 * std_error),
        constants,
        t_end,
        checkpoints,
        n_particles,
        seed,
        mass,
        m1_initial,
        m1_final,
        m0_time_integral,
        lhs,
        rhs,
        std_error,
        margin,
        relative_margin: margin / rhs,
        infinite_fraction,
        m1_tail_index: hill_tail_index(&finite_m1, tail_sample_size(finite_m1.len())),
    })
}
