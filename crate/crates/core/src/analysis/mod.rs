//! Observables and verdicts: L¹ distance to equilibrium, decay fits, and the
//! Lyapunov, minorization, stationarity and absorbing audits.

pub mod absorbing;
pub mod binning;
pub mod doeblin;
pub mod fit;
pub mod lyapunov;
pub mod stationarity;

pub use absorbing::{absorbing_bound_check, absorbing_mass, mass_decay_shape, AbsorbingReport, DecayShape};
pub use binning::{l1_between, l1_between_histograms, l1_from_histograms, BinLayout, Binning, Histogram, L1Estimate};
pub use doeblin::{doeblin_probe, h_p_check, DoeblinConfig, DoeblinReport, HpReport};
pub use fit::{fit_decay, DecayModel, FitResult};
pub use lyapunov::{lyapunov_audit, LyapunovAudit};
pub use stationarity::{stationarity_of_ensemble, stationarity_test, StationarityReport};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::quadrature::{integrate_to_infinity, Integral};
use crate::transport::Ensemble;
use crate::Vector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }

    /// Conjunction: any FAIL fails, otherwise any INCONCLUSIVE is inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The stationary state that distances are measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumModel {
    /// `e^{−|v|²/2Θ} / (|D| (2πΘ)^{n/2})`.
    ConstantTheta { theta: f64 },
    /// A long-run ensemble standing in for the equilibrium.
    VaryingTheta { theta_max: f64, snapshot: Box<Ensemble> },
}

impl EquilibriumModel {
    pub fn theta_max(&self) -> f64 {
        match self {
            EquilibriumModel::ConstantTheta { theta } => *theta,
            EquilibriumModel::VaryingTheta { theta_max, .. } => *theta_max,
        }
    }

    /// Closed-form density, constant temperature only.
    pub fn density(&self, domain: &Domain, x: &Vector, v: &Vector) -> Option<f64> {
        match self {
            EquilibriumModel::ConstantTheta { theta } => {
                if !domain.contains(x) {
                    return Some(0.0);
                }
                let n = domain.dim() as f64;
                Some((-v.norm_squared() / (2.0 * theta)).exp() / (domain.volume() * (2.0 * PI * theta).powf(n / 2.0)))
            }
            EquilibriumModel::VaryingTheta { .. } => None,
        }
    }

    /// Velocity integral of the closed-form density times the volume of `D`,
    /// i.e. the total mass by quadrature.
    pub fn normalization(&self, domain: &Domain) -> Result<Integral> {
        let theta = match self {
            EquilibriumModel::ConstantTheta { theta } => *theta,
            EquilibriumModel::VaryingTheta { snapshot, .. } => {
                return Ok(Integral {
                    value: snapshot.total_mass(),
                    error: 0.0,
                })
            }
        };
        let dim = domain.dim();
        let sphere = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
        let c = (2.0 * PI * theta).powf(dim as f64 / 2.0);
        let radial = integrate_to_infinity(
            |r| r.powi(dim as i32 - 1) * (-r * r / (2.0 * theta)).exp() / c,
            0.0,
            1e-14,
            1e-13,
        );
        let spatial: f64 = binning::cell_volumes(domain, &vec![1; dim], domain.bounding_radius())[0];
        Ok(radial.scale(sphere * spatial / domain.volume()))
    }

    /// Binned L¹ distance from `ensemble` to this equilibrium.
    pub fn l1_distance(&self, ensemble: &Ensemble, binning: &Binning, domain: &Domain) -> Result<L1Estimate> {
        match self {
            EquilibriumModel::ConstantTheta { theta } => binning::l1_to_maxwellian(ensemble, *theta, binning, domain),
            EquilibriumModel::VaryingTheta { theta_max, snapshot } => {
                l1_between(ensemble, snapshot, binning, domain, *theta_max)
            }
        }
    }
}

/// Binned L¹ distance between an ensemble and an equilibrium model.
pub fn l1_distance(ensemble: &Ensemble, equilibrium: &EquilibriumModel, binning: &Binning, domain: &Domain) -> Result<L1Estimate> {
    equilibrium.l1_distance(ensemble, binning, domain)
}

/// Time series of observables with fitted exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub norm_names: Vec<String>,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub l1_distance: Vec<f64>,
    pub l1_err: Vec<f64>,
    /// `norms[k][j]`: norm `j` at time `k`.
    pub norms: Vec<Vec<f64>>,
    pub fits: Vec<FitResult>,
}

impl DecayCurve {
    pub fn new(norm_names: Vec<String>) -> Self {
        DecayCurve {
            norm_names,
            times: Vec::new(),
            mass: Vec::new(),
            l1_distance: Vec::new(),
            l1_err: Vec::new(),
            norms: Vec::new(),
            fits: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, mass: f64, l1: f64, l1_err: f64, norms: Vec<f64>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::param("times", "must be strictly increasing"));
            }
        }
        if !(l1 >= 0.0) {
            return Err(Error::param("l1_distance", "must be nonnegative"));
        }
        if norms.len() != self.norm_names.len() {
            return Err(Error::param("norms", "one value per declared norm"));
        }
        self.times.push(t);
        self.mass.push(mass);
        self.l1_distance.push(l1);
        self.l1_err.push(l1_err);
        self.norms.push(norms);
        Ok(())
    }

    /// CSV header: `t, mass, l1_distance, l1_err`, then one column per norm.
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "mass", "l1_distance", "l1_err"].iter().map(|s| s.to_string()).collect();
        h.extend(self.norm_names.iter().cloned());
        h
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        let mut r = vec![self.times[k], self.mass[k], self.l1_distance[k], self.l1_err[k]];
        r.extend(self.norms[k].iter().copied());
        r
    }
}
