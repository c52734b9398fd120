//! Invariance of a candidate equilibrium under the particle dynamics.

use super::binning::{direction_sector, BinLayout, Binning};
use super::{EquilibriumModel, Verdict};
use crate::error::Result;
use crate::geometry::{Domain, PhaseState};
use crate::stats::{chi2_two_sample, ks_critical, ks_two_sample, ChiSquareTest};
use crate::transport::{Ensemble, InitialData};
use crate::wall::WallModel;
use serde::{Deserialize, Serialize};

/// Level of every test.
pub const TEST_LEVEL: f64 = 0.01;
/// Spatial cells per axis for the spatial χ² test.
const SPATIAL_CELLS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub verdict: Verdict,
    pub horizon: f64,
    pub n_particles: usize,
    pub seed: u64,
    pub level: f64,
    pub speed_ks: f64,
    pub speed_ks_critical: f64,
    pub speed_verdict: Verdict,
    pub spatial_chi2: ChiSquareTest,
    pub spatial_verdict: Verdict,
    pub direction_chi2: ChiSquareTest,
    pub direction_verdict: Verdict,
}

struct Snapshot {
    speeds: Vec<f64>,
    spatial: Vec<u64>,
    directions: Vec<u64>,
}

fn snapshot(states: &[PhaseState], layout: &BinLayout, dim: usize, sectors: usize) -> Snapshot {
    let mut spatial = vec![0u64; layout.spatial_cells()];
    let mut directions = vec![0u64; sectors];
    let mut speeds = Vec::with_capacity(states.len());
    for s in states {
        spatial[layout.spatial_cell(&s.x)] += 1;
        directions[direction_sector(&s.v, dim, sectors)] += 1;
        speeds.push(s.v.norm());
    }
    Snapshot {
        speeds,
        spatial,
        directions,
    }
}

/// Compares the law of `ensemble` now and after `horizon`: speed KS test,
/// spatial-cell χ² and direction-sector χ², all at the 1% level.
pub fn stationarity_of_ensemble(mut ensemble: Ensemble, horizon: f64, domain: &Domain, wall: &WallModel) -> Result<StationarityReport> {
    let dim = domain.dim();
    let sectors = if dim == 2 { 8 } else { 24 };
    let layout = BinLayout::new(
        domain,
        &Binning {
            spatial: vec![SPATIAL_CELLS],
            ..Default::default()
        },
        wall.theta_max,
    )?;
    let before = snapshot(&ensemble.states(), &layout, dim, sectors);
    ensemble.advance(horizon, domain, wall)?;
    let after = snapshot(&ensemble.states(), &layout, dim, sectors);
    let ks = ks_two_sample(&before.speeds, &after.speeds);
    let ks_crit = ks_critical(TEST_LEVEL, before.speeds.len(), after.speeds.len());
    let spatial = chi2_two_sample(&before.spatial, &after.spatial, TEST_LEVEL);
    let direction = chi2_two_sample(&before.directions, &after.directions, TEST_LEVEL);
    let speed_verdict = Verdict::from_pass(ks <= ks_crit);
    let spatial_verdict = Verdict::from_pass(spatial.passes());
    let direction_verdict = Verdict::from_pass(direction.passes());
    Ok(StationarityReport {
        verdict: speed_verdict.and(spatial_verdict).and(direction_verdict),
        horizon,
        n_particles: ensemble.len(),
        seed: ensemble.seed,
        level: TEST_LEVEL,
        speed_ks: ks,
        speed_ks_critical: ks_crit,
        speed_verdict,
        spatial_chi2: spatial,
        spatial_verdict,
        direction_chi2: direction,
        direction_verdict,
    })
}

/// Stationarity of an equilibrium model: the closed form is sampled afresh;
/// a snapshot is evolved from its own clock.
pub fn stationarity_test(
    equilibrium: &EquilibriumModel,
    horizon: f64,
    n_particles: usize,
    seed: u64,
    domain: &Domain,
    wall: &WallModel,
) -> Result<StationarityReport> {
    let ensemble = match equilibrium {
        EquilibriumModel::ConstantTheta { theta } => {
            Ensemble::sample(&InitialData::Equilibrium { theta: *theta }, domain, n_particles, seed)?
        }
        EquilibriumModel::VaryingTheta { snapshot, .. } => (**snapshot).clone(),
    };
    stationarity_of_ensemble(ensemble, horizon, domain, wall)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_stationary() {
        let d = Domain::unit_disk();
        let w = WallModel::diffuse(&d, 1.0, 0.5).unwrap();
        let r = stationarity_test(&EquilibriumModel::ConstantTheta { theta: 1.0 }, 5.0, 20_000, 11, &d, &w).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }

    #[test]
    fn uniform_ball_is_not_stationary() {
        let d = Domain::unit_disk();
        let w = WallModel::diffuse(&d, 1.0, 0.5).unwrap();
        let e = Ensemble::sample(&InitialData::AnnulusSpeed { v_min: 0.0, v_max: 3.0 }, &d, 20_000, 12).unwrap();
        let r = stationarity_of_ensemble(e, 5.0, &d, &w).unwrap();
        assert_eq!(r.speed_verdict, Verdict::Fail, "{r:?}");
        assert_eq!(r.verdict, Verdict::Fail);
    }
}
