//! Catalog of initial densities, each realized as a map from the unit cube.

use crate::error::{Error, Result};
use crate::geometry::{Domain, PhaseState};
use crate::stats::{mean_estimate, radical_inverse, Estimate, HALTON_BASES};
use crate::Vector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimension of the unit cube every catalog entry is drawn from.
pub const CUBE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Uniform in `D`, Maxwellian velocities at temperature `theta0`.
    #[serde(rename = "uniform_x_maxwellian_v")]
    UniformMaxwellian { theta0: f64 },
    /// Uniform on `D ∩ {x₀ > 0}`, Maxwellian velocities.
    HalfDomainMaxwellian { theta0: f64 },
    /// Uniform in `D`, velocities uniform on the shell `v_min ≤ |v| ≤ v_max`.
    #[serde(rename = "uniform_x_annulus_speed")]
    AnnulusSpeed { v_min: f64, v_max: f64 },
    /// The constant-temperature equilibrium.
    Equilibrium { theta: f64 },
    /// Product of a piecewise constant spatial density on a regular grid over
    /// the bounding box (row-major, `x₀` slowest) and a piecewise constant
    /// speed density; directions are isotropic.
    ProductDensity {
        spatial_shape: Vec<usize>,
        spatial_values: Vec<f64>,
        speed_edges: Vec<f64>,
        speed_values: Vec<f64>,
    },
}

impl InitialData {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            InitialData::UniformMaxwellian { theta0 } | InitialData::HalfDomainMaxwellian { theta0 } => {
                if !(*theta0 > 0.0 && theta0.is_finite()) {
                    return Err(Error::param("initial.theta0", "must be positive"));
                }
            }
            InitialData::Equilibrium { theta } => {
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(Error::param("initial.theta", "must be positive"));
                }
            }
            InitialData::AnnulusSpeed { v_min, v_max } => {
                if !(*v_min >= 0.0 && v_max > v_min && v_max.is_finite()) {
                    return Err(Error::param("initial.v_min", "need 0 <= v_min < v_max"));
                }
            }
            InitialData::ProductDensity {
                spatial_shape,
                spatial_values,
                speed_edges,
                speed_values,
            } => {
                if spatial_shape.len() != domain.dim() || spatial_shape.contains(&0) {
                    return Err(Error::param("initial.spatial_shape", "one positive entry per dimension"));
                }
                if spatial_shape.iter().product::<usize>() != spatial_values.len() {
                    return Err(Error::param("initial.spatial_values", "length must match spatial_shape"));
                }
                if speed_edges.len() != speed_values.len() + 1 || speed_values.is_empty() {
                    return Err(Error::param("initial.speed_edges", "need one more edge than speed values"));
                }
                if speed_edges[0] < 0.0 || speed_edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::param("initial.speed_edges", "must be nonnegative and increasing"));
                }
                for (name, vals) in [("initial.spatial_values", spatial_values), ("initial.speed_values", speed_values)] {
                    if vals.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                        return Err(Error::param(name, "density values must be finite and nonnegative"));
                    }
                    if vals.iter().all(|v| *v == 0.0) {
                        return Err(Error::param(name, "density is identically zero"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Positive lower bound on the speed, if the data has one.
    pub fn min_speed(&self) -> f64 {
        match self {
            InitialData::AnnulusSpeed { v_min, .. } => *v_min,
            InitialData::ProductDensity {
                speed_edges,
                speed_values,
                ..
            } => speed_values
                .iter()
                .position(|w| *w > 0.0)
                .map(|i| speed_edges[i])
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Maps `u ∈ [0,1)^8` to a phase state and a nonnegative weight such that
    /// the state, reweighted by `weight`, has this density up to normalization.
    pub fn draw(&self, domain: &Domain, u: &[f64; CUBE_DIM]) -> (PhaseState, f64) {
        let dim = domain.dim();
        let (x, ratio) = domain.map_unit_cube(&u[0..3]);
        match self {
            InitialData::UniformMaxwellian { theta0 } | InitialData::Equilibrium { theta: theta0 } => {
                (PhaseState { x, v: maxwellian(dim, *theta0, &u[3..7]) }, ratio)
            }
            InitialData::HalfDomainMaxwellian { theta0 } => {
                let w = if x[0] > 0.0 { ratio } else { 0.0 };
                (PhaseState { x, v: maxwellian(dim, *theta0, &u[3..7]) }, w)
            }
            InitialData::AnnulusSpeed { v_min, v_max } => {
                let n = dim as i32;
                let (a, b) = (v_min.powi(n), v_max.powi(n));
                let speed = (a + u[3] * (b - a)).powf(1.0 / dim as f64);
                (PhaseState { x, v: direction(dim, &u[4..6]) * speed }, ratio)
            }
            InitialData::ProductDensity {
                spatial_shape,
                spatial_values,
                speed_edges,
                speed_values,
            } => {
                let r = domain.bounding_radius();
                let mut idx = 0;
                for k in 0..dim {
                    let c = (((x[k] + r) / (2.0 * r)) * spatial_shape[k] as f64).floor() as isize;
                    let c = c.clamp(0, spatial_shape[k] as isize - 1) as usize;
                    idx = idx * spatial_shape[k] + c;
                }
                let masses: Vec<f64> = speed_values
                    .iter()
                    .zip(speed_edges.windows(2))
                    .map(|(w, e)| w * (e[1] - e[0]))
                    .collect();
                let total: f64 = masses.iter().sum();
                let mut target = u[3] * total;
                let mut bin = masses.len() - 1;
                for (i, m) in masses.iter().enumerate() {
                    if target < *m {
                        bin = i;
                        break;
                    }
                    target -= m;
                }
                let speed = speed_edges[bin] + u[4] * (speed_edges[bin + 1] - speed_edges[bin]);
                (PhaseState { x, v: direction(dim, &u[5..7]) * speed }, ratio * spatial_values[idx])
            }
        }
    }

    /// Upper bound on the weight returned by [`InitialData::draw`].
    pub fn weight_bound(&self, domain: &Domain) -> f64 {
        let base = domain.map_ratio_bound();
        match self {
            InitialData::ProductDensity { spatial_values, .. } => base * spatial_values.iter().cloned().fold(0.0, f64::max),
            _ => base,
        }
    }

    /// Exact draw by acceptance on the weight.
    pub fn sample<R: Rng>(&self, domain: &Domain, rng: &mut R) -> Result<PhaseState> {
        let bound = self.weight_bound(domain);
        for _ in 0..1_000_000 {
            let u: [f64; CUBE_DIM] = std::array::from_fn(|_| rng.random());
            let (s, w) = self.draw(domain, &u);
            let accept: f64 = rng.random();
            if accept * bound < w {
                return Ok(s);
            }
        }
        Err(Error::param("initial", "density not samplable: acceptance rate below 1e-6"))
    }
}

/// Gaussian velocity with variance `theta` per component by Box–Muller.
fn maxwellian(dim: usize, theta: f64, u: &[f64]) -> Vector {
    let s = theta.sqrt();
    let r1 = (-2.0 * (-u[0]).ln_1p()).sqrt();
    let a1 = 2.0 * PI * u[1];
    let mut v = Vector::new(r1 * a1.cos() * s, r1 * a1.sin() * s, 0.0);
    if dim == 3 {
        let r2 = (-2.0 * (-u[2]).ln_1p()).sqrt();
        v[2] = r2 * (2.0 * PI * u[3]).cos() * s;
    }
    v
}

/// Uniform unit vector.
fn direction(dim: usize, u: &[f64]) -> Vector {
    let phi = 2.0 * PI * u[0];
    if dim == 2 {
        Vector::new(phi.cos(), phi.sin(), 0.0)
    } else {
        let ct = 1.0 - 2.0 * u[1];
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        Vector::new(st * phi.cos(), st * phi.sin(), ct)
    }
}

/// Randomized quasi-Monte Carlo settings: `shifts` Cranley–Patterson shifts
/// of a Halton point set with `nodes` points each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rqmc {
    pub nodes: usize,
    pub shifts: usize,
    pub seed: u64,
}

impl Default for Rqmc {
    fn default() -> Self {
        Rqmc {
            nodes: 125_000,
            shifts: 8,
            seed: 0x5eed,
        }
    }
}

/// Self-normalized RQMC estimates of `∫ f₀ g_k / ∫ f₀` for several integrands
/// `g_k(state, σ(state))`, with standard errors across shifts.
pub fn rqmc_moments<G>(data: &InitialData, domain: &Domain, rq: Rqmc, integrands: &[G]) -> Result<Vec<Estimate>>
where
    G: Fn(&PhaseState, f64) -> f64 + Sync,
{
    use rayon::prelude::*;
    data.validate(domain)?;
    let per_shift: Vec<Vec<f64>> = (0..rq.shifts)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let mut rng = crate::rng::auxiliary(rq.seed, s as u64);
            let shift: [f64; CUBE_DIM] = std::array::from_fn(|_| rng.random());
            let mut num = vec![0.0; integrands.len()];
            let mut den = 0.0;
            for j in 0..rq.nodes {
                let u: [f64; CUBE_DIM] =
                    std::array::from_fn(|k| (radical_inverse(j as u64 + 1, HALTON_BASES[k]) + shift[k]).fract());
                let (state, w) = data.draw(domain, &u);
                if w == 0.0 {
                    continue;
                }
                let sigma = domain.exit_time(&state.x, &state.v)?;
                den += w;
                for (acc, g) in num.iter_mut().zip(integrands) {
                    *acc += w * g(&state, sigma);
                }
            }
            Ok(num.into_iter().map(|n| n / den).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..integrands.len())
        .map(|k| {
            let vals: Vec<f64> = per_shift.iter().map(|v| v[k]).collect();
            mean_estimate(&vals)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_at;

    #[test]
    fn annulus_speeds_in_range() {
        let d = Domain::unit_disk();
        let data = InitialData::AnnulusSpeed { v_min: 1.0, v_max: 2.0 };
        let mut rng = stream_at(1, 0, 0);
        for _ in 0..10_000 {
            let s = data.sample(&d, &mut rng).unwrap();
            let sp = s.v.norm();
            assert!((1.0..=2.0).contains(&sp));
            assert!(d.contains(&s.x));
        }
    }

    #[test]
    fn half_domain_positions() {
        let d = Domain::unit_disk();
        let data = InitialData::HalfDomainMaxwellian { theta0: 2.0 };
        let mut rng = stream_at(2, 0, 0);
        for _ in 0..10_000 {
            assert!(data.sample(&d, &mut rng).unwrap().x[0] > 0.0);
        }
    }

    #[test]
    fn product_density_rejects_negative_entries() {
        let d = Domain::unit_disk();
        let bad = InitialData::ProductDensity {
            spatial_shape: vec![2, 2],
            spatial_values: vec![1.0, -1.0, 1.0, 1.0],
            speed_edges: vec![0.0, 1.0],
            speed_values: vec![1.0],
        };
        assert!(bad.validate(&d).is_err());
        let good = InitialData::ProductDensity {
            spatial_shape: vec![2, 2],
            spatial_values: vec![0.0, 0.0, 1.0, 1.0],
            speed_edges: vec![0.5, 1.0, 2.0],
            speed_values: vec![0.0, 1.0],
        };
        good.validate(&d).unwrap();
        assert_eq!(good.min_speed(), 1.0);
        let mut rng = stream_at(3, 0, 0);
        for _ in 0..2000 {
            let s = good.sample(&d, &mut rng).unwrap();
            assert!(s.x[0] > 0.0);
            assert!((1.0..=2.0).contains(&s.v.norm()));
        }
    }

    #[test]
    fn rqmc_mean_square_speed() {
        let d = Domain::unit_disk();
        let data = InitialData::UniformMaxwellian { theta0: 1.5 };
        let rq = Rqmc { nodes: 20_000, shifts: 8, seed: 1 };
        let est = rqmc_moments(&data, &d, rq, &[|s: &PhaseState, _: f64| s.v.norm_squared()]).unwrap();
        assert!((est[0].value - 3.0).abs() < 4.0 * est[0].std_error + 1e-3, "{:?}", est[0]);
    }
}
