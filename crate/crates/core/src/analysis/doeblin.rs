//! Empirical minorization of the time-`κR` transition kernel, and the
//! unit-disk two-bounce kernel `h_P`.

use super::binning::{cell_volumes, direction_sector};
use super::Verdict;
use crate::error::{Error, Result};
use crate::geometry::{Domain, PhaseState};
use crate::rng::auxiliary;
use crate::transport::Ensemble;
use crate::wall::{WallMaxwellian, WallModel};
use crate::Vector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoeblinConfig {
    /// Radius of the initial set `B_R = {σ(y, w) ≤ R}`.
    pub r: f64,
    /// `T(R) = κR`.
    pub kappa: f64,
    /// Spatial cells per axis of the bounding box.
    pub spatial: usize,
    /// Direction sectors: 2D any positive count, 3D 1, 8 or 24.
    pub sectors: usize,
    /// Shells of the backward exit time `σ(x, −v)` across `[R, 2R]`.
    pub shells: usize,
    pub n_initial_cells: usize,
    pub n_particles: usize,
    pub seed: u64,
    /// PASS needs every estimated density strictly above this.
    pub tau_min: f64,
    /// Side of the position and velocity cubes of each initial cell.
    pub cell_size: f64,
    /// Spatial cells with a smaller fraction inside `D` are dropped.
    pub min_inside_fraction: f64,
}

impl Default for DoeblinConfig {
    fn default() -> Self {
        DoeblinConfig {
            r: 3.0,
            kappa: 6.0,
            spatial: 4,
            sectors: 8,
            shells: 2,
            n_initial_cells: 10,
            n_particles: 1_000_000,
            seed: 1,
            tau_min: 0.0,
            cell_size: 1e-3,
            min_inside_fraction: 0.5,
        }
    }
}

impl DoeblinConfig {
    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::param("doeblin.r", "must be positive"));
        }
        if !(self.kappa >= 4.0 && self.kappa.is_finite()) {
            return Err(Error::param("doeblin.kappa", "need kappa >= 4 so that T(R) covers two windows"));
        }
        if self.spatial == 0 || self.shells == 0 || self.n_initial_cells == 0 || self.n_particles == 0 {
            return Err(Error::param("doeblin", "grid sizes and counts must be positive"));
        }
        let sectors_ok = if dim == 2 { self.sectors >= 1 } else { matches!(self.sectors, 1 | 8 | 24) };
        if !sectors_ok {
            return Err(Error::param("doeblin.sectors", "2D: positive; 3D: 1, 8 or 24"));
        }
        if !(self.cell_size > 0.0 && self.cell_size < 0.1) {
            return Err(Error::param("doeblin.cell_size", "must lie in (0, 0.1)"));
        }
        if !(self.tau_min >= 0.0) {
            return Err(Error::param("doeblin.tau_min", "must be nonnegative"));
        }
        if !(self.min_inside_fraction > 0.0 && self.min_inside_fraction <= 1.0) {
            return Err(Error::param("doeblin.min_inside_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinReport {
    pub verdict: Verdict,
    pub config: DoeblinConfig,
    pub t_end: f64,
    pub initial_points: Vec<PhaseState>,
    /// Cells of the support grid kept after dropping boundary cells.
    pub kept_cells: usize,
    /// Phase-space volume of the kept cells.
    pub support_volume: f64,
    /// Minimum estimated density over initial cells and kept grid cells.
    pub min_density: f64,
    /// `min_density · support_volume`.
    pub minorization_constant: f64,
    /// Minimum density per initial cell.
    pub per_initial_min: Vec<f64>,
    /// `(initial cell, grid cell)` pairs without particles.
    pub empty_pairs: usize,
    /// Particle count expected to populate every cell, when inconclusive.
    pub recommended_particles: Option<usize>,
}

struct SupportGrid {
    dim: usize,
    half_width: f64,
    r: f64,
    spatial: usize,
    sectors: usize,
    shells: usize,
    /// Phase volume per `(spatial, sector, shell)`; `None` for dropped spatial cells.
    volume: Vec<Option<f64>>,
}

impl SupportGrid {
    fn new(domain: &Domain, cfg: &DoeblinConfig) -> Result<Self> {
        let dim = domain.dim();
        let h = domain.bounding_radius();
        let counts = vec![cfg.spatial; dim];
        let n_spatial: usize = counts.iter().product();
        let box_volume = (2.0 * h / cfg.spatial as f64).powi(dim as i32);
        let inside = cell_volumes(domain, &counts, h);
        let sub: usize = if dim == 2 { 8 } else { 4 };
        let directions: Vec<(Vector, f64)> = if dim == 2 {
            let m = 256;
            (0..m)
                .map(|k| {
                    let a = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                    (Vector::new(a.cos(), a.sin(), 0.0), 2.0 * PI / m as f64)
                })
                .collect()
        } else {
            let m = 1024;
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            (0..m)
                .map(|k| {
                    let ct = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let st = (1.0 - ct * ct).sqrt();
                    let phi = 2.0 * PI * (k as f64 * golden).fract();
                    (Vector::new(st * phi.cos(), st * phi.sin(), ct), 4.0 * PI / m as f64)
                })
                .collect()
        };
        let n = dim as i32;
        let width = cfg.r / cfg.shells as f64;
        let shell_factor: Vec<f64> = (0..cfg.shells)
            .map(|k| {
                let a = cfg.r + k as f64 * width;
                let b = a + width;
                (a.powi(-n) - b.powi(-n)) / n as f64
            })
            .collect();
        let per_cell = cfg.sectors * cfg.shells;
        let volumes: Vec<Option<Vec<f64>>> = (0..n_spatial)
            .into_par_iter()
            .map(|c| -> Result<Option<Vec<f64>>> {
                if inside[c] < cfg.min_inside_fraction * box_volume {
                    return Ok(None);
                }
                let mut idx = vec![0usize; dim];
                let mut rem = c;
                for k in (0..dim).rev() {
                    idx[k] = rem % cfg.spatial;
                    rem /= cfg.spatial;
                }
                let cw = 2.0 * h / cfg.spatial as f64;
                let node_weight = box_volume / (sub as f64).powi(n);
                let mut vol = vec![0.0; per_cell];
                let nodes = sub.pow(dim as u32);
                for j in 0..nodes {
                    let mut x = Vector::zeros();
                    let mut r = j;
                    for k in 0..dim {
                        let s = r % sub;
                        r /= sub;
                        x[k] = -h + (idx[k] as f64 + (s as f64 + 0.5) / sub as f64) * cw;
                    }
                    if !domain.contains(&x) {
                        continue;
                    }
                    for (u, wu) in &directions {
                        let ell = domain.exit_time(&x, &(-u))?;
                        let sector = direction_sector(u, dim, cfg.sectors);
                        let base = ell.powi(n) * node_weight * wu;
                        for (k, f) in shell_factor.iter().enumerate() {
                            vol[sector * cfg.shells + k] += base * f;
                        }
                    }
                }
                Ok(Some(vol))
            })
            .collect::<Result<_>>()?;
        let mut volume = Vec::with_capacity(n_spatial * per_cell);
        for v in volumes {
            match v {
                Some(v) => volume.extend(v.into_iter().map(Some)),
                None => volume.extend(std::iter::repeat_n(None, per_cell)),
            }
        }
        Ok(SupportGrid {
            dim,
            half_width: h,
            r: cfg.r,
            spatial: cfg.spatial,
            sectors: cfg.sectors,
            shells: cfg.shells,
            volume,
        })
    }

    fn cell_of(&self, domain: &Domain, s: &PhaseState) -> Result<Option<usize>> {
        let speed = s.v.norm();
        if speed == 0.0 {
            return Ok(None);
        }
        let back = domain.exit_time(&s.x, &(-s.v))?;
        if !(back >= self.r && back < 2.0 * self.r) {
            return Ok(None);
        }
        let mut spatial = 0;
        for k in 0..self.dim {
            let u = (s.x[k] + self.half_width) / (2.0 * self.half_width);
            let j = ((u * self.spatial as f64).floor().max(0.0) as usize).min(self.spatial - 1);
            spatial = spatial * self.spatial + j;
        }
        let shell = (((back - self.r) / self.r * self.shells as f64) as usize).min(self.shells - 1);
        let sector = direction_sector(&s.v, self.dim, self.sectors);
        let cell = (spatial * self.sectors + sector) * self.shells + shell;
        Ok(self.volume[cell].map(|_| cell))
    }
}

/// Draws the centers of the initial cells: positions whose cube of side
/// `cell_size` lies inside `D` and Maxwellian velocities with `σ(y, w) ≤ 0.9R`.
fn initial_points(domain: &Domain, cfg: &DoeblinConfig) -> Result<Vec<PhaseState>> {
    let dim = domain.dim();
    let h = domain.bounding_radius();
    let mut rng = auxiliary(cfg.seed, 0xd0eb);
    let mut out = Vec::new();
    let mut tries = 0usize;
    while out.len() < cfg.n_initial_cells {
        tries += 1;
        if tries > 10_000_000 {
            return Err(Error::param("doeblin.r", "B_R has no sampled volume"));
        }
        let mut y = Vector::zeros();
        let mut w = Vector::zeros();
        for k in 0..dim {
            y[k] = rng.random_range(-h..h);
            w[k] = rng.sample(StandardNormal);
        }
        let corners_inside = (0..1usize << dim).all(|m| {
            let mut c = y;
            for k in 0..dim {
                c[k] += if m >> k & 1 == 1 { cfg.cell_size } else { -cfg.cell_size };
            }
            domain.contains(&c)
        });
        if !corners_inside || w.norm() < 10.0 * cfg.cell_size {
            continue;
        }
        if domain.exit_time(&y, &w)? <= 0.9 * cfg.r {
            out.push(PhaseState { x: y, v: w });
        }
    }
    Ok(out)
}

/// Simulates each initial cell to `T(R) = κR` and estimates the density on
/// the support grid `{σ(x, −v) ∈ [R, 2R]}`.
pub fn doeblin_probe(cfg: &DoeblinConfig, domain: &Domain, wall: &WallModel) -> Result<DoeblinReport> {
    let dim = domain.dim();
    cfg.validate(dim)?;
    let grid = SupportGrid::new(domain, cfg)?;
    let kept: Vec<usize> = (0..grid.volume.len()).filter(|&c| grid.volume[c].is_some()).collect();
    let support_volume: f64 = kept.iter().map(|&c| grid.volume[c].unwrap_or(0.0)).sum();
    let points = initial_points(domain, cfg)?;
    let t_end = cfg.kappa * cfg.r;
    let n = cfg.n_particles;
    let mut per_initial_min = Vec::new();
    let mut min_positive = f64::INFINITY;
    let mut empty_pairs = 0usize;
    for (c, p) in points.iter().enumerate() {
        let mut rng = auxiliary(cfg.seed, 0xce11 + c as u64);
        let states: Vec<PhaseState> = (0..n)
            .map(|_| {
                let mut s = *p;
                for k in 0..dim {
                    s.x[k] += cfg.cell_size * (rng.random::<f64>() - 0.5);
                    s.v[k] += cfg.cell_size * (rng.random::<f64>() - 0.5);
                }
                s
            })
            .collect();
        let cell_seed: u64 = rng.random();
        let mut ens = Ensemble::from_states(dim, &states, 1.0, cell_seed)?;
        drop(states);
        ens.advance(t_end, domain, wall)?;
        let t = ens.clock;
        let cells: Vec<Option<usize>> = ens
            .particles
            .par_iter()
            .map(|q| grid.cell_of(domain, &q.state(t)))
            .collect::<Result<_>>()?;
        let mut counts = vec![0u64; grid.volume.len()];
        for k in cells.into_iter().flatten() {
            counts[k] += 1;
        }
        let mut cell_min = f64::INFINITY;
        for &k in &kept {
            let vol = grid.volume[k].unwrap_or(0.0);
            let rho = counts[k] as f64 / (n as f64 * vol);
            if counts[k] == 0 {
                empty_pairs += 1;
            } else {
                min_positive = min_positive.min(rho);
            }
            cell_min = cell_min.min(rho);
        }
        per_initial_min.push(cell_min);
    }
    let min_density = per_initial_min.iter().copied().fold(f64::INFINITY, f64::min);
    let (verdict, recommended) = if empty_pairs > 0 {
        let smallest = kept.iter().map(|&c| grid.volume[c].unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
        let rec = if min_positive.is_finite() {
            ((30.0 / (min_positive * smallest)).ceil() as usize).max(2 * n)
        } else {
            10 * n
        };
        (Verdict::Inconclusive, Some(rec))
    } else {
        (Verdict::from_pass(min_density > cfg.tau_min), None)
    };
    Ok(DoeblinReport {
        verdict,
        config: cfg.clone(),
        t_end,
        initial_points: points,
        kept_cells: kept.len(),
        support_volume,
        min_density,
        minorization_constant: min_density * support_volume,
        per_initial_min,
        empty_pairs,
        recommended_particles: recommended,
    })
}

/// Two-bounce kernel quadrature on the unit disk for random boundary pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpReport {
    pub pairs: usize,
    pub r: f64,
    pub seed: u64,
    /// Over the set `{y·a ∧ y·b ≥ √2/2}` as stated.
    pub literal_verdict: Verdict,
    /// Pairs whose stated set is empty.
    pub literal_empty_pairs: usize,
    pub literal_min: f64,
    /// Nodes of the stated set checked against `‖y−a‖, ‖y−b‖ ≥ √(2+√2)`.
    pub literal_nodes: usize,
    pub chord_violations: usize,
    /// Largest chord `max(‖y−a‖, ‖y−b‖)` seen on the stated set.
    pub literal_max_chord: f64,
    /// Over the whole circle.
    pub full_verdict: Verdict,
    /// `κ = min_{pairs} h_P(a, b)` over the whole circle.
    pub kappa: f64,
}

/// `M̲(s) = min_{θ, τ ∈ [R, τ_max]} M(θ, s/τ)`; the minimum over `τ` sits at
/// `τ = R` because `M` decreases in speed.
fn lower_maxwellian(thetas: &[WallMaxwellian], r: f64, s: f64) -> f64 {
    thetas.iter().map(|m| m.radial(s / r)).fold(f64::INFINITY, f64::min)
}

fn integrand(thetas: &[WallMaxwellian], r: f64, a: &Vector, b: &Vector, y: &Vector) -> f64 {
    // On the unit circle the outward normal at z is z.
    let ya = y - a;
    let yb = y - b;
    lower_maxwellian(thetas, r, ya.norm())
        * ya.dot(a).abs()
        * ya.dot(y).abs()
        * lower_maxwellian(thetas, r, yb.norm())
        * yb.dot(b).abs()
        * yb.dot(y).abs()
}

fn on_circle(phi: f64) -> Vector {
    Vector::new(phi.cos(), phi.sin(), 0.0)
}

/// Quadrature of `h_P(a, b)` with `P = 2` on the unit disk for `pairs`
/// random `(a, b)`: once over the stated set `H_{a,b}` with its chord bound
/// checked at every node, once over the whole circle.
pub fn h_p_check(theta_min: f64, theta_max: f64, r: f64, pairs: usize, seed: u64) -> Result<HpReport> {
    if !(theta_min > 0.0 && theta_max >= theta_min) {
        return Err(Error::param("wall.theta", "need 0 < theta_min <= theta_max"));
    }
    if !(r > 0.0) {
        return Err(Error::param("doeblin.r", "must be positive"));
    }
    let thetas: Vec<WallMaxwellian> = (0..=64)
        .map(|k| WallMaxwellian::new(2, theta_min + (theta_max - theta_min) * k as f64 / 64.0))
        .collect();
    let chord_bound = (2.0 + 2f64.sqrt()).sqrt();
    let mut rng = auxiliary(seed, 0x4b9);
    let mut literal_empty = 0;
    let mut literal_min = f64::INFINITY;
    let mut literal_nodes = 0;
    let mut violations = 0;
    let mut max_chord: f64 = 0.0;
    let mut kappa = f64::INFINITY;
    const FULL_NODES: usize = 4096;
    const ARC_INTERVALS: usize = 2000;
    for _ in 0..pairs {
        let alpha = rng.random_range(0.0..2.0 * PI);
        let beta = rng.random_range(0.0..2.0 * PI);
        let (a, b) = (on_circle(alpha), on_circle(beta));
        // Periodic trapezoid rule over the whole circle.
        let full: f64 = (0..FULL_NODES)
            .map(|k| integrand(&thetas, r, &a, &b, &on_circle(2.0 * PI * k as f64 / FULL_NODES as f64)))
            .sum::<f64>()
            * 2.0
            * PI
            / FULL_NODES as f64;
        kappa = kappa.min(full);
        // y·a ≥ √2/2 is the arc of half-width π/4 around a.
        let gap = (beta - alpha + PI).rem_euclid(2.0 * PI) - PI;
        let lo = (-PI / 4.0).max(gap - PI / 4.0);
        let hi = (PI / 4.0).min(gap + PI / 4.0);
        if hi <= lo {
            literal_empty += 1;
            literal_min = 0.0;
            continue;
        }
        let step = (hi - lo) / ARC_INTERVALS as f64;
        let mut sum = 0.0;
        for k in 0..=ARC_INTERVALS {
            let y = on_circle(alpha + lo + k as f64 * step);
            let chord = (y - a).norm().max((y - b).norm());
            max_chord = max_chord.max(chord);
            literal_nodes += 1;
            if (y - a).norm() < chord_bound || (y - b).norm() < chord_bound {
                violations += 1;
            }
            let wk = if k == 0 || k == ARC_INTERVALS {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            debug_assert!(y.dot(&a) >= FRAC_1_SQRT_2 - 1e-12);
            sum += wk * integrand(&thetas, r, &a, &b, &y);
        }
        literal_min = literal_min.min(sum * step / 3.0);
    }
    Ok(HpReport {
        pairs,
        r,
        seed,
        literal_verdict: Verdict::from_pass(literal_empty == 0 && literal_min > 0.0 && violations == 0),
        literal_empty_pairs: literal_empty,
        literal_min,
        literal_nodes,
        chord_violations: violations,
        literal_max_chord: max_chord,
        full_verdict: Verdict::from_pass(kappa > 0.0),
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wall::Field;

    #[test]
    fn support_volume_matches_closed_form() {
        // Support volume: ∫_D ∫_S ℓ(x,−u)² du dx (R⁻² − (2R)⁻²)/2.
        let d = Domain::unit_disk();
        let cfg = DoeblinConfig {
            spatial: 8,
            sectors: 1,
            shells: 1,
            min_inside_fraction: 1e-12,
            ..Default::default()
        };
        let g = SupportGrid::new(&d, &cfg).unwrap();
        // Per direction, chords of length L contribute L³/3: ∫ (8/3)(1−s²)^{3/2} ds = π.
        let exact = 2.0 * PI * PI * (1.0 / 9.0 - 1.0 / 36.0) / 2.0;
        let v: f64 = g.volume.iter().flatten().sum();
        assert!((v / exact - 1.0).abs() < 1e-2, "{v} vs {exact}");
    }

    #[test]
    fn diffuse_probe_small_grid_passes() {
        let d = Domain::unit_disk();
        let w = WallModel::diffuse(&d, 1.0, 0.5).unwrap();
        let cfg = DoeblinConfig {
            spatial: 2,
            sectors: 2,
            shells: 2,
            n_initial_cells: 2,
            n_particles: 20_000,
            ..Default::default()
        };
        let r = doeblin_probe(&cfg, &d, &w).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        assert!(r.minorization_constant > 0.0);
        for p in &r.initial_points {
            assert!(d.exit_time(&p.x, &p.v).unwrap() <= 0.9 * cfg.r);
        }
    }

    #[test]
    fn specular_probe_is_not_a_pass() {
        let d = Domain::unit_disk();
        let w = WallModel::new_relaxed(&d, Field::constant(1.0), Field::constant(0.0), 0.5).unwrap();
        let cfg = DoeblinConfig {
            spatial: 4,
            n_initial_cells: 2,
            n_particles: 20_000,
            ..Default::default()
        };
        let r = doeblin_probe(&cfg, &d, &w).unwrap();
        assert_ne!(r.verdict, Verdict::Pass, "{r:?}");
    }

    #[test]
    fn full_circle_kernel_is_positive_and_stated_bound_is_not() {
        let r = h_p_check(1.0, 1.0, 3.0, 100, 5).unwrap();
        assert_eq!(r.full_verdict, Verdict::Pass);
        assert!(r.kappa > 0.0);
        // On the stated set every chord is at most 2 sin(π/8) < √(2+√2).
        assert!(r.literal_max_chord <= 2.0 * (PI / 8.0).sin() + 1e-12);
        assert_eq!(r.literal_verdict, Verdict::Fail);
    }
}
