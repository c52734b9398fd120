//! Histogram estimator of the L¹ distance on phase space.

use crate::error::{Error, Result};
use crate::geometry::{Domain, PhaseState};
use crate::quadrature::integrate;
use crate::transport::Ensemble;
use crate::Vector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;
use std::f64::consts::{FRAC_2_PI, PI};

/// Cell layout overrides. Empty or `None` fields take the defaults: 4 spatial
/// cells per axis, 8 geometric speed shells of ratio 2 ending at
/// `V_cut = 6√Θ_max`, 8 direction sectors in 2D and 24 in 3D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Binning {
    /// Cells per axis of the bounding box; one entry applies to every axis.
    pub spatial: Vec<usize>,
    pub speed_shells: usize,
    pub shell_ratio: f64,
    /// Explicit shell edges `0 = e₀ < … < e_K = V_cut`; overrides the
    /// geometric shells and `v_cut`.
    pub speed_edges: Option<Vec<f64>>,
    /// 2D: any positive count. 3D: 1, 8 (octants) or 24 (octant × dominant axis).
    pub sectors: Option<usize>,
    pub v_cut: Option<f64>,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            spatial: Vec::new(),
            speed_shells: 8,
            shell_ratio: 2.0,
            speed_edges: None,
            sectors: None,
            v_cut: None,
        }
    }
}

/// Precomputed cells for one domain and binning.
#[derive(Debug, Clone)]
pub struct BinLayout {
    dim: usize,
    half_width: f64,
    spatial: Vec<usize>,
    /// Fraction of `|D|` in each spatial cell; sums to one.
    spatial_fraction: Vec<f64>,
    edges: Vec<f64>,
    sectors: usize,
}

/// Particle counts per cell; the last cell collects speeds beyond `V_cut`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn empty(cells: usize) -> Self {
        Histogram {
            counts: vec![0; cells],
            total: 0,
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Binned L¹ distance with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Estimate {
    pub distance: f64,
    /// Expected distance from multinomial noise alone, `Σ √(2/π) σ_k`.
    pub sampling_error: f64,
    /// Standard deviation of the estimator, `√(Σ σ_k²)`.
    pub std_error: f64,
    /// Distance recomputed at half resolution.
    pub half_resolution: f64,
    /// `|distance − half_resolution|`.
    pub bias_proxy: f64,
    pub cells: usize,
    pub particles: u64,
    /// More cells than a tenth of the particle count.
    pub over_resolved: bool,
}

impl Binning {
    fn spatial_counts(&self, dim: usize) -> Result<Vec<usize>> {
        let counts = match self.spatial.len() {
            0 => vec![4; dim],
            1 => vec![self.spatial[0]; dim],
            k if k == dim => self.spatial.clone(),
            _ => return Err(Error::param("binning.spatial", "need one entry or one per axis")),
        };
        if counts.iter().any(|&c| c == 0 || c > 4096) {
            return Err(Error::param("binning.spatial", "cell counts must lie in 1..=4096"));
        }
        Ok(counts)
    }

    fn sector_count(&self, dim: usize) -> Result<usize> {
        let s = self.sectors.unwrap_or(if dim == 2 { 8 } else { 24 });
        let ok = if dim == 2 { s >= 1 } else { matches!(s, 1 | 8 | 24) };
        if ok {
            Ok(s)
        } else {
            Err(Error::param("binning.sectors", "2D: positive; 3D: 1, 8 or 24"))
        }
    }

    fn shell_edges(&self, theta_max: f64) -> Result<Vec<f64>> {
        let floor = 4.0 * theta_max.sqrt();
        let edges = match &self.speed_edges {
            Some(e) => {
                if e.len() < 2 || e[0] != 0.0 || e.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::param("binning.speed_edges", "need 0 = e0 < e1 < ... < eK"));
                }
                e.clone()
            }
            None => {
                if self.speed_shells == 0 {
                    return Err(Error::param("binning.speed_shells", "must be positive"));
                }
                if !(self.shell_ratio > 1.0) {
                    return Err(Error::param("binning.shell_ratio", "must exceed 1"));
                }
                let v_cut = self.v_cut.unwrap_or(6.0 * theta_max.sqrt());
                let k = self.speed_shells as i32;
                let mut e = vec![0.0];
                e.extend((1..=k).map(|j| v_cut * self.shell_ratio.powi(j - k)));
                e
            }
        };
        let v_cut = *edges.last().expect("nonempty");
        if !(v_cut >= floor) {
            return Err(Error::param(
                "binning.v_cut",
                format!("V_cut = {v_cut} is below 4*sqrt(theta_max) = {floor}"),
            ));
        }
        Ok(edges)
    }

    /// The same layout at half resolution in every direction.
    pub fn half(&self, dim: usize) -> Result<Binning> {
        let spatial = self.spatial_counts(dim)?.iter().map(|c| c.div_ceil(2)).collect();
        let sectors = match (dim, self.sector_count(dim)?) {
            (2, s) => s.div_ceil(2),
            (_, 24) => 8,
            _ => 1,
        };
        let speed_edges = self.speed_edges.as_ref().map(|e| {
            let last = e.len() - 1;
            let mut h: Vec<f64> = e.iter().copied().enumerate().filter(|(j, _)| j % 2 == 0).map(|(_, v)| v).collect();
            if last % 2 == 1 {
                h.push(e[last]);
            }
            h
        });
        Ok(Binning {
            spatial,
            speed_shells: self.speed_shells.div_ceil(2).max(1),
            shell_ratio: self.shell_ratio * self.shell_ratio,
            speed_edges,
            sectors: Some(sectors),
            v_cut: self.v_cut,
        })
    }
}

/// Length of `{s ∈ [a, b] : base + s e_axis ∈ D}` by sign scanning and bisection.
fn inside_length(domain: &Domain, base: &Vector, axis: usize, a: f64, b: f64, samples: usize) -> f64 {
    let at = |s: f64| {
        let mut x = *base;
        x[axis] = s;
        domain.levelset(&x)
    };
    let h = (b - a) / samples as f64;
    let mut total = 0.0;
    let mut s0 = a;
    let mut f0 = at(a);
    for j in 1..=samples {
        let s1 = if j == samples { b } else { a + j as f64 * h };
        let f1 = at(s1);
        if f0 < 0.0 && f1 < 0.0 {
            total += s1 - s0;
        } else if (f0 < 0.0) != (f1 < 0.0) {
            let (mut lo, mut hi) = (s0, s1);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (at(mid) < 0.0) == (f0 < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            total += if f0 < 0.0 { root - s0 } else { s1 - root };
        }
        s0 = s1;
        f0 = f1;
    }
    total
}

/// Volume of `D ∩ Π_k [lo_k, hi_k]` by nested adaptive quadrature, with the
/// innermost axis resolved by root refinement.
fn box_volume_inside(domain: &Domain, base: Vector, lo: &[f64], hi: &[f64], axis: usize, tol: f64) -> f64 {
    let last = domain.dim() - 1;
    if axis == last {
        return inside_length(domain, &base, last, lo[last], hi[last], 32);
    }
    let width: f64 = (axis + 1..=last).map(|k| hi[k] - lo[k]).product();
    integrate(
        |s| {
            let mut x = base;
            x[axis] = s;
            box_volume_inside(domain, x, lo, hi, axis + 1, tol)
        },
        lo[axis],
        hi[axis],
        tol * width * (hi[axis] - lo[axis]),
        0.0,
    )
    .value
}

/// Volume of `D` inside each cell of a regular grid on `[−h, h]^n`, row-major
/// with axis 0 slowest.
pub fn cell_volumes(domain: &Domain, counts: &[usize], h: f64) -> Vec<f64> {
    let dim = domain.dim();
    let n_cells: usize = counts.iter().product();
    let tol = if dim == 2 { 1e-13 } else { 1e-7 };
    (0..n_cells)
        .into_par_iter()
        .map(|c| {
            let mut rem = c;
            let mut lo = vec![0.0; dim];
            let mut hi = vec![0.0; dim];
            for k in (0..dim).rev() {
                let j = rem % counts[k];
                rem /= counts[k];
                let w = 2.0 * h / counts[k] as f64;
                lo[k] = -h + j as f64 * w;
                hi[k] = lo[k] + w;
            }
            box_volume_inside(domain, Vector::zeros(), &lo, &hi, 0, tol)
        })
        .collect()
}

/// Direction sector of `v`: equal angular sectors in 2D; octant, optionally
/// refined by the dominant axis, in 3D.
pub fn direction_sector(v: &Vector, dim: usize, sectors: usize) -> usize {
    if sectors == 1 {
        return 0;
    }
    if dim == 2 {
        let phi = v[1].atan2(v[0]) + PI;
        ((phi / (2.0 * PI) * sectors as f64) as usize).min(sectors - 1)
    } else {
        let octant = (v[0] < 0.0) as usize | ((v[1] < 0.0) as usize) << 1 | ((v[2] < 0.0) as usize) << 2;
        if sectors == 8 {
            return octant;
        }
        let a = v.abs();
        let major = if a[0] >= a[1] && a[0] >= a[2] {
            0
        } else if a[1] >= a[2] {
            1
        } else {
            2
        };
        octant * 3 + major
    }
}

/// `P(|V| < s)` for the centered Maxwellian at temperature `theta` in `dim` dimensions.
pub fn maxwellian_speed_cdf(dim: usize, theta: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if dim == 2 {
        -(-s * s / (2.0 * theta)).exp_m1()
    } else {
        gamma_lr(dim as f64 / 2.0, s * s / (2.0 * theta))
    }
}

impl BinLayout {
    pub fn new(domain: &Domain, binning: &Binning, theta_max: f64) -> Result<Self> {
        if !(theta_max > 0.0) {
            return Err(Error::param("theta_max", "must be positive"));
        }
        let dim = domain.dim();
        let spatial = binning.spatial_counts(dim)?;
        let sectors = binning.sector_count(dim)?;
        let edges = binning.shell_edges(theta_max)?;
        let half_width = domain.bounding_radius();
        let vol = cell_volumes(domain, &spatial, half_width);
        let total: f64 = vol.iter().sum();
        Ok(BinLayout {
            dim,
            half_width,
            spatial,
            spatial_fraction: vol.iter().map(|v| v / total).collect(),
            edges,
            sectors,
        })
    }

    pub fn spatial_cells(&self) -> usize {
        self.spatial.iter().product()
    }

    pub fn shells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn v_cut(&self) -> f64 {
        *self.edges.last().expect("nonempty")
    }

    /// Cells including the tail cell.
    pub fn cells(&self) -> usize {
        self.spatial_cells() * self.shells() * self.sectors + 1
    }

    pub fn spatial_fraction(&self) -> &[f64] {
        &self.spatial_fraction
    }

    pub fn spatial_cell(&self, x: &Vector) -> usize {
        let mut idx = 0;
        for (k, &c) in self.spatial.iter().enumerate() {
            let u = (x[k] + self.half_width) / (2.0 * self.half_width);
            let j = ((u * c as f64).floor().max(0.0) as usize).min(c - 1);
            idx = idx * c + j;
        }
        idx
    }

    pub fn cell_of(&self, x: &Vector, v: &Vector) -> usize {
        let speed = v.norm();
        if speed >= self.v_cut() {
            return self.cells() - 1;
        }
        let shell = self.edges.partition_point(|&e| e <= speed) - 1;
        let shell = shell.min(self.shells() - 1);
        let sector = direction_sector(v, self.dim, self.sectors);
        (self.spatial_cell(x) * self.shells() + shell) * self.sectors + sector
    }

    /// Counts particles of positive weight.
    pub fn histogram(&self, ensemble: &Ensemble) -> Histogram {
        let t = ensemble.clock;
        let cells: Vec<Option<usize>> = ensemble
            .particles
            .par_iter()
            .map(|p| {
                (p.weight > 0.0).then(|| {
                    let s = p.state(t);
                    self.cell_of(&s.x, &s.v)
                })
            })
            .collect();
        let mut h = Histogram::empty(self.cells());
        for c in cells.into_iter().flatten() {
            h.counts[c] += 1;
            h.total += 1;
        }
        h
    }

    pub fn histogram_of_states(&self, states: &[PhaseState]) -> Histogram {
        let mut h = Histogram::empty(self.cells());
        for s in states {
            h.counts[self.cell_of(&s.x, &s.v)] += 1;
            h.total += 1;
        }
        h
    }

    /// Cell masses of the constant-temperature equilibrium.
    pub fn equilibrium_masses(&self, theta: f64) -> Vec<f64> {
        let shells: Vec<f64> = self
            .edges
            .windows(2)
            .map(|w| maxwellian_speed_cdf(self.dim, theta, w[1]) - maxwellian_speed_cdf(self.dim, theta, w[0]))
            .collect();
        let per_sector = 1.0 / self.sectors as f64;
        let mut out = Vec::with_capacity(self.cells());
        for &s in &self.spatial_fraction {
            for &p in &shells {
                for _ in 0..self.sectors {
                    out.push(s * p * per_sector);
                }
            }
        }
        out.push(1.0 - maxwellian_speed_cdf(self.dim, theta, self.v_cut()));
        out
    }
}

/// `Σ_k |p̂_k − p_k|` against exact masses, with noise floor and deviation
/// computed from `max(p̂_k, p_k)`.
pub fn distance_to_masses(h: &Histogram, masses: &[f64]) -> (f64, f64, f64) {
    assert_eq!(h.counts.len(), masses.len());
    let n = h.total.max(1) as f64;
    let mut d = 0.0;
    let mut floor = 0.0;
    let mut var = 0.0;
    for (&c, &p) in h.counts.iter().zip(masses) {
        let q = c as f64 / n;
        d += (q - p).abs();
        let r = q.max(p).min(1.0);
        let v = r * (1.0 - r) / n;
        floor += (FRAC_2_PI * v).sqrt();
        var += v;
    }
    (d, floor, var.sqrt())
}

/// `Σ_k |p̂_k − q̂_k|` between two histograms.
pub fn distance_between(a: &Histogram, b: &Histogram) -> (f64, f64, f64) {
    assert_eq!(a.counts.len(), b.counts.len());
    let na = a.total.max(1) as f64;
    let nb = b.total.max(1) as f64;
    let mut d = 0.0;
    let mut floor = 0.0;
    let mut var = 0.0;
    for (&ca, &cb) in a.counts.iter().zip(&b.counts) {
        let p = ca as f64 / na;
        let q = cb as f64 / nb;
        d += (p - q).abs();
        let v = p * (1.0 - p) / na + q * (1.0 - q) / nb;
        floor += (FRAC_2_PI * v).sqrt();
        var += v;
    }
    (d, floor, var.sqrt())
}

fn check_equal_weights(e: &Ensemble) -> Result<()> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut w = e.particles.iter().map(|p| p.weight).filter(|&w| w > 0.0);
    if let Some(first) = w.next() {
        if w.any(|x| x != first) {
            return Err(Error::param("ensemble", "binned estimators need equal particle weights"));
        }
    } else {
        return Err(Error::EmptyEnsemble);
    }
    Ok(())
}

fn assemble(fine: (f64, f64, f64), coarse: f64, cells: usize, particles: u64) -> L1Estimate {
    L1Estimate {
        distance: fine.0,
        sampling_error: fine.1,
        std_error: fine.2,
        half_resolution: coarse,
        bias_proxy: (fine.0 - coarse).abs(),
        cells,
        particles,
        over_resolved: cells as u64 > particles / 10,
    }
}

/// Binned distance of precomputed histograms against exact masses, at full
/// and half resolution.
pub fn l1_from_histograms(fine: &Histogram, fine_masses: &[f64], coarse: &Histogram, coarse_masses: &[f64]) -> L1Estimate {
    let f = distance_to_masses(fine, fine_masses);
    let c = distance_to_masses(coarse, coarse_masses);
    assemble(f, c.0, fine.counts.len(), fine.total)
}

/// Binned distance between an ensemble and the constant-temperature equilibrium.
pub fn l1_to_maxwellian(ensemble: &Ensemble, theta: f64, binning: &Binning, domain: &Domain) -> Result<L1Estimate> {
    check_equal_weights(ensemble)?;
    let fine = BinLayout::new(domain, binning, theta)?;
    let coarse = BinLayout::new(domain, &binning.half(domain.dim())?, theta)?;
    Ok(l1_from_histograms(
        &fine.histogram(ensemble),
        &fine.equilibrium_masses(theta),
        &coarse.histogram(ensemble),
        &coarse.equilibrium_masses(theta),
    ))
}

/// Binned distance between two ensembles; `theta_max` sets the default `V_cut`.
pub fn l1_between(a: &Ensemble, b: &Ensemble, binning: &Binning, domain: &Domain, theta_max: f64) -> Result<L1Estimate> {
    check_equal_weights(a)?;
    check_equal_weights(b)?;
    let fine = BinLayout::new(domain, binning, theta_max)?;
    let coarse = BinLayout::new(domain, &binning.half(domain.dim())?, theta_max)?;
    Ok(l1_between_histograms(
        &fine.histogram(a),
        &fine.histogram(b),
        &coarse.histogram(a),
        &coarse.histogram(b),
    ))
}

/// Binned distance between two sets of precomputed histograms.
pub fn l1_between_histograms(fine_a: &Histogram, fine_b: &Histogram, coarse_a: &Histogram, coarse_b: &Histogram) -> L1Estimate {
    let f = distance_between(fine_a, fine_b);
    let c = distance_between(coarse_a, coarse_b);
    assemble(f, c.0, fine_a.counts.len(), fine_a.total.min(fine_b.total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainKind;
    use crate::transport::InitialData;

    #[test]
    fn cell_volumes_sum_to_domain_volume() {
        for kind in [
            DomainKind::Disk { radius: 1.0 },
            DomainKind::Ellipse { a: 2.0, b: 1.0 },
            DomainKind::StarPerturbed {
                r0: 1.0,
                amplitude: 0.2,
                mode: 5,
            },
            DomainKind::Ellipsoid { a: 1.0, b: 0.8, c: 0.6 },
        ] {
            let d = Domain::new(kind).unwrap();
            let counts = vec![4; d.dim()];
            let v: f64 = cell_volumes(&d, &counts, d.bounding_radius()).iter().sum();
            let tol = match kind {
                DomainKind::StarPerturbed { .. } => 1e-6,
                DomainKind::Ellipsoid { .. } => 1e-6,
                _ => 1e-10,
            };
            assert!((v / d.volume() - 1.0).abs() < tol, "{kind:?}: {v} vs {}", d.volume());
        }
    }

    #[test]
    fn disk_quadrant_cells_are_quarter_disks() {
        let d = Domain::unit_disk();
        let v = cell_volumes(&d, &[2, 2], 1.0);
        for q in v {
            assert!((q - PI / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn masses_sum_to_one() {
        for d in [Domain::unit_disk(), Domain::new(DomainKind::Ellipsoid { a: 1.0, b: 1.0, c: 1.0 }).unwrap()] {
            let layout = BinLayout::new(&d, &Binning::default(), 1.0).unwrap();
            let s: f64 = layout.equilibrium_masses(1.0).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_cdf_matches_quadrature_in_3d() {
        let q = crate::quadrature::integrate(
            |r| (2.0 / PI).sqrt() * r * r * (-r * r / 2.0).exp(),
            0.0,
            1.3,
            1e-14,
            1e-12,
        );
        assert!((maxwellian_speed_cdf(3, 1.0, 1.3) - q.value).abs() < 1e-10);
    }

    #[test]
    fn v_cut_floor_is_enforced() {
        let b = Binning {
            v_cut: Some(3.0),
            ..Default::default()
        };
        let e = BinLayout::new(&Domain::unit_disk(), &b, 1.0).unwrap_err();
        assert!(e.to_string().contains("binning.v_cut"));
    }

    #[test]
    fn sectors_partition_directions() {
        let v = Vector::new(0.3, -0.2, 0.9);
        assert_eq!(direction_sector(&v, 3, 24), 2 * 3 + 2);
        let w = Vector::new(-1.0, -1e-3, 0.0);
        assert_eq!(direction_sector(&w, 2, 8), 0);
    }

    #[test]
    fn self_distance_is_within_noise() {
        let d = Domain::unit_disk();
        let e = Ensemble::sample(&InitialData::Equilibrium { theta: 1.0 }, &d, 100_000, 3).unwrap();
        let est = l1_to_maxwellian(&e, 1.0, &Binning::default(), &d).unwrap();
        assert!(est.distance < 3.0 * est.sampling_error, "{est:?}");
        assert!(!est.over_resolved);
        let z = l1_between(&e, &e, &Binning::default(), &d, 1.0).unwrap();
        assert_eq!(z.distance, 0.0);
    }

    #[test]
    fn disjoint_support_gives_twice_the_mass() {
        let d = Domain::unit_disk();
        let e = Ensemble::sample(&InitialData::AnnulusSpeed { v_min: 7.0, v_max: 8.0 }, &d, 10_000, 4).unwrap();
        let est = l1_to_maxwellian(&e, 1.0, &Binning::default(), &d).unwrap();
        assert!((est.distance - 2.0).abs() < 1e-7, "{est:?}");
    }

    #[test]
    fn half_domain_spatial_mismatch_is_one() {
        let d = Domain::unit_disk();
        let e = Ensemble::sample(&InitialData::HalfDomainMaxwellian { theta0: 1.0 }, &d, 200_000, 5).unwrap();
        let b = Binning {
            spatial: vec![2, 1],
            speed_shells: 4,
            sectors: Some(2),
            ..Default::default()
        };
        let est = l1_to_maxwellian(&e, 1.0, &b, &d).unwrap();
        assert!((est.distance - 1.0).abs() < 3.0 * est.sampling_error + 1e-9, "{est:?}");
    }
}
