//! Implicit domains `D = {ξ < 0}` with exact exit times and inward normals.
//!
//! Conic domains (disk, ellipse, ellipsoid) solve the ray–quadric equation in
//! closed form. The star-perturbed disk brackets the first crossing on a grid
//! fine enough for its curvature and refines it by safeguarded Newton.

use crate::error::{Error, Result};
use crate::Vector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tolerance on |ξ| for a point to count as lying on the boundary.
pub const TOL_BOUNDARY: f64 = 1e-9;
/// Root tolerance, relative to the bounding radius.
pub const TOL_ROOT: f64 = 1e-12;
/// Relative normal speed below which a hit is flagged as grazing.
pub const GRAZING: f64 = 1e-8;

const STAR_DIAMETER_SAMPLES: usize = 2048;
/// Inflation applied to numerically maximized diameters.
pub const DIAMETER_SAFETY: f64 = 1.0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Planar region `ρ < r0 (1 + amplitude cos(mode φ))`.
    StarPerturbed { r0: f64, amplitude: f64, mode: u32 },
}

/// A position–velocity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vector,
    pub v: Vector,
}

/// Result of a ray exit query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exit {
    /// Zero velocity: the particle never reaches the wall.
    Never,
    Hit { time: f64, point: Vector, grazing: bool },
}

impl Exit {
    pub fn time(&self) -> f64 {
        match self {
            Exit::Never => f64::INFINITY,
            Exit::Hit { time, .. } => *time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
    diameter: f64,
    inradius: f64,
    bounding_radius: f64,
    volume: f64,
    normal_w1inf: f64,
    scan_length: f64,
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, "must be a finite positive number"))
    }
}

fn arr(x: &Vector) -> [f64; 3] {
    [x[0], x[1], x[2]]
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let (dim, diameter, inradius, bounding, volume, w1inf, scan) = match kind {
            DomainKind::Disk { radius } => {
                positive("domain.radius", radius)?;
                (2, 2.0 * radius, radius, radius, PI * radius * radius, 1.0 + 1.0 / radius, 0.0)
            }
            DomainKind::Ellipse { a, b } => {
                positive("domain.a", a)?;
                positive("domain.b", b)?;
                let (lo, hi) = (a.min(b), a.max(b));
                (2, 2.0 * hi, lo, hi, PI * a * b, 1.0 + hi / (lo * lo), 0.0)
            }
            DomainKind::Ellipsoid { a, b, c } => {
                positive("domain.a", a)?;
                positive("domain.b", b)?;
                positive("domain.c", c)?;
                let lo = a.min(b).min(c);
                let hi = a.max(b).max(c);
                (3, 2.0 * hi, lo, hi, 4.0 / 3.0 * PI * a * b * c, 1.0 + hi / (lo * lo), 0.0)
            }
            DomainKind::StarPerturbed { r0, amplitude, mode } => {
                positive("domain.r0", r0)?;
                if !(0.0..0.5).contains(&amplitude) {
                    return Err(Error::param("domain.amplitude", "must lie in [0, 0.5)"));
                }
                if !(1..=16).contains(&mode) {
                    return Err(Error::param("domain.mode", "must lie in 1..=16"));
                }
                let inradius = r0 * (1.0 - amplitude);
                // Grid step in length units: small against both the inradius
                // and the angular wavelength of the perturbation.
                let scan = inradius.min(PI * inradius / mode as f64) / 8.0;
                let volume = PI * r0 * r0 * (1.0 + 0.5 * amplitude * amplitude);
                let mut d = Domain {
                    kind,
                    dim: 2,
                    diameter: 0.0,
                    inradius,
                    bounding_radius: r0 * (1.0 + amplitude),
                    volume,
                    normal_w1inf: 0.0,
                    scan_length: scan,
                };
                d.diameter = d.star_diameter() * DIAMETER_SAFETY;
                d.normal_w1inf = 1.0 + 2.0 * d.star_max_curvature();
                return Ok(d);
            }
        };
        Ok(Domain {
            kind,
            dim,
            diameter,
            inradius,
            bounding_radius: bounding,
            volume,
            normal_w1inf: w1inf,
            scan_length: scan,
        })
    }

    pub fn unit_disk() -> Self {
        Domain::new(DomainKind::Disk { radius: 1.0 }).expect("valid")
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
    pub fn inradius(&self) -> f64 {
        self.inradius
    }
    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }
    /// Lebesgue measure |D|.
    pub fn volume(&self) -> f64 {
        self.volume
    }
    /// Upper estimate of the Lipschitz norm of the extended normal field, `1 + κ_max`.
    pub fn normal_w1inf(&self) -> f64 {
        self.normal_w1inf
    }

    fn axes(&self) -> Option<[f64; 3]> {
        match self.kind {
            DomainKind::Disk { radius } => Some([radius, radius, 1.0]),
            DomainKind::Ellipse { a, b } => Some([a, b, 1.0]),
            DomainKind::Ellipsoid { a, b, c } => Some([a, b, c]),
            DomainKind::StarPerturbed { .. } => None,
        }
    }

    fn star_radius(&self, phi: f64) -> f64 {
        match self.kind {
            DomainKind::StarPerturbed { r0, amplitude, mode } => r0 * (1.0 + amplitude * (mode as f64 * phi).cos()),
            _ => unreachable!(),
        }
    }

    pub fn levelset(&self, x: &Vector) -> f64 {
        match self.axes() {
            Some(ax) => (0..self.dim).map(|i| (x[i] / ax[i]).powi(2)).sum::<f64>() - 1.0,
            None => {
                let rho = x[0].hypot(x[1]);
                rho - self.star_radius(x[1].atan2(x[0]))
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self.axes() {
            Some(ax) => {
                let mut g = Vector::zeros();
                for i in 0..self.dim {
                    g[i] = 2.0 * x[i] / (ax[i] * ax[i]);
                }
                g
            }
            None => {
                let DomainKind::StarPerturbed { r0, amplitude, mode } = self.kind else {
                    unreachable!()
                };
                let rho2 = x[0] * x[0] + x[1] * x[1];
                let rho = rho2.sqrt();
                if rho == 0.0 {
                    return Vector::zeros();
                }
                let k = mode as f64;
                let phi = x[1].atan2(x[0]);
                let s = r0 * amplitude * k * (k * phi).sin() / rho2;
                Vector::new(x[0] / rho - s * x[1], x[1] / rho + s * x[0], 0.0)
            }
        }
    }

    /// `ξ(x) ≤ tol_boundary`.
    pub fn contains(&self, x: &Vector) -> bool {
        self.levelset(x) <= TOL_BOUNDARY
    }

    /// Unit inward normal `−∇ξ/‖∇ξ‖` at a boundary point.
    pub fn inward_normal(&self, x: &Vector) -> Result<Vector> {
        let g = self.gradient(x);
        let norm = g.norm();
        if !(norm > 1e-12) {
            return Err(Error::DegenerateGradient { point: arr(x), norm });
        }
        Ok(-g / norm)
    }

    /// First boundary hit of the ray `x + t v`, `t > 0`.
    pub fn exit(&self, x: &Vector, v: &Vector) -> Result<Exit> {
        let level = self.levelset(x);
        if level > TOL_BOUNDARY || level.is_nan() {
            return Err(Error::OutsideDomain { point: arr(x), level });
        }
        let speed = v.norm();
        if speed == 0.0 {
            return Ok(Exit::Never);
        }
        let time = match self.axes() {
            Some(ax) => self.conic_exit(x, v, &ax, level),
            None => self.star_exit(x, v, speed, level)?,
        };
        let point = x + v * time;
        let grazing = match self.inward_normal(&point) {
            Ok(n) => v.dot(&n).abs() < GRAZING * speed,
            Err(_) => true,
        };
        Ok(Exit::Hit { time, point, grazing })
    }

    fn conic_exit(&self, x: &Vector, v: &Vector, ax: &[f64; 3], c: f64) -> f64 {
        // ξ(x + t v) = a t² + b t + c with c = ξ(x).
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..self.dim {
            let s = 1.0 / (ax[i] * ax[i]);
            a += s * v[i] * v[i];
            b += 2.0 * s * x[i] * v[i];
        }
        // On or just outside the wall and not heading inward: leaving now.
        if c >= 0.0 && b >= 0.0 {
            return 0.0;
        }
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let t = if b < 0.0 {
            (-b + disc) / (2.0 * a)
        } else {
            2.0 * c / (-b - disc)
        };
        t.max(0.0)
    }

    fn star_exit(&self, x: &Vector, v: &Vector, speed: f64, f0: f64) -> Result<f64> {
        let g0 = self.gradient(x).dot(v);
        if f0 >= 0.0 && g0 >= 0.0 {
            return Ok(0.0);
        }
        let f = |t: f64| self.levelset(&(x + v * t));
        let g = |t: f64| self.gradient(&(x + v * t)).dot(v);
        let h = self.scan_length / speed;
        let t_max = 2.0 * self.bounding_radius / speed + h;
        let tol_t = TOL_ROOT * self.bounding_radius / speed;
        let (mut t_prev, mut g_prev) = (0.0, g0);
        while t_prev < t_max {
            let t = t_prev + h;
            let ft = f(t);
            if ft >= 0.0 {
                return Ok(refine(&f, &g, t_prev, t, tol_t));
            }
            let gt = g(t);
            if g_prev > 0.0 && gt < 0.0 {
                // A local maximum of ξ between grid points may poke outside.
                let (mut lo, mut hi) = (t_prev, t);
                while hi - lo > tol_t {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if f(lo) >= 0.0 {
                    return Ok(refine(&f, &g, t_prev, lo, tol_t));
                }
            }
            t_prev = t;
            g_prev = gt;
        }
        Err(Error::OutsideDomain { point: arr(x), level: f0 })
    }

    /// `σ(x, v)`, infinite for `v = 0`.
    pub fn exit_time(&self, x: &Vector, v: &Vector) -> Result<f64> {
        Ok(self.exit(x, v)?.time())
    }

    /// `q(x, v) = x + σ(x, v) v`.
    pub fn boundary_hit(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        match self.exit(x, v)? {
            Exit::Hit { point, .. } => Ok(point),
            Exit::Never => Err(Error::param("v", "zero velocity never reaches the boundary")),
        }
    }

    /// Boundary point parametrized by `u ∈ [0,1)^{n-1}`.
    pub fn boundary_point(&self, u: &[f64]) -> Vector {
        let phi = 2.0 * PI * u[0];
        match self.kind {
            DomainKind::Disk { radius } => Vector::new(radius * phi.cos(), radius * phi.sin(), 0.0),
            DomainKind::Ellipse { a, b } => Vector::new(a * phi.cos(), b * phi.sin(), 0.0),
            DomainKind::Ellipsoid { a, b, c } => {
                let ct = 1.0 - 2.0 * u[1];
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                Vector::new(a * st * phi.cos(), b * st * phi.sin(), c * ct)
            }
            DomainKind::StarPerturbed { .. } => {
                let r = self.star_radius(phi);
                Vector::new(r * phi.cos(), r * phi.sin(), 0.0)
            }
        }
    }

    /// A deterministic covering set of boundary points.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vector> {
        match self.dim {
            2 => (0..count).map(|i| self.boundary_point(&[i as f64 / count as f64])).collect(),
            _ => {
                // Fibonacci lattice on the parameter sphere.
                let golden = 0.5 * (5f64.sqrt() - 1.0);
                (0..count)
                    .map(|i| {
                        let u0 = (i as f64 * golden).fract();
                        let u1 = (i as f64 + 0.5) / count as f64;
                        self.boundary_point(&[u0, u1])
                    })
                    .collect()
            }
        }
    }

    /// Maps `u ∈ [0,1)^n` into `D` and returns the point with the ratio of the
    /// uniform density on `D` to the density of the map (1 for conics).
    pub fn map_unit_cube(&self, u: &[f64]) -> (Vector, f64) {
        match self.kind {
            DomainKind::Disk { radius } => (disk_point(u, radius, radius), 1.0),
            DomainKind::Ellipse { a, b } => (disk_point(u, a, b), 1.0),
            DomainKind::Ellipsoid { a, b, c } => {
                let r = u[0].cbrt();
                let ct = 1.0 - 2.0 * u[1];
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                let phi = 2.0 * PI * u[2];
                (Vector::new(a * r * st * phi.cos(), b * r * st * phi.sin(), c * r * ct), 1.0)
            }
            DomainKind::StarPerturbed { .. } => {
                let phi = 2.0 * PI * u[1];
                let rb = self.star_radius(phi);
                let r = rb * u[0].sqrt();
                (Vector::new(r * phi.cos(), r * phi.sin(), 0.0), PI * rb * rb / self.volume)
            }
        }
    }

    /// Largest value [`Domain::map_unit_cube`] can return as its density ratio.
    pub fn map_ratio_bound(&self) -> f64 {
        match self.kind {
            DomainKind::StarPerturbed { .. } => PI * self.bounding_radius.powi(2) / self.volume,
            _ => 1.0,
        }
    }

    fn star_diameter(&self) -> f64 {
        let n = STAR_DIAMETER_SAMPLES;
        let pts: Vec<Vector> = (0..n).map(|i| self.boundary_point(&[i as f64 / n as f64])).collect();
        let (mut best, mut bi, mut bj) = (0.0, 0, 0);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (pts[i] - pts[j]).norm_squared();
                if d > best {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        // Coordinate ascent on the two boundary parameters.
        let (mut ui, mut uj) = (bi as f64 / n as f64, bj as f64 / n as f64);
        let dist = |a: f64, b: f64| (self.boundary_point(&[a]) - self.boundary_point(&[b])).norm();
        let mut step = 1.0 / n as f64;
        while step > 1e-13 {
            let mut moved = false;
            for (di, dj) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                if dist(ui + di, uj + dj) > dist(ui, uj) {
                    ui += di;
                    uj += dj;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        dist(ui, uj).max(best.sqrt())
    }

    fn star_max_curvature(&self) -> f64 {
        let n = 4096;
        let h = 2.0 * PI / n as f64 * 1e-2;
        (0..n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                let r = self.star_radius(phi);
                let r1 = (self.star_radius(phi + h) - self.star_radius(phi - h)) / (2.0 * h);
                let r2 = (self.star_radius(phi + h) - 2.0 * r + self.star_radius(phi - h)) / (h * h);
                (r * r + 2.0 * r1 * r1 - r * r2).abs() / (r * r + r1 * r1).powf(1.5)
            })
            .fold(0.0, f64::max)
    }
}

fn disk_point(u: &[f64], a: f64, b: f64) -> Vector {
    let r = u[0].sqrt();
    let phi = 2.0 * PI * u[1];
    Vector::new(a * r * phi.cos(), b * r * phi.sin(), 0.0)
}

/// Safeguarded Newton on a bracket with `f(lo) < 0 ≤ f(hi)`. Returns the upper
/// end, so the returned time never undershoots the crossing.
fn refine<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: &F, g: &G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let ft = f(t);
        if ft >= 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let gt = g(t);
        let newton = t - ft / gt;
        t = if gt != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // Newton converging from one side leaves the far end stale; probe it.
        let probe = if ft >= 0.0 { (t - tol).max(lo) } else { (t + tol).min(hi) };
        if f(probe) >= 0.0 {
            hi = hi.min(probe);
        } else {
            lo = lo.max(probe);
        }
    }
    hi
}
