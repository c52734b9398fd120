//! Maxwell boundary kernel: diffuse re-emission from the wall Maxwellian mixed
//! with specular reflection according to the accommodation field.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::quadrature::{half_sphere_moment, integrate_to_infinity, Integral};
use crate::Vector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Outgoing normal speeds below this are treated as grazing.
pub const GRAZING_SPEED: f64 = 1e-10;

const FIELD_SAMPLES: usize = 4096;

/// Scalar field over boundary positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field {
    Constant { value: f64 },
    /// `base + slope * x[axis]`.
    Linear { base: f64, slope: f64, axis: usize },
    /// `mean + amplitude * cos(mode φ + phase)` in the polar angle φ of (x₀, x₁).
    Sinusoidal { mean: f64, amplitude: f64, mode: u32, phase: f64 },
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field::Constant { value }
    }

    pub fn at(&self, x: &Vector) -> f64 {
        match *self {
            Field::Constant { value } => value,
            Field::Linear { base, slope, axis } => base + slope * x[axis.min(2)],
            Field::Sinusoidal { mean, amplitude, mode, phase } => {
                mean + amplitude * (mode as f64 * x[1].atan2(x[0]) + phase).cos()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Field::Constant { .. })
    }

    fn range(&self, samples: &[Vector]) -> (f64, f64) {
        samples
            .iter()
            .map(|x| self.at(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)))
    }
}

/// `c₄ = 1 − (1 − c₀)^{1/4}`.
pub fn c4_from_c0(c0: f64) -> Result<f64> {
    if !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::param("wall.c0", "must lie in (0,1)"));
    }
    Ok(1.0 - (1.0 - c0).powf(0.25))
}

/// The normalization `c̃` from the one-dimensional reduced flux integral.
pub fn tilde_c(theta: f64) -> Integral {
    let s = (2.0 * std::f64::consts::PI * theta).sqrt();
    let flux = integrate_to_infinity(|u| (-u * u / (2.0 * theta)).exp() * u / s, 0.0, 1e-16, 1e-15);
    Integral {
        value: 1.0 / flux.value,
        error: flux.error / (flux.value * flux.value),
    }
}

/// `M(v) = c̃/(2πθ)^{n/2} e^{−|v|²/2θ}` at one wall temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallMaxwellian {
    pub dim: usize,
    pub theta: f64,
    pub tilde_c: f64,
}

impl WallMaxwellian {
    pub fn new(dim: usize, theta: f64) -> Self {
        WallMaxwellian {
            dim,
            theta,
            tilde_c: tilde_c(theta).value,
        }
    }

    /// Value as a function of the speed `|v|`.
    pub fn radial(&self, speed: f64) -> f64 {
        let norm = (2.0 * std::f64::consts::PI * self.theta).powf(self.dim as f64 / 2.0);
        self.tilde_c / norm * (-speed * speed / (2.0 * self.theta)).exp()
    }

    pub fn density(&self, v: &Vector) -> f64 {
        self.radial(v.norm())
    }

    /// `∫_{v·n<0} M |v·n| dv` in polar coordinates.
    pub fn flux_normalization(&self) -> Integral {
        let n = self.dim as i32;
        let radial = integrate_to_infinity(|r| self.radial(r) * r.powi(n), 0.0, 1e-16, 1e-15);
        let angular = half_sphere_moment(self.dim, 1.0);
        Integral {
            value: radial.value * angular.value,
            error: radial.error * angular.value + angular.error * radial.value,
        }
    }
}

/// Outcome of one wall interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub v: Vector,
    pub diffuse: bool,
    pub grazing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallModel {
    pub theta: Field,
    pub alpha: Field,
    pub c0: f64,
    pub c4: f64,
    pub dim: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub alpha_min: f64,
}

impl WallModel {
    /// Builds a wall and checks `θ > 0` and `c₀ ≤ α ≤ 1` on boundary samples.
    pub fn new(domain: &Domain, theta: Field, alpha: Field, c0: f64) -> Result<Self> {
        let w = Self::new_relaxed(domain, theta, alpha, c0)?;
        if w.alpha_min < c0 {
            return Err(Error::param(
                "wall.alpha",
                format!("falls to {:.6} below wall.c0 = {c0}", w.alpha_min),
            ));
        }
        Ok(w)
    }

    /// As [`WallModel::new`] but without the accommodation floor, for control
    /// experiments with `α < c₀` (including pure specular walls).
    pub fn new_relaxed(domain: &Domain, theta: Field, alpha: Field, c0: f64) -> Result<Self> {
        let c4 = c4_from_c0(c0)?;
        let samples = domain.boundary_samples(FIELD_SAMPLES);
        let (theta_min, theta_max) = theta.range(&samples);
        if !(theta_min > 0.0) || !theta_max.is_finite() {
            return Err(Error::param("wall.theta", "must be positive on the boundary"));
        }
        let (alpha_min, alpha_max) = alpha.range(&samples);
        if alpha_min < 0.0 || alpha_max > 1.0 {
            return Err(Error::param("wall.alpha", "must lie in [0,1] on the boundary"));
        }
        Ok(WallModel {
            theta,
            alpha,
            c0,
            c4,
            dim: domain.dim(),
            theta_min,
            theta_max,
            alpha_min,
        })
    }

    /// Fully diffuse wall at constant temperature.
    pub fn diffuse(domain: &Domain, theta: f64, c0: f64) -> Result<Self> {
        Self::new(domain, Field::constant(theta), Field::constant(1.0), c0)
    }

    pub fn theta_at(&self, x: &Vector) -> f64 {
        self.theta.at(x)
    }

    pub fn alpha_at(&self, x: &Vector) -> f64 {
        self.alpha.at(x)
    }

    pub fn maxwellian_at(&self, x: &Vector) -> WallMaxwellian {
        WallMaxwellian::new(self.dim, self.theta_at(x))
    }

    /// `M(x, v)`.
    pub fn wall_maxwellian(&self, x: &Vector, v: &Vector) -> f64 {
        self.maxwellian_at(x).density(v)
    }

    /// Draws from the flux-weighted law `M(x,v)(v·n)` on `{v·n > 0}`.
    pub fn sample_diffuse<R: Rng>(&self, x: &Vector, n: &Vector, rng: &mut R) -> (Vector, bool) {
        let theta = self.theta_at(x);
        let draw_normal = |rng: &mut R| {
            let u: f64 = rng.random();
            (-2.0 * theta * (-u).ln_1p()).sqrt()
        };
        let mut un = draw_normal(rng);
        let mut grazing = false;
        if un < GRAZING_SPEED {
            un = draw_normal(rng);
            grazing = un < GRAZING_SPEED;
        }
        let st = theta.sqrt();
        let mut v = n * un;
        for t in tangent_basis(n, self.dim) {
            let g: f64 = rng.sample(StandardNormal);
            v += t * (g * st);
        }
        (v, grazing)
    }

    /// One application of the Maxwell kernel to an incoming velocity.
    pub fn apply_boundary<R: Rng>(&self, x: &Vector, v_in: &Vector, n: &Vector, rng: &mut R) -> Result<Reflection> {
        let vn = v_in.dot(n);
        if !(vn < 0.0) {
            return Err(Error::NotIncoming { normal_component: vn });
        }
        let u: f64 = rng.random();
        if u < self.alpha_at(x) {
            let (v, grazing) = self.sample_diffuse(x, n, rng);
            Ok(Reflection { v, diffuse: true, grazing })
        } else {
            let v = specular_reflect(v_in, n);
            let grazing = v.dot(n) < GRAZING_SPEED * v.norm().max(1.0);
            Ok(Reflection { v, diffuse: false, grazing })
        }
    }
}

/// `η = v − 2 (v·n) n`.
pub fn specular_reflect(v: &Vector, n: &Vector) -> Vector {
    v - n * (2.0 * v.dot(n))
}

/// Orthonormal basis of the plane (or line) orthogonal to `n`.
pub fn tangent_basis(n: &Vector, dim: usize) -> Vec<Vector> {
    if dim == 2 {
        return vec![Vector::new(-n[1], n[0], 0.0)];
    }
    let a = if n[0].abs() < 0.9 { Vector::x() } else { Vector::y() };
    let t1 = (a - n * a.dot(n)).normalize();
    let t2 = n.cross(&t1);
    vec![t1, t2]
}
