//! Slow, independent reference computations used to check the fast paths.
//!
//! Nothing here shares code with the production root finders or samplers.

use crate::geometry::Domain;
use crate::Vector;

/// First crossing of `ξ(x + t v) = 0` by a dense uniform scan followed by
/// plain bisection down to a `1e-13` bracket.
pub fn bisection_exit_time(domain: &Domain, x: &Vector, v: &Vector) -> f64 {
    let speed = v.norm();
    if speed == 0.0 {
        return f64::INFINITY;
    }
    let f = |t: f64| domain.levelset(&(x + v * t));
    let t_max = 2.0 * domain.bounding_radius() / speed;
    let steps = 20_000;
    let h = t_max / steps as f64;
    let mut lo = 0.0;
    for k in 1..=steps + 1 {
        let t = k as f64 * h;
        if f(t) >= 0.0 {
            let mut hi = t;
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        lo = t;
    }
    f64::NAN
}

/// Central finite-difference gradient of the level set.
pub fn fd_gradient(domain: &Domain, x: &Vector) -> Vector {
    let h = 1e-6;
    let mut g = Vector::zeros();
    for i in 0..domain.dim() {
        let mut e = Vector::zeros();
        e[i] = h;
        g[i] = (domain.levelset(&(x + e)) - domain.levelset(&(x - e))) / (2.0 * h);
    }
    g
}

/// `v · ∇_x σ(x, v)` by central differences along each coordinate.
pub fn fd_sigma_transport(domain: &Domain, x: &Vector, v: &Vector, h: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..domain.dim() {
        let mut e = Vector::zeros();
        e[i] = h;
        let plus = domain.exit_time(&(x + e), v).unwrap_or(f64::NAN);
        let minus = domain.exit_time(&(x - e), v).unwrap_or(f64::NAN);
        acc += v[i] * (plus - minus) / (2.0 * h);
    }
    acc
}

/// Maximum pairwise distance over `count` equally spaced planar boundary samples.
pub fn sampled_diameter(domain: &Domain, count: usize) -> f64 {
    let pts = domain.boundary_samples(count);
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            best = best.max((pts[i] - pts[j]).norm_squared());
        }
    }
    best.sqrt()
}

/// Specular billiard in the unit disk stepped one event at a time with
/// explicit circle intersection, for cross-checking the transport loop.
pub fn disk_specular_trace(mut x: Vector, mut v: Vector, t_end: f64) -> (Vector, Vector, usize) {
    let mut t = 0.0;
    let mut events = 0;
    loop {
        // |x + s v|² = 1
        let a = v.dot(&v);
        let b = x.dot(&v);
        let c = x.dot(&x) - 1.0;
        let s = (-b + (b * b - a * c).sqrt()) / a;
        if t + s > t_end {
            return (x + v * (t_end - t), v, events);
        }
        x += v * s;
        t += s;
        let n = -x / x.norm();
        v -= n * (2.0 * v.dot(&n));
        events += 1;
    }
}
