//! Exit-time calculus against independent references.

use knudsen::oracle::{bisection_exit_time, fd_sigma_transport};
use knudsen::rng::auxiliary;
use knudsen::{Domain, DomainKind, Vector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn registered() -> Vec<Domain> {
    [
        DomainKind::Disk { radius: 1.0 },
        DomainKind::Ellipse { a: 2.0, b: 1.0 },
        DomainKind::Ellipsoid { a: 1.0, b: 0.8, c: 0.6 },
        DomainKind::StarPerturbed { r0: 1.0, amplitude: 0.1, mode: 5 },
    ]
    .into_iter()
    .map(|k| Domain::new(k).unwrap())
    .collect()
}

fn random_state<R: Rng>(d: &Domain, rng: &mut R) -> (Vector, Vector) {
    let u: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
    let (x, _) = d.map_unit_cube(&u);
    let mut v = Vector::zeros();
    for i in 0..d.dim() {
        v[i] = rng.sample(StandardNormal);
    }
    (x, v)
}

/// Interior states whose hit point is at least `min_margin` inside along
/// each coordinate and whose hit is not grazing.
fn non_grazing_states(d: &Domain, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = auxiliary(seed, 1);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x, v) = random_state(d, &mut rng);
        if d.levelset(&x) > -1e-3 {
            continue;
        }
        let q = d.boundary_hit(&x, &v).unwrap();
        let n = d.inward_normal(&q).unwrap();
        if v.dot(&n).abs() > 0.1 * v.norm() {
            out.push((x, v));
        }
    }
    out
}

#[test]
fn transport_derivative_of_exit_time_is_minus_one() {
    for d in registered() {
        let states = non_grazing_states(&d, 1000, 7);
        let worst = states
            .iter()
            .map(|(x, v)| (fd_sigma_transport(&d, x, v, 1e-5) + 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-4, "{:?}: worst |v.grad sigma + 1| = {worst:e}", d.kind());
    }
}

#[test]
fn exit_time_matches_bisection_on_ten_thousand_rays() {
    for d in registered() {
        let mut rng = auxiliary(11, 2);
        let rays: Vec<(Vector, Vector)> = (0..10_000).map(|_| random_state(&d, &mut rng)).collect();
        let worst = rays
            .par_iter()
            .map(|(x, v)| {
                let fast = d.exit_time(x, v).unwrap();
                let slow = bisection_exit_time(&d, x, v);
                (fast - slow).abs() * v.norm() / d.bounding_radius()
            })
            .reduce(|| 0.0, f64::max);
        assert!(worst < 1e-9, "{:?}: worst relative gap {worst:e}", d.kind());
    }
}

#[test]
fn hit_points_lie_on_the_boundary() {
    for d in registered() {
        let mut rng = auxiliary(13, 3);
        for _ in 0..2000 {
            let (x, v) = random_state(&d, &mut rng);
            let q = d.boundary_hit(&x, &v).unwrap();
            assert!(d.levelset(&q).abs() < 1e-9, "{:?} at {q:?}", d.kind());
        }
    }
}

#[test]
fn zero_velocity_never_exits() {
    for d in registered() {
        assert_eq!(d.exit_time(&Vector::zeros(), &Vector::zeros()).unwrap(), f64::INFINITY);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chord_bound_and_scaling(which in 0usize..4, seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let d = registered().swap_remove(which);
        let mut rng = auxiliary(seed, 4);
        let (x, v) = random_state(&d, &mut rng);
        let fwd = d.exit_time(&x, &v).unwrap();
        let back = d.exit_time(&x, &-v).unwrap();
        let tol = 1e-12 * d.bounding_radius() / v.norm();
        prop_assert!(fwd + back <= d.diameter() / v.norm() + 4.0 * tol);
        let scaled = d.exit_time(&x, &(v * lambda)).unwrap();
        prop_assert!((scaled - fwd / lambda).abs() <= 4.0 * tol / lambda + 1e-15 * fwd / lambda);
    }

    #[test]
    fn exit_is_first_crossing(which in 0usize..4, seed in any::<u64>()) {
        let d = registered().swap_remove(which);
        let mut rng = auxiliary(seed, 5);
        let (x, v) = random_state(&d, &mut rng);
        let s = d.exit_time(&x, &v).unwrap();
        for k in 1..64 {
            let t = s * k as f64 / 64.0;
            prop_assert!(d.levelset(&(x + v * t)) < 1e-9);
        }
    }
}
