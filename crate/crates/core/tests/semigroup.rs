//! Mass conservation, coupled L¹ contraction, estimator pseudometric
//! properties and replay determinism of the reflecting dynamics.

use knudsen::analysis::{l1_between, Binning};
use knudsen::transport::worker_pool;
use knudsen::{Domain, Ensemble, Field, InitialData, WallModel};

fn disk_wall() -> (Domain, WallModel) {
    let d = Domain::unit_disk();
    let w = WallModel::diffuse(&d, 1.0, 0.5).unwrap();
    (d, w)
}

fn coarse() -> Binning {
    Binning {
        spatial: vec![2],
        speed_shells: 4,
        sectors: Some(4),
        ..Default::default()
    }
}

#[test]
fn mass_is_exactly_conserved() {
    let (d, w) = disk_wall();
    let mut e = Ensemble::sample(&InitialData::HalfDomainMaxwellian { theta0: 2.0 }, &d, 20_000, 5).unwrap();
    let m0 = e.total_mass();
    for _ in 0..5 {
        e.advance(10.0, &d, &w).unwrap();
        assert_eq!(e.total_mass(), m0);
        assert!(e.states().iter().all(|s| d.levelset(&s.x) <= 1e-9));
    }
}

#[test]
fn coupled_distance_does_not_grow() {
    let (d, w) = disk_wall();
    let n = 40_000;
    let mut f = Ensemble::sample(&InitialData::HalfDomainMaxwellian { theta0: 2.0 }, &d, n, 9).unwrap();
    let mut g = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 0.5 }, &d, n, 9).unwrap();
    let b = coarse();
    let d0 = l1_between(&f, &g, &b, &d, 2.0).unwrap();
    assert!(d0.distance > 0.3, "{d0:?}");
    for _ in 0..4 {
        f.advance(2.5, &d, &w).unwrap();
        g.advance(2.5, &d, &w).unwrap();
        let dt = l1_between(&f, &g, &b, &d, 2.0).unwrap();
        let err = (d0.std_error.powi(2) + dt.std_error.powi(2)).sqrt();
        assert!(dt.distance <= d0.distance + 3.0 * err, "{} > {} + 3*{err}", dt.distance, d0.distance);
    }
}

#[test]
fn binned_distance_is_a_pseudometric() {
    let (d, _) = disk_wall();
    let n = 20_000;
    let a = Ensemble::sample(&InitialData::HalfDomainMaxwellian { theta0: 2.0 }, &d, n, 1).unwrap();
    let b = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 1.0 }, &d, n, 2).unwrap();
    let c = Ensemble::sample(&InitialData::AnnulusSpeed { v_min: 0.5, v_max: 2.0 }, &d, n, 3).unwrap();
    let bin = coarse();
    let l = |x: &Ensemble, y: &Ensemble| l1_between(x, y, &bin, &d, 2.0).unwrap();
    assert_eq!(l(&a, &a).distance, 0.0);
    assert_eq!(l(&a, &b).distance, l(&b, &a).distance);
    let (ab, bc, ac) = (l(&a, &b), l(&b, &c), l(&a, &c));
    let err = (ab.std_error.powi(2) + bc.std_error.powi(2) + ac.std_error.powi(2)).sqrt();
    assert!(ac.distance <= ab.distance + bc.distance + 3.0 * err);
    assert!(ac.distance <= 2.0 && ab.distance >= 0.0);
}

#[test]
fn replay_is_independent_of_worker_count() {
    let d = Domain::unit_disk();
    let w = WallModel::new(&d, Field::constant(1.0), Field::constant(0.5), 0.5).unwrap();
    let run = |workers: usize| {
        worker_pool(workers).unwrap().install(|| {
            let mut e = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 1.0 }, &d, 5000, 77).unwrap();
            e.advance(7.0, &d, &w).unwrap();
            e
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn chunked_sampling_reproduces_the_full_ensemble() {
    let (d, w) = disk_wall();
    let data = InitialData::HalfDomainMaxwellian { theta0: 2.0 };
    let mut full = Ensemble::sample(&data, &d, 3000, 4).unwrap();
    full.advance(5.0, &d, &w).unwrap();
    let mut parts = Vec::new();
    for r in [0..1000, 1000..2500, 2500..3000] {
        let mut e = Ensemble::sample_range(&data, &d, r, 3000, 4).unwrap();
        e.advance(5.0, &d, &w).unwrap();
        parts.extend(e.particles);
    }
    assert_eq!(full.particles, parts);
}
