//! Property suites at desk scale: geometry, wall, lyapunov, doeblin,
//! stationarity, absorbing.

use crate::audits::{absorbing_record, lyapunov_record, VerdictRecord};
use anyhow::{bail, Result};
use knudsen::analysis::{
    doeblin_probe, h_p_check, mass_decay_shape, stationarity_of_ensemble, stationarity_test, DoeblinConfig, EquilibriumModel,
    Verdict,
};
use knudsen::geometry::Exit;
use knudsen::oracle::{bisection_exit_time, fd_gradient, fd_sigma_transport, sampled_diameter};
use knudsen::quadrature::integrate_to_infinity;
use knudsen::rng::{auxiliary, StreamRng};
use knudsen::stats::{ks_critical_one_sample, ks_one_sample, mean_estimate};
use knudsen::transport::Rqmc;
use knudsen::wall::{c4_from_c0, specular_reflect, WallMaxwellian};
use knudsen::weights::LyapunovCase;
use knudsen::{Domain, DomainKind, Ensemble, Field, InitialData, Vector, WallModel, WeightSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Wall,
    Lyapunov,
    Doeblin,
    Stationarity,
    Absorbing,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Geometry,
        Suite::Wall,
        Suite::Lyapunov,
        Suite::Doeblin,
        Suite::Stationarity,
        Suite::Absorbing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Wall => "wall",
            Suite::Lyapunov => "lyapunov",
            Suite::Doeblin => "doeblin",
            Suite::Stationarity => "stationarity",
            Suite::Absorbing => "absorbing",
            Suite::All => "all",
        }
    }

    /// Rough single-core runtime at default sizes, in seconds.
    pub fn budget_seconds(self) -> f64 {
        match self {
            Suite::Geometry => 20.0,
            Suite::Wall => 5.0,
            Suite::Lyapunov => 240.0,
            Suite::Doeblin => 240.0,
            Suite::Stationarity => 60.0,
            Suite::Absorbing => 60.0,
            Suite::All => Suite::EACH.iter().map(|s| s.budget_seconds()).sum(),
        }
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "wall" => Suite::Wall,
            "lyapunov" => Suite::Lyapunov,
            "doeblin" => Suite::Doeblin,
            "stationarity" => Suite::Stationarity,
            "absorbing" => Suite::Absorbing,
            "all" => Suite::All,
            other => bail!("unknown suite '{other}' (expected geometry, wall, lyapunov, doeblin, stationarity, absorbing or all)"),
        })
    }
}

/// Overrides for the suites. `particles` replaces the Monte Carlo sample
/// size of the ensemble audits.
#[derive(Debug, Clone, Copy)]
pub struct SuiteParams {
    pub seed: u64,
    pub particles: Option<usize>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { seed: 1, particles: None }
    }
}

/// Runs a suite, calling `emit` on every record as it completes.
pub fn run_suite(suite: Suite, p: SuiteParams, emit: &mut dyn FnMut(&VerdictRecord)) -> Result<Vec<VerdictRecord>> {
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut out = Vec::new();
    for s in suites {
        let mut push = |r: VerdictRecord| {
            emit(&r);
            out.push(r);
        };
        match s {
            Suite::Geometry => geometry_suite(p.seed, &mut push)?,
            Suite::Wall => wall_suite(p.seed, &mut push)?,
            Suite::Lyapunov => lyapunov_suite(p.particles.unwrap_or(100_000), p.seed, 10.0, &mut push)?,
            Suite::Doeblin => doeblin_suite(p.particles.unwrap_or(1_000_000), p.seed, &mut push)?,
            Suite::Stationarity => stationarity_suite(p.particles.unwrap_or(100_000), p.seed, &mut push)?,
            Suite::Absorbing => absorbing_suite(Rqmc::default(), &mut push)?,
            Suite::All => unreachable!(),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- geometry

/// The domains every geometry check runs on.
pub fn registered_domains() -> Vec<(String, Domain)> {
    [
        ("disk", DomainKind::Disk { radius: 1.0 }),
        ("ellipse", DomainKind::Ellipse { a: 2.0, b: 1.0 }),
        ("ellipsoid", DomainKind::Ellipsoid { a: 1.0, b: 0.8, c: 0.6 }),
        ("star", DomainKind::StarPerturbed { r0: 1.0, amplitude: 0.1, mode: 5 }),
    ]
    .into_iter()
    .map(|(n, k)| (n.to_string(), Domain::new(k).expect("registered domain")))
    .collect()
}

fn random_velocity(dim: usize, rng: &mut StreamRng) -> Vector {
    let mut v = Vector::zeros();
    for i in 0..dim {
        v[i] = rng.sample(StandardNormal);
    }
    v
}

fn random_state(d: &Domain, rng: &mut StreamRng) -> (Vector, Vector) {
    let u: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
    (d.map_unit_cube(&u).0, random_velocity(d.dim(), rng))
}

/// Worst `|v·∇σ + 1|` over `samples` interior states with non-grazing hits.
pub fn check_sigma_derivative(name: &str, d: &Domain, samples: usize, seed: u64) -> Result<VerdictRecord> {
    let mut rng = auxiliary(seed, 101);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let (x, v) = random_state(d, &mut rng);
        if d.levelset(&x) > -1e-3 {
            continue;
        }
        let q = d.boundary_hit(&x, &v)?;
        if v.dot(&d.inward_normal(&q)?).abs() <= 0.1 * v.norm() {
            continue;
        }
        worst = worst.max((fd_sigma_transport(d, &x, &v, 1e-5) + 1.0).abs());
        taken += 1;
    }
    Ok(VerdictRecord::at_most(
        format!("geometry/{name}/transport_derivative"),
        worst,
        1e-4,
        &format!("max |v.grad sigma + 1| over {samples}"),
    ))
}

/// Worst gap to the bisection reference over `rays` random rays, relative
/// to the bounding radius travelled.
pub fn check_oracle(name: &str, d: &Domain, rays: usize, seed: u64) -> Result<VerdictRecord> {
    let mut rng = auxiliary(seed, 102);
    let states: Vec<(Vector, Vector)> = (0..rays).map(|_| random_state(d, &mut rng)).collect();
    let gaps: Vec<f64> = states
        .par_iter()
        .map(|(x, v)| {
            let fast = d.exit_time(x, v).unwrap_or(f64::NAN);
            (fast - bisection_exit_time(d, x, v)).abs() * v.norm() / d.bounding_radius()
        })
        .collect();
    let worst = gaps.iter().copied().fold(0.0, |a: f64, g| if g.is_nan() { f64::INFINITY } else { a.max(g) });
    Ok(VerdictRecord::at_most(
        format!("geometry/{name}/bisection_agreement"),
        worst,
        1e-9,
        &format!("max relative gap over {rays} rays"),
    ))
}

/// `σ(x,v) + σ(x,−v) ≤ d(D)/|v|`, hits on the boundary, scaling.
pub fn check_chords(name: &str, d: &Domain, samples: usize, seed: u64) -> Result<VerdictRecord> {
    let mut rng = auxiliary(seed, 103);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_level: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..samples {
        let (x, v) = random_state(d, &mut rng);
        let s = v.norm();
        let (f, b) = (d.exit_time(&x, &v)?, d.exit_time(&x, &-v)?);
        worst = worst.max((f + b) * s - d.diameter());
        if let Exit::Hit { point, .. } = d.exit(&x, &v)? {
            worst_level = worst_level.max(d.levelset(&point).abs());
        }
        let lambda = 0.1 + 10.0 * rng.random::<f64>();
        worst_scale = worst_scale.max((d.exit_time(&x, &(v * lambda))? * lambda - f).abs() * s / d.bounding_radius());
    }
    let tol = 4e-12 * d.bounding_radius();
    let pass = worst <= tol && worst_level <= 1e-9 && worst_scale <= 1e-11;
    Ok(VerdictRecord::new(
        format!("geometry/{name}/chord_bound"),
        Verdict::from_pass(pass),
        Some(tol - worst),
        format!("max (sigma+ + sigma-)|v| - d = {worst:.2e}; max |xi(q)| = {worst_level:.1e}; scaling gap {worst_scale:.1e}"),
    ))
}

/// Unit inward normals that decrease the level set and match the
/// finite-difference gradient.
pub fn check_normals(name: &str, d: &Domain, samples: usize) -> Result<VerdictRecord> {
    let mut worst_norm: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut bad_direction = 0;
    for x in d.boundary_samples(samples) {
        let n = d.inward_normal(&x)?;
        worst_norm = worst_norm.max((n.norm() - 1.0).abs());
        if d.levelset(&(x + n * 1e-6)) >= d.levelset(&x) {
            bad_direction += 1;
        }
        let g = fd_gradient(d, &x);
        worst_fd = worst_fd.max((n + g / g.norm()).norm());
    }
    let pass = worst_norm < 1e-12 && worst_fd < 1e-6 && bad_direction == 0;
    Ok(VerdictRecord::new(
        format!("geometry/{name}/normals"),
        Verdict::from_pass(pass),
        Some(1e-6 - worst_fd),
        format!("| |n|-1 | <= {worst_norm:.1e}, fd gap {worst_fd:.1e}, wrong side {bad_direction}"),
    ))
}

/// Stored diameter against boundary sampling and the bounding radius.
pub fn check_diameter(name: &str, d: &Domain) -> VerdictRecord {
    let sampled = if d.dim() == 2 {
        sampled_diameter(d, 2048)
    } else {
        let pts = d.boundary_samples(800);
        pts.iter()
            .flat_map(|a| pts.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max)
    };
    let lower_ok = d.diameter() >= sampled * (1.0 - 1e-12);
    let upper_ok = d.diameter() <= 2.0 * d.bounding_radius() * (1.0 + 1e-3);
    let inradius_ok = d.diameter() >= 2.0 * d.inradius();
    VerdictRecord::new(
        format!("geometry/{name}/diameter"),
        Verdict::from_pass(lower_ok && upper_ok && inradius_ok),
        Some(d.diameter() - sampled),
        format!("d = {:.6}, sampled {:.6}, 2R = {:.6}", d.diameter(), sampled, 2.0 * d.bounding_radius()),
    )
}

fn geometry_suite(seed: u64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    for (name, d) in registered_domains() {
        push(check_sigma_derivative(&name, &d, 1000, seed)?);
        push(check_oracle(&name, &d, 10_000, seed)?);
        push(check_chords(&name, &d, 10_000, seed)?);
        push(check_normals(&name, &d, 1000)?);
        push(check_diameter(&name, &d));
    }
    Ok(())
}

// -------------------------------------------------------------------- wall

/// `∫_{v·n<0} M |v·n| dv = 1` for `θ ∈ {0.25, 1, 4}`, `n ∈ {2, 3}`.
pub fn check_flux_normalization() -> Vec<VerdictRecord> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        for theta in [0.25, 1.0, 4.0] {
            let q = WallMaxwellian::new(dim, theta).flux_normalization();
            let gap = (q.value - 1.0).abs();
            out.push(VerdictRecord::at_most(
                format!("wall/flux_normalization/n{dim}/theta{theta}"),
                gap,
                1e-10,
                &format!("|flux - 1| (quadrature error {:.1e})", q.error),
            ));
        }
    }
    out
}

pub fn check_c4() -> Result<VerdictRecord> {
    let mut worst: f64 = 0.0;
    for c0 in [0.01, 0.1, 0.5, 15.0 / 16.0, 0.99] {
        let c4 = c4_from_c0(c0)?;
        worst = worst.max(((1.0 - c4).powi(4) - (1.0 - c0)).abs());
    }
    let half = (c4_from_c0(15.0 / 16.0)? - 0.5).abs();
    Ok(VerdictRecord::at_most("wall/c4_inversion", worst.max(half), 1e-14, "max |(1-c4)^4 - (1-c0)|"))
}

fn boundary_frame(dim: usize) -> (Domain, Vector, Vector) {
    let d = if dim == 2 {
        Domain::unit_disk()
    } else {
        Domain::new(DomainKind::Ellipsoid { a: 1.0, b: 1.0, c: 1.0 }).expect("sphere")
    };
    let x = d.boundary_point(&[0.1, 0.3]);
    let n = d.inward_normal(&x).expect("boundary point");
    (d, x, n)
}

/// KS test of the re-emitted normal speed against `1 − e^{−u²/2θ}`.
pub fn check_diffuse_ks(n: usize, seed: u64) -> Result<Vec<VerdictRecord>> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        for theta in [0.25, 1.0, 4.0] {
            let (d, x, nx) = boundary_frame(dim);
            let w = WallModel::new(&d, Field::constant(theta), Field::constant(1.0), 0.5)?;
            let mut rng = auxiliary(seed, 200 + dim as u64);
            let mut wrong_side = 0;
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let (v, _) = w.sample_diffuse(&x, &nx, &mut rng);
                    let un = v.dot(&nx);
                    if un <= 0.0 {
                        wrong_side += 1;
                    }
                    un
                })
                .collect();
            let ks = ks_one_sample(&u, |s| 1.0 - (-s * s / (2.0 * theta)).exp());
            let crit = ks_critical_one_sample(0.01, n);
            out.push(VerdictRecord::new(
                format!("wall/diffuse_normal_ks/n{dim}/theta{theta}"),
                Verdict::from_pass(ks <= crit && wrong_side == 0),
                Some(crit - ks),
                format!("KS {ks:.5} (1% critical {crit:.5}), non-outgoing {wrong_side}"),
            ));
        }
    }
    Ok(out)
}

/// Sample means of `v·n` and `|v|²` against quadrature of the flux law.
pub fn check_diffuse_moments(n: usize, seed: u64) -> Result<Vec<VerdictRecord>> {
    let mut out = Vec::new();
    for dim in [2, 3] {
        let theta = 1.0;
        let (d, x, nx) = boundary_frame(dim);
        let w = WallModel::new(&d, Field::constant(theta), Field::constant(1.0), 0.5)?;
        let mut rng = auxiliary(seed, 210 + dim as u64);
        let mut un = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        for _ in 0..n {
            let (v, _) = w.sample_diffuse(&x, &nx, &mut rng);
            un.push(v.dot(&nx));
            e.push(v.norm_squared());
        }
        let g = |k: i32| integrate_to_infinity(move |u| u.powi(k) * (-u * u / (2.0 * theta)).exp(), 0.0, 1e-14, 1e-13).value;
        let mean_un = g(2) / g(1);
        let mean_e = g(3) / g(1) + (dim as f64 - 1.0) * theta;
        for (label, sample, target) in [("normal_speed_mean", &un, mean_un), ("energy_mean", &e, mean_e)] {
            let est = mean_estimate(sample);
            let z = (est.value - target).abs() / est.std_error;
            out.push(VerdictRecord::new(
                format!("wall/{label}/n{dim}"),
                Verdict::from_pass(z <= 3.0),
                Some(3.0 - z),
                format!("sample {:.5} vs quadrature {:.5} ({z:.2} se)", est.value, target),
            ));
        }
    }
    Ok(out)
}

/// Diffuse fraction at `α ≡ 0.5` and energy conservation at `α ≡ 0`.
pub fn check_mixture(n: usize, seed: u64) -> Result<Vec<VerdictRecord>> {
    let (d, x, nx) = boundary_frame(2);
    let half = WallModel::new(&d, Field::constant(1.0), Field::constant(0.5), 0.5)?;
    let specular = WallModel::new_relaxed(&d, Field::constant(1.0), Field::constant(0.0), 0.5)?;
    let mut rng = auxiliary(seed, 220);
    let mut diffuse = 0usize;
    let mut energy_gap: f64 = 0.0;
    let mut not_outgoing = 0usize;
    for _ in 0..n {
        let mut v_in = random_velocity(2, &mut rng);
        if v_in.dot(&nx) >= 0.0 {
            v_in = -v_in;
        }
        if v_in.dot(&nx) == 0.0 {
            continue;
        }
        let r = half.apply_boundary(&x, &v_in, &nx, &mut rng)?;
        diffuse += r.diffuse as usize;
        if r.v.dot(&nx) <= 0.0 && !r.grazing {
            not_outgoing += 1;
        }
        let s = specular.apply_boundary(&x, &v_in, &nx, &mut rng)?;
        energy_gap = energy_gap.max((s.v.norm_squared() - v_in.norm_squared()).abs() / v_in.norm_squared());
    }
    let frac = diffuse as f64 / n as f64;
    let se = 0.5 / (n as f64).sqrt();
    let z = (frac - 0.5).abs() / se;
    Ok(vec![
        VerdictRecord::new(
            "wall/mixture_fraction",
            Verdict::from_pass(z <= 3.0 && not_outgoing == 0),
            Some(3.0 - z),
            format!("diffuse fraction {frac:.5} over {n} events ({z:.2} se), non-outgoing {not_outgoing}"),
        ),
        VerdictRecord::at_most("wall/specular_energy", energy_gap, 1e-14, "max relative energy change"),
    ])
}

/// Isometry and normal flip of the specular map.
pub fn check_specular(n: usize, seed: u64) -> VerdictRecord {
    let mut rng = auxiliary(seed, 230);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let v = random_velocity(3, &mut rng);
        let nn = random_velocity(3, &mut rng).normalize();
        let eta = specular_reflect(&v, &nn);
        let iso = (eta.norm_squared() - v.norm_squared()).abs() / v.norm_squared();
        let flip = (eta.dot(&nn) + v.dot(&nn)).abs() / v.norm();
        worst = worst.max(iso).max(flip);
    }
    VerdictRecord::at_most("wall/specular_isometry", worst, 1e-14, &format!("max relative defect over {n} pairs"))
}

fn wall_suite(seed: u64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    check_flux_normalization().into_iter().for_each(&mut *push);
    push(check_c4()?);
    check_diffuse_ks(100_000, seed)?.into_iter().for_each(&mut *push);
    check_diffuse_moments(1_000_000, seed)?.into_iter().for_each(&mut *push);
    check_mixture(1_000_000, seed)?.into_iter().for_each(&mut *push);
    push(check_specular(10_000, seed));
    Ok(())
}

// ---------------------------------------------------------------- lyapunov

/// The three cases, each with Maxwellian and small-speed data, on the unit
/// disk and the 2:1 ellipse, diffuse wall at `θ ≡ 1`.
pub fn lyapunov_matrix(n: usize, seed: u64, t_end: f64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    let cases = [
        ("case1_i3_eps0.6", LyapunovCase::PowerLog { i: 3, eps: 0.6 }),
        ("case2_i2.5", LyapunovCase::Power { i: 2.5 }),
        ("case3", LyapunovCase::SlowLog),
    ];
    let data = [
        ("maxwellian", InitialData::UniformMaxwellian { theta0: 1.0 }),
        ("annulus_0.01_0.02", InitialData::AnnulusSpeed { v_min: 0.01, v_max: 0.02 }),
    ];
    for (dname, kind) in [("disk", DomainKind::Disk { radius: 1.0 }), ("ellipse", DomainKind::Ellipse { a: 2.0, b: 1.0 })] {
        let d = Domain::new(kind)?;
        let w = WallModel::diffuse(&d, 1.0, 0.5)?;
        for (cname, case) in cases {
            for (iname, init) in &data {
                push(lyapunov_record(
                    &format!("lyapunov/{dname}/{cname}/{iname}"),
                    init,
                    t_end,
                    case,
                    n,
                    seed,
                    32,
                    &d,
                    &w,
                )?);
            }
        }
    }
    Ok(())
}

fn lyapunov_suite(n: usize, seed: u64, t_end: f64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    lyapunov_matrix(n, seed, t_end, push)
}

// ----------------------------------------------------------------- doeblin

/// Diffuse probe on the unit disk (expected PASS) and the pure specular
/// control (expected not PASS; the record passes when the probe does not).
pub fn doeblin_checks(n: usize, initial_cells: usize, seed: u64) -> Result<Vec<VerdictRecord>> {
    let d = Domain::unit_disk();
    let cfg = DoeblinConfig {
        n_particles: n,
        n_initial_cells: initial_cells,
        seed,
        ..Default::default()
    };
    let diffuse = WallModel::diffuse(&d, 1.0, 0.5)?;
    let r = doeblin_probe(&cfg, &d, &diffuse)?;
    let summary = format!(
        "R {} T {} min density {:.3e}, constant {:.3e}, empty pairs {}",
        cfg.r, r.t_end, r.min_density, r.minorization_constant, r.empty_pairs
    );
    let main = VerdictRecord::new("doeblin/diffuse_probe", r.verdict, Some(r.min_density - cfg.tau_min), summary).with_record(&r);
    let specular = WallModel::new_relaxed(&d, Field::constant(1.0), Field::constant(0.0), 0.5)?;
    let control_cfg = DoeblinConfig {
        n_initial_cells: initial_cells.min(2),
        ..cfg.clone()
    };
    let c = doeblin_probe(&control_cfg, &d, &specular)?;
    let control = VerdictRecord::new(
        "doeblin/specular_control",
        Verdict::from_pass(c.verdict != Verdict::Pass),
        None,
        format!("probe verdict {} ({} empty pairs)", c.verdict, c.empty_pairs),
    )
    .with_record(&c);
    Ok(vec![main, control])
}

/// The two-bounce kernel on the unit disk: over the stated set with its
/// chord bounds, and over the whole circle.
pub fn h_p_checks(pairs: usize, seed: u64) -> Result<Vec<VerdictRecord>> {
    let r = h_p_check(1.0, 1.0, 3.0, pairs, seed)?;
    Ok(vec![
        VerdictRecord::new(
            "doeblin/h_p_stated_set",
            r.literal_verdict,
            Some(r.literal_min),
            format!(
                "{} of {} pairs with empty set; {} of {} nodes violate the chord bound (max chord {:.4} < {:.4})",
                r.literal_empty_pairs,
                r.pairs,
                r.chord_violations,
                r.literal_nodes,
                r.literal_max_chord,
                (2.0 + 2f64.sqrt()).sqrt()
            ),
        )
        .with_record(&r),
        VerdictRecord::new(
            "doeblin/h_p_full_circle",
            r.full_verdict,
            Some(r.kappa),
            format!("kappa = min h_P over {} pairs = {:.4e}", r.pairs, r.kappa),
        ),
    ])
}

fn doeblin_suite(n: usize, seed: u64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    doeblin_checks(n, 10, seed)?.into_iter().for_each(&mut *push);
    h_p_checks(100, seed)?.into_iter().for_each(&mut *push);
    Ok(())
}

// ------------------------------------------------------------ stationarity

pub fn check_equilibrium_stationary(n: usize, horizon: f64, seed: u64) -> Result<VerdictRecord> {
    let d = Domain::unit_disk();
    let w = WallModel::diffuse(&d, 1.0, 0.5)?;
    let r = stationarity_test(&EquilibriumModel::ConstantTheta { theta: 1.0 }, horizon, n, seed, &d, &w)?;
    Ok(stationarity_record("stationarity/constant_theta", &r))
}

fn stationarity_record(name: &str, r: &knudsen::analysis::StationarityReport) -> VerdictRecord {
    VerdictRecord::new(
        name,
        r.verdict,
        Some(r.speed_ks_critical - r.speed_ks),
        format!(
            "KS {:.5}/{:.5} {}, spatial chi2 {:.1}/{:.1} {}, direction chi2 {:.1}/{:.1} {}",
            r.speed_ks,
            r.speed_ks_critical,
            r.speed_verdict,
            r.spatial_chi2.statistic,
            r.spatial_chi2.critical,
            r.spatial_verdict,
            r.direction_chi2.statistic,
            r.direction_chi2.critical,
            r.direction_verdict
        ),
    )
    .with_record(r)
}

fn stationarity_suite(n: usize, seed: u64, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    push(check_equilibrium_stationary(n, 20.0, seed)?);
    let d = Domain::unit_disk();
    let theta = Field::Sinusoidal {
        mean: 1.5,
        amplitude: 0.5,
        mode: 1,
        phase: 0.0,
    };
    let w = WallModel::new(&d, theta, Field::constant(1.0), 0.5)?;
    let mut e = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 1.5 }, &d, n, seed)?;
    e.advance(200.0, &d, &w)?;
    let r = stationarity_of_ensemble(e, 200.0, &d, &w)?;
    push(stationarity_record("stationarity/varying_theta_long_run", &r));
    let wc = WallModel::diffuse(&d, 1.0, 0.5)?;
    let e = Ensemble::sample(&InitialData::AnnulusSpeed { v_min: 0.0, v_max: 3.0 }, &d, n, seed)?;
    let r = stationarity_of_ensemble(e, 20.0, &d, &wc)?;
    push(
        VerdictRecord::new(
            "stationarity/wrong_candidate_rejected",
            Verdict::from_pass(r.verdict == Verdict::Fail),
            None,
            format!("uniform speed ball: test verdict {}", r.verdict),
        )
        .with_record(&r),
    );
    Ok(())
}

// --------------------------------------------------------------- absorbing

/// Exponential and polynomial survival bounds for annulus data, and the
/// polynomial decay of Maxwellian data.
pub fn absorbing_checks(rq: Rqmc, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    let d = Domain::unit_disk();
    let annulus = InitialData::AnnulusSpeed { v_min: 1.0, v_max: 2.0 };
    push(absorbing_record(
        "absorbing/exp_sigma",
        &annulus,
        &WeightSpec::ExpSigma,
        &[0.5, 1.0, 2.0, 4.0],
        &d,
        rq,
    )?);
    for nu in [1.5, 2.0, 3.0] {
        push(absorbing_record(
            &format!("absorbing/r_poly_{nu}"),
            &annulus,
            &WeightSpec::RPoly { nu },
            &[1.0, 3.0, 10.0, 30.0],
            &d,
            rq,
        )?);
    }
    let s = mass_decay_shape(&InitialData::UniformMaxwellian { theta0: 1.0 }, &[5.0, 10.0, 20.0, 40.0], &d, rq)?;
    push(
        VerdictRecord::new(
            "absorbing/maxwellian_decay_is_polynomial",
            Verdict::from_pass(s.polynomial),
            None,
            format!("log-log slopes {:?}, semilog rates {:?}", fmt3(&s.loglog_slopes), fmt3(&s.semilog_rates)),
        )
        .with_record(&s),
    );
    Ok(())
}

fn fmt3(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3}")).collect()
}

fn absorbing_suite(rq: Rqmc, push: &mut dyn FnMut(VerdictRecord)) -> Result<()> {
    absorbing_checks(rq, push)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("geometri".parse::<Suite>().is_err());
    }

    #[test]
    fn wall_checks_pass() {
        for r in check_flux_normalization() {
            assert_eq!(r.verdict, Verdict::Pass, "{}", r.line());
        }
        assert_eq!(check_c4().unwrap().verdict, Verdict::Pass);
        assert_eq!(check_specular(1000, 1).verdict, Verdict::Pass);
        for r in check_diffuse_ks(20_000, 1).unwrap() {
            assert_eq!(r.verdict, Verdict::Pass, "{}", r.line());
        }
    }
}
