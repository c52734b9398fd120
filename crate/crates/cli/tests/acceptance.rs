//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Criterion 8 cannot hold as stated: on the stated set every chord is at
//! most 2 sin(π/8), below the required √(2+√2). It is run and reported,
//! and does not fail the target.

use anyhow::{Context, Result};
use knudsen::analysis::{l1_between, Binning, Verdict};
use knudsen::transport::Rqmc;
use knudsen::{Domain, Ensemble, InitialData, WallModel};
use knudsen_cli::verify::{
    absorbing_checks, check_equilibrium_stationary, check_flux_normalization, check_oracle, check_sigma_derivative,
    doeblin_checks, h_p_checks, lyapunov_matrix, registered_domains,
};
use knudsen_cli::{run_experiment, Overrides, RunOptions, VerdictRecord};
use std::path::PathBuf;
use std::time::Instant;

const SEED: u64 = 1;
const KNOWN_UNATTAINABLE: [usize; 1] = [8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn all_pass(records: &[VerdictRecord]) -> Outcome {
    let failing: Vec<String> = records
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .map(|r| format!("{} {}", r.name, r.verdict))
        .collect();
    Outcome {
        pass: failing.is_empty(),
        detail: if failing.is_empty() {
            format!("{} checks pass", records.len())
        } else {
            format!("not passing: {}", failing.join(", "))
        },
    }
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn dry() -> RunOptions {
    RunOptions { quiet: true, dry: true }
}

fn flux_normalization() -> Result<Outcome> {
    Ok(all_pass(&check_flux_normalization()))
}

fn exit_time_calculus() -> Result<Outcome> {
    let mut records = Vec::new();
    for (name, d) in registered_domains() {
        records.push(check_sigma_derivative(&name, &d, 1000, SEED)?);
        records.push(check_oracle(&name, &d, 10_000, SEED)?);
    }
    let mut o = all_pass(&records);
    let worst_fd = records.iter().step_by(2).filter_map(|r| r.margin).fold(f64::INFINITY, f64::min);
    o.detail = format!("{}; smallest derivative margin {worst_fd:.2e}", o.detail);
    Ok(o)
}

fn conservation() -> Result<Outcome> {
    let run = run_experiment(&config("conservation.toml"), &Overrides::default(), &dry())?;
    let r = &run.report;
    let exact = r.mass.max_abs_drift == 0.0 && r.config.run.n_particles == 100_000 && r.clock == 50.0;

    let d = Domain::unit_disk();
    let w = WallModel::diffuse(&d, 1.0, 0.5)?;
    let n = 100_000;
    let mut f = Ensemble::sample(&InitialData::HalfDomainMaxwellian { theta0: 2.0 }, &d, n, SEED)?;
    let mut g = Ensemble::sample(&InitialData::UniformMaxwellian { theta0: 0.5 }, &d, n, SEED)?;
    let b = Binning {
        spatial: vec![2],
        speed_shells: 4,
        sectors: Some(4),
        ..Default::default()
    };
    let mut prev = l1_between(&f, &g, &b, &d, 2.0)?;
    let first = prev.distance;
    let mut worst_rise = f64::NEG_INFINITY;
    for k in 1..=10 {
        let t = 5.0 * k as f64;
        f.advance(t, &d, &w)?;
        g.advance(t, &d, &w)?;
        let cur = l1_between(&f, &g, &b, &d, 2.0)?;
        let tol = 3.0 * (prev.std_error.powi(2) + cur.std_error.powi(2)).sqrt();
        worst_rise = worst_rise.max((cur.distance - prev.distance) / tol);
        prev = cur;
    }
    let contraction = worst_rise <= 1.0;
    Ok(Outcome {
        pass: exact && contraction,
        detail: format!(
            "mass drift {:e} over {} particles to t={}; coupled distance {first:.3} -> {:.3}, largest rise {worst_rise:.2} of 3 sigma",
            r.mass.max_abs_drift, r.config.run.n_particles, r.clock, prev.distance
        ),
    })
}

fn stationarity() -> Result<Outcome> {
    let r = check_equilibrium_stationary(100_000, 20.0, SEED)?;
    Ok(Outcome {
        pass: r.verdict == Verdict::Pass,
        detail: r.summary,
    })
}

fn convergence_exponent() -> Result<Outcome> {
    let run = run_experiment(&config("convergence.toml"), &Overrides::default(), &dry())?;
    let r = &run.report;
    let v = r.verdicts.iter().find(|v| v.name == "decay_exponent").context("no exponent verdict")?;
    Ok(Outcome {
        pass: v.verdict == Verdict::Pass && r.config.run.n_particles >= 1_000_000,
        detail: format!("N {}; {}", r.config.run.n_particles, v.summary),
    })
}

fn lyapunov() -> Result<Outcome> {
    let mut records = Vec::new();
    lyapunov_matrix(100_000, SEED, 10.0, &mut |r| records.push(r))?;
    let mut o = all_pass(&records);
    let positive = records.iter().all(|r| r.margin.is_some_and(|m| m > 0.0));
    o.pass &= positive && records.len() == 12;
    Ok(o)
}

fn doeblin() -> Result<Outcome> {
    let records = doeblin_checks(1_000_000, 10, SEED)?;
    let mut o = all_pass(&records);
    o.detail = format!("{}; {}; {}", o.detail, records[0].summary, records[1].summary);
    Ok(o)
}

fn h_p() -> Result<Outcome> {
    let records = h_p_checks(100, SEED)?;
    Ok(Outcome {
        pass: records[0].verdict == Verdict::Pass,
        detail: format!("{}; {}", records[0].summary, records[1].summary),
    })
}

fn absorbing() -> Result<Outcome> {
    let mut records = Vec::new();
    absorbing_checks(Rqmc::default(), &mut |r| records.push(r))?;
    Ok(all_pass(&records))
}

fn determinism() -> Result<Outcome> {
    let mut hashes = Vec::new();
    for workers in [1, 4, 8] {
        let o = Overrides {
            workers: Some(workers),
            ..Default::default()
        };
        let r = run_experiment(&config("conservation.toml"), &o, &dry())?.report;
        hashes.push((workers, r.content_hash));
    }
    let same = hashes.iter().all(|(_, h)| *h == hashes[0].1);
    Ok(Outcome {
        pass: same,
        detail: hashes.iter().map(|(w, h)| format!("{w} workers {}", &h[..16])).collect::<Vec<_>>().join(", "),
    })
}

type Criterion = (usize, &'static str, f64, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "flux normalization", 1.0, flux_normalization),
        (2, "exit-time calculus", 60.0, exit_time_calculus),
        (3, "conservation and contraction", 300.0, conservation),
        (4, "stationarity of the equilibrium", 300.0, stationarity),
        (5, "convergence exponent", 7200.0, convergence_exponent),
        (6, "lyapunov audit", 1800.0, lyapunov),
        (7, "doeblin probe", 3600.0, doeblin),
        (8, "unit-disk h_P positivity", 60.0, h_p),
        (9, "absorbing bounds", 600.0, absorbing),
        (10, "determinism across workers", 900.0, determinism),
    ];
    let mut unexpected = Vec::new();
    for (k, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e:#}"),
        });
        let secs = start.elapsed().as_secs_f64();
        let pass = outcome.pass && secs <= budget;
        let known = KNOWN_UNATTAINABLE.contains(&k);
        println!(
            "criterion {k:>2} {} {name}: {} [{secs:.1} s of {budget:.0} s]{}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            if known && !pass { " (known unattainable)" } else { "" }
        );
        if !pass && !known {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
