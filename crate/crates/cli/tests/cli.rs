//! End-to-end behaviour of the `knudsen` binary and the runner library.

use knudsen_cli::{resume, run_experiment, Overrides, RunOptions};
use std::path::{Path, PathBuf};
use std::process::Command;

const BASE: &str = r#"
[domain]
kind = "disk"
radius = 1.0

[initial]
kind = "half_domain_maxwellian"
theta0 = 2.0

[run]
n_particles = 3000
seed = 11
t_max = T_MAX
chunk_size = 1000

[observables]
weights = [{ kind = "r_poly", nu = 2.0 }]
binning = { spatial = [2], speed_shells = 4, sectors = 4 }
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn config_text(t_max: f64, out: &Path) -> String {
    format!(
        "{}\n[output]\ndirectory = {:?}\n",
        BASE.replace("T_MAX", &format!("{t_max:?}")),
        out.display().to_string()
    )
}

fn knudsen() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_knudsen"));
    c.env_remove("KNUDSEN_OUTPUT_DIR");
    c
}

fn quiet() -> RunOptions {
    RunOptions { quiet: true, dry: false }
}

#[test]
fn minimal_config_runs_with_constant_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.toml", &config_text(2.0, &out));
    let status = knudsen().args(["run", "--quiet"]).arg(&cfg).output().unwrap().status;
    assert!(status.success());
    let mut rdr = csv::Reader::from_path(out.join("curve.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let mass_col = header.iter().position(|h| h == "mass").unwrap();
    let masses: Vec<String> = rdr.records().map(|r| r.unwrap()[mass_col].to_string()).collect();
    assert!(masses.len() > 2);
    assert!(masses.iter().all(|m| *m == masses[0]), "{masses:?}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mass"]["max_abs_drift"], 0.0);
    assert!(out.join("final.ckpt").exists());
}

#[test]
fn invalid_c0_is_rejected_with_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{}\n[wall]\nc0 = 1.5\n", config_text(1.0, &tmp.path().join("o")));
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = knudsen().args(["run", "--quiet"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("wall.c0") && err.contains("(0,1)"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn resume_matches_a_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    let direct = run_experiment(
        &write_config(tmp.path(), "d.toml", &config_text(10.0, &tmp.path().join("d"))),
        &Overrides::default(),
        &quiet(),
    )
    .unwrap();
    let first = run_experiment(
        &write_config(tmp.path(), "h.toml", &config_text(5.0, &tmp.path().join("h"))),
        &Overrides::default(),
        &quiet(),
    )
    .unwrap();
    let over = Overrides {
        output_dir: Some(tmp.path().join("r")),
        ..Default::default()
    };
    let resumed = resume(&first.output_dir.join("final.ckpt"), 10.0, None, &over, &quiet()).unwrap();
    let (a, b) = (direct.ensemble.unwrap(), resumed.ensemble.unwrap());
    assert_eq!(a.clock, b.clock);
    assert_eq!(a.particles, b.particles);
    assert_eq!(direct.report.events, resumed.report.events);
    let (ca, cb) = (&direct.report.curve, &resumed.report.curve);
    assert_eq!(ca.times.last(), cb.times.last());
    assert_eq!(ca.l1_distance.last(), cb.l1_distance.last());
    assert_eq!(ca.norms.last(), cb.norms.last());
    assert!(cb.times.windows(2).all(|w| w[1] > w[0]));
    assert!(cb.mass.iter().all(|m| *m == cb.mass[0]));
}

#[test]
fn resume_refuses_physics_changes_and_accepts_new_observables() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run_experiment(
        &write_config(tmp.path(), "h.toml", &config_text(2.0, &tmp.path().join("h"))),
        &Overrides::default(),
        &quiet(),
    )
    .unwrap();
    let ckpt = first.output_dir.join("final.ckpt");

    let bigger = config_text(4.0, &tmp.path().join("x")).replace("n_particles = 3000", "n_particles = 4000");
    let e = resume(&ckpt, 4.0, Some(&write_config(tmp.path(), "n.toml", &bigger)), &Overrides::default(), &quiet()).unwrap_err();
    assert!(format!("{e:#}").contains("run.n_particles"), "{e:#}");

    let hotter = format!("{}\n[wall]\ntheta = {{ kind = \"constant\", value = 2.0 }}\n", config_text(4.0, &tmp.path().join("x")));
    let e = resume(&ckpt, 4.0, Some(&write_config(tmp.path(), "w.toml", &hotter)), &Overrides::default(), &quiet()).unwrap_err();
    assert!(format!("{e:#}").contains("wall"), "{e:#}");

    let other_obs = config_text(4.0, &tmp.path().join("y")).replace("nu = 2.0", "nu = 3.0");
    let r = resume(&ckpt, 4.0, Some(&write_config(tmp.path(), "o.toml", &other_obs)), &Overrides::default(), &quiet()).unwrap();
    assert_eq!(r.report.curve.norm_names, vec!["norm_r_poly_3".to_string()]);
    assert_eq!(r.report.clock, 4.0);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run_experiment(
        &write_config(tmp.path(), "h.toml", &config_text(1.0, &tmp.path().join("h"))),
        &Overrides::default(),
        &quiet(),
    )
    .unwrap();
    let ckpt = first.output_dir.join("final.ckpt");
    let mut bytes = std::fs::read(&ckpt).unwrap();
    let k = bytes.len() / 2;
    bytes[k] = if bytes[k] == b'1' { b'2' } else { b'1' };
    std::fs::write(&ckpt, &bytes).unwrap();
    let out = knudsen().args(["resume", "--quiet", "--until", "2"]).arg(&ckpt).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("checkpoint"));
}

#[test]
fn reports_are_idempotent_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    let mut curves = Vec::new();
    for (k, w) in [1, 1, 3].into_iter().enumerate() {
        let out = tmp.path().join(format!("o{k}"));
        let cfg = write_config(tmp.path(), &format!("c{k}.toml"), &config_text(2.0, &out));
        let o = Overrides {
            workers: Some(w),
            ..Default::default()
        };
        let r = run_experiment(&cfg, &o, &quiet()).unwrap();
        hashes.push(r.report.content_hash.clone());
        curves.push(std::fs::read(out.join("curve.csv")).unwrap());
    }
    assert!(hashes.iter().all(|h| *h == hashes[0]));
    assert!(curves.iter().all(|c| *c == curves[0]));
}

#[test]
fn strict_mode_sets_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    // An expected exponent range far from the observed decay forces a FAIL.
    let text = config_text(8.0, &tmp.path().join("o")).replace(
        "binning = { spatial = [2], speed_shells = 4, sectors = 4 }",
        "binning = { spatial = [2], speed_shells = 4, sectors = 4 }\nfit = { window = [0.5, 8.0], model = { model = \"pure_power\" }, expected_range = [-100.0, -90.0], steeper_passes = false }",
    );
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let lenient = knudsen().args(["run", "--quiet"]).arg(&cfg).output().unwrap();
    assert_eq!(lenient.status.code(), Some(0), "{}", String::from_utf8_lossy(&lenient.stderr));
    assert!(String::from_utf8_lossy(&lenient.stdout).contains("FAIL"));
    let strict = knudsen().args(["run", "--quiet", "--strict"]).arg(&cfg).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn unknown_suite_is_an_error() {
    let out = knudsen().args(["verify", "everything"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn wall_suite_passes_from_the_command_line() {
    let out = knudsen().args(["verify", "wall"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("aggregate PASS"));
}
