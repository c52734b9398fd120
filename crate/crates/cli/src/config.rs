//! Experiment configuration: a TOML tree with defaults, validation that
//! names the offending key, and resolution into a fully explicit echo.

use anyhow::{anyhow, bail, Context, Result};
use knudsen::analysis::{Binning, DecayModel, DoeblinConfig};
use knudsen::transport::Rqmc;
use knudsen::weights::LyapunovCase;
use knudsen::{Domain, DomainKind, Field, InitialData, WallModel, WeightSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MIN_PARTICLES: usize = 1000;
pub const DEFAULT_CHECKPOINTS: usize = 32;
pub const DEFAULT_T_FIRST: f64 = 0.1;
pub const DEFAULT_CHUNK: usize = 250_000;
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;
pub const DEFAULT_OUTPUT_DIR: &str = "knudsen-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    #[serde(default)]
    pub wall: WallConfig,
    pub initial: InitialData,
    pub run: RunConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub verifications: Vec<VerificationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallConfig {
    #[serde(default = "unit_field")]
    pub theta: Field,
    #[serde(default = "unit_field")]
    pub alpha: Field,
    #[serde(default = "default_c0")]
    pub c0: f64,
    /// Accept `α < c₀` somewhere on the wall (control experiments only).
    #[serde(default)]
    pub allow_below_c0: bool,
}

fn unit_field() -> Field {
    Field::constant(1.0)
}

fn default_c0() -> f64 {
    0.5
}

impl Default for WallConfig {
    fn default() -> Self {
        WallConfig {
            theta: unit_field(),
            alpha: unit_field(),
            c0: default_c0(),
            allow_below_c0: false,
        }
    }
}

impl WallConfig {
    pub fn build(&self, domain: &Domain) -> knudsen::Result<WallModel> {
        if self.allow_below_c0 {
            WallModel::new_relaxed(domain, self.theta, self.alpha, self.c0)
        } else {
            WallModel::new(domain, self.theta, self.alpha, self.c0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_particles: usize,
    /// Required; `--seed` can supply it.
    #[serde(default)]
    pub seed: Option<u64>,
    pub t_max: f64,
    /// Explicit observation times; otherwise `checkpoints` log-spaced times
    /// over `[t_first, t_max]`. Time 0 is always observed.
    #[serde(default)]
    pub checkpoint_times: Option<Vec<f64>>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_t_first")]
    pub t_first: f64,
    /// Worker threads; does not affect results.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Particles simulated at once; results do not depend on it.
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn default_checkpoints() -> usize {
    DEFAULT_CHECKPOINTS
}
fn default_t_first() -> f64 {
    DEFAULT_T_FIRST
}
fn default_chunk() -> usize {
    DEFAULT_CHUNK
}
fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default)]
    pub weights: Vec<WeightSpec>,
    #[serde(default)]
    pub binning: Binning,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        ObservablesConfig {
            weights: Vec::new(),
            binning: Binning::default(),
            equilibrium: EquilibriumConfig::Auto,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquilibriumConfig {
    /// Closed form when the wall temperature is constant, long run otherwise.
    #[default]
    Auto,
    ConstantTheta { theta: f64 },
    /// Reference ensemble drawn from the initial data with its own seed and
    /// evolved to `t_ref`.
    LongRun {
        t_ref: f64,
        n_particles: usize,
        seed: u64,
    },
    /// No distance to equilibrium.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Defaults to `[t_max/10, t_max]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Defaults to the log-corrected model with `p = n + 1`.
    #[serde(default)]
    pub model: Option<DecayModel>,
    /// Turns the fitted exponent into a verdict.
    #[serde(default)]
    pub expected_range: Option<[f64; 2]>,
    /// Decay steeper than the range still passes.
    #[serde(default = "yes")]
    pub steeper_passes: bool,
}

fn yes() -> bool {
    true
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            enabled: true,
            window: None,
            model: None,
            expected_range: None,
            steeper_passes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerificationConfig {
    Lyapunov {
        /// 1, 2 or 3.
        case: u32,
        #[serde(default)]
        i: Option<f64>,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default = "ten")]
        t_end: f64,
        #[serde(default)]
        n_particles: Option<usize>,
        #[serde(default = "default_checkpoints")]
        checkpoints: usize,
        /// Defaults to the run's initial data.
        #[serde(default)]
        initial: Option<InitialData>,
    },
    Doeblin(DoeblinConfig),
    Stationarity {
        #[serde(default = "twenty")]
        horizon: f64,
        #[serde(default)]
        n_particles: Option<usize>,
    },
    Absorbing {
        weight: WeightSpec,
        times: Vec<f64>,
        #[serde(default)]
        rqmc: Option<Rqmc>,
    },
    HP {
        #[serde(default = "hundred")]
        pairs: usize,
        #[serde(default = "three")]
        r: f64,
    },
}

fn ten() -> f64 {
    10.0
}
fn twenty() -> f64 {
    20.0
}
fn three() -> f64 {
    3.0
}
fn hundred() -> usize {
    100
}

impl VerificationConfig {
    pub fn name(&self) -> &'static str {
        match self {
            VerificationConfig::Lyapunov { .. } => "lyapunov",
            VerificationConfig::Doeblin(_) => "doeblin",
            VerificationConfig::Stationarity { .. } => "stationarity",
            VerificationConfig::Absorbing { .. } => "absorbing",
            VerificationConfig::HP { .. } => "h_p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Overridden by `--output-dir`; defaults to `$KNUDSEN_OUTPUT_DIR` or `knudsen-out`.
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write the final ensemble for `resume`.
    #[serde(default = "yes")]
    pub checkpoint: bool,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            formats: default_formats(),
            checkpoint: true,
        }
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub particles: Option<usize>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub t_max: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("config: {}", e.message()).context(describe_toml_error(&e)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = Some(s);
        }
        if let Some(n) = o.particles {
            self.run.n_particles = n;
        }
        if let Some(w) = o.workers {
            self.run.workers = Some(w);
        }
        if let Some(d) = &o.output_dir {
            self.output.directory = Some(d.clone());
        }
        if let Some(t) = o.t_max {
            self.run.t_max = t;
        }
    }

    pub fn build_domain(&self) -> Result<Domain> {
        Ok(Domain::new(self.domain)?)
    }

    /// Checks every constraint and returns the config with all defaults made
    /// explicit (schedule, equilibrium, fit window and model, verification
    /// parameters).
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let domain = self.build_domain()?;
        let wall = self.wall.build(&domain)?;
        self.initial.validate(&domain)?;
        let mut out = self.clone();
        let run = &mut out.run;
        let seed = run.seed.ok_or_else(|| invalid("run.seed", "is required (no wall-clock seeding)"))?;
        run.seed = Some(seed);
        if run.n_particles < MIN_PARTICLES {
            bail!(invalid("run.n_particles", format!("must be at least {MIN_PARTICLES}")));
        }
        if !(run.t_max > 0.0 && run.t_max.is_finite()) {
            bail!(invalid("run.t_max", "must be finite and > 0"));
        }
        if run.chunk_size == 0 || run.chunk_size % SUM_BLOCK != 0 {
            bail!(invalid("run.chunk_size", format!("must be a positive multiple of {SUM_BLOCK}")));
        }
        if run.max_events == 0 {
            bail!(invalid("run.max_events", "must be positive"));
        }
        if run.workers == Some(0) {
            bail!(invalid("run.workers", "must be positive"));
        }
        run.checkpoint_times = Some(schedule(run)?);
        let dim = domain.dim();
        for w in &out.observables.weights {
            w.validate(dim).map_err(|e| anyhow!(e).context("observables.weights"))?;
        }
        out.observables.equilibrium = match out.observables.equilibrium {
            EquilibriumConfig::Auto => match self.wall.theta {
                Field::Constant { value } => EquilibriumConfig::ConstantTheta { theta: value },
                _ => EquilibriumConfig::LongRun {
                    t_ref: 200.0,
                    n_particles: out.run.n_particles.min(200_000),
                    seed: seed ^ 0x5eed_0f_e0,
                },
            },
            EquilibriumConfig::ConstantTheta { theta } => {
                if !self.wall.theta.is_constant() {
                    bail!(invalid(
                        "observables.equilibrium.kind",
                        "constant_theta needs a constant wall temperature"
                    ));
                }
                if !(theta > 0.0) {
                    bail!(invalid("observables.equilibrium.theta", "must be > 0"));
                }
                EquilibriumConfig::ConstantTheta { theta }
            }
            EquilibriumConfig::LongRun { t_ref, n_particles, seed } => {
                if !(t_ref > 0.0 && t_ref.is_finite()) {
                    bail!(invalid("observables.equilibrium.t_ref", "must be finite and > 0"));
                }
                if n_particles < MIN_PARTICLES {
                    bail!(invalid(
                        "observables.equilibrium.n_particles",
                        format!("must be at least {MIN_PARTICLES}")
                    ));
                }
                EquilibriumConfig::LongRun { t_ref, n_particles, seed }
            }
            EquilibriumConfig::None => EquilibriumConfig::None,
        };
        if !matches!(out.observables.equilibrium, EquilibriumConfig::None) {
            knudsen::analysis::BinLayout::new(&domain, &out.observables.binning, wall.theta_max)?;
        }
        let fit = &mut out.observables.fit;
        let window = fit.window.unwrap_or([out.run.t_max / 10.0, out.run.t_max]);
        if !(window[0] >= 0.0 && window[0] < window[1]) {
            bail!(invalid("observables.fit.window", "need 0 <= start < end"));
        }
        fit.window = Some(window);
        // Short runs cannot host the log-corrected model; default to a pure power there.
        let log_admissible = window[0] > std::f64::consts::E - 1.0;
        let model = fit.model.unwrap_or(if log_admissible {
            DecayModel::PowerWithLog { p: dim as f64 + 1.0 }
        } else {
            DecayModel::PurePower
        });
        if let DecayModel::PowerWithLog { p } = model {
            if !p.is_finite() {
                bail!(invalid("observables.fit.model.p", "must be finite"));
            }
            if window[0] <= std::f64::consts::E - 1.0 && fit.enabled {
                bail!(invalid("observables.fit.window", "the log-corrected model needs start > e - 1"));
            }
        }
        fit.model = Some(model);
        if let Some([lo, hi]) = fit.expected_range {
            if !(lo < hi) {
                bail!(invalid("observables.fit.expected_range", "need low < high"));
            }
        }
        let n_default = out.run.n_particles;
        for (k, v) in out.verifications.iter_mut().enumerate() {
            resolve_verification(v, dim, n_default, &self.initial, &domain).with_context(|| format!("verifications[{k}]"))?;
        }
        if out.output.formats.is_empty() {
            bail!(invalid("output.formats", "list at least one of csv, json"));
        }
        Ok(out)
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.expect("resolved config carries a seed")
    }

    pub fn times(&self) -> &[f64] {
        self.run.checkpoint_times.as_deref().expect("resolved config carries its schedule")
    }

    /// The resolved echo with fields that must not influence results blanked:
    /// worker count and output directory.
    pub fn hashed_view(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.run.workers = None;
        c.output.directory = None;
        c
    }
}

fn resolve_verification(v: &mut VerificationConfig, dim: usize, n_default: usize, initial: &InitialData, domain: &Domain) -> Result<()> {
    match v {
        VerificationConfig::Lyapunov {
            case,
            i,
            eps,
            t_end,
            n_particles,
            checkpoints,
            initial: init,
        } => {
            let (ci, ce) = match *case {
                1 => (i.unwrap_or(dim as f64 + 1.0), eps.unwrap_or(0.6)),
                2 => (i.unwrap_or(dim as f64 + 0.5), eps.unwrap_or(0.0)),
                3 => (i.unwrap_or(1.0), eps.unwrap_or(0.0)),
                _ => bail!(invalid("lyapunov.case", "must be 1, 2 or 3")),
            };
            LyapunovCase::from_number(*case, ci, ce)?.validate(dim)?;
            *i = Some(ci);
            *eps = Some(ce);
            if !(*t_end >= 0.0 && t_end.is_finite()) {
                bail!(invalid("lyapunov.t_end", "must be finite and >= 0"));
            }
            if *checkpoints < knudsen::analysis::lyapunov::MIN_CHECKPOINTS {
                bail!(invalid("lyapunov.checkpoints", "need at least 32 trapezoid intervals"));
            }
            *n_particles = Some(n_particles.unwrap_or(n_default));
            let data = init.clone().unwrap_or_else(|| initial.clone());
            data.validate(domain)?;
            *init = Some(data);
        }
        VerificationConfig::Doeblin(_) => {}
        VerificationConfig::Stationarity { horizon, n_particles } => {
            if !(*horizon >= 0.0 && horizon.is_finite()) {
                bail!(invalid("stationarity.horizon", "must be finite and >= 0"));
            }
            *n_particles = Some(n_particles.unwrap_or(n_default));
        }
        VerificationConfig::Absorbing { rqmc, times, .. } => {
            if times.is_empty() {
                bail!(invalid("absorbing.times", "list at least one time"));
            }
            *rqmc = Some(rqmc.unwrap_or_default());
        }
        VerificationConfig::HP { pairs, r } => {
            if !matches!(domain.kind(), DomainKind::Disk { radius } if radius == 1.0) {
                bail!(invalid("h_p", "defined on the unit disk only"));
            }
            if *pairs == 0 || !(*r > 0.0) {
                bail!(invalid("h_p", "need pairs > 0 and r > 0"));
            }
        }
    }
    Ok(())
}

/// Observation times after 0: explicit list (with `t_max` appended if
/// missing) or log-spaced.
pub fn schedule(run: &RunConfig) -> Result<Vec<f64>> {
    let t_max = run.t_max;
    match &run.checkpoint_times {
        Some(list) => {
            let mut t: Vec<f64> = list.iter().copied().filter(|&s| s <= t_max).collect();
            if t.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                bail!(invalid("run.checkpoint_times", "times must be finite and > 0"));
            }
            if t.windows(2).any(|w| !(w[1] > w[0])) {
                bail!(invalid("run.checkpoint_times", "must be strictly increasing"));
            }
            if t.last() != Some(&t_max) {
                t.push(t_max);
            }
            Ok(t)
        }
        None => {
            if run.checkpoints < 2 {
                bail!(invalid("run.checkpoints", "need at least 2"));
            }
            if !(run.t_first > 0.0 && run.t_first < t_max) {
                bail!(invalid("run.t_first", "need 0 < t_first < t_max"));
            }
            let k = run.checkpoints;
            let ratio = (t_max / run.t_first).ln();
            let mut t: Vec<f64> = (0..k)
                .map(|j| run.t_first * (ratio * j as f64 / (k - 1) as f64).exp())
                .collect();
            t[k - 1] = t_max;
            Ok(t)
        }
    }
}

/// Particles per partial sum; chunk sizes are multiples of it so that
/// reductions do not depend on chunking.
pub const SUM_BLOCK: usize = 1000;

pub fn invalid(key: &str, constraint: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("invalid parameter {key}: {constraint}")
}

fn describe_toml_error(e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => format!("at bytes {}..{}", span.start, span.end),
        None => "in config".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [domain]
        kind = "disk"
        radius = 1.0

        [initial]
        kind = "equilibrium"
        theta = 1.0

        [run]
        n_particles = 2000
        seed = 1
        t_max = 1.0
    "#;

    #[test]
    fn minimal_config_resolves_every_default() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(c.wall.c0, 0.5);
        assert_eq!(c.times().len(), DEFAULT_CHECKPOINTS);
        assert_eq!(*c.times().last().unwrap(), 1.0);
        assert!((c.times()[0] - 0.1).abs() < 1e-15);
        assert_eq!(c.observables.equilibrium, EquilibriumConfig::ConstantTheta { theta: 1.0 });
        assert_eq!(c.observables.fit.model, Some(DecayModel::PurePower));
        let long = MINIMAL.replace("t_max = 1.0", "t_max = 50.0");
        let c = ExperimentConfig::from_toml(&long).unwrap().resolve().unwrap();
        assert_eq!(c.observables.fit.window, Some([5.0, 50.0]));
        assert_eq!(c.observables.fit.model, Some(DecayModel::PowerWithLog { p: 3.0 }));
    }

    #[test]
    fn bad_c0_names_the_key() {
        let text = format!("{MINIMAL}\n[wall]\nc0 = 1.5\n");
        let e = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        let msg = format!("{e:#}");
        assert!(msg.contains("wall.c0") && msg.contains("(0,1)"), "{msg}");
    }

    #[test]
    fn missing_seed_and_small_runs_are_rejected() {
        let text = MINIMAL.replace("seed = 1", "");
        let e = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(format!("{e:#}").contains("run.seed"));
        let text = MINIMAL.replace("2000", "10");
        let e = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(format!("{e:#}").contains("run.n_particles"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("t_max = 1.0", "t_max = 1.0\nt_maxx = 2.0");
        let e = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(format!("{e:#}").contains("t_maxx"), "{e:#}");
    }

    #[test]
    fn explicit_schedule_appends_t_max() {
        let text = MINIMAL.replace("t_max = 1.0", "t_max = 1.0\ncheckpoint_times = [0.25, 0.5]");
        let c = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(c.times(), &[0.25, 0.5, 1.0]);
        let text = MINIMAL.replace("t_max = 1.0", "t_max = 1.0\ncheckpoint_times = [0.5, 0.25]");
        assert!(ExperimentConfig::from_toml(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn verifications_parse_and_resolve() {
        let text = format!(
            "{MINIMAL}\n[[verifications]]\nname = \"lyapunov\"\ncase = 2\n\n[[verifications]]\nname = \"doeblin\"\nn_particles = 5000\n\n[[verifications]]\nname = \"absorbing\"\ntimes = [1.0]\nweight = {{ kind = \"r_poly\", nu = 2.0 }}\n"
        );
        let c = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap();
        match &c.verifications[0] {
            VerificationConfig::Lyapunov { i, n_particles, initial, .. } => {
                assert_eq!(*i, Some(2.5));
                assert_eq!(*n_particles, Some(2000));
                assert!(initial.is_some());
            }
            v => panic!("{v:?}"),
        }
        match &c.verifications[1] {
            VerificationConfig::Doeblin(d) => assert_eq!(d.n_particles, 5000),
            v => panic!("{v:?}"),
        }
        let bad = format!("{MINIMAL}\n[[verifications]]\nname = \"doeblin\"\nbogus = 1\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn hashed_view_ignores_workers_and_directory() {
        let mut a = ExperimentConfig::from_toml(MINIMAL).unwrap().resolve().unwrap();
        let b = a.clone();
        a.run.workers = Some(8);
        a.output.directory = Some("x".into());
        assert_eq!(a.hashed_view(), b.hashed_view());
    }
}
