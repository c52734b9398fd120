//! Experiment execution: chunked particle streaming, observables at the
//! scheduled times, fits, verifications, report and files.

use crate::audits::{aggregate, run_verification, VerdictRecord};
use crate::config::{EquilibriumConfig, ExperimentConfig, Format, Overrides, DEFAULT_OUTPUT_DIR, SUM_BLOCK};
use anyhow::{anyhow, bail, Context, Result};
use knudsen::analysis::{
    fit_decay, l1_between_histograms, l1_from_histograms, BinLayout, DecayCurve, DecayModel, EquilibriumModel, FitResult,
    Histogram, L1Estimate, Verdict,
};
use knudsen::stats::pairwise_sum;
use knudsen::transport::checkpoint::Checkpoint;
use knudsen::transport::{worker_pool, EventCounts};
use knudsen::weights::weight_values;
use knudsen::{Domain, Ensemble, Error, Particle, WallModel, WeightContext};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "final.ckpt";

/// A weighted norm at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub value: f64,
    pub std_error: f64,
    pub n_infinite: u64,
}

/// Fitted decay exponents of the L¹ distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBlock {
    pub window: [f64; 2],
    pub model: DecayModel,
    pub result: Option<FitResult>,
    /// The same window without the log correction.
    pub pure_power: Option<FitResult>,
    /// Why the main fit was refused, if it was.
    pub refused: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub initial: f64,
    pub final_mass: f64,
    pub max_abs_drift: f64,
}

/// Settings that never influence results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub workers: usize,
    pub wall_seconds: f64,
    pub output_directory: String,
    pub checkpoint_paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    /// SHA-256 of the resolved configuration without worker count and directory.
    pub config_hash: String,
    /// SHA-256 of every field except `execution` and this one.
    pub content_hash: String,
    pub config: ExperimentConfig,
    pub clock: f64,
    pub curve: DecayCurve,
    pub l1_details: Vec<Option<L1Estimate>>,
    pub norm_details: Vec<Vec<NormRecord>>,
    pub mass: MassSummary,
    pub fit: Option<FitBlock>,
    pub verdicts: Vec<VerdictRecord>,
    pub overall: Verdict,
    pub events: EventCounts,
    pub execution: Execution,
}

impl RunReport {
    fn hashed_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("execution");
        obj.remove("content_hash");
        obj.insert(
            "config".into(),
            serde_json::to_value(self.config.hashed_view()).expect("config serializes"),
        );
        v
    }

    pub fn compute_content_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.hashed_value()).expect("report serializes"))
    }

    pub fn has_failures(&self) -> bool {
        self.verdicts.iter().any(|r| r.verdict == Verdict::Fail)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(&serde_json::to_vec(&cfg.hashed_view()).expect("config serializes"))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub quiet: bool,
    /// Skip writing files.
    pub dry: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub output_dir: PathBuf,
    /// Final ensemble, kept when checkpoints are enabled.
    pub ensemble: Option<Ensemble>,
}

/// Observations accumulated over particle chunks for one time.
#[derive(Debug, Clone)]
struct Observation {
    fine: Option<Histogram>,
    coarse: Option<Histogram>,
    mass: Vec<f64>,
    /// Per weight: chunk sums of contributions and their squares.
    norm_sum: Vec<Vec<f64>>,
    norm_sq: Vec<Vec<f64>>,
    n_infinite: Vec<u64>,
}

/// Partial sums over consecutive blocks of `SUM_BLOCK` particles. Chunks
/// start on block boundaries, so the list is the same for any chunk size.
fn block_sums(x: &[f64]) -> impl Iterator<Item = f64> + '_ {
    x.chunks(SUM_BLOCK).map(pairwise_sum)
}

impl Observation {
    fn new(layouts: Option<&(BinLayout, BinLayout)>, weights: usize) -> Self {
        Observation {
            fine: layouts.map(|l| Histogram::empty(l.0.cells())),
            coarse: layouts.map(|l| Histogram::empty(l.1.cells())),
            mass: Vec::new(),
            norm_sum: vec![Vec::new(); weights],
            norm_sq: vec![Vec::new(); weights],
            n_infinite: vec![0; weights],
        }
    }
}

/// Reference for the L¹ column.
enum Reference {
    Masses { fine: Vec<f64>, coarse: Vec<f64> },
    Histograms { fine: Histogram, coarse: Histogram },
}

struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    domain: Domain,
    wall: WallModel,
    layouts: Option<(BinLayout, BinLayout)>,
    reference: Option<Reference>,
    equilibrium: Option<EquilibriumModel>,
    quiet: bool,
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

impl<'a> RunContext<'a> {
    fn new(cfg: &'a ExperimentConfig, quiet: bool) -> Result<Self> {
        let domain = cfg.build_domain()?;
        let wall = cfg.wall.build(&domain)?;
        let mut ctx = RunContext {
            cfg,
            domain,
            wall,
            layouts: None,
            reference: None,
            equilibrium: None,
            quiet,
        };
        match &cfg.observables.equilibrium {
            EquilibriumConfig::None => {}
            EquilibriumConfig::ConstantTheta { theta } => {
                let (fine, coarse) = ctx.layouts(*theta)?;
                ctx.reference = Some(Reference::Masses {
                    fine: fine.equilibrium_masses(*theta),
                    coarse: coarse.equilibrium_masses(*theta),
                });
                ctx.layouts = Some((fine, coarse));
                ctx.equilibrium = Some(EquilibriumModel::ConstantTheta { theta: *theta });
            }
            EquilibriumConfig::LongRun { t_ref, n_particles, seed } => {
                let theta_max = ctx.wall.theta_max;
                let (fine, coarse) = ctx.layouts(theta_max)?;
                note(quiet, format!("reference ensemble: {n_particles} particles to t = {t_ref}"));
                let mut e = Ensemble::sample(&cfg.initial, &ctx.domain, *n_particles, *seed)?;
                e.advance_with_limit(*t_ref, &ctx.domain, &ctx.wall, cfg.run.max_events)?;
                ctx.reference = Some(Reference::Histograms {
                    fine: fine.histogram(&e),
                    coarse: coarse.histogram(&e),
                });
                ctx.layouts = Some((fine, coarse));
                ctx.equilibrium = Some(EquilibriumModel::VaryingTheta {
                    theta_max,
                    snapshot: Box::new(e),
                });
            }
            EquilibriumConfig::Auto => bail!("configuration was not resolved"),
        }
        Ok(ctx)
    }

    fn layouts(&self, theta_max: f64) -> Result<(BinLayout, BinLayout)> {
        let b = &self.cfg.observables.binning;
        let dim = self.domain.dim();
        Ok((
            BinLayout::new(&self.domain, b, theta_max)?,
            BinLayout::new(&self.domain, &b.half(dim)?, theta_max)?,
        ))
    }

    fn observe(&self, e: &Ensemble, obs: &mut Observation, wctx: &WeightContext) -> Result<()> {
        if let Some((fine, coarse)) = &self.layouts {
            obs.fine.as_mut().expect("allocated").merge(&fine.histogram(e));
            obs.coarse.as_mut().expect("allocated").merge(&coarse.histogram(e));
        }
        let w: Vec<f64> = e.particles.iter().map(|p| p.weight).collect();
        obs.mass.extend(block_sums(&w));
        for (j, spec) in self.cfg.observables.weights.iter().enumerate() {
            let values = weight_values(e, wctx, spec)?;
            let mut inf = 0u64;
            let c: Vec<f64> = values
                .iter()
                .zip(&w)
                .map(|(g, wt)| {
                    if g.is_finite() {
                        g * wt
                    } else {
                        inf += 1;
                        0.0
                    }
                })
                .collect();
            let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
            obs.norm_sum[j].extend(block_sums(&c));
            obs.norm_sq[j].extend(block_sums(&sq));
            obs.n_infinite[j] += inf;
        }
        Ok(())
    }

    fn l1(&self, obs: &Observation) -> Option<L1Estimate> {
        let (fine, coarse) = (obs.fine.as_ref()?, obs.coarse.as_ref()?);
        Some(match self.reference.as_ref()? {
            Reference::Masses { fine: fm, coarse: cm } => l1_from_histograms(fine, fm, coarse, cm),
            Reference::Histograms { fine: rf, coarse: rc } => l1_between_histograms(fine, rf, coarse, rc),
        })
    }
}

/// Where particles come from.
enum Source<'a> {
    Fresh,
    Resume(&'a Ensemble),
}

struct Simulated {
    observations: Vec<Observation>,
    events: EventCounts,
    particles: Option<Vec<Particle>>,
    clock: f64,
}

fn simulate(ctx: &RunContext, source: Source, times: &[f64], keep: bool) -> Result<Simulated> {
    let cfg = ctx.cfg;
    let n = cfg.run.n_particles;
    let chunk = cfg.run.chunk_size;
    let seed = cfg.seed();
    let wctx = WeightContext::new(&ctx.domain, ctx.wall.c4);
    let weights = cfg.observables.weights.len();
    let mut observations: Vec<Observation> = times.iter().map(|_| Observation::new(ctx.layouts.as_ref(), weights)).collect();
    let mut events = EventCounts::default();
    let mut kept = if keep { Some(Vec::with_capacity(n)) } else { None };
    let mut clock = 0.0;
    let chunks = n.div_ceil(chunk);
    for c in 0..chunks {
        let range = c * chunk..((c + 1) * chunk).min(n);
        let mut e = match source {
            Source::Fresh => Ensemble::sample_range(&cfg.initial, &ctx.domain, range, n, seed)?,
            Source::Resume(full) => Ensemble {
                dim: full.dim,
                clock: full.clock,
                seed: full.seed,
                first_index: range.start,
                particles: full.particles[range].to_vec(),
            },
        };
        for (k, &t) in times.iter().enumerate() {
            let dt = t - e.clock;
            e.advance_with_limit(dt, &ctx.domain, &ctx.wall, cfg.run.max_events)
                .map_err(|err| match err {
                    Error::RunawayEvents { index, speed, max_events } => anyhow!(
                        "particle {} exceeded {max_events} wall events (speed {speed:.3e})",
                        e.first_index + index
                    ),
                    other => anyhow!(other),
                })?;
            ctx.observe(&e, &mut observations[k], &wctx)?;
        }
        events = events.add(e.event_totals());
        clock = e.clock;
        if let Some(k) = kept.as_mut() {
            k.extend(e.particles);
        }
        if chunks > 1 {
            note(ctx.quiet, format!("chunk {}/{} done", c + 1, chunks));
        }
    }
    Ok(Simulated {
        observations,
        events,
        particles: kept,
        clock,
    })
}

/// Saved alongside the ensemble so that `resume` can continue the curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResumeContext {
    config: ExperimentConfig,
    curve: DecayCurve,
    l1_details: Vec<Option<L1Estimate>>,
    norm_details: Vec<Vec<NormRecord>>,
}

fn fits(curve: &DecayCurve, cfg: &ExperimentConfig) -> Option<FitBlock> {
    let fit = &cfg.observables.fit;
    if !fit.enabled || curve.l1_distance.is_empty() || curve.l1_distance.iter().all(|d| d.is_nan()) {
        return None;
    }
    let window = fit.window.expect("resolved");
    let model = fit.model.expect("resolved");
    let (result, refused) = match fit_decay(curve, window, model) {
        Ok(r) => (Some(r), None),
        Err(Error::FitRefused(msg)) => (None, Some(msg)),
        Err(e) => (None, Some(e.to_string())),
    };
    let pure_power = fit_decay(curve, window, DecayModel::PurePower).ok();
    let note = match &result {
        Some(r) if r.window_shrunk => format!(
            "noise floor reached: fit window shrank from [{}, {}] to [{:.4}, {:.4}] ({} points)",
            window[0], window[1], r.fit_window[0], r.fit_window[1], r.n_points
        ),
        Some(r) => format!("fitted over [{:.4}, {:.4}] ({} points)", r.fit_window[0], r.fit_window[1], r.n_points),
        None => "fit refused".to_string(),
    };
    Some(FitBlock {
        window,
        model,
        result,
        pure_power,
        refused,
        note,
    })
}

fn fit_verdict(block: &FitBlock, cfg: &ExperimentConfig) -> Option<VerdictRecord> {
    let [lo, hi] = cfg.observables.fit.expected_range?;
    let steeper = cfg.observables.fit.steeper_passes;
    Some(match &block.result {
        Some(r) => {
            let pass = r.exponent <= hi && (steeper || r.exponent >= lo);
            let summary = format!(
                "exponent {:.4} CI [{:.4}, {:.4}], pure power {}; {}",
                r.exponent,
                r.exponent_ci[0],
                r.exponent_ci[1],
                block.pure_power.as_ref().map_or("n/a".to_string(), |p| format!("{:.4}", p.exponent)),
                block.note
            );
            VerdictRecord::new("decay_exponent", Verdict::from_pass(pass), Some(hi - r.exponent), summary).with_record(block)
        }
        None => VerdictRecord::new(
            "decay_exponent",
            Verdict::Inconclusive,
            None,
            block.refused.clone().unwrap_or_default(),
        )
        .with_record(block),
    })
}

fn assemble_rows(
    ctx: &RunContext,
    times: &[f64],
    sim: &Simulated,
    curve: &mut DecayCurve,
    l1_details: &mut Vec<Option<L1Estimate>>,
    norm_details: &mut Vec<Vec<NormRecord>>,
) -> Result<()> {
    let n = ctx.cfg.run.n_particles as f64;
    for (k, &t) in times.iter().enumerate() {
        let obs = &sim.observations[k];
        let mass = pairwise_sum(&obs.mass);
        let l1 = ctx.l1(obs);
        let mut norms = Vec::new();
        let mut recs = Vec::new();
        for j in 0..obs.norm_sum.len() {
            let s = pairwise_sum(&obs.norm_sum[j]);
            let s2 = pairwise_sum(&obs.norm_sq[j]);
            let var = ((s2 - s * s / n) / (n - 1.0)).max(0.0);
            norms.push(s);
            recs.push(NormRecord {
                value: s,
                std_error: (var * n).sqrt(),
                n_infinite: obs.n_infinite[j],
            });
        }
        let (d, err) = l1.map_or((f64::NAN, f64::NAN), |l| (l.distance, l.sampling_error));
        if d.is_nan() {
            curve.times.push(t);
            curve.mass.push(mass);
            curve.l1_distance.push(d);
            curve.l1_err.push(err);
            curve.norms.push(norms);
        } else {
            curve.push(t, mass, d, err, norms)?;
        }
        l1_details.push(l1);
        norm_details.push(recs);
    }
    Ok(())
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .directory
        .clone()
        .or_else(|| std::env::var_os("KNUDSEN_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Executes a resolved configuration from time 0.
pub fn run_resolved(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let workers = cfg.run.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = worker_pool(workers)?;
    let start = Instant::now();
    pool.install(|| {
        let ctx = RunContext::new(cfg, opts.quiet)?;
        let mut times = vec![0.0];
        times.extend_from_slice(cfg.times());
        let keep = cfg.output.checkpoint && !opts.dry;
        let sim = simulate(&ctx, Source::Fresh, &times, keep)?;
        let mut curve = DecayCurve::new(cfg.observables.weights.iter().map(|w| w.column_name()).collect());
        let mut l1_details = Vec::new();
        let mut norm_details = Vec::new();
        assemble_rows(&ctx, &times, &sim, &mut curve, &mut l1_details, &mut norm_details)?;
        finish(&ctx, cfg, sim, curve, l1_details, norm_details, workers, start, opts)
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ctx: &RunContext,
    cfg: &ExperimentConfig,
    sim: Simulated,
    mut curve: DecayCurve,
    l1_details: Vec<Option<L1Estimate>>,
    norm_details: Vec<Vec<NormRecord>>,
    workers: usize,
    start: Instant,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let fit = fits(&curve, cfg);
    if let Some(b) = &fit {
        curve.fits = b.result.iter().chain(b.pure_power.iter()).cloned().collect();
    }
    let mut verdicts = Vec::new();
    if let Some(v) = fit.as_ref().and_then(|b| fit_verdict(b, cfg)) {
        verdicts.push(v);
    }
    for v in &cfg.verifications {
        note(ctx.quiet, format!("verification {}", v.name()));
        verdicts.push(run_verification(v, &ctx.domain, &ctx.wall, &cfg.initial, ctx.equilibrium.as_ref(), cfg.seed())?);
    }
    let m0 = curve.mass[0];
    let mass = MassSummary {
        initial: m0,
        final_mass: *curve.mass.last().expect("nonempty"),
        max_abs_drift: curve.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max),
    };
    let dir = output_dir(cfg);
    let ensemble = sim.particles.map(|particles| Ensemble {
        dim: ctx.domain.dim(),
        clock: sim.clock,
        seed: cfg.seed(),
        first_index: 0,
        particles,
    });
    let mut report = RunReport {
        version: knudsen::VERSION.to_string(),
        config_hash: config_hash(cfg),
        content_hash: String::new(),
        config: cfg.clone(),
        clock: sim.clock,
        curve,
        l1_details,
        norm_details,
        mass,
        fit,
        overall: aggregate(&verdicts),
        verdicts,
        events: sim.events,
        execution: Execution {
            workers,
            wall_seconds: 0.0,
            output_directory: dir.display().to_string(),
            checkpoint_paths: Vec::new(),
        },
    };
    if !opts.dry {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        if let Some(e) = &ensemble {
            let path = dir.join(CHECKPOINT_FILE);
            let context = ResumeContext {
                config: cfg.clone(),
                curve: report.curve.clone(),
                l1_details: report.l1_details.clone(),
                norm_details: report.norm_details.clone(),
            };
            Checkpoint::new(e.clone(), serde_json::to_value(&context)?).write(&path)?;
            report.execution.checkpoint_paths.push(path.display().to_string());
        }
    }
    report.content_hash = report.compute_content_hash();
    report.execution.wall_seconds = start.elapsed().as_secs_f64();
    if !opts.dry {
        write_outputs(&report, &dir)?;
    }
    Ok(RunOutcome {
        report,
        output_dir: dir,
        ensemble,
    })
}

/// Writes the curve CSV and the JSON report as configured.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    let formats = &report.config.output.formats;
    if formats.contains(&Format::Csv) {
        write_curve_csv(&report.curve, &dir.join(CURVE_FILE))?;
    }
    if formats.contains(&Format::Json) {
        let text = serde_json::to_string_pretty(report)?;
        std::fs::write(dir.join(REPORT_FILE), text + "\n")?;
    }
    Ok(())
}

pub fn write_curve_csv(curve: &DecayCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(curve.header())?;
    for k in 0..curve.len() {
        w.write_record(curve.row(k).iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads, overrides, resolves and runs a configuration file.
pub fn run_experiment(path: &Path, overrides: &Overrides, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(overrides);
    let cfg = cfg.resolve()?;
    run_resolved(&cfg, opts)
}

/// The saved schedule up to `until`, continued geometrically with its last
/// ratio beyond its end.
fn extend_schedule(saved: &[f64], until: f64) -> Vec<f64> {
    let mut t: Vec<f64> = saved.iter().copied().filter(|&s| s < until).collect();
    if let (Some(&last), true) = (saved.last(), saved.len() >= 2) {
        let ratio = last / saved[saved.len() - 2];
        if last < until && ratio > 1.0 {
            let mut next = last * ratio;
            while next < until {
                t.push(next);
                next *= ratio;
            }
        }
    }
    t.push(until);
    t
}

/// Continues a checkpointed run to `until`. A replacement configuration may
/// change observables, verifications and output, but not the physics, the
/// initial data, the seed or the particle count.
pub fn resume(
    checkpoint: &Path,
    until: f64,
    replacement: Option<&Path>,
    overrides: &Overrides,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let ck = Checkpoint::read(checkpoint)?;
    if ck.tool_version != knudsen::VERSION {
        bail!(
            "checkpoint written by version {} cannot be resumed by version {}",
            ck.tool_version,
            knudsen::VERSION
        );
    }
    let saved: ResumeContext = serde_json::from_value(ck.context.clone()).context("checkpoint context")?;
    let ensemble = ck.ensemble;
    if !(until > ensemble.clock) {
        bail!("--until {until} must exceed the checkpoint time {}", ensemble.clock);
    }
    let mut cfg = match replacement {
        Some(p) => ExperimentConfig::load(p)?,
        None => saved.config.clone(),
    };
    if cfg.run.seed.is_none() {
        cfg.run.seed = saved.config.run.seed;
    }
    cfg.apply(overrides);
    let old = &saved.config;
    let refuse = |what: &str| anyhow!("resume refused: {what} differs from the checkpointed run");
    if cfg.run.n_particles != old.run.n_particles || cfg.run.n_particles != ensemble.len() {
        return Err(refuse("run.n_particles"));
    }
    if cfg.run.seed != old.run.seed {
        return Err(refuse("run.seed"));
    }
    if cfg.domain != old.domain {
        return Err(refuse("domain"));
    }
    if cfg.wall != old.wall {
        return Err(refuse("wall"));
    }
    if cfg.initial != old.initial {
        return Err(refuse("initial"));
    }
    if cfg.run.max_events != old.run.max_events {
        return Err(refuse("run.max_events"));
    }
    let old_t_max = old.run.t_max;
    cfg.run.t_max = until;
    if replacement.is_none() {
        cfg.run.checkpoint_times = Some(extend_schedule(old.times(), until));
        if cfg.observables.fit.window == Some([old_t_max / 10.0, old_t_max]) {
            cfg.observables.fit.window = None;
        }
    }
    let cfg = cfg.resolve()?;
    let times: Vec<f64> = cfg.times().iter().copied().filter(|&t| t > ensemble.clock).collect();
    let workers = cfg.run.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = worker_pool(workers)?;
    let start = Instant::now();
    pool.install(|| {
        let ctx = RunContext::new(&cfg, opts.quiet)?;
        let keep = cfg.output.checkpoint && !opts.dry;
        let sim = simulate(&ctx, Source::Resume(&ensemble), &times, keep)?;
        let same_observables = cfg.observables.weights == old.observables.weights
            && cfg.observables.binning == old.observables.binning
            && cfg.observables.equilibrium == old.observables.equilibrium;
        let (mut curve, mut l1_details, mut norm_details) = if same_observables {
            let mut c = saved.curve.clone();
            c.fits.clear();
            (c, saved.l1_details.clone(), saved.norm_details.clone())
        } else {
            (
                DecayCurve::new(cfg.observables.weights.iter().map(|w| w.column_name()).collect()),
                Vec::new(),
                Vec::new(),
            )
        };
        assemble_rows(&ctx, &times, &sim, &mut curve, &mut l1_details, &mut norm_details)?;
        finish(&ctx, &cfg, sim, curve, l1_details, norm_details, workers, start, opts)
    })
}
