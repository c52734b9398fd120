//! `knudsen` command line: `run`, `verify`, `resume`.

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use knudsen::analysis::Verdict;
use knudsen_cli::verify::{run_suite, Suite, SuiteParams};
use knudsen_cli::{aggregate, resume, run_experiment, Overrides, RunOptions, RunOutcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "knudsen", version, about = "Collisionless gas in bounded domains: runs and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Particle count (overrides the config or the suite default).
    #[arg(long, global = true)]
    particles: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 1 when any verdict is FAIL.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory.
    #[arg(long, global = true, env = "KNUDSEN_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// No progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Run a property suite: geometry, wall, lyapunov, doeblin, stationarity, absorbing or all.
    Verify { suite: String },
    /// Continue a checkpointed run.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        until: f64,
        /// Replacement config; only observables, verifications and output may change.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn print_outcome(out: &RunOutcome) {
    let r = &out.report;
    println!("output     {}", out.output_dir.display());
    println!("config     {}", r.config_hash);
    println!("content    {}", r.content_hash);
    println!("clock      {}", r.clock);
    println!("mass drift {:e}", r.mass.max_abs_drift);
    if let Some(f) = &r.fit {
        match &f.result {
            Some(res) => println!(
                "fit        exponent {:.4} CI [{:.4}, {:.4}] ({})",
                res.exponent, res.exponent_ci[0], res.exponent_ci[1], f.note
            ),
            None => println!("fit        refused: {}", f.refused.clone().unwrap_or_default()),
        }
    }
    for v in &r.verdicts {
        println!("{}", v.line());
    }
    println!("overall    {}", r.overall);
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let c = cli.common;
    if let Some(w) = c.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global().ok();
    }
    let overrides = Overrides {
        seed: c.seed,
        particles: c.particles,
        workers: c.workers,
        output_dir: c.output_dir.clone(),
        t_max: None,
    };
    let opts = RunOptions { quiet: c.quiet, dry: false };
    let verdict = match cli.command {
        Command::Run { config } => {
            let out = run_experiment(&config, &overrides, &opts)?;
            print_outcome(&out);
            out.report.overall
        }
        Command::Resume { checkpoint, until, config } => {
            let out = resume(&checkpoint, until, config.as_deref(), &overrides, &opts)?;
            print_outcome(&out);
            out.report.overall
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            println!("suite {} (budget about {:.0} s on one core)", suite.name(), suite.budget_seconds());
            let params = SuiteParams {
                seed: c.seed.unwrap_or(1),
                particles: c.particles,
            };
            let records = run_suite(suite, params, &mut |r| println!("{}", r.line()))?;
            let agg = aggregate(&records);
            println!("aggregate {agg}");
            if agg == Verdict::Fail {
                return Ok(ExitCode::from(1));
            }
            agg
        }
    };
    Ok(if c.strict && verdict == Verdict::Fail { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
