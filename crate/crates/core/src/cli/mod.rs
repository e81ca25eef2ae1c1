//! Command-line experiment runner.
//!
//! Exit status: 0 when every assertion passes, 2 when an assertion fails,
//! 1 on any error (bad flags, bad configuration, I/O, numerical
//! preconditions). A JSON summary is written on exits 0 and 2.

pub mod config;
pub mod experiments;
pub mod report;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ExperimentConfig, ExperimentKind};
use experiments::Outcome;
use report::{ReportWriter, Tag};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "VLASOV_RENORM_OUT";

#[derive(Debug, Parser)]
#[command(name = "vlasov-renorm", version, about = "Commutator-rate, endpoint, conservation and lemma experiments for the relativistic Vlasov-Maxwell system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mollification and commutator rate ladders.
    Rates(Common),
    /// Combined commutator and renormalization residual at the critical line.
    Endpoint(Common),
    /// Vlasov-Maxwell run with checkpoints and entropy diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Resume from a checkpoint written by an earlier run.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Identity, lemma-inequality and bound checks with a pass matrix.
    Verify(Common),
    /// Print every configuration key with its default.
    Reference,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (TOML); missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for synthesized inputs.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Print the resolved plan and exit without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Worker threads, 0 for one per core.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn command() -> clap::Command {
    let hint = "Run `vlasov-renorm reference` for every configuration key and its default.";
    let mut cmd = Cli::command();
    for name in ["rates", "endpoint", "simulate", "verify"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_help(hint).after_long_help(config::reference_page()));
    }
    cmd
}

fn resolve(kind: ExperimentKind, common: &Common, resume: Option<&PathBuf>) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(r) = resume {
        cfg.simulate.resume = r.clone();
    }
    cfg.validate(kind)?;
    Ok(cfg)
}

fn file_tag(kind: ExperimentKind, cfg: &ExperimentConfig) -> String {
    match kind {
        ExperimentKind::Rates => Tag {
            theta: cfg.rates.theta,
            kappa: Some(cfg.rates.kappa),
            p: cfg.rates.p,
            q: Some(cfg.rates.q),
            seed: cfg.seed,
        }
        .render(),
        ExperimentKind::Endpoint => Tag {
            theta: cfg.endpoint.theta,
            kappa: Some(cfg.endpoint.kappa),
            p: cfg.endpoint.p,
            q: Some(cfg.endpoint.q),
            seed: cfg.seed,
        }
        .render(),
        ExperimentKind::Simulate | ExperimentKind::Verify => format!("seed{}", cfg.seed),
    }
}

fn execute(kind: ExperimentKind, cfg: &ExperimentConfig) -> crate::Result<i32> {
    let mut out = ReportWriter::create(&cfg.output_dir)?;
    let (outcome, matrix): (Outcome, Option<String>) = match kind {
        ExperimentKind::Rates => (experiments::run_rates(cfg, &mut out)?, None),
        ExperimentKind::Endpoint => (experiments::run_endpoint(cfg, &mut out)?, None),
        ExperimentKind::Simulate => (experiments::run_simulate(cfg, &mut out)?, None),
        ExperimentKind::Verify => {
            let (o, m) = verify::run_verify(cfg, &mut out)?;
            (o, Some(m))
        }
    };
    if let Some(m) = matrix {
        print!("{m}");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for a in &outcome.assertions {
        println!("{}  {}  value {}  target {}", if a.pass { "PASS" } else { "FAIL" }, a.name, report::compact(a.value), a.target);
    }
    let code = if outcome.passed() { 0 } else { 2 };
    let summary_name = format!("{kind}_summary_{}.json", file_tag(kind, cfg));
    let files: Vec<String> = out
        .files()
        .iter()
        .chain(std::iter::once(&out.path(&summary_name)))
        .map(|p| p.display().to_string())
        .collect();
    let summary = json!({
        "experiment": kind.name(),
        "status": if code == 0 { "pass" } else { "fail" },
        "exit_code": code,
        "seed": cfg.seed,
        "assertions": outcome.assertions,
        "warnings": outcome.warnings,
        "details": outcome.details,
        "files": files,
    });
    let path = out.write_json(&summary_name, &summary)?;
    println!("summary: {}", path.display());
    Ok(code)
}

/// Runs the command line `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let (kind, common, resume) = match &cli.command {
        Command::Reference => {
            print!("{}", config::reference_page());
            return 0;
        }
        Command::Rates(c) => (ExperimentKind::Rates, c, None),
        Command::Endpoint(c) => (ExperimentKind::Endpoint, c, None),
        Command::Simulate { common, resume } => (ExperimentKind::Simulate, common, resume.as_ref()),
        Command::Verify(c) => (ExperimentKind::Verify, c, None),
    };
    let cfg = match resolve(kind, common, resume) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if common.dry_run {
        print!("{}", experiments::plan(&cfg, kind));
        return 0;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(kind, &cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
