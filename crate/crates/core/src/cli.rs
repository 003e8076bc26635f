//! The `actsem` command line: `simulate`, `learn` and `inspect`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::clause::{export_clause, import_clause_trace};
use crate::induction::{explain_theory, learn_from_trace_observed, LearnConfig, TheoryStore};
use crate::knowledge::builtin_library;
use crate::simulator::{random_policy, resolve_scenario, run_script, SimError};
use crate::theory_file::{read_theories, write_theories};
use crate::trace::{ingest_trace, serialize_trace, Sample};
use crate::types::{format_number, DEFAULT_TOLERANCE};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::NotFound(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "actsem", version, about = "Learn action semantics from observation traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the robot world under a seeded random policy and write a trace.
    Simulate(SimulateArgs),
    /// Learn per-action theories from a trace.
    Learn(LearnArgs),
    /// Show learned theories.
    Inspect(InspectArgs),
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Built-in scenario name or scenario file.
    #[arg(long, default_value = "two-obstacles")]
    pub scenario: String,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of uniform noise on the published robot position.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct LearnArgs {
    /// Trace in the line format or the clause dialect.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub learn_preservation: bool,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub assume_success: Option<bool>,
    #[arg(long)]
    pub include_internal_vars: bool,
    /// Extra relations to register, as a TOML manifest.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    #[arg(long)]
    pub heading_var: Option<String>,
    #[arg(long)]
    pub position_var: Option<String>,
    /// Echoed into the output header.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Clause,
}

#[derive(Debug, clap::Args)]
pub struct InspectArgs {
    /// Theory file written by `learn`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub action: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Settings a `--config` file may provide; flags win over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub tolerance: Option<f64>,
    pub learn_preservation: Option<bool>,
    pub assume_success: Option<bool>,
    pub include_internal_vars: Option<bool>,
    pub relations: Option<PathBuf>,
    pub heading_var: Option<String>,
    pub position_var: Option<String>,
    pub seed: Option<u64>,
    pub verbose: Option<bool>,
}

/// Fully resolved settings for a `learn` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub learn: LearnConfig,
    pub relations: Option<PathBuf>,
    pub seed: u64,
    pub verbose: bool,
}

impl RunConfig {
    pub fn resolve(args: &LearnArgs, file: FileConfig) -> Result<RunConfig, CliError> {
        let mut learn = LearnConfig::default();
        learn.knowledge.tolerance = args.tolerance.or(file.tolerance).unwrap_or(DEFAULT_TOLERANCE);
        if !(learn.knowledge.tolerance >= 0.0 && learn.knowledge.tolerance.is_finite()) {
            return Err(CliError::Usage(format!(
                "tolerance must be a finite non-negative number, got {}",
                learn.knowledge.tolerance
            )));
        }
        learn.learn_preservation = args.learn_preservation || file.learn_preservation.unwrap_or(false);
        learn.assume_success = args.assume_success.or(file.assume_success).unwrap_or(true);
        learn.include_internal = args.include_internal_vars || file.include_internal_vars.unwrap_or(false);
        if let Some(h) = args.heading_var.clone().or(file.heading_var) {
            learn.knowledge.heading_var = h;
        }
        if let Some(p) = args.position_var.clone().or(file.position_var) {
            learn.knowledge.position_var = p;
        }
        Ok(RunConfig {
            learn,
            relations: args.relations.clone().or(file.relations),
            seed: args.seed.or(file.seed).unwrap_or(0),
            verbose: args.verbose || file.verbose.unwrap_or(false),
        })
    }
}

fn header(seed: u64, tolerance: f64, extra: &str) -> String {
    format!(
        "actsem {VERSION} seed={seed} tolerance={}{extra}",
        format_number(tolerance)
    )
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::NotFound(format!("cannot read {}: {e}", path.display())))
}

fn check_writable(path: &Path) -> Result<(), CliError> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(CliError::NotFound(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(CliError::Usage(format!("{} is a directory", path.display())));
    }
    Ok(())
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// `true` when the text looks like the clause dialect rather than the line format.
pub fn is_clause_dialect(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('%'))
        .is_some_and(|l| l.starts_with("state_spec(") || l.starts_with("action("))
}

pub fn parse_trace_text(text: &str) -> Result<Sample, CliError> {
    if is_clause_dialect(text) {
        import_clause_trace(text).map_err(|e| CliError::Data(e.to_string()))
    } else {
        ingest_trace(BufReader::new(text.as_bytes())).map_err(|e| CliError::Data(e.to_string()))
    }
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_writable(&args.out)?;
    let scenario = resolve_scenario(&args.scenario).map_err(|e| match e {
        SimError::UnknownScenario(_) => CliError::NotFound(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let mut scenario = scenario;
    if let Some(noise) = args.noise {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(CliError::Usage(format!(
                "noise must be a finite non-negative number, got {noise}"
            )));
        }
        scenario.noise = noise;
    }
    let script = random_policy(&scenario, args.steps, args.seed);
    let sample = run_script(&scenario, &script, args.seed).map_err(|e| CliError::Data(e.to_string()))?;
    let mut text = format!(
        "# {}\n",
        header(
            args.seed,
            DEFAULT_TOLERANCE,
            &format!(
                " scenario={} steps={} noise={}",
                scenario.name,
                args.steps,
                format_number(scenario.noise)
            )
        )
    );
    text.push_str(&serialize_trace(&sample));
    write_output(&args.out, &text)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in sample.actions() {
        *counts.entry(a.name.as_str()).or_default() += 1;
    }
    let mut summary = format!(
        "snapshots: {}\nactions: {}\n",
        sample.snapshots().len(),
        sample.actions().len()
    );
    for (name, n) in counts {
        let _ = writeln!(summary, "  {name}: {n}");
    }
    out.write_all(summary.as_bytes())
        .map_err(|e| CliError::Data(e.to_string()))
}

pub fn cmd_learn(args: &LearnArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => {
            toml::from_str(&read_input(p)?).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(args, file)?;
    check_writable(&args.out)?;
    let mut lib = builtin_library();
    if let Some(p) = &cfg.relations {
        lib.load_manifest(&read_input(p)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    let sample = parse_trace_text(&read_input(&args.input)?)?;

    let mut log = String::new();
    let store = learn_from_trace_observed(&sample, &lib, &cfg.learn, |ev| {
        if cfg.verbose {
            let note = if ev.skipped { " (skipped, no effect)" } else { "" };
            let _ = writeln!(log, "t={} {} candidates={}{note}", ev.t, ev.action, ev.candidates);
        }
    })
    .map_err(|e| CliError::Data(e.to_string()))?;

    let text = format!(
        "# {}\n{}",
        header(cfg.seed, cfg.learn.tolerance(), ""),
        write_theories(&store)
    );
    write_output(&args.out, &text)?;
    for (name, th) in &store.theories {
        let _ = writeln!(
            log,
            "{name}: {} occurrences, {} candidates",
            store.occurrences.get(name).copied().unwrap_or(0),
            th.candidate_count()
        );
    }
    if store.is_empty() {
        log.push_str("no actions learned\n");
    }
    out.write_all(log.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
}

pub fn load_store(path: &Path) -> Result<TheoryStore, CliError> {
    read_theories(&read_input(path)?).map_err(|e| CliError::Data(e.to_string()))
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let store = load_store(&args.input)?;
    let selected: Vec<_> = match &args.action {
        Some(a) => vec![store
            .get(a)
            .ok_or_else(|| CliError::NotFound(format!("no such action `{a}`")))?],
        None => store.theories.values().collect(),
    };
    let mut text = String::new();
    if args.format == Format::Clause {
        let _ = writeln!(text, "% actsem {VERSION}");
    }
    for th in selected {
        match args.format {
            Format::Text => text.push_str(&explain_theory(th)),
            Format::Clause => text.push_str(&export_clause(th)),
        }
    }
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(e.to_string()))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Cmd::Simulate(a) => cmd_simulate(a, out),
        Cmd::Learn(a) => cmd_learn(a, out),
        Cmd::Inspect(a) => cmd_inspect(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
