//! Command-line front end: `list`, `validate` and `run`.
//!
//! Exit codes: 0 all gates pass, 1 a gate failed, 2 validation or config
//! error, 3 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{self, Loaded, Overrides};
use crate::experiments::{run_scenario, RunError};
use crate::report::{gates_table, write_artifacts};
use crate::scenarios::{self, MANIFOLDS, MODELS};
use crate::validate::validate;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_GATE_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "OCCLAB_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "occlab",
    version,
    about = "Occupation measure and local time experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List built-in scenarios and the manifold and model catalogs.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Only scenarios carrying this tag.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Check every precondition of a scenario without simulating.
    Validate {
        /// Built-in name, scenario file, run file or saved report.json.
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a scenario, write its artifacts and evaluate its gates.
    Run {
        /// Built-in name, scenario file, run file or saved report.json.
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Output root; artifacts go to <out>/<scenario>/.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Worker threads for the path-level parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// What to print on stdout: gate summary, full report, or gates CSV.
        #[arg(long, value_enum, default_value_t = RunFormat::Text)]
        format: RunFormat,
    },
}

#[derive(Debug, Clone, Args, Default)]
pub struct OverrideArgs {
    /// Master seed of the path streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Euler step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Comma-separated bandwidths.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eps: Option<Vec<f64>>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n_paths: self.paths,
            dt: self.dt,
            eps: self.eps.clone(),
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunFormat {
    Text,
    Json,
    Csv,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INVALID
                }
            };
            return code;
        }
    };
    match cli.command {
        Command::List { format, tag } => list(format, tag.as_deref(), out),
        Command::Validate {
            scenario,
            overrides,
            format,
        } => cmd_validate(&scenario, &overrides, format, out, err),
        Command::Run {
            scenario,
            overrides,
            out: out_dir,
            jobs,
            format,
        } => cmd_run(&scenario, &overrides, out_dir, jobs, format, out, err),
    }
}

fn list(format: Format, tag: Option<&str>, out: &mut dyn Write) -> i32 {
    let scenarios: Vec<config::ScenarioConfig> = scenarios::builtin_names()
        .map(|n| {
            config::parse_scenario(n, scenarios::builtin_source(n).expect("listed"))
                .expect("built-ins parse")
        })
        .filter(|c| tag.is_none_or(|t| c.tags.iter().any(|x| x == t)))
        .collect();
    match format {
        Format::Json => {
            let mut items: Vec<serde_json::Value> = scenarios
                .iter()
                .map(|c| {
                    json!({
                        "type": "scenario",
                        "name": c.name,
                        "experiment": c.experiment.kind(),
                        "description": c.description,
                        "tags": c.tags,
                        "exploratory": c.exploratory,
                        "gates": c.gates.iter().map(|g| g.name.as_str()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            if tag.is_none() {
                for (kind, cat) in [("manifold", MANIFOLDS), ("model", MODELS)] {
                    items.extend(cat.iter().map(|e| {
                        json!({ "type": kind, "name": e.kind, "description": e.description, "anchor": e.anchor })
                    }));
                }
            }
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&items).expect("json")
            );
        }
        Format::Text => {
            let _ = writeln!(out, "Scenarios:");
            for c in &scenarios {
                let _ = writeln!(
                    out,
                    "  {:<24} {:<14} {}",
                    c.name,
                    c.experiment.kind(),
                    c.tags.join(", ")
                );
                let _ = writeln!(out, "      {}", c.description);
            }
            if tag.is_none() {
                for (title, cat) in [("Manifolds", MANIFOLDS), ("Models", MODELS)] {
                    let _ = writeln!(out, "{title}:");
                    for e in cat {
                        let _ = writeln!(out, "  {:<24} {}", e.kind, e.description);
                        let _ = writeln!(out, "      anchor: {}", e.anchor);
                    }
                }
            }
        }
    }
    EXIT_PASS
}

fn load(reference: &str, args: &OverrideArgs, err: &mut dyn Write) -> Result<Loaded, i32> {
    match config::load(reference) {
        Ok(mut l) => {
            l.overrides = l.overrides.merge(args.to_overrides());
            l.overrides.apply(&mut l.scenario);
            Ok(l)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            Err(EXIT_INVALID)
        }
    }
}

fn cmd_validate(
    reference: &str,
    args: &OverrideArgs,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let loaded = match load(reference, args, err) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let violations = validate(&loaded.scenario);
    match format {
        Format::Json => {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&json!({
                    "scenario": loaded.scenario.name,
                    "violations": violations,
                }))
                .expect("json")
            );
        }
        Format::Text => {
            if violations.is_empty() {
                let _ = writeln!(out, "{}: no violations", loaded.scenario.name);
            } else {
                let _ = writeln!(
                    out,
                    "{}: {} violation(s)",
                    loaded.scenario.name,
                    violations.len()
                );
                for v in &violations {
                    let _ = writeln!(out, "  - {v}");
                }
            }
        }
    }
    if violations.is_empty() {
        EXIT_PASS
    } else {
        EXIT_INVALID
    }
}

fn cmd_run(
    reference: &str,
    args: &OverrideArgs,
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
    format: RunFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let loaded = match load(reference, args, err) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if let Some(j) = jobs.or(loaded.overrides.jobs) {
        if j == 0 {
            let _ = writeln!(err, "error: --jobs must be at least 1");
            return EXIT_INVALID;
        }
        // The global pool can only be configured once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    let cfg = loaded.scenario;
    let output = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(e @ RunError::Invalid { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let root = out_dir
        .or(loaded.overrides.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = root.join(&cfg.name);
    if let Err(e) = write_artifacts(&dir, &output.report, &output.tables) {
        let _ = writeln!(err, "error: scenario `{}`: {e}", cfg.name);
        return EXIT_RUNTIME;
    }
    let report = &output.report;
    match format {
        RunFormat::Json => {
            let _ = write!(out, "{}", report.to_json());
        }
        RunFormat::Csv => {
            let _ = write!(out, "{}", gates_table(&report.gates).to_csv());
        }
        RunFormat::Text => {
            let _ = writeln!(
                out,
                "{}: {} paths, dt {}, seed {}, {:.2} s",
                cfg.name, cfg.sim.n_paths, cfg.sim.dt, cfg.sim.seed, report.wallclock_s
            );
            if report.gates.is_empty() {
                let _ = writeln!(out, "no gates (exploratory: {})", cfg.exploratory);
            }
            for g in &report.gates {
                let _ = writeln!(out, "{}", g.summary_line());
            }
            let _ = writeln!(out, "artifacts: {}", dir.display());
        }
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_GATE_FAILURE
    }
}
