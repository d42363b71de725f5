//! The operator surface: validate and explore models, derive configurations
//! against a scenario's fleet, run simulations, and replay traces.
//!
//! Exit codes are part of the contract: 0 success, 1 validation failure,
//! 2 usage error (left to clap), 3 runtime error such as unreadable input.
//! Data goes to stdout, diagnostics to stderr.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::fleetsim::{load_scenario, RunError, ScenarioError, World};
use crate::trace::{read_trace, verify_trace, TraceReadError};
use crate::variability::{
    check_selection, derive_fconfig, enumerate_configurations, parse_model, Selection,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fleetline", version, about = "Dynamic product-line engine for self-adaptive device fleets")]
pub struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Check a feature model's structural invariants.
    Validate {
        /// Path to a feature-model JSON file.
        model: PathBuf,
    },
    /// List every valid configuration, one sorted selection per line.
    Enumerate {
        model: PathBuf,
        /// Print at most this many selections (the total still counts all).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Derive a deployable configuration against a scenario's fleet.
    Derive {
        model: PathBuf,
        /// Scenario supplying the device registry and parameter defaults.
        scenario: PathBuf,
        /// Features to select; defaults to the scenario's initial selection.
        #[arg(long, value_delimiter = ',')]
        selection: Option<Vec<String>>,
    },
    /// Simulate a scenario, writing its event trace.
    Run {
        scenario: PathBuf,
        /// Seed for the world's random state (only used by noisy dynamics).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of ticks to simulate.
        #[arg(long, default_value_t = 200)]
        until: u64,
        /// Trace output path; omit to stream the trace to stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Verify a recorded trace's ordering and causality invariants.
    Replay {
        trace: PathBuf,
    },
}

impl Cli {
    pub fn run(self) -> i32 {
        match self.command {
            CliCommand::Validate { model } => cmd_validate(&model),
            CliCommand::Enumerate { model, limit } => cmd_enumerate(&model, limit),
            CliCommand::Derive {
                model,
                scenario,
                selection,
            } => cmd_derive(&model, &scenario, selection),
            CliCommand::Run {
                scenario,
                seed,
                until,
                trace,
            } => cmd_run(&scenario, seed, until, trace.as_deref()),
            CliCommand::Replay { trace } => cmd_replay(&trace),
        }
    }
}

fn read_file(path: &Path) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read `{}`: {e}", path.display());
        EXIT_RUNTIME
    })
}

fn cmd_validate(path: &Path) -> i32 {
    let text = match read_file(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match parse_model(&text) {
        Ok(model) => {
            println!(
                "ok: model `{}` with {} features",
                model.name,
                model.feature_count()
            );
            EXIT_OK
        }
        Err(e) => {
            println!("invalid: {e}");
            EXIT_VALIDATION
        }
    }
}

fn cmd_enumerate(path: &Path, limit: Option<usize>) -> i32 {
    let text = match read_file(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let model = match parse_model(&text) {
        Ok(m) => m,
        Err(e) => {
            println!("invalid: {e}");
            return EXIT_VALIDATION;
        }
    };
    match enumerate_configurations(&model, limit.unwrap_or(usize::MAX)) {
        Ok(enumeration) => {
            for selection in &enumeration.selections {
                println!("{selection}");
            }
            if enumeration.truncated {
                println!("total: {} (truncated)", enumeration.total);
            } else {
                println!("total: {}", enumeration.total);
            }
            EXIT_OK
        }
        Err(e) => {
            println!("invalid: {e}");
            EXIT_VALIDATION
        }
    }
}

fn cmd_derive(model_path: &Path, scenario_path: &Path, selection: Option<Vec<String>>) -> i32 {
    let model_text = match read_file(model_path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let model = match parse_model(&model_text) {
        Ok(m) => m,
        Err(e) => {
            println!("invalid: {e}");
            return EXIT_VALIDATION;
        }
    };
    let scenario = match load_scenario_at(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let selection = match selection {
        Some(features) => Selection::new(features.iter().map(String::as_str)),
        None => scenario.initial.selection.clone(),
    };
    match check_selection(&model, &selection) {
        Ok(verdict) if !verdict.is_valid() => {
            for violation in verdict.violations() {
                println!("invalid: {violation}");
            }
            return EXIT_VALIDATION;
        }
        Err(e) => {
            println!("invalid: {e}");
            return EXIT_VALIDATION;
        }
        Ok(_) => {}
    }
    match derive_fconfig(&model, &selection, &scenario.devices, &scenario.dconfig_defaults) {
        Ok(fconfig) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&fconfig).expect("fconfig serializes")
            );
            EXIT_OK
        }
        Err(e) => {
            println!("invalid: {e}");
            EXIT_VALIDATION
        }
    }
}

/// Reads and validates a scenario, mapping errors to exit codes: unreadable
/// files (scenario or referenced model) are runtime errors, everything else
/// is a validation failure.
fn load_scenario_at(path: &Path) -> Result<crate::fleetsim::Scenario, i32> {
    let text = read_file(path)?;
    load_scenario(&text, path.parent()).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ScenarioError::ModelFile { .. } => EXIT_RUNTIME,
            _ => EXIT_VALIDATION,
        }
    })
}

fn cmd_run(scenario_path: &Path, seed: u64, until: u64, trace: Option<&Path>) -> i32 {
    let scenario = match load_scenario_at(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut world = World::new(scenario, seed);
    let outcome = match trace {
        Some(out_path) => {
            let file = match File::create(out_path) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: cannot write `{}`: {e}", out_path.display());
                    return EXIT_RUNTIME;
                }
            };
            let mut sink = BufWriter::new(file);
            world.run(until, &mut sink).and_then(|events| {
                sink.flush()?;
                Ok(events)
            })
        }
        None => {
            let stdout = std::io::stdout();
            let mut sink = stdout.lock();
            world.run(until, &mut sink)
        }
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        return match e {
            RunError::InvalidUntil => EXIT_USAGE,
            RunError::Io(_) => EXIT_RUNTIME,
        };
    }
    let engine = world.engine();
    let mut summary = String::new();
    summary.push_str(&format!("adaptations: {}\n", engine.adaptations()));
    summary.push_str(&format!("final_effective: {:.6}\n", engine.last_effective()));
    summary.push_str(&format!("final_selection: {}\n", engine.current().selection));
    let bindings: Vec<String> = engine
        .current()
        .bindings
        .iter()
        .map(|(feature, device)| format!("{feature}={device}"))
        .collect();
    summary.push_str(&format!("final_bindings: {}\n", bindings.join(",")));
    if trace.is_some() {
        print!("{summary}");
    } else {
        // Keep the stdout data stream pure trace lines.
        eprint!("{summary}");
    }
    EXIT_OK
}

fn cmd_replay(path: &Path) -> i32 {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot read `{}`: {e}", path.display());
            return EXIT_RUNTIME;
        }
    };
    let events = match read_trace(BufReader::new(file)) {
        Ok(events) => events,
        Err(e @ TraceReadError::Malformed { .. }) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match verify_trace(&events) {
        Ok(summary) => {
            println!("events: {}", summary.events);
            for (kind, count) in &summary.by_kind {
                println!("{kind}: {count}");
            }
            println!("adaptations: {}", summary.adaptations);
            println!("ok");
            EXIT_OK
        }
        Err(violation) => {
            println!("violation: {violation}");
            EXIT_VALIDATION
        }
    }
}
