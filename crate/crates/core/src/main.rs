use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use unicoat::analysis::{competitive_ratio_estimate, is_legal, matching_dilation};
use unicoat::coating::ElectionKind;
use unicoat::harness::{
    configuration_svg, gen_gap_theorem1, gen_hexagon, gen_line_lemma1, run_experiment,
    validate_instance, Execution, ExperimentPlan, Instance,
};
use unicoat::scheduler::{
    build_greedy_forest_schedule, check_dominance, check_expanded_parent_invariant, run_async,
    validate_parallel_schedule, ActivationPolicy, Outcome, RunOptions, ScheduleError, ScheduleMode,
    Trace,
};

const INVALID: u8 = 2;
const ROUND_LIMIT: u8 = 3;
const INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "unicoat",
    version,
    about = "Universal coating simulator and analysis tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
    Svg,
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Activation order: `permutation` or `uniform`.
    #[arg(long, default_value = "permutation")]
    scheduler: ActivationPolicy,
    /// Leader election strategy: `randomized` or `oracle`.
    #[arg(long, default_value = "randomized")]
    election: ElectionKind,
    /// Round limit; defaults to 50 n.
    #[arg(long)]
    max_rounds: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instance to quiescence.
    Run {
        /// Instance file, or `hexagon:RADIUS:N`, `line:N`, `gap:N`.
        instance: String,
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
        /// Also check tunnel width before running.
        #[arg(long)]
        strict: bool,
        /// Complaint flags a particle may hold.
        #[arg(long, default_value_t = 2)]
        flag_capacity: u8,
        /// Write the round-by-round trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output file instead of standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan.
    Experiment {
        plan: PathBuf,
        /// Overrides the plan's seed base.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scheduler: Option<ActivationPolicy>,
        #[arg(long)]
        election: Option<ElectionKind>,
        #[arg(long)]
        max_rounds: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
        /// Directory for output files; CSV and JSON go to standard output without it.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Run trials one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Check an instance for validity.
    Validate {
        instance: String,
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Matching dilation of an instance.
    Md {
        instance: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
    },
    /// Build greedy schedules from a trace and check dominance and invariants.
    Check {
        trace: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(INVALID, e.to_string())
    }
}

fn load_instance(spec: &str, seed: u64) -> Result<Instance, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Failure(INVALID, format!("bad number `{s}` in `{spec}`")))
    };
    Ok(match parts.as_slice() {
        ["hexagon", r, n] => gen_hexagon(num(r)? as u32, num(n)?, seed)?,
        ["line", n] => gen_line_lemma1(num(n)?)?,
        ["gap", n] => gen_gap_theorem1(num(n)?)?,
        _ => {
            Instance::load(Path::new(spec)).map_err(|e| Failure(INVALID, format!("{spec}: {e}")))?
        }
    })
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn ensure_valid(inst: &Instance, strict: bool) -> Result<(), Failure> {
    let report = validate_instance(inst, strict);
    if report.is_valid() {
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    Err(Failure(
        INVALID,
        format!("invalid instance:\n  {}", lines.join("\n  ")),
    ))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    spec: &str,
    flags: RunFlags,
    emit: Emit,
    strict: bool,
    flag_capacity: u8,
    trace_path: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<u8, Failure> {
    let inst = load_instance(spec, flags.seed)?;
    ensure_valid(&inst, strict)?;
    let mut opts = RunOptions {
        seed: flags.seed,
        election: flags.election,
        policy: flags.scheduler,
        max_rounds: flags.max_rounds,
        record_trace: trace_path.is_some(),
        check_invariants: true,
        ..RunOptions::default()
    };
    opts.params.flag_capacity = flag_capacity;
    let result = run_async(inst.configuration(flags.seed), &opts)
        .map_err(|e| Failure(INVARIANT, e.to_string()))?;
    if let (Some(path), Some(trace)) = (trace_path, &result.trace) {
        trace.write_jsonl(fs::File::create(path)?)?;
    }
    let md = matching_dilation(&inst.object_set(), &inst.particles)
        .ok()
        .map(|m| m.value);
    let ratio = md
        .filter(|_| result.is_quiescent())
        .and_then(|md| competitive_ratio_estimate(result.rounds, md));
    let outcome = match result.outcome {
        Outcome::Quiescent => "quiescent",
        Outcome::RoundLimit => "round_limit",
    };
    let text = match emit {
        Emit::Json => {
            let summary = json!({
                "n": inst.n(),
                "seed": flags.seed,
                "outcome": outcome,
                "rounds": result.rounds,
                "activations": result.activations,
                "legal": is_legal(&result.config),
                "leader": result.leader,
                "layer_rounds": result.layer_rounds,
                "md": md,
                "rounds_over_md": ratio,
            });
            format!("{}\n", serde_json::to_string_pretty(&summary)?)
        }
        Emit::Csv => format!(
            "n,seed,outcome,rounds,activations,md,rounds_over_md\n{},{},{},{},{},{},{}\n",
            inst.n(),
            flags.seed,
            outcome,
            result.rounds,
            result.activations,
            md.map(|m| m.to_string()).unwrap_or_default(),
            ratio.map(|r| r.to_string()).unwrap_or_default()
        ),
        Emit::Svg => configuration_svg(&result.config),
    };
    write_out(out.as_deref(), &text)?;
    Ok(if result.is_quiescent() {
        0
    } else {
        ROUND_LIMIT
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    plan_path: &Path,
    seed: Option<u64>,
    scheduler: Option<ActivationPolicy>,
    election: Option<ElectionKind>,
    max_rounds: Option<u64>,
    emit: Emit,
    out: Option<PathBuf>,
    sequential: bool,
) -> Result<u8, Failure> {
    let mut plan: ExperimentPlan = serde_json::from_str(&fs::read_to_string(plan_path)?)?;
    if let Some(s) = seed {
        plan.seed_base = s;
    }
    if let Some(p) = scheduler {
        plan.policy = p;
    }
    if let Some(e) = election {
        plan.election = e;
    }
    if max_rounds.is_some() {
        plan.max_rounds = max_rounds;
    }
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report = run_experiment(&plan, exec).map_err(|e| match e {
        unicoat::harness::ExperimentError::Engine { .. } => Failure(INVARIANT, e.to_string()),
        other => Failure(INVALID, other.to_string()),
    })?;
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
    }
    match (emit, &out) {
        (Emit::Csv, Some(dir)) => {
            fs::write(dir.join("trials.csv"), report.trials_csv())?;
            fs::write(dir.join("summary.csv"), report.cells_csv())?;
        }
        (Emit::Csv, None) => write_out(None, &report.cells_csv())?,
        (Emit::Json, _) => {
            let text = serde_json::to_string_pretty(
                &json!({ "trials": report.trials, "cells": report.cells }),
            )?;
            write_out(
                out.as_ref().map(|d| d.join("report.json")).as_deref(),
                &format!("{text}\n"),
            )?;
        }
        (Emit::Svg, Some(dir)) => {
            for (name, svg) in report.charts() {
                fs::write(dir.join(format!("{name}.svg")), svg)?;
            }
        }
        (Emit::Svg, None) => return Err(Failure(INVALID, "--emit svg needs --out DIR".into())),
    }
    let limited: usize = report.cells.iter().map(|c| c.round_limit).sum();
    if limited > 0 {
        eprintln!("{limited} trial(s) hit the round limit");
        return Ok(ROUND_LIMIT);
    }
    Ok(0)
}

fn cmd_validate(spec: &str, strict: bool, seed: u64) -> Result<u8, Failure> {
    let inst = load_instance(spec, seed)?;
    let report = validate_instance(&inst, strict);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.is_valid() { 0 } else { INVALID })
}

fn cmd_md(spec: &str, seed: u64, emit: Emit) -> Result<u8, Failure> {
    let inst = load_instance(spec, seed)?;
    ensure_valid(&inst, false)?;
    let md = matching_dilation(&inst.object_set(), &inst.particles)?;
    match emit {
        Emit::Csv => println!("n,md\n{},{}", inst.n(), md.value),
        Emit::Json => println!(
            "{}",
            json!({ "n": inst.n(), "md": md.value, "note": "lower bound, not OPT" })
        ),
        Emit::Svg => return Err(Failure(INVALID, "md has no chart output".into())),
    }
    Ok(0)
}

fn cmd_check(path: &Path, seed: u64) -> Result<u8, Failure> {
    let trace = Trace::read_jsonl(&fs::read_to_string(path)?)?;
    let mut failed = false;
    for mode in [ScheduleMode::Plain, ScheduleMode::Complaint] {
        let schedule = match build_greedy_forest_schedule(&trace, mode, seed) {
            Ok(s) => s,
            Err(ScheduleError::FlagCapacity { .. }) => {
                println!("{mode:?}: skipped (complaint schedules need a trace recorded with --flag-capacity 1)");
                continue;
            }
            Err(e) => {
                println!("{mode:?}: cannot build schedule: {e}");
                failed = true;
                continue;
            }
        };
        let problems: Vec<String> = [
            validate_parallel_schedule(&schedule)
                .err()
                .map(|e| e.to_string()),
            check_dominance(&trace, &schedule)
                .err()
                .map(|e| e.to_string()),
            check_expanded_parent_invariant(&trace, &schedule)
                .err()
                .map(|e| e.to_string()),
        ]
        .into_iter()
        .flatten()
        .collect();
        if problems.is_empty() {
            println!("{mode:?}: ok ({} steps)", schedule.len());
        } else {
            failed = true;
            for p in problems {
                println!("{mode:?}: {p}");
            }
        }
    }
    Ok(if failed { INVARIANT } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            instance,
            flags,
            emit,
            strict,
            flag_capacity,
            trace,
            out,
        } => cmd_run(&instance, flags, emit, strict, flag_capacity, trace, out),
        Command::Experiment {
            plan,
            seed,
            scheduler,
            election,
            max_rounds,
            emit,
            out,
            sequential,
        } => cmd_experiment(
            &plan, seed, scheduler, election, max_rounds, emit, out, sequential,
        ),
        Command::Validate {
            instance,
            strict,
            seed,
        } => cmd_validate(&instance, strict, seed),
        Command::Md {
            instance,
            seed,
            emit,
        } => cmd_md(&instance, seed, emit),
        Command::Check { trace, seed } => cmd_check(&trace, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
