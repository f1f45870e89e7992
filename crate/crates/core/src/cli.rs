//! The command-line surface: `run`, `verify`, `attack`, `batch`, and
//! `recurrent`.
//!
//! [`run_cli`] parses arguments and returns a process exit code rather than
//! exiting, so the whole surface is testable in-process. Exit codes follow
//! the usual triage convention:
//!
//! - `0`: the command ran and every requested check passed (or there was
//!   nothing to check);
//! - `1`: the command ran but a check failed — a verifier rejected the trace,
//!   an attack could not be built or did not demonstrate its violation, or a
//!   batch contained failing rows;
//! - `2`: the request itself was unusable (bad flags, unreadable files,
//!   malformed configs, programs/models that do not fit the command).

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::attacks::{
    build_bounded_memory_attack, build_duplication_attack, build_lemma_sequence,
    fair_base_sequence, find_omission_recurrent, AttackScript, InteractionRole, RecurrenceQuery,
    RecurrenceVerdict, DEFAULT_T_CAP,
};
use crate::error::{Error, Result};
use crate::io::{
    load_trace, program_from_params, save_batch_csv, save_script, save_trace, BatchRow,
    BatchSummary, ResolvedRun, RunConfig, DEFAULT_WINDOW,
};
use crate::protocols::{check_token_invariants, last_quiescent_cut, PairingInstance};
use crate::scheduling::{run, verify_replay, ScriptStep, Trace};
use crate::semantics::{AgentProgram, Configuration, ModelSemantics};
use crate::value::Value;
use crate::verification::{check_naming, check_pairing, check_simulation};

/// Default node budget for the simulation-matching search.
pub const DEFAULT_MATCH_BUDGET: u64 = 1_000_000;
/// Default cap on distinct configurations explored per recurrence decision.
pub const DEFAULT_CONFIG_CAP: usize = 100_000;
/// Default bound on recurrence-witness length.
pub const DEFAULT_RECURRENCE_DEPTH: usize = 32;

#[derive(Parser)]
#[command(
    name = "omisim",
    version,
    about = "Simulate, verify, and attack population protocols under omissive and one-way interaction models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured run and record its trace.
    Run(RunArgs),
    /// Check a recorded trace against selected verifiers.
    Verify(VerifyArgs),
    /// Build an adversarial schedule against a configured target and replay it.
    Attack(AttackArgs),
    /// Fan a configured run out across consecutive seeds and summarize as CSV.
    Batch(BatchArgs),
    /// Decide whether the configured 2-agent start is omission-recurrent.
    Recurrent(RecurrentArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's horizon (number of scheduled interactions).
    #[arg(long)]
    horizon: Option<u64>,
    /// Trace output path (default: the config's `run.out`, else trace.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    /// Recompute every transition and compare against the recorded states.
    Replay,
    /// Match simulated-transition events against the target table
    /// one-to-one, with a temporal-consistency certificate.
    Simulation,
    /// Pairing irrevocability, safety, and liveness.
    Pairing,
    /// Naming ID uniqueness and eventual completion.
    Naming,
    /// Token-passing invariants at every configuration.
    Token,
}

impl CheckKind {
    fn label(self) -> &'static str {
        match self {
            CheckKind::Replay => "replay",
            CheckKind::Simulation => "simulation",
            CheckKind::Pairing => "pairing",
            CheckKind::Naming => "naming",
            CheckKind::Token => "token",
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace file to verify (JSON Lines).
    trace: PathBuf,
    /// Comma-separated checks to run (replay, simulation, pairing, naming,
    /// token). No checks means a vacuous pass.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<CheckKind>,
    /// Trailing window (in configurations) for stabilization judgments.
    #[arg(long)]
    window: Option<u64>,
    /// Node budget for the simulation-matching search.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AttackKind {
    /// Shadow one agent with a twin via leader-side omissions until a second
    /// simulated completion exists.
    Duplication,
    /// Mirror-cohort construction on 2^t + 2 agents from an omission-
    /// interleaved 2-agent sequence.
    BoundedMemory,
    /// Find and replay an omission-recurrence witness for the configured
    /// 2-agent start.
    Recurrence,
}

#[derive(Args)]
struct AttackArgs {
    /// Which construction to build.
    #[arg(long, value_enum)]
    kind: AttackKind,
    /// Target configuration (TOML); its population is the 2-agent base
    /// system the construction expands.
    #[arg(long)]
    config: PathBuf,
    /// Script output path; the replayed trace lands next to it.
    #[arg(long, default_value = "attack-script.jsonl")]
    out: PathBuf,
    /// Seed for the fair base run the construction starts from.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon for the fair base run.
    #[arg(long)]
    horizon: Option<u64>,
    /// Cap on distinct configurations per recurrence decision.
    #[arg(long)]
    budget: Option<usize>,
    /// Bound on recurrence-witness length.
    #[arg(long, default_value_t = DEFAULT_RECURRENCE_DEPTH)]
    depth: usize,
}

#[derive(Args)]
struct BatchArgs {
    /// Run configuration (TOML) shared by every row.
    #[arg(long)]
    config: PathBuf,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Base seed (row i runs with base + i); default: the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trailing window for per-row stabilization judgments.
    #[arg(long)]
    window: Option<u64>,
    /// Node budget for per-row simulation matching (token targets).
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct RecurrentArgs {
    /// 2-agent configuration (TOML) naming the leader and its peer.
    #[arg(long)]
    config: PathBuf,
    /// Bound on recurrence-witness length.
    #[arg(long, default_value_t = DEFAULT_RECURRENCE_DEPTH)]
    depth: usize,
    /// Cap on distinct configurations explored.
    #[arg(long)]
    budget: Option<usize>,
}

/// Parses and executes a full command line (including the binary name) and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                0
            } else {
                2
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Recurrent(args) => cmd_recurrent(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                // A construction that refuses (cap exceeded, no violation
                // produced) is a negative result, not a usage problem.
                Error::Attack(_) => 1,
                _ => 2,
            }
        }
    }
}

/// Degenerate-parameter warnings that do not invalidate the run.
fn warn_if_degenerate(resolved: &ResolvedRun) {
    if resolved.program.name().starts_with("it-token") && resolved.init.n() == 2 {
        eprintln!(
            "warning: the token-passing construction assumes that n > 2; \
             with n = 2 its round-trip guarantees do not apply"
        );
    }
}

fn semantics_of(trace: &Trace) -> Result<ModelSemantics> {
    let preset = trace.meta.preset.as_deref().ok_or_else(|| {
        Error::Config(
            "the trace records no model preset, so its semantics cannot be rebuilt".into(),
        )
    })?;
    ModelSemantics::preset(preset)
}

/// Classifies the initial configuration as a pairing instance by projecting
/// every agent onto pairing states. `None` when any agent projects elsewhere.
fn derive_pairing_instance(
    prog: &dyn AgentProgram,
    init: &Configuration,
) -> Option<PairingInstance> {
    if !prog.has_simulated_projection() {
        return None;
    }
    let mut n_c = 0;
    let mut n_p = 0;
    for state in &init.agents {
        let sim = prog.simulated_projection(state)?;
        match sim.as_sym()? {
            "c" | "cs" => n_c += 1,
            "p" | "bot" => n_p += 1,
            _ => return None,
        }
    }
    PairingInstance::new(n_c, n_p).ok()
}

fn execute_resolved(resolved: &ResolvedRun) -> Result<Trace> {
    let mut trace = run(
        resolved.program.as_ref(),
        &resolved.semantics,
        &resolved.init,
        &resolved.scheduler,
        &resolved.adversary,
        resolved.horizon,
        resolved.seed,
    )?;
    trace.meta.params = resolved.params.clone();
    Ok(trace)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(horizon) = args.horizon {
        config.run.horizon = horizon;
    }
    if let Some(out) = args.out {
        config.run.out = Some(out);
    }
    let resolved = config.resolve()?;
    warn_if_degenerate(&resolved);
    let trace = execute_resolved(&resolved)?;
    let out = resolved
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("trace.jsonl"));
    save_trace(&trace, &out)?;
    println!(
        "ran {} under {} for {} steps (n = {}, seed {}); {} omissions; trace -> {}",
        trace.meta.program,
        trace.meta.preset.as_deref().unwrap_or("custom semantics"),
        trace.len(),
        trace.init.n(),
        resolved.seed,
        trace.omission_count(),
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn run_check(
    check: CheckKind,
    trace: &Trace,
    prog: &dyn AgentProgram,
    table: Option<&crate::semantics::ProtocolTable>,
    sem: &ModelSemantics,
    window: u64,
    budget: u64,
) -> Result<(bool, String)> {
    match check {
        CheckKind::Replay => match verify_replay(trace, prog, sem) {
            Ok(()) => Ok((true, format!("{} events recomputed", trace.len()))),
            Err(e) => Ok((false, e.to_string())),
        },
        CheckKind::Simulation => {
            let table = table.ok_or_else(|| {
                Error::Config(
                    "the simulation check needs a table-driven target (the trace's program \
                     embeds no table)"
                        .into(),
                )
            })?;
            // Judge the matching at the last quiescent cutoff: an arbitrary
            // horizon may cut a two-phase simulated interaction in half. For
            // atomic targets every configuration is quiescent and the prefix
            // is the whole trace.
            let cut = last_quiescent_cut(trace) as usize;
            let clean;
            let (judged, tail) = if cut < trace.len() {
                clean = trace.prefix(cut);
                (&clean, trace.len() - cut)
            } else {
                (trace, 0)
            };
            let verdict = check_simulation(judged, prog, table, budget)?;
            if verdict.success {
                let tail_note = if tail > 0 {
                    format!("; {tail} trailing events carry an in-flight interaction")
                } else {
                    String::new()
                };
                Ok((
                    true,
                    format!(
                        "{} simulated interactions matched and linearized ({} nodes){tail_note}",
                        verdict.matching.len(),
                        verdict.nodes_explored
                    ),
                ))
            } else {
                let mut detail = verdict
                    .counterexample
                    .unwrap_or_else(|| "no consistent matching".into());
                if verdict.search_budget_exhausted {
                    detail.push_str(" (search budget exhausted; verdict may be incomplete)");
                }
                Ok((false, detail))
            }
        }
        CheckKind::Pairing => {
            let inst = derive_pairing_instance(prog, &trace.init).ok_or_else(|| {
                Error::Config(
                    "the pairing check needs a trace whose agents project onto pairing states"
                        .into(),
                )
            })?;
            let report = check_pairing(trace, prog, &inst, window)?;
            let pass = report.irrevocable && report.safe && report.live;
            let mut parts = Vec::new();
            if let Some(step) = report.first_irrevocability_violation {
                parts.push(format!("terminal state escaped at configuration {step}"));
            }
            if let Some(step) = report.first_safety_violation {
                parts.push(format!("safety violated at step {step}"));
            }
            if report.live {
                parts.push(format!(
                    "{} of {} pairs formed{}",
                    report.final_cs_count,
                    report.expected_pairs,
                    report
                        .stabilization_step
                        .map(|s| format!(", stable from step {s}"))
                        .unwrap_or_default()
                ));
            } else {
                parts.push(format!(
                    "not live: {} of {} pairs at the end",
                    report.final_cs_count, report.expected_pairs
                ));
            }
            Ok((pass, parts.join("; ")))
        }
        CheckKind::Naming => {
            let report = check_naming(trace, prog, window)?;
            let pass = report.unique && report.all_named;
            let mut parts = Vec::new();
            if let Some(step) = report.first_duplicate {
                parts.push(format!("duplicate ID at configuration {step}"));
            }
            if !report.all_named {
                parts.push("not everyone is named through the trailing window".into());
            }
            if let Some(max) = &report.max_id {
                parts.push(format!("max id {max}"));
            }
            if let Some(bound) = &report.counter_bound {
                parts.push(format!("counter bound {bound}"));
            }
            if let Some(step) = report.stabilization_step {
                parts.push(format!("stable from step {step}"));
            }
            Ok((pass, parts.join("; ")))
        }
        CheckKind::Token => {
            for (idx, config) in trace.configs().enumerate() {
                if let Err(msg) = check_token_invariants(&config) {
                    return Ok((false, format!("configuration {idx}: {msg}")));
                }
            }
            Ok((
                true,
                format!("invariants hold at all {} configurations", trace.len() + 1),
            ))
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let trace = load_trace(&args.trace)?;
    if args.checks.is_empty() {
        eprintln!("warning: no checks selected; the pass is vacuous");
        println!("verify: vacuous pass (0 checks)");
        return Ok(0);
    }
    let built = program_from_params(&trace.meta.params)?;
    let sem = semantics_of(&trace)?;
    let window = args.window.unwrap_or(DEFAULT_WINDOW);
    let budget = args.budget.unwrap_or(DEFAULT_MATCH_BUDGET);

    let mut passed = 0;
    for check in &args.checks {
        let (ok, detail) = run_check(
            *check,
            &trace,
            built.program.as_ref(),
            built.table.as_deref(),
            &sem,
            window,
            budget,
        )?;
        println!(
            "{}: {} — {detail}",
            check.label(),
            if ok { "pass" } else { "FAIL" }
        );
        passed += usize::from(ok);
    }
    println!("verify: {passed}/{} checks passed", args.checks.len());
    Ok(if passed == args.checks.len() { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

fn trace_path_for(out: &Path) -> PathBuf {
    let s = out.to_string_lossy();
    match s.strip_suffix(".jsonl") {
        Some(stem) => PathBuf::from(format!("{stem}.trace.jsonl")),
        None => PathBuf::from(format!("{s}.trace.jsonl")),
    }
}

/// Writes the script and its checkpoint-verified replay, returning the trace.
fn emit_attack(
    script: &AttackScript,
    resolved: &ResolvedRun,
    out: &Path,
) -> Result<(Trace, PathBuf)> {
    let prog = resolved.program.as_ref();
    let mut trace = script.verify_checkpoints(prog, &resolved.semantics)?;
    trace.meta.params = resolved.params.clone();
    save_script(script, prog, &resolved.semantics, out)?;
    let trace_path = trace_path_for(out);
    save_trace(&trace, &trace_path)?;
    println!(
        "attack script -> {} ({} steps, {} omissions, population {})",
        out.display(),
        script.steps.len(),
        script.omission_count(),
        script.population()
    );
    println!("replayed trace -> {}", trace_path.display());
    for note in &script.notes {
        println!("note: {note}");
    }
    Ok((trace, trace_path))
}

/// Reports the pairing-safety outcome of an attack trace when the population
/// projects onto pairing states; returns whether a violation was shown.
fn report_safety_violation(trace: &Trace, prog: &dyn AgentProgram) -> Result<Option<bool>> {
    let Some(inst) = derive_pairing_instance(prog, &trace.init) else {
        return Ok(None);
    };
    let report = check_pairing(trace, prog, &inst, 1)?;
    match report.first_safety_violation {
        Some(step) => {
            println!(
                "safety violated at step {step}: {} paired consumers against {} providers",
                report.final_cs_count, inst.n_p
            );
            Ok(Some(true))
        }
        None => {
            println!(
                "no safety violation: {} of {} pairs, within bounds",
                report.final_cs_count, inst.expected_pairs()
            );
            Ok(Some(false))
        }
    }
}

fn cmd_attack(args: AttackArgs) -> Result<i32> {
    let config = RunConfig::load(&args.config)?;
    let resolved = config.resolve()?;
    warn_if_degenerate(&resolved);
    let prog = resolved.program.as_ref();
    let sem = &resolved.semantics;
    let c0 = &resolved.init;
    let horizon = args.horizon.unwrap_or(resolved.horizon);
    let seed = args.seed.unwrap_or(resolved.seed);
    let config_cap = args.budget.unwrap_or(DEFAULT_CONFIG_CAP);

    match args.kind {
        AttackKind::Duplication => {
            let project = |config: &Configuration, agent: usize, expected: &str| {
                prog.simulated_projection(config.state(agent))
                    .is_some_and(|sim| sim.as_sym() == Some(expected))
            };
            let goal = |config: &Configuration| {
                project(config, 0, "bot") && project(config, 1, "cs")
            };
            let base = fair_base_sequence(prog, sem, c0, &goal, horizon, seed)?;
            let script = build_duplication_attack(prog, sem, c0, &base)?;
            let (trace, _) = emit_attack(&script, &resolved, &args.out)?;
            match report_safety_violation(&trace, prog)? {
                Some(true) => Ok(0),
                _ => Ok(1),
            }
        }
        AttackKind::BoundedMemory => {
            let table = resolved.table.as_deref().ok_or_else(|| {
                Error::Config(
                    "the bounded-memory construction needs a finite-state target \
                     (a table-driven program)"
                        .into(),
                )
            })?;
            let init_sim: Vec<Option<Value>> = (0..c0.n())
                .map(|i| prog.simulated_projection(c0.state(i)))
                .collect();
            let goal = |config: &Configuration| {
                (0..config.n())
                    .all(|i| prog.simulated_projection(config.state(i)) != init_sim[i])
            };
            let base = fair_base_sequence(prog, sem, c0, &goal, horizon, seed)?;
            let lemma = build_lemma_sequence(
                prog,
                sem,
                c0,
                &base,
                table.state_count(),
                args.depth,
                config_cap,
            )?;
            println!(
                "omission-interleaved sequence: t = {} steps, {} of at most {} omissions inserted",
                lemma.steps.len(),
                lemma.insertions,
                lemma.k
            );
            let script = build_bounded_memory_attack(prog, sem, c0, &lemma, DEFAULT_T_CAP)?;
            let (trace, _) = emit_attack(&script, &resolved, &args.out)?;
            let fin = trace.final_config();
            println!(
                "mirror intact: agents 1 and 2 end in identical states ({})",
                fin.state(1)
            );
            match report_safety_violation(&trace, prog)? {
                Some(false) => Ok(1),
                _ => Ok(0), // the mirror itself is checkpoint-verified
            }
        }
        AttackKind::Recurrence => {
            if c0.n() != 2 {
                return Err(Error::Config(format!(
                    "the recurrence witness runs on the 2-agent (leader, agent) system; \
                     the config population has {} agents",
                    c0.n()
                )));
            }
            let li = c0.leader_index.unwrap_or(0);
            let peer = 1 - li;
            let mut chosen: Option<(InteractionRole, Vec<ScriptStep>)> = None;
            let mut bound_limited = false;
            for role in [InteractionRole::Starter, InteractionRole::Reactor] {
                let query = RecurrenceQuery {
                    program: prog,
                    semantics: sem,
                    leader_state: c0.state(li).clone(),
                    agent_state: c0.state(peer).clone(),
                    leader_role: role,
                    depth_bound: args.depth,
                    config_cap,
                };
                match find_omission_recurrent(&query)? {
                    RecurrenceVerdict::Recurrent(witness) => {
                        chosen = Some((role, witness));
                        break;
                    }
                    RecurrenceVerdict::NotRecurrent { bound_limited: b } => bound_limited |= b,
                }
            }
            let Some((role, witness)) = chosen else {
                println!(
                    "not omission-recurrent in either role{}",
                    if bound_limited {
                        " (bounds hit; deeper search might still find a witness)"
                    } else {
                        " (search exhaustive)"
                    }
                );
                return Ok(1);
            };
            // Witness steps index the pair as (0 = leader, 1 = agent); remap
            // onto the configured indices.
            let steps: Vec<ScriptStep> = witness
                .iter()
                .map(|step| {
                    ScriptStep::new(
                        if step.starter == 0 { li } else { peer },
                        if step.reactor == 0 { li } else { peer },
                        step.flavor,
                    )
                })
                .collect();
            let t = steps.len();
            let script = AttackScript {
                name: "recurrence".into(),
                program: prog.name().to_string(),
                preset: sem.preset_name.clone(),
                init: c0.clone(),
                steps,
                checkpoints: vec![],
                notes: vec![format!(
                    "omission-recurrence witness with the leader as {}: a both-sides omission \
                     followed by {} steps restores the leader's state",
                    match role {
                        InteractionRole::Starter => "starter",
                        InteractionRole::Reactor => "reactor",
                    },
                    t - 1
                )],
            };
            let (trace, _) = emit_attack(&script, &resolved, &args.out)?;
            let fin = trace.final_config();
            if fin.state(li) != c0.state(li) {
                return Err(Error::Attack(
                    "replaying the recurrence witness did not restore the leader's state".into(),
                ));
            }
            println!("recurrent, t={t}: the leader's state is restored after the omission");
            Ok(0)
        }
    }
}

// ---------------------------------------------------------------------------
// batch
// ---------------------------------------------------------------------------

/// What a batch row checks, decided once per configured program.
enum RowChecks {
    Pairing(PairingInstance),
    Naming,
    Token,
    None,
}

fn classify_for_batch(resolved: &ResolvedRun) -> RowChecks {
    let prog = resolved.program.as_ref();
    if prog.name().starts_with("it-token") {
        return RowChecks::Token;
    }
    let probe = resolved.init.leader_index.unwrap_or(0);
    if prog.naming_view(resolved.init.state(probe)).is_some() {
        return RowChecks::Naming;
    }
    match derive_pairing_instance(prog, &resolved.init) {
        Some(inst) => RowChecks::Pairing(inst),
        None => RowChecks::None,
    }
}

fn batch_row(
    resolved: &ResolvedRun,
    checks: &RowChecks,
    seed: u64,
    window: u64,
    budget: u64,
) -> BatchRow {
    let prog = resolved.program.as_ref();
    let trace = match run(
        prog,
        &resolved.semantics,
        &resolved.init,
        &resolved.scheduler,
        &resolved.adversary,
        resolved.horizon,
        seed,
    ) {
        Ok(trace) => trace,
        Err(e) => return BatchRow::failed(seed, e.to_string()),
    };
    let mut row = BatchRow {
        seed,
        liveness: None,
        safety: None,
        max_id: None,
        omissions: trace.omission_count(),
        stabilization_step: None,
        error: None,
    };
    let outcome: Result<()> = (|| {
        match checks {
            RowChecks::Pairing(inst) => {
                let report = check_pairing(&trace, prog, inst, window)?;
                row.liveness = Some(report.live);
                row.safety = Some(report.safe && report.irrevocable);
                row.stabilization_step = report.stabilization_step;
            }
            RowChecks::Naming => {
                let report = check_naming(&trace, prog, window)?;
                row.liveness = Some(report.all_named);
                row.safety = Some(report.unique);
                row.max_id = report.max_id;
                row.stabilization_step = report.stabilization_step;
            }
            RowChecks::Token => {
                let table = resolved.table.as_deref().ok_or_else(|| {
                    Error::Config("token batches need a table-driven target".into())
                })?;
                let invariants_hold = trace
                    .configs()
                    .all(|config| check_token_invariants(&config).is_ok());
                let clean = trace.prefix(last_quiescent_cut(&trace) as usize);
                let verdict = check_simulation(&clean, prog, table, budget)?;
                row.liveness = Some(verdict.success);
                row.safety = Some(invariants_hold);
            }
            RowChecks::None => {}
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

fn cmd_batch(args: BatchArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let resolved = config.resolve()?;
    warn_if_degenerate(&resolved);
    let checks = classify_for_batch(&resolved);
    let window = args.window.unwrap_or(DEFAULT_WINDOW);
    let budget = args.budget.unwrap_or(DEFAULT_MATCH_BUDGET);
    let base = resolved.seed;

    // Rows are computed in parallel but collected in seed order, so the CSV
    // is a pure function of the config and the base seed.
    let rows: Vec<BatchRow> = (0..args.seeds)
        .into_par_iter()
        .map(|i| batch_row(&resolved, &checks, base.wrapping_add(i), window, budget))
        .collect();
    let summary = BatchSummary { rows };
    let passed = summary.passed();
    match &args.out {
        Some(path) => {
            save_batch_csv(&summary, path)?;
            let (lp, la) = summary.liveness_rate();
            let (sp, sa) = summary.safety_rate();
            println!(
                "batch: {} rows -> {} (liveness {lp}/{la}, safety {sp}/{sa}, {} errors)",
                summary.rows.len(),
                path.display(),
                summary.error_count()
            );
        }
        None => print!("{}", summary.to_csv()),
    }
    Ok(if passed { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// recurrent
// ---------------------------------------------------------------------------

fn cmd_recurrent(args: RecurrentArgs) -> Result<i32> {
    let config = RunConfig::load(&args.config)?;
    let resolved = config.resolve()?;
    let c0 = &resolved.init;
    if c0.n() != 2 {
        return Err(Error::Config(format!(
            "the recurrence decision runs on the 2-agent (leader, agent) system; \
             the config population has {} agents",
            c0.n()
        )));
    }
    let li = c0.leader_index.unwrap_or(0);
    let peer = 1 - li;
    let mut all_recurrent = true;
    for role in [InteractionRole::Starter, InteractionRole::Reactor] {
        let query = RecurrenceQuery {
            program: resolved.program.as_ref(),
            semantics: &resolved.semantics,
            leader_state: c0.state(li).clone(),
            agent_state: c0.state(peer).clone(),
            leader_role: role,
            depth_bound: args.depth,
            config_cap: args.budget.unwrap_or(DEFAULT_CONFIG_CAP),
        };
        let label = match role {
            InteractionRole::Starter => "leader as starter",
            InteractionRole::Reactor => "leader as reactor",
        };
        match find_omission_recurrent(&query)? {
            RecurrenceVerdict::Recurrent(witness) => {
                println!("{label}: recurrent, t={}", witness.len());
            }
            RecurrenceVerdict::NotRecurrent { bound_limited } => {
                all_recurrent = false;
                println!(
                    "{label}: not recurrent{}",
                    if bound_limited {
                        " within the search bounds (undecided beyond them)"
                    } else {
                        " (search exhaustive)"
                    }
                );
            }
        }
    }
    Ok(if all_recurrent { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> i32 {
        run_cli(std::iter::once("omisim").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_with_code_2() {
        assert_eq!(cli(&["nonesuch"]), 2);
        assert_eq!(cli(&["run"]), 2, "run needs --config");
        assert_eq!(cli(&["verify"]), 2, "verify needs a trace path");
        assert_eq!(cli(&["attack", "--config", "x.toml"]), 2, "attack needs --kind");
        assert_eq!(
            cli(&["verify", "t.jsonl", "--checks", "nonesuch"]),
            2,
            "unknown checks are usage errors"
        );
        assert_eq!(cli(&["run", "--config", "/definitely/not/here.toml"]), 2);
    }

    #[test]
    fn help_and_version_exit_cleanly() {
        assert_eq!(cli(&["--help"]), 0);
        assert_eq!(cli(&["--version"]), 0);
        assert_eq!(cli(&["batch", "--help"]), 0);
    }

    #[test]
    fn attack_traces_land_next_to_their_scripts() {
        assert_eq!(
            trace_path_for(Path::new("out/duplication.jsonl")),
            PathBuf::from("out/duplication.trace.jsonl")
        );
        assert_eq!(
            trace_path_for(Path::new("script")),
            PathBuf::from("script.trace.jsonl")
        );
    }
}
