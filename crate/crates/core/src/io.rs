//! Trace, script, and configuration files, plus batch experiment summaries.
//!
//! Three artifact kinds, all line-oriented so they stream and diff well:
//!
//! - **Traces** (JSON Lines): line 1 is the run metadata object (tagged
//!   `"kind": "trace"`), line 2 the initial configuration, then one object per
//!   interaction with fields `{t, s, r, flavor, pre, post}`. States use the
//!   JSON encoding of [`Value`]; flavors use their wire labels. Trailing lines
//!   without a `t` field (appended summaries) are ignored.
//! - **Attack scripts** (JSON Lines): the same layout tagged `"kind":
//!   "script"`, with checkpoints and provenance notes in the metadata, and
//!   event lines without post-states — a script prescribes a schedule; its
//!   effects are recorded in the replayed trace artifact.
//! - **Run configurations** (TOML): program, model, population, scheduler,
//!   and adversary sections resolved to runnable objects by
//!   [`RunConfig::resolve`].
//!
//! Batch summaries render as CSV with the fixed column set
//! `seed,liveness,safety,max_id,omissions,stabilization_step,error`, followed
//! by `#`-prefixed aggregate lines. Every cell is an integer, a boolean, or a
//! sanitized message, so equal inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attacks::{AttackScript, Checkpoint};
use crate::error::{Error, Result};
use crate::protocols::{
    it_token_simulator, naming_i12_program, naming_t1_program, naming_unbounded_program,
    pairing_program, strawman_t1_simulator,
};
use crate::scheduling::{
    AdversaryPolicy, OmissionAdversary, Scheduler, ScriptStep, Trace, TraceMeta,
};
use crate::semantics::{
    AgentProgram, Configuration, InitSpec, InteractionEvent, ModelSemantics, OmissionFlavor,
    ProtocolTable, TableProgram,
};
use crate::value::{StateCache, Value};

/// Default run length when a config or the command line does not set one.
pub const DEFAULT_HORIZON: u64 = 100_000;
/// Default trailing stabilization window (10% of the default horizon).
pub const DEFAULT_WINDOW: u64 = 10_000;

fn io_with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

// ---------------------------------------------------------------------------
// JSON Lines plumbing shared by traces and scripts.
// ---------------------------------------------------------------------------

fn parse_json_line(line_no: usize, line: &str) -> Result<serde_json::Value> {
    serde_json::from_str(line)
        .map_err(|e| Error::Config(format!("line {line_no} is not valid JSON: {e}")))
}

/// Pulls the next non-blank JSON line, or `None` at end of file.
fn next_json(
    lines: &mut std::iter::Enumerate<std::io::Lines<impl BufRead>>,
) -> Result<Option<(usize, serde_json::Value)>> {
    for (idx, line) in lines.by_ref() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        return Ok(Some((idx + 1, parse_json_line(idx + 1, &line)?)));
    }
    Ok(None)
}

fn require_json(
    lines: &mut std::iter::Enumerate<std::io::Lines<impl BufRead>>,
    what: &str,
) -> Result<(usize, serde_json::Value)> {
    next_json(lines)?.ok_or_else(|| Error::Config(format!("the file ends before its {what} line")))
}

/// Checks the `kind` tag on a metadata line. Untagged files are accepted (the
/// writers always tag, but hand-made fixtures may not); a mismatched tag is a
/// hard error so traces and scripts cannot be confused for each other.
fn check_kind(v: &serde_json::Value, expected: &str) -> Result<()> {
    match v.get("kind").and_then(serde_json::Value::as_str) {
        Some(k) if k == expected => Ok(()),
        Some(other) => Err(Error::Config(format!(
            "this file holds a `{other}`, not a {expected}"
        ))),
        None => Ok(()),
    }
}

fn config_to_json(config: &Configuration) -> serde_json::Value {
    json!({
        "agents": config.agents.iter().map(|a| a.to_json()).collect::<Vec<_>>(),
        "leader_index": config.leader_index,
    })
}

fn config_from_json(line_no: usize, v: &serde_json::Value) -> Result<Configuration> {
    let agents = v
        .get("agents")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: the initial configuration needs an `agents` array"
            ))
        })?;
    let states = agents
        .iter()
        .map(Value::from_json)
        .collect::<Result<Vec<Value>>>()
        .map_err(|e| Error::Config(format!("line {line_no}: {e}")))?;
    let leader_index = match v.get("leader_index") {
        None | Some(serde_json::Value::Null) => None,
        Some(idx) => Some(idx.as_u64().ok_or_else(|| {
            Error::Config(format!("line {line_no}: `leader_index` must be an index or null"))
        })? as usize),
    };
    Ok(Configuration::new(states, leader_index))
}

fn field_u64(line_no: usize, v: &serde_json::Value, key: &str) -> Result<u64> {
    v.get(key)
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: event field `{key}` is missing or not a non-negative integer"
            ))
        })
}

fn field_flavor(line_no: usize, v: &serde_json::Value) -> Result<OmissionFlavor> {
    let label = v
        .get("flavor")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| {
            Error::Config(format!("line {line_no}: event field `flavor` is missing"))
        })?;
    OmissionFlavor::from_label(label)
        .map_err(|e| Error::Config(format!("line {line_no}: {e}")))
}

fn field_state_pair(
    line_no: usize,
    v: &serde_json::Value,
    key: &str,
    cache: &mut StateCache,
) -> Result<(Arc<Value>, Arc<Value>)> {
    let pair = v
        .get(key)
        .and_then(serde_json::Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: event field `{key}` must be a [starter, reactor] state pair"
            ))
        })?;
    let s = Value::from_json(&pair[0]).map_err(|e| Error::Config(format!("line {line_no}: {e}")))?;
    let r = Value::from_json(&pair[1]).map_err(|e| Error::Config(format!("line {line_no}: {e}")))?;
    Ok((cache.intern(s), cache.intern(r)))
}

/// Common part of trace and script event lines: step index (must be
/// consecutive), pair (must be valid for the population), and flavor.
fn schedule_from_json(
    line_no: usize,
    v: &serde_json::Value,
    expected_t: u64,
    n: usize,
) -> Result<ScriptStep> {
    let t = field_u64(line_no, v, "t")?;
    if t != expected_t {
        return Err(Error::Config(format!(
            "line {line_no}: events must be numbered consecutively from 0, expected t = {expected_t} but found {t}"
        )));
    }
    let s = field_u64(line_no, v, "s")? as usize;
    let r = field_u64(line_no, v, "r")? as usize;
    if s >= n || r >= n || s == r {
        return Err(Error::Config(format!(
            "line {line_no}: pair ({s}, {r}) is invalid for a population of {n}"
        )));
    }
    Ok(ScriptStep::new(s, r, field_flavor(line_no, v)?))
}

// ---------------------------------------------------------------------------
// Trace files.
// ---------------------------------------------------------------------------

fn trace_event_to_json(ev: &InteractionEvent) -> serde_json::Value {
    json!({
        "t": ev.time,
        "s": ev.starter,
        "r": ev.reactor,
        "flavor": ev.flavor.label(),
        "pre": [ev.pre.0.to_json(), ev.pre.1.to_json()],
        "post": [ev.post.0.to_json(), ev.post.1.to_json()],
    })
}

/// Writes a trace as JSON Lines: metadata, initial configuration, one line
/// per event. Rejects traces whose metadata disagrees with the event list,
/// since such a file could not be read back.
pub fn write_trace(trace: &Trace, mut w: impl Write) -> Result<()> {
    if trace.meta.horizon != trace.events.len() as u64 {
        return Err(Error::Config(format!(
            "trace metadata declares horizon {} but the trace has {} events",
            trace.meta.horizon,
            trace.events.len()
        )));
    }
    if trace.meta.n != trace.init.n() {
        return Err(Error::Config(format!(
            "trace metadata declares n = {} but the initial configuration has {} agents",
            trace.meta.n,
            trace.init.n()
        )));
    }
    let mut meta = serde_json::to_value(&trace.meta)?;
    meta.as_object_mut()
        .expect("run metadata serializes to an object")
        .insert("kind".into(), json!("trace"));
    writeln!(w, "{meta}")?;
    writeln!(w, "{}", config_to_json(&trace.init))?;
    for (i, ev) in trace.events.iter().enumerate() {
        if ev.time != i as u64 {
            return Err(Error::Config(format!(
                "trace event {i} is timestamped {}; event times must increase by 1 from 0",
                ev.time
            )));
        }
        writeln!(w, "{}", trace_event_to_json(ev))?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Event counts are checked against
/// the declared horizon, so truncated files are rejected rather than silently
/// shortened.
pub fn read_trace(reader: impl BufRead) -> Result<Trace> {
    let mut lines = reader.lines().enumerate();
    let (_, meta_json) = require_json(&mut lines, "run metadata")?;
    check_kind(&meta_json, "trace")?;
    let meta: TraceMeta = serde_json::from_value(meta_json)?;
    let (init_no, init_json) = require_json(&mut lines, "initial configuration")?;
    let init = config_from_json(init_no, &init_json)?;
    if init.n() != meta.n {
        return Err(Error::Config(format!(
            "metadata declares n = {} but the initial configuration has {} agents",
            meta.n,
            init.n()
        )));
    }

    let mut events: Vec<InteractionEvent> = Vec::new();
    let mut cache = StateCache::new();
    while let Some((line_no, v)) = next_json(&mut lines)? {
        if v.get("t").is_none() {
            break; // trailing summary lines are tolerated and ignored
        }
        let step = schedule_from_json(line_no, &v, events.len() as u64, init.n())?;
        let pre = field_state_pair(line_no, &v, "pre", &mut cache)?;
        let post = field_state_pair(line_no, &v, "post", &mut cache)?;
        events.push(InteractionEvent {
            time: events.len() as u64,
            starter: step.starter,
            reactor: step.reactor,
            flavor: step.flavor,
            pre,
            post,
        });
    }
    if events.len() as u64 != meta.horizon {
        return Err(Error::Config(format!(
            "metadata declares horizon {} but the file contains {} events (truncated?)",
            meta.horizon,
            events.len()
        )));
    }
    Ok(Trace { meta, init, events })
}

pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_with_path(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io_with_path(path, e))?;
    read_trace(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Attack script files.
// ---------------------------------------------------------------------------

fn checkpoint_to_json(cp: &Checkpoint) -> serde_json::Value {
    json!({ "after_step": cp.after_step, "mirror_agents": cp.mirror_agents })
}

fn checkpoint_from_json(v: &serde_json::Value) -> Result<Checkpoint> {
    let after_step = v
        .get("after_step")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Config("checkpoint is missing `after_step`".into()))?
        as usize;
    let mirror_agents = v
        .get("mirror_agents")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| Error::Config("checkpoint is missing `mirror_agents`".into()))?
        .iter()
        .map(|a| {
            a.as_u64()
                .map(|i| i as usize)
                .ok_or_else(|| Error::Config(format!("checkpoint agent {a} is not an index")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(Checkpoint {
        after_step,
        mirror_agents,
    })
}

/// Writes an attack script as JSON Lines. Event lines carry pre-interaction
/// states for auditability but no post-states; the pre-states are recovered
/// by replaying the script against the target, which also re-validates that
/// every scheduled flavor is admissible.
pub fn write_script(
    script: &AttackScript,
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    mut w: impl Write,
) -> Result<()> {
    let trace = script.replay(prog, sem)?;
    let meta = json!({
        "kind": "script",
        "name": script.name,
        "program": script.program,
        "preset": script.preset,
        "steps": script.steps.len(),
        "omissions": script.omission_count(),
        "checkpoints": script.checkpoints.iter().map(checkpoint_to_json).collect::<Vec<_>>(),
        "notes": script.notes,
    });
    writeln!(w, "{meta}")?;
    writeln!(w, "{}", config_to_json(&script.init))?;
    for (i, (step, ev)) in script.steps.iter().zip(&trace.events).enumerate() {
        writeln!(
            w,
            "{}",
            json!({
                "t": i as u64,
                "s": step.starter,
                "r": step.reactor,
                "flavor": step.flavor.label(),
                "pre": [ev.pre.0.to_json(), ev.pre.1.to_json()],
            })
        )?;
    }
    Ok(())
}

/// Reads a script written by [`write_script`]. Pre-states on event lines are
/// ignored: the schedule is the content, and a replay re-derives all states.
pub fn read_script(reader: impl BufRead) -> Result<AttackScript> {
    let mut lines = reader.lines().enumerate();
    let (meta_no, meta) = require_json(&mut lines, "script metadata")?;
    check_kind(&meta, "script")?;
    let str_field = |key: &str| -> Result<String> {
        meta.get(key)
            .and_then(serde_json::Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                Error::Config(format!("line {meta_no}: script metadata is missing `{key}`"))
            })
    };
    let name = str_field("name")?;
    let program = str_field("program")?;
    let preset = match meta.get("preset") {
        None | Some(serde_json::Value::Null) => None,
        Some(p) => Some(
            p.as_str()
                .ok_or_else(|| {
                    Error::Config(format!("line {meta_no}: `preset` must be a string or null"))
                })?
                .to_string(),
        ),
    };
    let declared_steps = field_u64(meta_no, &meta, "steps")?;
    let checkpoints = meta
        .get("checkpoints")
        .and_then(serde_json::Value::as_array)
        .map(|cps| cps.iter().map(checkpoint_from_json).collect::<Result<Vec<_>>>())
        .transpose()?
        .unwrap_or_default();
    let notes = meta
        .get("notes")
        .and_then(serde_json::Value::as_array)
        .map(|ns| {
            ns.iter()
                .map(|n| {
                    n.as_str().map(str::to_string).ok_or_else(|| {
                        Error::Config(format!("line {meta_no}: notes must be strings"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?
        .unwrap_or_default();

    let (init_no, init_json) = require_json(&mut lines, "initial configuration")?;
    let init = config_from_json(init_no, &init_json)?;

    let mut steps: Vec<ScriptStep> = Vec::new();
    while let Some((line_no, v)) = next_json(&mut lines)? {
        if v.get("t").is_none() {
            break;
        }
        steps.push(schedule_from_json(line_no, &v, steps.len() as u64, init.n())?);
    }
    if steps.len() as u64 != declared_steps {
        return Err(Error::Config(format!(
            "script metadata declares {declared_steps} steps but the file contains {} (truncated?)",
            steps.len()
        )));
    }
    Ok(AttackScript {
        name,
        program,
        preset,
        init,
        steps,
        checkpoints,
        notes,
    })
}

pub fn save_script(
    script: &AttackScript,
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_with_path(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_script(script, prog, sem, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_script(path: impl AsRef<Path>) -> Result<AttackScript> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io_with_path(path, e))?;
    read_script(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Program registry: specs, construction, and rebuild-from-trace parameters.
// ---------------------------------------------------------------------------

/// An inline protocol table definition: states, initial states, and the
/// effective rule list as `(starter, reactor, starter', reactor')` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub name: String,
    pub states: Vec<String>,
    pub initial: Vec<String>,
    pub rules: Vec<(String, String, String, String)>,
}

impl TableSpec {
    pub fn build(&self) -> Result<ProtocolTable> {
        ProtocolTable::new(
            self.name.clone(),
            self.states.clone(),
            self.initial.clone(),
            self.rules
                .iter()
                .map(|(qs, qr, qs2, qr2)| {
                    ((qs.clone(), qr.clone()), (qs2.clone(), qr2.clone()))
                })
                .collect(),
        )
    }

    pub fn of_table(table: &ProtocolTable) -> TableSpec {
        TableSpec {
            name: table.name.clone(),
            states: table.states().to_vec(),
            initial: table.initial_states().to_vec(),
            rules: table
                .rules()
                .map(|((qs, qr), (qs2, qr2))| {
                    (qs.clone(), qr.clone(), qs2.clone(), qr2.clone())
                })
                .collect(),
        }
    }
}

/// The `[program]` section of a run config: a registry name plus the
/// parameters the named program needs (`l` for the bounded naming programs, a
/// `table` reference for table-driven programs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

/// Self-contained program parameters embedded in trace metadata: the registry
/// name plus everything needed to rebuild the program without the original
/// config file (table references are resolved to full definitions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ParamsRecord {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<TableSpec>,
}

/// A program resolved from a spec: the runnable program, the table it
/// executes or simulates (when there is one), and the self-contained
/// parameter record for trace metadata.
pub struct BuiltProgram {
    pub program: Box<dyn AgentProgram>,
    pub table: Option<Arc<ProtocolTable>>,
    pub params: serde_json::Value,
}

fn builtin_table(name: &str) -> Result<ProtocolTable> {
    match name {
        "pairing" => Ok(pairing_program()),
        other => Err(Error::Config(format!(
            "unknown protocol table `{other}` (builtin tables: pairing; \
             others must be defined inline in a [table] section)"
        ))),
    }
}

const PROGRAM_NAMES: &str =
    "pairing, table, it-token, strawman, naming-unbounded, naming-i12, naming-t1";

/// Resolves a program spec against an optional inline table definition,
/// producing the program and its rebuildable parameter record.
pub fn build_program(spec: &ProgramSpec, inline_table: Option<&TableSpec>) -> Result<BuiltProgram> {
    let needs_l = matches!(spec.name.as_str(), "naming-i12" | "naming-t1");
    let needs_table = matches!(spec.name.as_str(), "table" | "it-token" | "strawman");
    if spec.l.is_some() && !needs_l {
        return Err(Error::Config(format!(
            "program `{}` does not take an omission bound `l`",
            spec.name
        )));
    }
    if spec.table.is_some() && !needs_table {
        return Err(Error::Config(format!(
            "program `{}` does not take a `table` reference",
            spec.name
        )));
    }
    let l = if needs_l {
        Some(spec.l.ok_or_else(|| {
            Error::Config(format!(
                "program `{}` needs the leader omission bound `l`",
                spec.name
            ))
        })?)
    } else {
        None
    };
    let table = if needs_table {
        let reference = spec.table.as_deref().ok_or_else(|| {
            Error::Config(format!("program `{}` needs a `table` reference", spec.name))
        })?;
        Some(match inline_table {
            Some(inline) if inline.name == reference => inline.clone(),
            _ => TableSpec::of_table(&builtin_table(reference)?),
        })
    } else {
        None
    };
    from_record(ParamsRecord {
        name: spec.name.clone(),
        l,
        table,
    })
}

/// Rebuilds the program a trace was produced with from its embedded
/// parameters, for verification passes that need to replay it.
pub fn program_from_params(params: &serde_json::Value) -> Result<BuiltProgram> {
    if params.is_null() {
        return Err(Error::Config(
            "the trace does not embed program parameters, so its program cannot be rebuilt \
             (traces written by the command-line runner always embed them)"
                .into(),
        ));
    }
    let record: ParamsRecord = serde_json::from_value(params.clone())
        .map_err(|e| Error::Config(format!("bad program parameters in trace metadata: {e}")))?;
    from_record(record)
}

fn from_record(record: ParamsRecord) -> Result<BuiltProgram> {
    let params = serde_json::to_value(&record)?;
    let require_table = || {
        record
            .table
            .as_ref()
            .ok_or_else(|| {
                Error::Config(format!("program `{}` needs a table definition", record.name))
            })
            .and_then(|spec| Ok(Arc::new(spec.build()?)))
    };
    let require_l = || {
        record.l.ok_or_else(|| {
            Error::Config(format!(
                "program `{}` needs the leader omission bound `l`",
                record.name
            ))
        })
    };
    let (program, table): (Box<dyn AgentProgram>, Option<Arc<ProtocolTable>>) =
        match record.name.as_str() {
            "pairing" => {
                let t = Arc::new(pairing_program());
                (Box::new(TableProgram::new(t.clone())), Some(t))
            }
            "table" => {
                let t = require_table()?;
                (Box::new(TableProgram::new(t.clone())), Some(t))
            }
            "it-token" => {
                let t = require_table()?;
                (Box::new(it_token_simulator(t.clone())), Some(t))
            }
            "strawman" => {
                let t = require_table()?;
                (Box::new(strawman_t1_simulator(t.clone())), Some(t))
            }
            "naming-unbounded" => (Box::new(naming_unbounded_program()), None),
            "naming-i12" => (Box::new(naming_i12_program(require_l()?)), None),
            "naming-t1" => (Box::new(naming_t1_program(require_l()?)), None),
            other => {
                return Err(Error::Config(format!(
                    "unknown program `{other}` (known programs: {PROGRAM_NAMES})"
                )))
            }
        };
    Ok(BuiltProgram {
        program,
        table,
        params,
    })
}

// ---------------------------------------------------------------------------
// Run configurations (TOML).
// ---------------------------------------------------------------------------

/// The `[model]` section: which interaction model preset to run under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
}

/// The `[population]` section: how many agents, which one (if any) is the
/// leader, and the initial simulated states for programs that take them —
/// either listed per agent or as `(state, count)` runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n: usize,
    #[serde(default)]
    pub leader_index: Option<usize>,
    #[serde(default)]
    pub initial_states: Option<Vec<String>>,
    #[serde(default)]
    pub counts: Option<Vec<(String, usize)>>,
}

impl PopulationSpec {
    /// Expands `initial_states`/`counts` into one state name per agent.
    fn sim_states(&self) -> Result<Option<Vec<String>>> {
        let list = match (&self.initial_states, &self.counts) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `initial_states` or `counts`, not both".into(),
                ))
            }
            (Some(list), None) => Some(list.clone()),
            (None, Some(counts)) => {
                let mut list = Vec::with_capacity(self.n);
                for (state, count) in counts {
                    list.extend(std::iter::repeat(state.clone()).take(*count));
                }
                Some(list)
            }
            (None, None) => None,
        };
        if let Some(list) = &list {
            if list.len() != self.n {
                return Err(Error::Config(format!(
                    "population has n = {} agents but {} initial states are given",
                    self.n,
                    list.len()
                )));
            }
        }
        Ok(list)
    }
}

fn uniform_random_kind() -> String {
    "uniform-random".into()
}

/// The `[scheduler]` section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSpec {
    #[serde(default = "uniform_random_kind")]
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
}

impl Default for SchedulerSpec {
    fn default() -> SchedulerSpec {
        SchedulerSpec {
            kind: uniform_random_kind(),
            seed: None,
            pairs: None,
        }
    }
}

impl SchedulerSpec {
    pub fn build(&self) -> Result<Scheduler> {
        match self.kind.as_str() {
            "uniform-random" => Ok(Scheduler::UniformRandom { seed: self.seed }),
            "round-robin" => Ok(Scheduler::RoundRobinPairs),
            "scripted" => {
                let pairs = self.pairs.clone().ok_or_else(|| {
                    Error::Config("a scripted scheduler needs a `pairs` list".into())
                })?;
                Ok(Scheduler::Scripted(pairs))
            }
            other => Err(Error::Config(format!(
                "unknown scheduler `{other}` (known: uniform-random, round-robin, scripted)"
            ))),
        }
    }
}

fn no_omissions_kind() -> String {
    "no-omissions".into()
}

/// The `[adversary]` section: the restriction class and, for omissive kinds,
/// the per-step policy deciding what the adversary asks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    #[serde(default = "no_omissions_kind")]
    pub kind: String,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub bound: Option<u64>,
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub script: Option<Vec<(u64, String)>>,
}

impl Default for AdversarySpec {
    fn default() -> AdversarySpec {
        AdversarySpec {
            kind: no_omissions_kind(),
            budget: None,
            bound: None,
            policy: None,
            rate: None,
            seed: None,
            script: None,
        }
    }
}

impl AdversarySpec {
    fn build_policy(&self) -> Result<AdversaryPolicy> {
        match self.policy.as_deref() {
            Some("never") => Ok(AdversaryPolicy::Never),
            Some("random") => {
                let rate = self.rate.ok_or_else(|| {
                    Error::Config("a random omission policy needs a `rate`".into())
                })?;
                Ok(AdversaryPolicy::Random {
                    rate,
                    seed: self.seed,
                })
            }
            Some("scripted") => {
                let script = self.script.as_ref().ok_or_else(|| {
                    Error::Config(
                        "a scripted omission policy needs a `script` of (step, flavor) pairs"
                            .into(),
                    )
                })?;
                let steps = script
                    .iter()
                    .map(|(t, label)| Ok((*t, OmissionFlavor::from_label(label)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AdversaryPolicy::Scripted(steps))
            }
            Some(other) => Err(Error::Config(format!(
                "unknown omission policy `{other}` (known: never, random, scripted)"
            ))),
            None => Err(Error::Config(format!(
                "adversary kind `{}` needs a `policy` (never, random, or scripted)",
                self.kind
            ))),
        }
    }

    pub fn build(&self) -> Result<OmissionAdversary> {
        match self.kind.as_str() {
            "no-omissions" => Ok(OmissionAdversary::NoOmissions),
            "finite-budget" => Ok(OmissionAdversary::FiniteBudget {
                budget: self.budget.ok_or_else(|| {
                    Error::Config("a finite-budget adversary needs a `budget`".into())
                })?,
                policy: self.build_policy()?,
            }),
            "unrestricted" => Ok(OmissionAdversary::Unrestricted {
                policy: self.build_policy()?,
            }),
            "leader-bounded" => Ok(OmissionAdversary::LeaderBounded {
                bound: self.bound.ok_or_else(|| {
                    Error::Config("a leader-bounded adversary needs a `bound`".into())
                })?,
                policy: self.build_policy()?,
            }),
            other => Err(Error::Config(format!(
                "unknown adversary `{other}` (known: no-omissions, finite-budget, unrestricted, \
                 leader-bounded)"
            ))),
        }
    }
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn default_window() -> u64 {
    DEFAULT_WINDOW
}

/// The `[run]` section: horizon, base seed, stabilization window, and the
/// default output path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> RunSection {
        RunSection {
            horizon: DEFAULT_HORIZON,
            seed: 0,
            window: DEFAULT_WINDOW,
            out: None,
        }
    }
}

/// A complete run configuration, as parsed from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub program: ProgramSpec,
    pub model: ModelSpec,
    pub population: PopulationSpec,
    #[serde(default)]
    pub scheduler: SchedulerSpec,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub run: RunSection,
    /// Optional inline table definition, referenced by `program.table`.
    #[serde(default)]
    pub table: Option<TableSpec>,
}

/// Everything needed to execute a configured run.
///
/// Debug output summarizes the program by name; program objects themselves
/// are opaque.
pub struct ResolvedRun {
    pub program: Box<dyn AgentProgram>,
    pub table: Option<Arc<ProtocolTable>>,
    /// Program parameters to embed in the produced trace's metadata.
    pub params: serde_json::Value,
    pub semantics: ModelSemantics,
    pub init: Configuration,
    pub scheduler: Scheduler,
    pub adversary: OmissionAdversary,
    pub horizon: u64,
    pub window: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl std::fmt::Debug for ResolvedRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolvedRun")
            .field("program", &self.program.name())
            .field("semantics", &self.semantics)
            .field("init", &self.init)
            .field("scheduler", &self.scheduler)
            .field("adversary", &self.adversary)
            .field("horizon", &self.horizon)
            .field("window", &self.window)
            .field("seed", &self.seed)
            .field("out", &self.out)
            .finish_non_exhaustive()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad run config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_with_path(path, e))?;
        RunConfig::from_toml(&text)
    }

    /// Resolves every reference and builds the initial configuration,
    /// checking the config invariants: a known program with all its
    /// parameters, a known model preset, a population consistent with the
    /// program (a leader exactly where the program demands one, initial
    /// states accepted by it), and well-formed scheduler/adversary specs.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let built = build_program(&self.program, self.table.as_ref())?;
        let semantics = ModelSemantics::preset(&self.model.preset)?;
        let sims = self.population.sim_states()?;
        if let Some(idx) = self.population.leader_index {
            if idx >= self.population.n {
                return Err(Error::Config(format!(
                    "leader index {idx} is out of range for a population of {}",
                    self.population.n
                )));
            }
        }
        let mut states = Vec::with_capacity(self.population.n);
        for i in 0..self.population.n {
            let spec = InitSpec {
                leader: self.population.leader_index == Some(i),
                sim: sims.as_ref().map(|list| Value::sym(list[i].clone())),
            };
            states.push(built.program.initial_state(&spec)?);
        }
        let init = Configuration::new(states, self.population.leader_index);
        init.validate_for(built.program.as_ref())?;
        Ok(ResolvedRun {
            program: built.program,
            table: built.table,
            params: built.params,
            semantics,
            init,
            scheduler: self.scheduler.build()?,
            adversary: self.adversary.build()?,
            horizon: self.run.horizon,
            window: self.run.window,
            seed: self.run.seed,
            out: self.run.out.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Batch summaries (CSV).
// ---------------------------------------------------------------------------

/// One batch run's outcome. `liveness` and `safety` are `None` when the
/// check does not apply to the configured program (no pairing or naming
/// component); a failed run records its error and leaves the rest empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRow {
    pub seed: u64,
    pub liveness: Option<bool>,
    pub safety: Option<bool>,
    pub max_id: Option<BigInt>,
    pub omissions: u64,
    pub stabilization_step: Option<u64>,
    pub error: Option<String>,
}

impl BatchRow {
    /// A row for a run that failed outright.
    pub fn failed(seed: u64, error: impl Into<String>) -> BatchRow {
        BatchRow {
            seed,
            liveness: None,
            safety: None,
            max_id: None,
            omissions: 0,
            stabilization_step: None,
            error: Some(error.into()),
        }
    }

    /// Whether the row counts as passing: no error, and no applicable check
    /// came back negative.
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.liveness != Some(false) && self.safety != Some(false)
    }
}

/// Per-seed outcomes of a batch of runs, one row per requested seed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
}

fn csv_cell_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "",
    }
}

fn csv_sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r', ','], ";")
}

impl BatchSummary {
    pub const CSV_HEADER: &'static str =
        "seed,liveness,safety,max_id,omissions,stabilization_step,error";

    /// `(passes, applicable)` for the liveness column.
    pub fn liveness_rate(&self) -> (usize, usize) {
        let applicable = self.rows.iter().filter(|r| r.liveness.is_some()).count();
        let passes = self
            .rows
            .iter()
            .filter(|r| r.liveness == Some(true))
            .count();
        (passes, applicable)
    }

    /// `(passes, applicable)` for the safety column.
    pub fn safety_rate(&self) -> (usize, usize) {
        let applicable = self.rows.iter().filter(|r| r.safety.is_some()).count();
        let passes = self.rows.iter().filter(|r| r.safety == Some(true)).count();
        (passes, applicable)
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Whether every row passed (see [`BatchRow::passed`]).
    pub fn passed(&self) -> bool {
        self.rows.iter().all(BatchRow::passed)
    }

    /// Renders the summary as CSV: the fixed header, one row per seed, then
    /// `#`-prefixed aggregate lines. Output is a pure function of the rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let max_id = row
                .max_id
                .as_ref()
                .map(BigInt::to_string)
                .unwrap_or_default();
            let stab = row
                .stabilization_step
                .map(|s| s.to_string())
                .unwrap_or_default();
            let error = row.error.as_deref().map(csv_sanitize).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.seed,
                csv_cell_bool(row.liveness),
                csv_cell_bool(row.safety),
                max_id,
                row.omissions,
                stab,
                error
            )
            .expect("writing to a String cannot fail");
        }
        let (lp, la) = self.liveness_rate();
        let (sp, sa) = self.safety_rate();
        writeln!(out, "# rows,{}", self.rows.len()).unwrap();
        writeln!(out, "# liveness,{lp}/{la}").unwrap();
        writeln!(out, "# safety,{sp}/{sa}").unwrap();
        writeln!(out, "# errors,{}", self.error_count()).unwrap();
        out
    }
}

pub fn save_batch_csv(summary: &BatchSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, summary.to_csv()).map_err(|e| io_with_path(path, e))
}
