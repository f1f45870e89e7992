//! Interaction models and the single-step interaction engine.
//!
//! A model is described structurally by [`ModelSemantics`]: interaction arity
//! (two-way or one-way), what the starter can observe, and which sides can
//! detect an omission when one occurs. The named presets cover the reliable
//! models (`TW`, `IT`, `IO`) and the omissive variants (`T1`..`T3` two-way,
//! `I1`..`I4` one-way).

mod program;
mod table;

pub use program::{AgentProgram, InitSpec, NamingView};
pub use table::{ProtocolTable, TableProgram};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::value::Value;

/// Interaction arity: whether information flows both ways or only from
/// starter to reactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arity {
    TwoWay,
    OneWay,
}

/// Outcome class of a single scheduled interaction: fully delivered, or
/// omissive with the message lost on one or both sides.
///
/// In one-way models an omission has a single observable outcome (no message
/// is delivered and each side applies its own detection function), so the
/// three omissive flavors are aliases there; the engine treats them
/// identically and traces record whichever flavor was requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OmissionFlavor {
    NonOmissive,
    /// The starter's message outcome is lost on the starter's side: the
    /// starter observes nothing deliverable and falls to its omission
    /// detection, while the reactor transitions normally.
    StarterSide,
    /// Lost on the reactor's side: the starter transitions normally, the
    /// reactor falls to its omission detection.
    ReactorSide,
    /// Lost on both sides: both agents fall to their omission detections.
    BothSides,
}

impl OmissionFlavor {
    pub const ALL: [OmissionFlavor; 4] = [
        OmissionFlavor::NonOmissive,
        OmissionFlavor::StarterSide,
        OmissionFlavor::ReactorSide,
        OmissionFlavor::BothSides,
    ];

    pub fn is_omissive(self) -> bool {
        !matches!(self, OmissionFlavor::NonOmissive)
    }

    /// Stable wire label used in trace and script files.
    pub fn label(self) -> &'static str {
        match self {
            OmissionFlavor::NonOmissive => "none",
            OmissionFlavor::StarterSide => "starter",
            OmissionFlavor::ReactorSide => "reactor",
            OmissionFlavor::BothSides => "both",
        }
    }

    pub fn from_label(label: &str) -> Result<OmissionFlavor> {
        match label {
            "none" => Ok(OmissionFlavor::NonOmissive),
            "starter" => Ok(OmissionFlavor::StarterSide),
            "reactor" => Ok(OmissionFlavor::ReactorSide),
            "both" => Ok(OmissionFlavor::BothSides),
            other => Err(Error::Config(format!("unknown omission flavor `{other}`"))),
        }
    }
}

/// Structural description of an interaction model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSemantics {
    pub arity: Arity,
    /// Two-way only: the starter's transition reads the reactor's state.
    pub starter_sees_reactor: bool,
    /// One-way only: the starter applies g on every delivered interaction.
    pub starter_detects_interaction: bool,
    /// The starter detects omissions (two-way: dedicated o; one-way: g).
    pub starter_detects_omission: bool,
    /// The reactor detects omissions.
    pub reactor_detects_omission: bool,
    /// One-way only: the reactor's omission detection is the proximity signal
    /// g rather than a dedicated h.
    pub reactor_omission_as_proximity: bool,
    /// Whether the scheduler may emit omissive interactions at all. This is
    /// not derivable from the detection flags: a model can admit omissions
    /// that neither side can detect.
    pub admits_omissions: bool,
    /// Name of the preset this was built from, if any.
    pub preset_name: Option<String>,
}

impl ModelSemantics {
    /// Builds one of the named presets.
    ///
    /// Detection conventions per preset:
    /// - `TW`, `IT`, `IO`: reliable (no omissions).
    /// - `T1`: omissions occur, no agent ever detects them.
    /// - `T2`: only the reactor detects, via dedicated h.
    /// - `T3`: both sides detect, via dedicated o and h.
    /// - `I1`: starter detects via g; reactor detects nothing.
    /// - `I2`: starter detects via g; reactor detects via the proximity
    ///   signal g.
    /// - `I3`: neither side detects (delivered interactions still apply g).
    /// - `I4`: starter detects nothing; reactor detects via proximity g.
    pub fn preset(name: &str) -> Result<ModelSemantics> {
        let base_two_way = ModelSemantics {
            arity: Arity::TwoWay,
            starter_sees_reactor: true,
            starter_detects_interaction: false,
            starter_detects_omission: false,
            reactor_detects_omission: false,
            reactor_omission_as_proximity: false,
            admits_omissions: true,
            preset_name: None,
        };
        let base_one_way = ModelSemantics {
            arity: Arity::OneWay,
            starter_sees_reactor: false,
            starter_detects_interaction: true,
            ..base_two_way.clone()
        };
        let mut sem = match name {
            "TW" => ModelSemantics {
                admits_omissions: false,
                ..base_two_way
            },
            "IT" => ModelSemantics {
                admits_omissions: false,
                ..base_one_way
            },
            "IO" => ModelSemantics {
                admits_omissions: false,
                starter_detects_interaction: false,
                ..base_one_way
            },
            "T1" => base_two_way,
            "T2" => ModelSemantics {
                reactor_detects_omission: true,
                ..base_two_way
            },
            "T3" => ModelSemantics {
                starter_detects_omission: true,
                reactor_detects_omission: true,
                ..base_two_way
            },
            "I1" => ModelSemantics {
                starter_detects_omission: true,
                ..base_one_way
            },
            "I2" => ModelSemantics {
                starter_detects_omission: true,
                reactor_detects_omission: true,
                reactor_omission_as_proximity: true,
                ..base_one_way
            },
            "I3" => base_one_way,
            "I4" => ModelSemantics {
                reactor_detects_omission: true,
                reactor_omission_as_proximity: true,
                ..base_one_way
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown model preset `{other}` (expected one of TW, IT, IO, T1..T3, I1..I4)"
                )))
            }
        };
        sem.preset_name = Some(name.to_string());
        sem.validate()?;
        Ok(sem)
    }

    /// Structural consistency checks, for custom (non-preset) construction.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("inconsistent model semantics: {msg}")));
        match self.arity {
            Arity::TwoWay => {
                if !self.starter_sees_reactor {
                    return fail("two-way models must let the starter see the reactor");
                }
                if self.starter_detects_interaction {
                    return fail("starter_detects_interaction (g) is one-way only");
                }
                if self.reactor_omission_as_proximity {
                    return fail("reactor_omission_as_proximity (h = g) is one-way only");
                }
            }
            Arity::OneWay => {
                if self.starter_sees_reactor {
                    return fail("one-way starters cannot see the reactor");
                }
            }
        }
        if !self.admits_omissions
            && (self.starter_detects_omission || self.reactor_detects_omission)
        {
            return fail("omission detection flags are set but the model admits no omissions");
        }
        if self.reactor_omission_as_proximity && !self.reactor_detects_omission {
            return fail("reactor_omission_as_proximity requires reactor_detects_omission");
        }
        Ok(())
    }

    pub fn admits(&self, flavor: OmissionFlavor) -> bool {
        !flavor.is_omissive() || self.admits_omissions
    }

    /// The flavors the scheduler may emit under this model, in canonical
    /// order.
    pub fn admissible_flavors(&self) -> Vec<OmissionFlavor> {
        OmissionFlavor::ALL
            .into_iter()
            .filter(|f| self.admits(*f))
            .collect()
    }
}

/// One global configuration: the multiset of agent states, kept in agent-index
/// order, plus the distinguished leader's index when the run has one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub agents: Vec<Arc<Value>>,
    pub leader_index: Option<usize>,
}

impl Configuration {
    pub fn new(agents: Vec<Value>, leader_index: Option<usize>) -> Configuration {
        Configuration {
            agents: agents.into_iter().map(Arc::new).collect(),
            leader_index,
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn state(&self, agent: usize) -> &Value {
        &self.agents[agent]
    }

    /// Checks the structural invariants against a program: at least two
    /// agents, every state valid, and `leader_index` pointing at the single
    /// agent in the program's leader set (required when the program needs a
    /// leader).
    pub fn validate_for(&self, prog: &dyn AgentProgram) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::Config(format!(
                "population must have at least 2 agents, got {}",
                self.n()
            )));
        }
        for (i, state) in self.agents.iter().enumerate() {
            if !prog.validate_state(state) {
                return Err(Error::Config(format!(
                    "agent {i} has a state outside {}'s state space: {state}",
                    prog.name()
                )));
            }
        }
        let leaders: Vec<usize> = (0..self.n())
            .filter(|&i| prog.is_leader_state(&self.agents[i]))
            .collect();
        if leaders.len() > 1 {
            return Err(Error::Config(format!(
                "at most one agent may be in a leader state, found {:?}",
                leaders
            )));
        }
        match self.leader_index {
            Some(idx) => {
                if idx >= self.n() {
                    return Err(Error::Config(format!(
                        "leader index {idx} out of range for population of {}",
                        self.n()
                    )));
                }
                if leaders != vec![idx] && !leaders.is_empty() {
                    return Err(Error::Config(format!(
                        "leader index {idx} does not match the agent in a leader state ({:?})",
                        leaders
                    )));
                }
            }
            None => {
                if prog.needs_leader() {
                    return Err(Error::Config(format!(
                        "program {} requires a distinguished leader",
                        prog.name()
                    )));
                }
                if !leaders.is_empty() {
                    return Err(Error::Config(format!(
                        "agent {} is in a leader state but no leader index is set",
                        leaders[0]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One scheduled interaction as recorded in a trace: who interacted, with
/// which outcome class, and both agents' states before and after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionEvent {
    /// Step index within the run (0-based).
    pub time: u64,
    pub starter: usize,
    pub reactor: usize,
    pub flavor: OmissionFlavor,
    /// (starter, reactor) states before the interaction.
    pub pre: (Arc<Value>, Arc<Value>),
    /// (starter, reactor) states after the interaction.
    pub post: (Arc<Value>, Arc<Value>),
}

/// Computes the post-states of a single interaction between a starter in
/// `q_s` and a reactor in `q_r`, under `sem` with outcome class `flavor`.
///
/// Both results are computed from the pre-states only: neither side ever
/// observes the other's update. Errors if `sem` does not admit `flavor`, or
/// if a callback fails or returns a state the program rejects.
pub fn step_states(
    sem: &ModelSemantics,
    prog: &dyn AgentProgram,
    q_s: &Value,
    q_r: &Value,
    flavor: OmissionFlavor,
) -> Result<(Value, Value)> {
    if !sem.admits(flavor) {
        return Err(Error::ModelViolation(format!(
            "model {} does not admit {} interactions",
            sem.preset_name.as_deref().unwrap_or("<custom>"),
            flavor.label()
        )));
    }
    let starter_omits = |own: &Value| -> Result<Value> {
        if !sem.starter_detects_omission {
            return Ok(own.clone());
        }
        match sem.arity {
            // One-way starters cannot tell a lost interaction from a
            // delivered one: detection is the same g.
            Arity::OneWay => prog.starter_detect(own),
            Arity::TwoWay => prog.starter_omission(own),
        }
    };
    let reactor_omits = |own: &Value| -> Result<Value> {
        if !sem.reactor_detects_omission {
            return Ok(own.clone());
        }
        if sem.reactor_omission_as_proximity {
            prog.starter_detect(own)
        } else {
            prog.reactor_omission(own)
        }
    };
    let (s_post, r_post) = match (sem.arity, flavor) {
        (Arity::TwoWay, OmissionFlavor::NonOmissive) => (
            prog.starter_update(q_s, q_r)?,
            prog.reactor_update(q_r, q_s)?,
        ),
        (Arity::TwoWay, OmissionFlavor::StarterSide) => {
            (starter_omits(q_s)?, prog.reactor_update(q_r, q_s)?)
        }
        (Arity::TwoWay, OmissionFlavor::ReactorSide) => {
            (prog.starter_update(q_s, q_r)?, reactor_omits(q_r)?)
        }
        (Arity::TwoWay, OmissionFlavor::BothSides) => (starter_omits(q_s)?, reactor_omits(q_r)?),
        (Arity::OneWay, OmissionFlavor::NonOmissive) => {
            let s_post = if sem.starter_detects_interaction {
                prog.starter_detect(q_s)?
            } else {
                q_s.clone()
            };
            (s_post, prog.reactor_update(q_r, q_s)?)
        }
        // One-way omissions all collapse to the same outcome: nothing is
        // delivered, each side applies its own detection.
        (Arity::OneWay, _) => (starter_omits(q_s)?, reactor_omits(q_r)?),
    };
    for (side, post) in [("starter", &s_post), ("reactor", &r_post)] {
        if !prog.validate_state(post) {
            return Err(Error::ProgramFault(format!(
                "{} callback of {} left the declared state space: {post}",
                side,
                prog.name()
            )));
        }
    }
    Ok((s_post, r_post))
}

/// Applies one interaction to a configuration, returning the successor
/// configuration and the event record (stamped at `time`).
pub fn apply_interaction_at(
    sem: &ModelSemantics,
    prog: &dyn AgentProgram,
    config: &Configuration,
    time: u64,
    starter: usize,
    reactor: usize,
    flavor: OmissionFlavor,
) -> Result<(Configuration, InteractionEvent)> {
    let n = config.n();
    if starter >= n || reactor >= n {
        return Err(Error::ModelViolation(format!(
            "interaction ({starter}, {reactor}) out of range for population of {n}"
        )));
    }
    if starter == reactor {
        return Err(Error::ModelViolation(format!(
            "agent {starter} cannot interact with itself"
        )));
    }
    let pre = (config.agents[starter].clone(), config.agents[reactor].clone());
    let (s_post, r_post) = step_states(sem, prog, &pre.0, &pre.1, flavor)?;
    let post = (Arc::new(s_post), Arc::new(r_post));
    let mut agents = config.agents.clone();
    agents[starter] = post.0.clone();
    agents[reactor] = post.1.clone();
    let next = Configuration {
        agents,
        leader_index: config.leader_index,
    };
    let event = InteractionEvent {
        time,
        starter,
        reactor,
        flavor,
        pre,
        post,
    };
    Ok((next, event))
}

/// Applies one interaction to a configuration. Standalone events are stamped
/// at time 0; the scheduler stamps trace events with their step index.
pub fn apply_interaction(
    sem: &ModelSemantics,
    prog: &dyn AgentProgram,
    config: &Configuration,
    starter: usize,
    reactor: usize,
    flavor: OmissionFlavor,
) -> Result<(Configuration, InteractionEvent)> {
    apply_interaction_at(sem, prog, config, 0, starter, reactor, flavor)
}

/// Enumerates every admissible outcome of a (starter, reactor) encounter: one
/// `(flavor, (starter_post, reactor_post))` entry per admissible flavor, in
/// canonical flavor order. Distinct flavors may yield equal post-state pairs
/// (undetectable omissions collapse onto the non-omissive outcome).
pub fn admissible_outcomes(
    sem: &ModelSemantics,
    prog: &dyn AgentProgram,
    q_s: &Value,
    q_r: &Value,
) -> Result<Vec<(OmissionFlavor, (Value, Value))>> {
    sem.admissible_flavors()
        .into_iter()
        .map(|flavor| Ok((flavor, step_states(sem, prog, q_s, q_r, flavor)?)))
        .collect()
}

/// Checks that a recorded event's post-states are exactly what the engine
/// produces from its pre-states under its recorded flavor.
pub fn event_conforms(
    sem: &ModelSemantics,
    prog: &dyn AgentProgram,
    event: &InteractionEvent,
) -> Result<bool> {
    let (s_post, r_post) = step_states(sem, prog, &event.pre.0, &event.pre.1, event.flavor)?;
    Ok(s_post == *event.post.0 && r_post == *event.post.1)
}
