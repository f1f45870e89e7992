//! Shared brute-force oracle for the omission-recurrence decision, plus the
//! toy targets it is exercised on. Included via `#[path]` by the test
//! binaries that need it; the oracle is deliberately dumb (plain breadth-first
//! layer expansion over printed configurations) and is the ground truth the
//! pruned production search is trusted against.

// Each including binary uses a subset of these items.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use omisim::attacks::{
    find_omission_recurrent, InteractionRole, RecurrenceQuery, RecurrenceVerdict,
};
use omisim::scheduling::{scripted_run, ScriptStep};
use omisim::{step_states, AgentProgram, Configuration, InitSpec, ModelSemantics, OmissionFlavor, Value};

#[derive(Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Recurrent { length: usize },
    NotRecurrent,
    BoundLimited,
}

fn key(config: &(Value, Value)) -> String {
    format!("{}|{}", config.0, config.1)
}

fn successors(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    config: &(Value, Value),
) -> Vec<(Value, Value)> {
    let mut out = Vec::new();
    for (s, _r) in [(0usize, 1usize), (1, 0)] {
        for flavor in sem.admissible_flavors() {
            let (s_pre, r_pre) = if s == 0 {
                (&config.0, &config.1)
            } else {
                (&config.1, &config.0)
            };
            let (s_post, r_post) = step_states(sem, prog, s_pre, r_pre, flavor).unwrap();
            out.push(if s == 0 {
                (s_post, r_post)
            } else {
                (r_post, s_post)
            });
        }
    }
    out
}

pub fn oracle_recurrence(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    leader_state: &Value,
    agent_state: &Value,
    role: InteractionRole,
    depth_bound: usize,
    config_cap: usize,
) -> OracleVerdict {
    let (s_pre, r_pre) = match role {
        InteractionRole::Starter => (leader_state, agent_state),
        InteractionRole::Reactor => (agent_state, leader_state),
    };
    let (s_post, r_post) = step_states(sem, prog, s_pre, r_pre, OmissionFlavor::BothSides).unwrap();
    let first = match role {
        InteractionRole::Starter => (s_post, r_post),
        InteractionRole::Reactor => (r_post, s_post),
    };
    if first.0 == *leader_state {
        return OracleVerdict::Recurrent { length: 1 };
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    seen.insert(key(&first));
    let mut layer = vec![first];
    for depth in 2..=depth_bound {
        let mut next = Vec::new();
        for config in &layer {
            for succ in successors(prog, sem, config) {
                if succ.0 == *leader_state {
                    return OracleVerdict::Recurrent { length: depth };
                }
                if seen.insert(key(&succ)) {
                    if seen.len() > config_cap {
                        return OracleVerdict::BoundLimited;
                    }
                    next.push(succ);
                }
            }
        }
        if next.is_empty() {
            // Fixpoint: every reachable configuration has been visited and
            // none restores the leader's state.
            return OracleVerdict::NotRecurrent;
        }
        layer = next;
    }
    // Depth exhausted. The answer is still exact if the last layer expands
    // to nothing new.
    let frontier_closed = layer
        .iter()
        .flat_map(|c| successors(prog, sem, c))
        .all(|succ| seen.contains(&key(&succ)));
    if frontier_closed {
        OracleVerdict::NotRecurrent
    } else {
        OracleVerdict::BoundLimited
    }
}

/// Replays a claimed recurrence sequence and checks everything the
/// definition demands of it.
pub fn validate_path(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    leader_state: &Value,
    agent_state: &Value,
    role: InteractionRole,
    path: &[ScriptStep],
) {
    assert!(!path.is_empty());
    assert_eq!(path[0].flavor, OmissionFlavor::BothSides);
    match role {
        InteractionRole::Starter => assert_eq!(path[0].starter, 0, "leader must start first"),
        InteractionRole::Reactor => assert_eq!(path[0].reactor, 0, "leader must react first"),
    }
    let init = Configuration::new(vec![leader_state.clone(), agent_state.clone()], Some(0));
    let trace = scripted_run(prog, sem, &init, path).unwrap();
    assert_eq!(
        trace.final_config().state(0),
        leader_state,
        "sequence must restore the leader's full state"
    );
}

pub fn agreement_case(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    leader_state: &Value,
    agent_state: &Value,
    role: InteractionRole,
    depth_bound: usize,
    config_cap: usize,
) -> OracleVerdict {
    let expected = oracle_recurrence(
        prog,
        sem,
        leader_state,
        agent_state,
        role,
        depth_bound,
        config_cap,
    );
    let query = RecurrenceQuery {
        program: prog,
        semantics: sem,
        leader_state: leader_state.clone(),
        agent_state: agent_state.clone(),
        leader_role: role,
        depth_bound,
        config_cap,
    };
    let got = find_omission_recurrent(&query).unwrap();
    match (&expected, &got) {
        (OracleVerdict::Recurrent { length }, RecurrenceVerdict::Recurrent(path)) => {
            assert_eq!(
                path.len(),
                *length,
                "search must find a shortest recurrence sequence"
            );
            validate_path(prog, sem, leader_state, agent_state, role, path);
        }
        (
            OracleVerdict::NotRecurrent,
            RecurrenceVerdict::NotRecurrent {
                bound_limited: false,
            },
        )
        | (
            OracleVerdict::BoundLimited,
            RecurrenceVerdict::NotRecurrent {
                bound_limited: true,
            },
        ) => {}
        _ => panic!("oracle said {expected:?}, search said {got:?}"),
    }
    expected
}

/// An agent whose whole state is a counter in 0..=3; every callback — updates
/// and omission detections alike — bumps it, saturating at 3. From any
/// configuration the leader's counter never decreases, so below-saturation
/// states are never revisited.
pub struct Saturating;

pub fn bump_capped(v: &Value) -> Value {
    let n = v.as_int().expect("counter states are integers");
    if *n >= BigInt::from(3) {
        v.clone()
    } else {
        Value::Int(n + 1)
    }
}

impl AgentProgram for Saturating {
    fn name(&self) -> &str {
        "saturating-counter"
    }

    fn memory_descriptor(&self) -> String {
        "one saturating counter in 0..=3".into()
    }

    fn initial_state(&self, init: &InitSpec) -> omisim::Result<Value> {
        Ok(init.sim.clone().unwrap_or_else(|| Value::int(0)))
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn reactor_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn starter_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn reactor_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn validate_state(&self, state: &Value) -> bool {
        state
            .as_int()
            .is_some_and(|n| *n >= BigInt::from(0) && *n <= BigInt::from(3))
    }
}

/// Like [`Saturating`] but without the cap: infinitely many configurations,
/// so exhaustive search must give up and say so.
pub struct Unbounded;

impl AgentProgram for Unbounded {
    fn name(&self) -> &str {
        "unbounded-counter"
    }

    fn memory_descriptor(&self) -> String {
        "one unbounded counter".into()
    }

    fn initial_state(&self, init: &InitSpec) -> omisim::Result<Value> {
        Ok(init.sim.clone().unwrap_or_else(|| Value::int(0)))
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(Value::Int(own.as_int().unwrap() + 1))
    }

    fn reactor_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(Value::Int(own.as_int().unwrap() + 1))
    }

    fn starter_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(Value::Int(own.as_int().unwrap() + 1))
    }

    fn reactor_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(Value::Int(own.as_int().unwrap() + 1))
    }
}

/// Counter agent whose starter-side omission detection resets it to 0, while
/// the reactor-side detection and both updates bump it (saturating).
pub struct ResetOnStarterOmission;

impl AgentProgram for ResetOnStarterOmission {
    fn name(&self) -> &str {
        "reset-on-starter-omission"
    }

    fn memory_descriptor(&self) -> String {
        "one saturating counter in 0..=3, reset by starter-side detection".into()
    }

    fn initial_state(&self, init: &InitSpec) -> omisim::Result<Value> {
        Ok(init.sim.clone().unwrap_or_else(|| Value::int(0)))
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn reactor_update(&self, own: &Value, _partner: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }

    fn starter_omission(&self, _own: &Value) -> omisim::Result<Value> {
        Ok(Value::int(0))
    }

    fn reactor_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(bump_capped(own))
    }
}

/// A program over three symbolic states with independently seeded random
/// transition and detection tables. Transitions are biased upward (an agent
/// in `q_i` usually moves to some `q_j` with `j >= i`) so that the sweep
/// produces unrecoverable leader states as well as recurrent ones; an
/// unbiased table almost always admits a return path on only three states.
pub struct RandomToy {
    pub states: Vec<String>,
    fs: BTreeMap<(String, String), String>,
    fr: BTreeMap<(String, String), String>,
    om_s: BTreeMap<String, String>,
    om_r: BTreeMap<String, String>,
}

impl RandomToy {
    pub fn generate(rng: &mut ChaCha8Rng) -> RandomToy {
        let states: Vec<String> = ["q0", "q1", "q2"].iter().map(|s| s.to_string()).collect();
        let pick = |rng: &mut ChaCha8Rng, from: usize| {
            let r = rng.gen_range(0..3);
            let idx = if rng.gen_bool(0.85) { r.max(from) } else { r };
            states[idx].clone()
        };
        let mut fs = BTreeMap::new();
        let mut fr = BTreeMap::new();
        let mut om_s = BTreeMap::new();
        let mut om_r = BTreeMap::new();
        for (i, a) in states.iter().enumerate() {
            for b in &states {
                fs.insert((a.clone(), b.clone()), pick(rng, i));
                fr.insert((a.clone(), b.clone()), pick(rng, i));
            }
        }
        for (i, a) in states.iter().enumerate() {
            om_s.insert(a.clone(), pick(rng, i));
            om_r.insert(a.clone(), pick(rng, i));
        }
        RandomToy {
            states,
            fs,
            fr,
            om_s,
            om_r,
        }
    }

    fn sym(v: &Value) -> String {
        v.as_sym().unwrap().to_string()
    }
}

impl AgentProgram for RandomToy {
    fn name(&self) -> &str {
        "random-toy"
    }

    fn memory_descriptor(&self) -> String {
        "one of three symbolic states".into()
    }

    fn initial_state(&self, init: &InitSpec) -> omisim::Result<Value> {
        Ok(init.sim.clone().unwrap_or_else(|| Value::sym("q0")))
    }

    fn starter_update(&self, own: &Value, partner: &Value) -> omisim::Result<Value> {
        let k = (Self::sym(own), Self::sym(partner));
        Ok(Value::sym(self.fs[&k].clone()))
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> omisim::Result<Value> {
        let k = (Self::sym(own), Self::sym(partner));
        Ok(Value::sym(self.fr[&k].clone()))
    }

    fn starter_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(Value::sym(self.om_s[&Self::sym(own)].clone()))
    }

    fn reactor_omission(&self, own: &Value) -> omisim::Result<Value> {
        Ok(Value::sym(self.om_r[&Self::sym(own)].clone()))
    }

    fn validate_state(&self, state: &Value) -> bool {
        state.as_sym().is_some_and(|s| self.states.contains(&s.to_string()))
    }
}
