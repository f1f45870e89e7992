//! Token-passing simulation of arbitrary two-way protocols on the reliable
//! one-way model with starter detection (`IT`).
//!
//! A unique coordination role travels through the population and
//! sequentializes simulated interactions: the `leader` hands its role to an
//! agent it meets (`moving`), whoever observes that agent becomes the
//! `starter` of the next simulated interaction, and the first agent to
//! observe the starter acts as its reactor — applying `f_r` immediately and
//! emitting a token that carries its own pre-interaction simulated state.
//! The token circulates until it reaches the starter (by then `pending`),
//! which applies `f_s` to it, completing the simulated interaction, and
//! becomes the new `leader`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::semantics::{AgentProgram, Configuration, InitSpec, ProtocolTable, TableProgram};
use crate::value::Value;

const ROLE_LEADER: &str = "leader";
const ROLE_AVAILABLE: &str = "available";
const ROLE_MOVING: &str = "moving";
const ROLE_STARTER: &str = "starter";
const ROLE_PENDING: &str = "pending";

const ROLES: [&str; 5] = [
    ROLE_LEADER,
    ROLE_AVAILABLE,
    ROLE_MOVING,
    ROLE_STARTER,
    ROLE_PENDING,
];

/// The token-passing simulator for a finite two-way protocol table.
///
/// Per-agent state is `{role, state, token}`: the coordination role, the
/// simulated protocol state, and either the circulating token (a protocol
/// state) or null. Null is out-of-band by construction — protocol states are
/// symbols.
pub struct TokenSim {
    table: Arc<ProtocolTable>,
    program_name: String,
}

/// Builds the token-passing simulator for `table`.
pub fn it_token_simulator(table: Arc<ProtocolTable>) -> TokenSim {
    let program_name = format!("it-token:{}", table.name);
    TokenSim {
        table,
        program_name,
    }
}

/// The naive two-way attack target: each agent applies its side of the
/// protocol's transition on every exchange it observes, assuming the partner
/// did the same. Correct in omission-free runs, and exactly as exploitable
/// under omissions as direct table execution — which is what it is.
pub fn strawman_t1_simulator(table: Arc<ProtocolTable>) -> TableProgram {
    let name = format!("strawman:{}", table.name);
    TableProgram::named(table, name)
}

impl TokenSim {
    pub fn table(&self) -> &Arc<ProtocolTable> {
        &self.table
    }

    fn role_of<'v>(&self, state: &'v Value) -> Result<&'v str> {
        let role = state.get("role").and_then(Value::as_sym).ok_or_else(|| {
            Error::ProgramFault(format!(
                "{} state has no role field: {state}",
                self.program_name
            ))
        })?;
        if !ROLES.contains(&role) {
            return Err(Error::ProgramFault(format!(
                "{} state has unknown role `{role}`",
                self.program_name
            )));
        }
        Ok(role)
    }

    fn sim_of<'v>(&self, state: &'v Value) -> Result<&'v str> {
        state
            .get("state")
            .and_then(Value::as_sym)
            .filter(|s| self.table.is_state(s))
            .ok_or_else(|| {
                Error::ProgramFault(format!(
                    "{} state has no simulated protocol state: {state}",
                    self.program_name
                ))
            })
    }

    fn pack(role: &str, sim: Value, token: Value) -> Value {
        Value::record([
            ("role", Value::sym(role)),
            ("state", sim),
            ("token", token),
        ])
    }
}

impl AgentProgram for TokenSim {
    fn name(&self) -> &str {
        &self.program_name
    }

    fn memory_descriptor(&self) -> String {
        let k = self.table.state_count();
        format!(
            "one of 5 roles x {k} simulated states x {} token values = {} states",
            k + 1,
            5 * k * (k + 1)
        )
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        let sim = init.sim.clone().ok_or_else(|| {
            Error::Config(format!(
                "{} needs an initial protocol state per agent",
                self.program_name
            ))
        })?;
        let s = sim.as_sym().ok_or_else(|| {
            Error::Config(format!(
                "{} expects symbolic protocol states, got {sim}",
                self.program_name
            ))
        })?;
        if !self.table.initial_states().contains(&s.to_string()) {
            return Err(Error::Config(format!(
                "`{s}` is not an initial state of table `{}`",
                self.table.name
            )));
        }
        let role = if init.leader {
            ROLE_LEADER
        } else {
            ROLE_AVAILABLE
        };
        Ok(Self::pack(role, sim, Value::Null))
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    /// Starter's detected involvement: drop any held token (it has just been
    /// handed to the reactor) and advance the role machine.
    fn starter_detect(&self, own: &Value) -> Result<Value> {
        let role = match self.role_of(own)? {
            ROLE_LEADER | ROLE_MOVING => ROLE_AVAILABLE,
            ROLE_STARTER => ROLE_PENDING,
            other => other,
        };
        Ok(Self::pack(role, own.get("state").unwrap().clone(), Value::Null))
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let own_role = self.role_of(own)?;
        let own_sim = self.sim_of(own)?.to_string();
        let partner_token = partner.get("token").cloned().unwrap_or(Value::Null);

        // Pick up a circulating token from its carrier. (Observing a
        // carrier-less starter must not overwrite a token already held: the
        // token is unique, and erasing it would strand the pending agent.)
        let mut token = if partner_token.is_null() {
            own.get("token").cloned().unwrap_or(Value::Null)
        } else {
            partner_token
        };

        let mut role = own_role.to_string();
        let mut sim = own_sim.clone();
        match self.role_of(partner)? {
            ROLE_LEADER => role = ROLE_MOVING.to_string(),
            ROLE_MOVING => role = ROLE_STARTER.to_string(),
            ROLE_STARTER => {
                // Reactor side of the simulated interaction: emit the own
                // pre-state as the token, then transition by f_r.
                let partner_sim = self.sim_of(partner)?;
                token = Value::sym(own_sim.clone());
                sim = self.table.apply(partner_sim, &own_sim).1;
            }
            _ => {
                if own_role == ROLE_PENDING && !token.is_null() {
                    // Starter side of the simulated interaction, completed on
                    // token receipt: f_s over the reactor's tokenized pre-state.
                    let reactor_pre = token.as_sym().ok_or_else(|| {
                        Error::ProgramFault(format!(
                            "{} received a non-symbolic token: {token}",
                            self.program_name
                        ))
                    })?;
                    sim = self.table.apply(&own_sim, reactor_pre).0;
                    role = ROLE_LEADER.to_string();
                    token = Value::Null;
                }
            }
        }
        Ok(Self::pack(&role, Value::sym(sim), token))
    }

    fn has_simulated_projection(&self) -> bool {
        true
    }

    fn simulated_projection(&self, state: &Value) -> Option<Value> {
        state.get("state").cloned()
    }

    fn validate_state(&self, state: &Value) -> bool {
        let role_ok = state
            .get("role")
            .and_then(Value::as_sym)
            .is_some_and(|r| ROLES.contains(&r));
        let sim_ok = state
            .get("state")
            .and_then(Value::as_sym)
            .is_some_and(|s| self.table.is_state(s));
        let token_ok = match state.get("token") {
            Some(Value::Null) => true,
            Some(Value::Sym(t)) => self.table.is_state(t),
            _ => false,
        };
        role_ok && sim_ok && token_ok
    }

    fn is_leader_state(&self, state: &Value) -> bool {
        state.get("role").and_then(Value::as_sym) == Some(ROLE_LEADER)
    }

    fn needs_leader(&self) -> bool {
        true
    }
}

/// Whether no simulated interaction is in flight: no agent is `pending` and
/// no token exists. The two halves of a simulated interaction (the reactor's
/// immediate transition and the starter's completion on token receipt) land
/// at different steps, so simulation matching must be judged at a quiescent
/// cutoff — cutting between the halves leaves an event no perfect matching
/// can contain. States without role/token fields count as quiescent, so the
/// predicate is a no-op on programs whose transitions are atomic.
pub fn token_quiescent(config: &Configuration) -> bool {
    config.agents.iter().all(|state| {
        state.get("role").and_then(Value::as_sym) != Some(ROLE_PENDING)
            && state.get("token").is_none_or(Value::is_null)
    })
}

/// The largest event count `t` such that the trace's configuration after `t`
/// events is quiescent; `trace.prefix(t)` is then safe to match. Always
/// defined, since honest initial configurations are quiescent.
pub fn last_quiescent_cut(trace: &crate::scheduling::Trace) -> u64 {
    let mut cut = 0;
    for (idx, config) in trace.configs().enumerate() {
        if token_quiescent(&config) {
            cut = idx as u64;
        }
    }
    cut
}

/// Checks the token simulator's coordination invariants on one configuration:
/// exactly one agent holds a non-`available` role, at most one token exists,
/// and a token exists precisely while the special agent is `pending`.
pub fn check_token_invariants(config: &Configuration) -> std::result::Result<(), String> {
    let mut special: Vec<(usize, String)> = Vec::new();
    let mut carriers: Vec<usize> = Vec::new();
    for (i, state) in config.agents.iter().enumerate() {
        let role = state
            .get("role")
            .and_then(Value::as_sym)
            .ok_or_else(|| format!("agent {i} has no role field: {state}"))?;
        if role != ROLE_AVAILABLE {
            special.push((i, role.to_string()));
        }
        let token = state
            .get("token")
            .ok_or_else(|| format!("agent {i} has no token field: {state}"))?;
        if !token.is_null() {
            carriers.push(i);
        }
    }
    if special.len() != 1 {
        return Err(format!(
            "expected exactly one non-available agent, found {}: {special:?}",
            special.len()
        ));
    }
    if carriers.len() > 1 {
        return Err(format!("more than one token in flight: agents {carriers:?}"));
    }
    let pending = special[0].1 == ROLE_PENDING;
    match (pending, carriers.len()) {
        (true, 0) => Err(format!(
            "agent {} is pending but no token exists",
            special[0].0
        )),
        (false, 1) => Err(format!(
            "agent {} carries a token but the special agent {} is {} (not pending)",
            carriers[0], special[0].0, special[0].1
        )),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::pairing::pairing_program;
    use crate::semantics::{step_states, ModelSemantics, OmissionFlavor};

    fn sim() -> TokenSim {
        it_token_simulator(Arc::new(pairing_program()))
    }

    fn st(role: &str, sim: &str, token: Value) -> Value {
        TokenSim::pack(role, Value::sym(sim), token)
    }

    fn it() -> ModelSemantics {
        ModelSemantics::preset("IT").unwrap()
    }

    #[test]
    fn leadership_transfer_then_starter_election() {
        let prog = sim();
        // (leader, x): the leader withdraws, x becomes moving.
        let (l, x) = step_states(
            &it(),
            &prog,
            &st("leader", "c", Value::Null),
            &st("available", "p", Value::Null),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(l, st("available", "c", Value::Null));
        assert_eq!(x, st("moving", "p", Value::Null));

        // (moving, y): the moving agent withdraws, y becomes the starter.
        let (m, y) = step_states(
            &it(),
            &prog,
            &x,
            &st("available", "c", Value::Null),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(m, st("available", "p", Value::Null));
        assert_eq!(y, st("starter", "c", Value::Null));
    }

    #[test]
    fn reactor_fires_and_tokenizes_its_pre_state() {
        let prog = sim();
        // Starter with simulated state p observed by a reactor in c: the
        // reactor applies f_r immediately (c -> cs under the pairing rule)
        // and tokenizes its pre-state c; the starter turns pending.
        let (s, r) = step_states(
            &it(),
            &prog,
            &st("starter", "p", Value::Null),
            &st("available", "c", Value::Null),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(s, st("pending", "p", Value::Null));
        assert_eq!(r, st("available", "cs", Value::sym("c")));
    }

    #[test]
    fn pending_consumes_the_token_and_reclaims_leadership() {
        let prog = sim();
        // The pending starter (simulated state p) reacts to the token
        // carrier: it applies f_s to the tokenized reactor pre-state c
        // (p -> bot under the pairing rule) and becomes the leader.
        let (carrier, b) = step_states(
            &it(),
            &prog,
            &st("available", "cs", Value::sym("c")),
            &st("pending", "p", Value::Null),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(carrier, st("available", "cs", Value::Null));
        assert_eq!(b, st("leader", "bot", Value::Null));
    }

    #[test]
    fn token_hops_from_carrier_to_reactor() {
        let prog = sim();
        let (carrier, d) = step_states(
            &it(),
            &prog,
            &st("available", "cs", Value::sym("c")),
            &st("available", "c", Value::Null),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(carrier, st("available", "cs", Value::Null));
        assert_eq!(d, st("available", "c", Value::sym("c")));
    }

    #[test]
    fn carrier_keeps_its_token_when_observing_a_non_carrier() {
        let prog = sim();
        let (d, carrier) = step_states(
            &it(),
            &prog,
            &st("available", "c", Value::Null),
            &st("available", "cs", Value::sym("c")),
            OmissionFlavor::NonOmissive,
        )
        .unwrap();
        assert_eq!(d, st("available", "c", Value::Null));
        assert_eq!(
            carrier,
            st("available", "cs", Value::sym("c")),
            "the unique token must not be erased by observing a non-carrier"
        );
    }

    #[test]
    fn invariants_accept_honest_configurations() {
        let prog = sim();
        let init = |leader: bool, s: &str| {
            let spec = if leader {
                InitSpec::leader(Some(Value::sym(s)))
            } else {
                InitSpec::follower(Some(Value::sym(s)))
            };
            Arc::new(prog.initial_state(&spec).unwrap())
        };
        let config = Configuration {
            agents: vec![init(true, "c"), init(false, "c"), init(false, "p")],
            leader_index: Some(0),
        };
        assert_eq!(check_token_invariants(&config), Ok(()));
    }

    #[test]
    fn invariants_reject_corrupted_configurations() {
        let wrap = |states: Vec<Value>| Configuration {
            agents: states.into_iter().map(Arc::new).collect(),
            leader_index: None,
        };
        // Two special agents.
        let err = check_token_invariants(&wrap(vec![
            st("leader", "c", Value::Null),
            st("moving", "c", Value::Null),
        ]))
        .unwrap_err();
        assert!(err.contains("exactly one non-available"), "{err}");
        // A token without a pending agent.
        let err = check_token_invariants(&wrap(vec![
            st("leader", "c", Value::Null),
            st("available", "c", Value::sym("c")),
        ]))
        .unwrap_err();
        assert!(err.contains("not pending"), "{err}");
        // A pending agent without a token.
        let err = check_token_invariants(&wrap(vec![
            st("pending", "p", Value::Null),
            st("available", "c", Value::Null),
        ]))
        .unwrap_err();
        assert!(err.contains("no token"), "{err}");
        // Two tokens.
        let err = check_token_invariants(&wrap(vec![
            st("pending", "p", Value::sym("c")),
            st("available", "c", Value::sym("c")),
        ]))
        .unwrap_err();
        assert!(err.contains("more than one token"), "{err}");
    }

    #[test]
    fn strawman_applies_each_side_independently() {
        let prog = strawman_t1_simulator(Arc::new(pairing_program()));
        assert_eq!(prog.name(), "strawman:pairing");
        let sem = ModelSemantics::preset("T1").unwrap();
        let p = Value::sym("p");
        let c = Value::sym("c");

        let (s, r) = step_states(&sem, &prog, &p, &c, OmissionFlavor::NonOmissive).unwrap();
        assert_eq!((s, r), (Value::sym("bot"), Value::sym("cs")));

        // The exploitable flaw: under a starter-side omission the reactor
        // transitions alone, leaving the starter ready to pair again.
        let (s, r) = step_states(&sem, &prog, &p, &c, OmissionFlavor::StarterSide).unwrap();
        assert_eq!((s, r), (Value::sym("p"), Value::sym("cs")));

        let (s, r) = step_states(&sem, &prog, &p, &c, OmissionFlavor::BothSides).unwrap();
        assert_eq!((s, r), (Value::sym("p"), Value::sym("c")));
    }

    #[test]
    fn initial_states_are_checked_against_the_table() {
        let prog = sim();
        assert!(prog
            .initial_state(&InitSpec::leader(Some(Value::sym("c"))))
            .is_ok());
        assert!(prog
            .initial_state(&InitSpec::leader(Some(Value::sym("cs"))))
            .is_err());
        assert!(prog.initial_state(&InitSpec::leader(None)).is_err());
    }
}
