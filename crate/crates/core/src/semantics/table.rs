//! Finite protocol tables and their direct execution as agent programs.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::value::Value;

use super::{AgentProgram, InitSpec};

/// A finite population protocol given by its transition table.
///
/// Rules map an ordered `(starter, reactor)` state pair to its successor
/// pair; pairs without an explicit rule transition to themselves (the
/// identity default), so a table only needs to list its effective rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolTable {
    pub name: String,
    states: Vec<String>,
    initial_states: Vec<String>,
    rules: BTreeMap<(String, String), (String, String)>,
}

impl ProtocolTable {
    /// Builds a table after checking its structural invariants: a non-empty
    /// state set without duplicates, initial states drawn from it, and every
    /// rule endpoint a declared state.
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        initial_states: Vec<String>,
        rules: Vec<((String, String), (String, String))>,
    ) -> Result<ProtocolTable> {
        let name = name.into();
        if states.is_empty() {
            return Err(Error::Config(format!("table `{name}` has no states")));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(Error::Config(format!(
                    "table `{name}` declares state `{s}` twice"
                )));
            }
        }
        if initial_states.is_empty() {
            return Err(Error::Config(format!(
                "table `{name}` has no initial states"
            )));
        }
        for s in &initial_states {
            if !states.contains(s) {
                return Err(Error::Config(format!(
                    "table `{name}` has undeclared initial state `{s}`"
                )));
            }
        }
        let mut rule_map = BTreeMap::new();
        for ((qs, qr), (qs2, qr2)) in rules {
            for s in [&qs, &qr, &qs2, &qr2] {
                if !states.contains(s) {
                    return Err(Error::Config(format!(
                        "table `{name}` rule ({qs}, {qr}) -> ({qs2}, {qr2}) uses undeclared state `{s}`"
                    )));
                }
            }
            if rule_map.insert((qs.clone(), qr.clone()), (qs2, qr2)).is_some() {
                return Err(Error::Config(format!(
                    "table `{name}` declares two rules for ({qs}, {qr})"
                )));
            }
        }
        Ok(ProtocolTable {
            name,
            states,
            initial_states,
            rules: rule_map,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial_states(&self) -> &[String] {
        &self.initial_states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn is_state(&self, s: &str) -> bool {
        self.states.iter().any(|x| x == s)
    }

    /// The explicitly declared rules, in lexicographic key order.
    pub fn rules(&self) -> impl Iterator<Item = (&(String, String), &(String, String))> {
        self.rules.iter()
    }

    /// The explicit rule for `(q_s, q_r)`, if one is declared.
    pub fn rule(&self, q_s: &str, q_r: &str) -> Option<&(String, String)> {
        self.rules.get(&(q_s.to_string(), q_r.to_string()))
    }

    /// The successor of `(q_s, q_r)` under the table, falling back to the
    /// identity when no rule is declared.
    pub fn apply(&self, q_s: &str, q_r: &str) -> (String, String) {
        self.rule(q_s, q_r)
            .cloned()
            .unwrap_or_else(|| (q_s.to_string(), q_r.to_string()))
    }
}

/// Direct execution of a [`ProtocolTable`]: each agent's whole local state is
/// one table state, and the simulated projection is the identity.
#[derive(Clone)]
pub struct TableProgram {
    table: Arc<ProtocolTable>,
    program_name: String,
}

impl TableProgram {
    pub fn new(table: Arc<ProtocolTable>) -> TableProgram {
        let program_name = format!("table:{}", table.name);
        TableProgram {
            table,
            program_name,
        }
    }

    /// Like [`TableProgram::new`] but with a caller-chosen program name, for
    /// wrappers that present a table under their own identity.
    pub fn named(table: Arc<ProtocolTable>, name: impl Into<String>) -> TableProgram {
        TableProgram {
            table,
            program_name: name.into(),
        }
    }

    pub fn table(&self) -> &Arc<ProtocolTable> {
        &self.table
    }

    fn sym<'v>(&self, state: &'v Value) -> Result<&'v str> {
        state.as_sym().ok_or_else(|| {
            Error::ProgramFault(format!(
                "{} expects symbolic states, got {state}",
                self.program_name
            ))
        })
    }
}

impl AgentProgram for TableProgram {
    fn name(&self) -> &str {
        &self.program_name
    }

    fn memory_descriptor(&self) -> String {
        format!(
            "one protocol state out of {{{}}}",
            self.table.states().join(", ")
        )
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        let sim = init.sim.clone().ok_or_else(|| {
            Error::Config(format!(
                "{} needs an initial protocol state per agent",
                self.program_name
            ))
        })?;
        let s = self.sym(&sim)?;
        if !self.table.initial_states().contains(&s.to_string()) {
            return Err(Error::Config(format!(
                "`{s}` is not an initial state of table `{}`",
                self.table.name
            )));
        }
        Ok(sim)
    }

    fn starter_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let (s_post, _) = self.table.apply(self.sym(own)?, self.sym(partner)?);
        Ok(Value::sym(s_post))
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let (_, r_post) = self.table.apply(self.sym(partner)?, self.sym(own)?);
        Ok(Value::sym(r_post))
    }

    fn has_simulated_projection(&self) -> bool {
        true
    }

    fn simulated_projection(&self, state: &Value) -> Option<Value> {
        Some(state.clone())
    }

    fn validate_state(&self, state: &Value) -> bool {
        state.as_sym().is_some_and(|s| self.table.is_state(s))
    }
}
