//! Leader-driven naming algorithms: every agent acquires a permanent,
//! globally unique ID handed out by the leader.
//!
//! Three variants are provided, one per memory/model regime:
//!
//! - [`NamingUnbounded`]: one-way models with starter detection; the leader
//!   burns one counter value per involvement, so IDs are unbounded but
//!   uniqueness needs no omission bound.
//! - [`NamingI12`]: one-way models with starter detection and an upper bound
//!   `L` on leader-involving omissions; the leader cycles `L + 1` counters
//!   with a lock/acknowledge handshake so that counter values stay in
//!   `O(n L)`.
//! - [`NamingT1`]: two-way model without any omission detection, same bound
//!   `L`; agents accumulate an array of `L + 1` counter readings and the full
//!   array is the ID.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::semantics::{AgentProgram, InitSpec, NamingView};
use crate::value::Value;

fn field<'v>(state: &'v Value, key: &str, prog: &str) -> Result<&'v Value> {
    state.get(key).ok_or_else(|| {
        Error::ProgramFault(format!("{prog} state is missing field `{key}`: {state}"))
    })
}

fn int_field(state: &Value, key: &str, prog: &str) -> Result<BigInt> {
    field(state, key, prog)?.as_int().cloned().ok_or_else(|| {
        Error::ProgramFault(format!("{prog} state field `{key}` is not an integer: {state}"))
    })
}

fn list_field(state: &Value, key: &str, prog: &str) -> Result<Vec<Value>> {
    field(state, key, prog)?.as_list().map(<[Value]>::to_vec).ok_or_else(|| {
        Error::ProgramFault(format!("{prog} state field `{key}` is not a list: {state}"))
    })
}

fn is_marked_leader(state: &Value) -> bool {
    state.get("my_id") == Some(&Value::int(0))
}

/// Naming with an unbounded leader counter, for one-way models where the
/// starter detects its own involvement.
///
/// The leader (permanent ID 0) increments `next_id` on every detected
/// involvement — delivered or omitted, it cannot tell the difference — and a
/// still-unnamed reactor that observes the leader takes the observed
/// (pre-interaction) `next_id` as its permanent ID. A counter value is never
/// offered twice, so IDs are unique under any omission adversary.
pub struct NamingUnbounded;

/// Builds the unbounded-counter naming program.
pub fn naming_unbounded_program() -> NamingUnbounded {
    NamingUnbounded
}

impl AgentProgram for NamingUnbounded {
    fn name(&self) -> &str {
        "naming-unbounded"
    }

    fn memory_descriptor(&self) -> String {
        "leader: permanent id 0 + unbounded counter; others: one permanent id or null".into()
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        if init.leader {
            Ok(Value::record([
                ("my_id", Value::int(0)),
                ("next_id", Value::int(1)),
            ]))
        } else {
            Ok(Value::record([("my_id", Value::Null)]))
        }
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    fn starter_detect(&self, own: &Value) -> Result<Value> {
        if is_marked_leader(own) {
            let next = int_field(own, "next_id", self.name())?;
            Ok(own.with_field("next_id", Value::Int(next + 1)))
        } else {
            Ok(own.clone())
        }
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        if field(own, "my_id", self.name())?.is_null() && is_marked_leader(partner) {
            let offered = field(partner, "next_id", self.name())?.clone();
            Ok(own.with_field("my_id", offered))
        } else {
            Ok(own.clone())
        }
    }

    fn validate_state(&self, state: &Value) -> bool {
        match state.get("my_id") {
            Some(Value::Null) => true,
            Some(Value::Int(id)) => {
                if *id == BigInt::from(0) {
                    matches!(state.get("next_id"), Some(Value::Int(n)) if *n >= BigInt::from(1))
                } else {
                    *id >= BigInt::from(1)
                }
            }
            _ => false,
        }
    }

    fn is_leader_state(&self, state: &Value) -> bool {
        is_marked_leader(state)
    }

    fn needs_leader(&self) -> bool {
        true
    }

    fn naming_view(&self, state: &Value) -> Option<NamingView> {
        if is_marked_leader(state) {
            let counter = state.get("next_id")?.as_int()?.clone();
            Some(NamingView {
                id: None,
                is_leader: true,
                counters: vec![counter],
            })
        } else {
            let my_id = state.get("my_id")?;
            Some(NamingView {
                id: (!my_id.is_null()).then(|| my_id.clone()),
                is_leader: false,
                counters: vec![],
            })
        }
    }
}

/// Bounded-memory naming for one-way models with starter detection, given an
/// upper bound `L` on the number of omissive interactions involving the
/// leader.
///
/// The leader keeps `L + 1` counter entries (`next_id`), of which the
/// lowest-indexed unlocked one is *active*. On every detected involvement the
/// leader locks the active entry; a reactor that observes the leader either
/// takes the active entry's value as its ID (if unnamed) or marks the entry
/// redundant (if already named). Redundant reports flow back to the leader
/// through a `waiting` acknowledgment handshake that eventually unlocks
/// over-locked entries; observing an agent that carries entry value `v`
/// unlocks `v`'s entry and advances it by `L + 1`. At most `L` entries can be
/// permanently wasted by omissions, so one entry always remains serviceable.
pub struct NamingI12 {
    l: usize,
}

/// Builds the bounded-counter naming program for omission bound `L`.
pub fn naming_i12_program(l: usize) -> NamingI12 {
    NamingI12 { l }
}

impl NamingI12 {
    pub fn l(&self) -> usize {
        self.l
    }

    fn slots(&self) -> usize {
        self.l + 1
    }

    fn first_unlocked(locked: &[Value]) -> Option<usize> {
        locked.iter().position(|b| b.as_bool() == Some(false))
    }
}

impl AgentProgram for NamingI12 {
    fn name(&self) -> &str {
        "naming-i12"
    }

    fn memory_descriptor(&self) -> String {
        format!(
            "leader: {} counter/lock/waiting entries; others: one permanent id + {} redundancy bits",
            self.slots(),
            self.slots()
        )
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        if init.leader {
            Ok(Value::record([
                ("locked", Value::list(vec![Value::Bool(false); self.slots()])),
                ("my_id", Value::int(0)),
                (
                    "next_id",
                    Value::list((1..=self.slots() as i64).map(Value::int)),
                ),
                ("waiting", Value::list(vec![Value::Null; self.slots()])),
            ]))
        } else {
            Ok(Value::record([
                ("my_id", Value::Null),
                ("redundant", Value::list(vec![Value::Bool(false); self.slots()])),
            ]))
        }
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    fn starter_detect(&self, own: &Value) -> Result<Value> {
        if !is_marked_leader(own) {
            return Ok(own.clone());
        }
        let mut locked = list_field(own, "locked", self.name())?;
        match Self::first_unlocked(&locked) {
            Some(j) => {
                locked[j] = Value::Bool(true);
                Ok(own.with_field("locked", Value::list(locked)))
            }
            None => Ok(own.clone()),
        }
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let name = self.name();
        if is_marked_leader(own) {
            // Observing a non-leader: process redundancy reports and
            // acknowledgments, then recycle the entry matching the observed
            // ID, if any.
            let Some(partner_red) = partner.get("redundant").and_then(Value::as_list) else {
                return Ok(own.clone());
            };
            let observed_id = field(partner, "my_id", name)?.clone();
            let mut waiting = list_field(own, "waiting", name)?;
            let mut locked = list_field(own, "locked", name)?;
            let mut next_id = list_field(own, "next_id", name)?;
            for j in 0..self.slots() {
                if partner_red.get(j).and_then(Value::as_bool) == Some(true) {
                    waiting[j] = observed_id.clone();
                } else if !waiting[j].is_null() && waiting[j] == observed_id {
                    waiting[j] = Value::Null;
                    locked[j] = Value::Bool(false);
                }
            }
            if let Some(observed) = observed_id.as_int() {
                if let Some(j) = next_id.iter().position(|v| v.as_int() == Some(observed)) {
                    locked[j] = Value::Bool(false);
                    let grown = observed + BigInt::from(self.slots());
                    next_id[j] = Value::Int(grown);
                }
            }
            Ok(Value::record([
                ("locked", Value::list(locked)),
                ("my_id", Value::int(0)),
                ("next_id", Value::list(next_id)),
                ("waiting", Value::list(waiting)),
            ]))
        } else if is_marked_leader(partner) {
            // Observing the leader: take the active entry or mark it
            // redundant, then honor any acknowledgment addressed to us.
            let partner_locked = list_field(partner, "locked", name)?;
            let partner_next = list_field(partner, "next_id", name)?;
            let partner_waiting = list_field(partner, "waiting", name)?;
            let mut my_id = field(own, "my_id", name)?.clone();
            let mut redundant = list_field(own, "redundant", name)?;
            if let Some(j) = Self::first_unlocked(&partner_locked) {
                if my_id.is_null() {
                    my_id = partner_next[j].clone();
                } else {
                    redundant[j] = Value::Bool(true);
                }
            }
            if !my_id.is_null() {
                for j in 0..self.slots() {
                    if partner_waiting[j] == my_id {
                        redundant[j] = Value::Bool(false);
                    }
                }
            }
            Ok(Value::record([
                ("my_id", my_id),
                ("redundant", Value::list(redundant)),
            ]))
        } else {
            Ok(own.clone())
        }
    }

    fn validate_state(&self, state: &Value) -> bool {
        let list_len = |key: &str| state.get(key).and_then(Value::as_list).map(<[Value]>::len);
        if is_marked_leader(state) {
            list_len("next_id") == Some(self.slots())
                && list_len("locked") == Some(self.slots())
                && list_len("waiting") == Some(self.slots())
        } else {
            matches!(state.get("my_id"), Some(Value::Null) | Some(Value::Int(_)))
                && list_len("redundant") == Some(self.slots())
        }
    }

    fn is_leader_state(&self, state: &Value) -> bool {
        is_marked_leader(state)
    }

    fn needs_leader(&self) -> bool {
        true
    }

    fn naming_view(&self, state: &Value) -> Option<NamingView> {
        if is_marked_leader(state) {
            let counters = state
                .get("next_id")?
                .as_list()?
                .iter()
                .map(|v| v.as_int().cloned())
                .collect::<Option<Vec<BigInt>>>()?;
            Some(NamingView {
                id: None,
                is_leader: true,
                counters,
            })
        } else {
            let my_id = state.get("my_id")?;
            Some(NamingView {
                id: (!my_id.is_null()).then(|| my_id.clone()),
                is_leader: false,
                counters: vec![],
            })
        }
    }
}

/// Bounded-memory naming for the two-way model without omission detection,
/// given an upper bound `L` on leader-involving omissions.
///
/// Since omissions are undetectable here, single counter values can be handed
/// out twice; instead each agent collects `L + 1` successive counter readings
/// into an array, and the completed array is its ID. Two equal arrays would
/// require the leader's counter to have stalled `L + 1` times, which exceeds
/// the omission bound.
pub struct NamingT1 {
    l: usize,
}

/// Builds the array-ID naming program for omission bound `L`.
pub fn naming_t1_program(l: usize) -> NamingT1 {
    NamingT1 { l }
}

impl NamingT1 {
    pub fn l(&self) -> usize {
        self.l
    }

    fn slots(&self) -> usize {
        self.l + 1
    }

    /// Both interaction roles run the same observation rule: the leader
    /// advances its counter when it reads a partner with unfilled slots; a
    /// non-leader fills its leftmost empty slot when it reads the leader.
    fn observe(&self, own: &Value, partner: &Value) -> Result<Value> {
        let name = self.name();
        if is_marked_leader(own) {
            let partner_has_hole = partner
                .get("my_id")
                .and_then(Value::as_list)
                .is_some_and(|slots| slots.iter().any(Value::is_null));
            if partner_has_hole {
                let next = int_field(own, "next_id", name)?;
                return Ok(own.with_field("next_id", Value::Int(next + 1)));
            }
            Ok(own.clone())
        } else if is_marked_leader(partner) {
            let mut slots = list_field(own, "my_id", name)?;
            match slots.iter().position(Value::is_null) {
                Some(j) => {
                    slots[j] = field(partner, "next_id", name)?.clone();
                    Ok(own.with_field("my_id", Value::list(slots)))
                }
                None => Ok(own.clone()),
            }
        } else {
            Ok(own.clone())
        }
    }
}

impl AgentProgram for NamingT1 {
    fn name(&self) -> &str {
        "naming-t1"
    }

    fn memory_descriptor(&self) -> String {
        format!(
            "leader: one counter; others: an array of {} counter readings",
            self.slots()
        )
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        if init.leader {
            Ok(Value::record([
                ("my_id", Value::int(0)),
                ("next_id", Value::int(1)),
            ]))
        } else {
            Ok(Value::record([(
                "my_id",
                Value::list(vec![Value::Null; self.slots()]),
            )]))
        }
    }

    fn starter_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        self.observe(own, partner)
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        self.observe(own, partner)
    }

    fn validate_state(&self, state: &Value) -> bool {
        match state.get("my_id") {
            Some(Value::Int(id)) => {
                *id == BigInt::from(0)
                    && matches!(state.get("next_id"), Some(Value::Int(n)) if *n >= BigInt::from(1))
            }
            Some(Value::List(slots)) => {
                slots.len() == self.slots()
                    && slots
                        .iter()
                        .all(|s| matches!(s, Value::Null | Value::Int(_)))
            }
            _ => false,
        }
    }

    fn is_leader_state(&self, state: &Value) -> bool {
        is_marked_leader(state)
    }

    fn needs_leader(&self) -> bool {
        true
    }

    fn naming_view(&self, state: &Value) -> Option<NamingView> {
        if is_marked_leader(state) {
            let counter = state.get("next_id")?.as_int()?.clone();
            Some(NamingView {
                id: None,
                is_leader: true,
                counters: vec![counter],
            })
        } else {
            let slots = state.get("my_id")?;
            let complete = slots.as_list()?.iter().all(|s| !s.is_null());
            Some(NamingView {
                id: complete.then(|| slots.clone()),
                is_leader: false,
                counters: vec![],
            })
        }
    }
}
