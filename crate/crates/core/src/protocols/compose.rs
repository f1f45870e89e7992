//! Composition of a naming algorithm with an ID-consuming program.
//!
//! The composed program runs both components side by side; the consumer's
//! callbacks are suppressed on any interaction where either participant is
//! still unnamed, so from the consumer's point of view unnamed agents simply
//! do not exist yet. The naming component always runs.

use crate::error::{Error, Result};
use crate::semantics::{AgentProgram, InitSpec, NamingView};
use crate::value::Value;

/// Product of a naming program and a consumer program; see
/// [`compose_with_naming`].
pub struct ComposedProgram<N, C> {
    naming: N,
    consumer: C,
    program_name: String,
}

/// Composes `naming` with an ID-consuming program.
///
/// Callers are expected to pass a consumer that declares
/// [`AgentProgram::requires_ids`]; a consumer that works without IDs has
/// nothing to gain from having its interactions filtered.
pub fn compose_with_naming<N: AgentProgram, C: AgentProgram>(
    naming: N,
    consumer: C,
) -> ComposedProgram<N, C> {
    debug_assert!(
        consumer.requires_ids(),
        "composing a consumer that does not require IDs"
    );
    let program_name = format!("{}+{}", naming.name(), consumer.name());
    ComposedProgram {
        naming,
        consumer,
        program_name,
    }
}

impl<N: AgentProgram, C: AgentProgram> ComposedProgram<N, C> {
    fn part<'v>(&self, state: &'v Value, key: &str) -> Result<&'v Value> {
        state.get(key).ok_or_else(|| {
            Error::ProgramFault(format!(
                "{} state is missing the `{key}` component: {state}",
                self.program_name
            ))
        })
    }

    /// An agent counts as named once its naming component has produced a
    /// permanent ID; the leader is named by construction (it owns ID 0).
    fn is_named(&self, naming_state: &Value) -> bool {
        self.naming
            .naming_view(naming_state)
            .is_some_and(|v| v.is_leader || v.id.is_some())
    }

    fn pack(naming: Value, sim: Value) -> Value {
        Value::record([("naming", naming), ("sim", sim)])
    }
}

impl<N: AgentProgram, C: AgentProgram> AgentProgram for ComposedProgram<N, C> {
    fn name(&self) -> &str {
        &self.program_name
    }

    fn memory_descriptor(&self) -> String {
        format!(
            "naming: {}; consumer: {}",
            self.naming.memory_descriptor(),
            self.consumer.memory_descriptor()
        )
    }

    fn initial_state(&self, init: &InitSpec) -> Result<Value> {
        Ok(Self::pack(
            self.naming.initial_state(init)?,
            self.consumer.initial_state(init)?,
        ))
    }

    fn starter_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let own_naming = self.part(own, "naming")?;
        let partner_naming = self.part(partner, "naming")?;
        let naming = self.naming.starter_update(own_naming, partner_naming)?;
        let sim = if self.is_named(own_naming) && self.is_named(partner_naming) {
            self.consumer
                .starter_update(self.part(own, "sim")?, self.part(partner, "sim")?)?
        } else {
            self.part(own, "sim")?.clone()
        };
        Ok(Self::pack(naming, sim))
    }

    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value> {
        let own_naming = self.part(own, "naming")?;
        let partner_naming = self.part(partner, "naming")?;
        let naming = self.naming.reactor_update(own_naming, partner_naming)?;
        let sim = if self.is_named(own_naming) && self.is_named(partner_naming) {
            self.consumer
                .reactor_update(self.part(own, "sim")?, self.part(partner, "sim")?)?
        } else {
            self.part(own, "sim")?.clone()
        };
        Ok(Self::pack(naming, sim))
    }

    // The one-sided detection callbacks see no partner, so suppression can
    // only condition on the agent's own naming status.

    fn starter_detect(&self, own: &Value) -> Result<Value> {
        let own_naming = self.part(own, "naming")?;
        let naming = self.naming.starter_detect(own_naming)?;
        let sim = if self.is_named(own_naming) {
            self.consumer.starter_detect(self.part(own, "sim")?)?
        } else {
            self.part(own, "sim")?.clone()
        };
        Ok(Self::pack(naming, sim))
    }

    fn starter_omission(&self, own: &Value) -> Result<Value> {
        let own_naming = self.part(own, "naming")?;
        let naming = self.naming.starter_omission(own_naming)?;
        let sim = if self.is_named(own_naming) {
            self.consumer.starter_omission(self.part(own, "sim")?)?
        } else {
            self.part(own, "sim")?.clone()
        };
        Ok(Self::pack(naming, sim))
    }

    fn reactor_omission(&self, own: &Value) -> Result<Value> {
        let own_naming = self.part(own, "naming")?;
        let naming = self.naming.reactor_omission(own_naming)?;
        let sim = if self.is_named(own_naming) {
            self.consumer.reactor_omission(self.part(own, "sim")?)?
        } else {
            self.part(own, "sim")?.clone()
        };
        Ok(Self::pack(naming, sim))
    }

    fn has_simulated_projection(&self) -> bool {
        self.consumer.has_simulated_projection()
    }

    fn simulated_projection(&self, state: &Value) -> Option<Value> {
        self.consumer.simulated_projection(state.get("sim")?)
    }

    fn validate_state(&self, state: &Value) -> bool {
        match (state.get("naming"), state.get("sim")) {
            (Some(n), Some(s)) => {
                self.naming.validate_state(n) && self.consumer.validate_state(s)
            }
            _ => false,
        }
    }

    fn is_leader_state(&self, state: &Value) -> bool {
        state
            .get("naming")
            .is_some_and(|n| self.naming.is_leader_state(n))
    }

    fn needs_leader(&self) -> bool {
        self.naming.needs_leader() || self.consumer.needs_leader()
    }

    fn naming_view(&self, state: &Value) -> Option<NamingView> {
        self.naming.naming_view(state.get("naming")?)
    }
}

/// A minimal ID-consuming program for exercising the composition: each agent
/// counts the interactions it has reacted to. Under the composition, the
/// count only moves on interactions between two named agents.
pub struct CounterConsumer;

impl AgentProgram for CounterConsumer {
    fn name(&self) -> &str {
        "counter"
    }

    fn memory_descriptor(&self) -> String {
        "one unbounded interaction counter".into()
    }

    fn initial_state(&self, _init: &InitSpec) -> Result<Value> {
        Ok(Value::record([("count", Value::int(0))]))
    }

    fn starter_update(&self, own: &Value, _partner: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    fn reactor_update(&self, own: &Value, _partner: &Value) -> Result<Value> {
        let count = own.get("count").and_then(Value::as_int).ok_or_else(|| {
            Error::ProgramFault(format!("counter state has no count field: {own}"))
        })?;
        Ok(own.with_field("count", Value::Int(count + 1)))
    }

    fn validate_state(&self, state: &Value) -> bool {
        matches!(state.get("count"), Some(Value::Int(_)))
    }

    fn requires_ids(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::naming::naming_unbounded_program;
    use crate::semantics::{step_states, ModelSemantics, OmissionFlavor};

    fn composed() -> ComposedProgram<crate::protocols::naming::NamingUnbounded, CounterConsumer> {
        compose_with_naming(naming_unbounded_program(), CounterConsumer)
    }

    fn count_of(state: &Value) -> Value {
        state.get("sim").unwrap().get("count").unwrap().clone()
    }

    #[test]
    fn initial_state_is_the_pair_of_initial_states() {
        let prog = composed();
        let leader = prog.initial_state(&InitSpec::leader(None)).unwrap();
        assert_eq!(
            leader.get("naming"),
            Some(&Value::record([
                ("my_id", Value::int(0)),
                ("next_id", Value::int(1))
            ]))
        );
        assert_eq!(
            leader.get("sim"),
            Some(&Value::record([("count", Value::int(0))]))
        );
        assert!(prog.is_leader_state(&leader));
    }

    #[test]
    fn consumer_is_suppressed_until_both_sides_are_named() {
        let prog = composed();
        let sem = ModelSemantics::preset("I1").unwrap();
        let leader = prog.initial_state(&InitSpec::leader(None)).unwrap();
        let a = prog.initial_state(&InitSpec::follower(None)).unwrap();

        // Unnamed reactor: naming assigns an ID, but the counter stays put —
        // the reactor was unnamed when the interaction happened.
        let (_, a_named) =
            step_states(&sem, &prog, &leader, &a, OmissionFlavor::NonOmissive).unwrap();
        assert_eq!(
            a_named.get("naming").unwrap().get("my_id"),
            Some(&Value::int(1))
        );
        assert_eq!(count_of(&a_named), Value::int(0));

        // Named reactor observing the (named-by-definition) leader: fires.
        let (_, a_counted) =
            step_states(&sem, &prog, &leader, &a_named, OmissionFlavor::NonOmissive).unwrap();
        assert_eq!(count_of(&a_counted), Value::int(1));

        // Named reactor observing an unnamed starter: suppressed again.
        let (_, a_still) =
            step_states(&sem, &prog, &a, &a_counted, OmissionFlavor::NonOmissive).unwrap();
        assert_eq!(count_of(&a_still), Value::int(1));
    }

    #[test]
    fn naming_runs_unconditionally_through_the_composition() {
        let prog = composed();
        let sem = ModelSemantics::preset("I1").unwrap();
        let leader = prog.initial_state(&InitSpec::leader(None)).unwrap();
        let a = prog.initial_state(&InitSpec::follower(None)).unwrap();

        // Omission on the reactor side: the leader's counter still burns.
        let (l_post, a_post) =
            step_states(&sem, &prog, &leader, &a, OmissionFlavor::ReactorSide).unwrap();
        assert_eq!(
            l_post.get("naming").unwrap().get("next_id"),
            Some(&Value::int(2))
        );
        assert_eq!(a_post, a);
    }

    #[test]
    fn naming_view_delegates_to_the_naming_component() {
        let prog = composed();
        let a = prog.initial_state(&InitSpec::follower(None)).unwrap();
        let view = prog.naming_view(&a).unwrap();
        assert_eq!(view.id, None);
        assert!(!view.is_leader);
    }
}
