//! The per-agent algorithm interface executed by the interaction engine.

use num_bigint::BigInt;

use crate::error::Result;
use crate::value::Value;

/// Per-agent initialization request.
#[derive(Debug, Clone, Default)]
pub struct InitSpec {
    /// Whether this agent starts in the program's distinguished leader state.
    pub leader: bool,
    /// Initial simulated state, for programs that carry one (direct protocol
    /// tables and simulators); `None` for programs without a simulated
    /// component (the naming algorithms).
    pub sim: Option<Value>,
}

impl InitSpec {
    pub fn plain(sim: Value) -> InitSpec {
        InitSpec {
            leader: false,
            sim: Some(sim),
        }
    }

    pub fn leader(sim: Option<Value>) -> InitSpec {
        InitSpec { leader: true, sim }
    }

    pub fn follower(sim: Option<Value>) -> InitSpec {
        InitSpec { leader: false, sim }
    }
}

/// What a naming program exposes about one local state, for the naming
/// verifier: the completed permanent ID (if any) and the leader's counter
/// entries (empty for non-leaders).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingView {
    /// Completed ID: an integer, or a fully-assigned array for array-ID
    /// schemes. `None` while the agent is still unnamed.
    pub id: Option<Value>,
    pub is_leader: bool,
    /// Current values of the leader's ID counter(s).
    pub counters: Vec<BigInt>,
}

/// A concrete per-agent algorithm: callback bodies plus optional views into
/// the local state (simulated component, naming component).
///
/// Callback conventions:
/// - all callbacks are deterministic and total on reachable states;
/// - `partner` arguments are always the partner's PRE-interaction state (both
///   sides of an interaction update simultaneously);
/// - `starter_update`/`reactor_update` are the two-way f_s/f_r (for one-way
///   models `reactor_update` is the single reactor function f);
/// - `starter_detect` is the one-way g (detected involvement);
/// - `starter_omission`/`reactor_omission` are the dedicated two-way detection
///   functions o/h; they default to the identity ("undetectable").
pub trait AgentProgram: Send + Sync {
    fn name(&self) -> &str;

    /// Human-readable description of the per-agent local state layout.
    fn memory_descriptor(&self) -> String;

    fn initial_state(&self, init: &InitSpec) -> Result<Value>;

    /// Two-way starter transition f_s(own, partner).
    fn starter_update(&self, own: &Value, partner: &Value) -> Result<Value>;

    /// One-way reactor transition f(own, partner), or two-way f_r(own, partner).
    fn reactor_update(&self, own: &Value, partner: &Value) -> Result<Value>;

    /// One-way starter detection g(own); identity unless overridden.
    fn starter_detect(&self, own: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    /// Dedicated starter-side omission detection o(own); identity = undetectable.
    fn starter_omission(&self, own: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    /// Dedicated reactor-side omission detection h(own); identity = undetectable.
    fn reactor_omission(&self, own: &Value) -> Result<Value> {
        Ok(own.clone())
    }

    /// Whether this program carries a simulated protocol component.
    fn has_simulated_projection(&self) -> bool {
        false
    }

    /// Projection of a local state onto the simulated protocol state. Programs
    /// with [`AgentProgram::has_simulated_projection`] must define this on
    /// every reachable local state.
    fn simulated_projection(&self, _state: &Value) -> Option<Value> {
        None
    }

    /// Structural check used to flag callback results outside the declared
    /// state space.
    fn validate_state(&self, _state: &Value) -> bool {
        true
    }

    /// Whether `state` belongs to the program's distinguished leader set.
    fn is_leader_state(&self, _state: &Value) -> bool {
        false
    }

    /// Whether the program requires exactly one leader in the initial
    /// configuration.
    fn needs_leader(&self) -> bool {
        false
    }

    /// Declared by programs that only function on named agents (consumers for
    /// the naming composition hook).
    fn requires_ids(&self) -> bool {
        false
    }

    /// Naming introspection, for naming programs and their compositions.
    fn naming_view(&self, _state: &Value) -> Option<NamingView> {
        None
    }
}
