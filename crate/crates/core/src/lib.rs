//! Simulation and verification workbench for population protocols under
//! unreliable pairwise interactions.
//!
//! The crate models populations of anonymous finite- or unbounded-memory
//! agents that interact in scheduled (starter, reactor) pairs, under a family
//! of interaction models that differ in interaction arity (two-way or
//! one-way) and in which side, if any, detects a lost interaction. On top of
//! the execution engine it provides:
//!
//! - reference protocols and leader-based algorithms: a pairing protocol,
//!   three ID-assignment (naming) algorithms, and a token-passing simulator
//!   that runs any two-way protocol on top of a one-way model
//!   ([`protocols`]);
//! - verification passes that check recorded traces against simulation
//!   correctness, pairing safety/liveness, and naming properties
//!   ([`verification`]);
//! - adversary constructions that defeat omission-unaware simulators via
//!   targeted omission placement ([`attacks`]);
//! - trace/script/config file formats and a command-line interface ([`io`],
//!   [`cli`]).

pub mod attacks;
pub mod cli;
pub mod error;
pub mod io;
pub mod protocols;
pub mod scheduling;
pub mod semantics;
pub mod value;
pub mod verification;

pub use error::{Error, Result};
pub use semantics::{
    admissible_outcomes, apply_interaction, event_conforms, step_states, AgentProgram, Arity,
    Configuration, InitSpec, InteractionEvent, ModelSemantics, NamingView, OmissionFlavor,
    ProtocolTable, TableProgram,
};
pub use value::{StateCache, Value};
