//! Reference protocols and leader-based agent programs: the pairing
//! protocol, three naming (unique-ID assignment) algorithms, the token-passing
//! simulator that runs two-way protocols on a one-way model, and the
//! composition hook that layers ID-consuming programs on top of naming.

mod compose;
mod naming;
mod pairing;
mod token;

pub use compose::{compose_with_naming, ComposedProgram, CounterConsumer};
pub use naming::{
    naming_i12_program, naming_t1_program, naming_unbounded_program, NamingI12, NamingT1,
    NamingUnbounded,
};
pub use pairing::{pairing_init, pairing_program, PairingInstance};
pub use token::{
    check_token_invariants, it_token_simulator, last_quiescent_cut, strawman_t1_simulator,
    token_quiescent, TokenSim,
};
