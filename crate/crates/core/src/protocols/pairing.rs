//! The pairing protocol: consumers irrevocably pair up with producers.

use crate::error::{Error, Result};
use crate::semantics::{Configuration, ProtocolTable};
use crate::value::Value;

/// A pairing population: `n_c` consumers (initial state `c`) and `n_p`
/// producers (initial state `p`). Consumers that have paired move to the
/// irrevocable state `cs`; producers that have been consumed move to `bot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairingInstance {
    pub n_c: usize,
    pub n_p: usize,
}

impl PairingInstance {
    pub fn new(n_c: usize, n_p: usize) -> Result<PairingInstance> {
        if n_c + n_p < 2 {
            return Err(Error::Config(format!(
                "pairing population must have at least 2 agents, got {}",
                n_c + n_p
            )));
        }
        Ok(PairingInstance { n_c, n_p })
    }

    pub fn n(&self) -> usize {
        self.n_c + self.n_p
    }

    /// The number of pairs that must eventually form: min(n_c, n_p).
    pub fn expected_pairs(&self) -> usize {
        self.n_c.min(self.n_p)
    }
}

/// The pairing protocol table: states {cs, c, p, bot}, with the two effective
/// rules (c, p) -> (cs, bot) and (p, c) -> (bot, cs). All other pairs are
/// identity transitions.
pub fn pairing_program() -> ProtocolTable {
    ProtocolTable::new(
        "pairing",
        vec!["cs".into(), "c".into(), "p".into(), "bot".into()],
        vec!["c".into(), "p".into()],
        vec![
            (("c".into(), "p".into()), ("cs".into(), "bot".into())),
            (("p".into(), "c".into()), ("bot".into(), "cs".into())),
        ],
    )
    .expect("the pairing table is statically well-formed")
}

/// The standard initial configuration for an instance when a table program
/// runs the protocol directly: consumers first, then producers, no leader.
pub fn pairing_init(inst: &PairingInstance) -> Configuration {
    let mut agents = vec![Value::sym("c"); inst.n_c];
    agents.extend(vec![Value::sym("p"); inst.n_p]);
    Configuration::new(agents, None)
}
