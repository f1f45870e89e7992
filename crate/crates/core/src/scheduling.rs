//! Schedulers, omission adversaries, and trace-producing run loops.
//!
//! A run pairs a scheduler (who interacts at each step) with an omission
//! adversary (which scheduled interactions are lost, and on which side). Both
//! are resolved deterministically from the run's base seed unless given their
//! own, so a `(config, seed)` pair always reproduces the same trace.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{
    step_states, AgentProgram, Configuration, InteractionEvent, ModelSemantics, OmissionFlavor,
};
use crate::value::{StateCache, Value};

/// One scripted interaction: who interacts and with which outcome class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptStep {
    pub starter: usize,
    pub reactor: usize,
    pub flavor: OmissionFlavor,
}

impl ScriptStep {
    pub fn new(starter: usize, reactor: usize, flavor: OmissionFlavor) -> ScriptStep {
        ScriptStep {
            starter,
            reactor,
            flavor,
        }
    }

    pub fn delivered(starter: usize, reactor: usize) -> ScriptStep {
        ScriptStep::new(starter, reactor, OmissionFlavor::NonOmissive)
    }

    pub fn involves(&self, agent: usize) -> bool {
        self.starter == agent || self.reactor == agent
    }
}

/// Chooses the (starter, reactor) pair at each step.
///
/// The reference model assumes a globally fair scheduler; the uniform random
/// scheduler approximates one (every pair recurs with probability 1), and
/// fairness-dependent properties are checked over a trailing window.
#[derive(Debug, Clone)]
pub enum Scheduler {
    /// Ordered pair chosen uniformly at random each step; seeded from the run
    /// seed unless an explicit seed is given.
    UniformRandom { seed: Option<u64> },
    /// Deterministic cycle through all ordered pairs in lexicographic order.
    RoundRobinPairs,
    /// Fixed pair sequence; must cover the requested horizon.
    Scripted(Vec<(usize, usize)>),
}

impl Scheduler {
    fn describe(&self) -> String {
        match self {
            Scheduler::UniformRandom { .. } => "uniform-random".into(),
            Scheduler::RoundRobinPairs => "round-robin-pairs".into(),
            Scheduler::Scripted(steps) => format!("scripted({} steps)", steps.len()),
        }
    }
}

/// Decides, per step, whether the adversary wants the scheduled interaction
/// to be omissive, and with which flavor.
#[derive(Debug, Clone)]
pub enum AdversaryPolicy {
    Never,
    /// Each step is omissive with probability `rate`; the flavor is drawn
    /// uniformly from the model's admissible omissive flavors.
    Random { rate: f64, seed: Option<u64> },
    /// Explicit `(step, flavor)` requests; steps not listed are delivered.
    Scripted(Vec<(u64, OmissionFlavor)>),
}

/// An omission adversary: a per-step policy plus the resource restriction the
/// adversary operates under. Requests the restriction does not allow are
/// downgraded to delivered interactions (restrictions bound what the
/// adversary *can* do, not what it asks for).
#[derive(Debug, Clone)]
pub enum OmissionAdversary {
    /// No interactions are lost, whatever the model admits.
    NoOmissions,
    /// At most `budget` omissive interactions in the whole run.
    FiniteBudget { budget: u64, policy: AdversaryPolicy },
    /// No restriction beyond what the model admits.
    Unrestricted { policy: AdversaryPolicy },
    /// At most `bound` omissive interactions involving the leader; omissions
    /// among non-leader agents are unrestricted.
    LeaderBounded { bound: u64, policy: AdversaryPolicy },
}

impl OmissionAdversary {
    fn policy(&self) -> Option<&AdversaryPolicy> {
        match self {
            OmissionAdversary::NoOmissions => None,
            OmissionAdversary::FiniteBudget { policy, .. }
            | OmissionAdversary::Unrestricted { policy }
            | OmissionAdversary::LeaderBounded { policy, .. } => Some(policy),
        }
    }

    fn describe(&self) -> String {
        match self {
            OmissionAdversary::NoOmissions => "no-omissions".into(),
            OmissionAdversary::FiniteBudget { budget, .. } => format!("finite-budget({budget})"),
            OmissionAdversary::Unrestricted { .. } => "unrestricted".into(),
            OmissionAdversary::LeaderBounded { bound, .. } => format!("leader-bounded({bound})"),
        }
    }
}

/// Metadata recorded at the head of every trace, sufficient to reproduce the
/// run and to reconstruct the program for replay verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub program: String,
    pub preset: Option<String>,
    pub n: usize,
    pub leader_index: Option<usize>,
    pub horizon: u64,
    pub scheduler: String,
    pub adversary: String,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub scheduler_seed: Option<u64>,
    #[serde(default)]
    pub adversary_seed: Option<u64>,
    /// Free-form program parameters (table definition, ID-range bound, ...)
    /// used to rebuild the program when verifying the trace.
    #[serde(default)]
    pub params: serde_json::Value,
}

/// A recorded run: metadata, the initial configuration, and every scheduled
/// interaction in order.
#[derive(Debug, Clone)]
pub struct Trace {
    pub meta: TraceMeta,
    pub init: Configuration,
    pub events: Vec<InteractionEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Iterates over the `len + 1` configurations the run visits, starting
    /// with the initial one, by replaying recorded post-states.
    pub fn configs(&self) -> impl Iterator<Item = Configuration> + '_ {
        let mut current = Some(self.init.clone());
        let mut next_event = 0usize;
        std::iter::from_fn(move || {
            let out = current.clone()?;
            if next_event < self.events.len() {
                let ev = &self.events[next_event];
                let cur = current.as_mut().unwrap();
                cur.agents[ev.starter] = ev.post.0.clone();
                cur.agents[ev.reactor] = ev.post.1.clone();
                next_event += 1;
            } else {
                current = None;
            }
            Some(out)
        })
    }

    /// The configuration after `t` events (`t = 0` is the initial one).
    pub fn config_at(&self, t: u64) -> Option<Configuration> {
        self.configs().nth(t as usize)
    }

    pub fn final_config(&self) -> Configuration {
        self.configs().last().expect("a trace has >= 1 config")
    }

    pub fn omission_count(&self) -> u64 {
        self.events.iter().filter(|e| e.flavor.is_omissive()).count() as u64
    }

    /// A copy of the first `events` events, with the metadata horizon
    /// adjusted to match — a clean shorter run, for checks that need a
    /// particular cutoff point.
    pub fn prefix(&self, events: usize) -> Trace {
        let events = self.events[..events.min(self.events.len())].to_vec();
        let mut meta = self.meta.clone();
        meta.horizon = events.len() as u64;
        Trace {
            meta,
            init: self.init.clone(),
            events,
        }
    }

    /// Omissive interactions involving the leader, per the leader-bounded
    /// adversary's accounting.
    pub fn leader_omission_count(&self) -> u64 {
        let Some(leader) = self.init.leader_index else {
            return 0;
        };
        self.events
            .iter()
            .filter(|e| e.flavor.is_omissive() && (e.starter == leader || e.reactor == leader))
            .count() as u64
    }
}

/// Splitmix64 step, used to derive independent seed streams from one base
/// seed.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

struct PairSource {
    kind: PairSourceKind,
}

enum PairSourceKind {
    Random(ChaCha8Rng, usize),
    RoundRobin(Vec<(usize, usize)>),
    Scripted(Vec<(usize, usize)>),
}

impl PairSource {
    fn next(&mut self, t: u64) -> (usize, usize) {
        match &mut self.kind {
            PairSourceKind::Random(rng, n) => {
                let s = rng.gen_range(0..*n);
                let mut r = rng.gen_range(0..*n - 1);
                if r >= s {
                    r += 1;
                }
                (s, r)
            }
            PairSourceKind::RoundRobin(pairs) => pairs[(t as usize) % pairs.len()],
            PairSourceKind::Scripted(pairs) => pairs[t as usize],
        }
    }
}

struct FlavorSource {
    kind: FlavorSourceKind,
    omissive_menu: Vec<OmissionFlavor>,
}

enum FlavorSourceKind {
    Never,
    Random(ChaCha8Rng, f64),
    Scripted(HashMap<u64, OmissionFlavor>),
}

impl FlavorSource {
    /// What the adversary asks for at step `t`, before restrictions.
    fn propose(&mut self, t: u64) -> OmissionFlavor {
        match &mut self.kind {
            FlavorSourceKind::Never => OmissionFlavor::NonOmissive,
            FlavorSourceKind::Random(rng, rate) => {
                if self.omissive_menu.is_empty() || !rng.gen_bool(*rate) {
                    OmissionFlavor::NonOmissive
                } else {
                    self.omissive_menu[rng.gen_range(0..self.omissive_menu.len())]
                }
            }
            FlavorSourceKind::Scripted(map) => {
                map.get(&t).copied().unwrap_or(OmissionFlavor::NonOmissive)
            }
        }
    }
}

/// Runs `prog` under `sem` for `horizon` steps and records the trace.
///
/// The adversary's omission requests are downgraded to delivered interactions
/// whenever the model admits no omissions, the requested flavor is not
/// admissible, or the adversary's restriction (budget, leader bound) is
/// exhausted; budgets are charged only for omissions actually emitted.
pub fn run(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    init: &Configuration,
    scheduler: &Scheduler,
    adversary: &OmissionAdversary,
    horizon: u64,
    seed: u64,
) -> Result<Trace> {
    sem.validate()?;
    init.validate_for(prog)?;
    let n = init.n();

    let scheduler_seed = match scheduler {
        Scheduler::UniformRandom { seed: explicit } => {
            Some(explicit.unwrap_or_else(|| derive_seed(seed, 1)))
        }
        _ => None,
    };
    let mut pairs = match scheduler {
        Scheduler::UniformRandom { .. } => PairSource {
            kind: PairSourceKind::Random(
                ChaCha8Rng::seed_from_u64(scheduler_seed.unwrap()),
                n,
            ),
        },
        Scheduler::RoundRobinPairs => {
            let mut all = Vec::with_capacity(n * (n - 1));
            for s in 0..n {
                for r in 0..n {
                    if s != r {
                        all.push((s, r));
                    }
                }
            }
            PairSource {
                kind: PairSourceKind::RoundRobin(all),
            }
        }
        Scheduler::Scripted(steps) => {
            if (steps.len() as u64) < horizon {
                return Err(Error::Script(format!(
                    "scheduler script has {} steps but the horizon is {horizon}",
                    steps.len()
                )));
            }
            PairSource {
                kind: PairSourceKind::Scripted(steps.clone()),
            }
        }
    };

    let adversary_seed = match adversary.policy() {
        Some(AdversaryPolicy::Random { seed: explicit, .. }) => {
            Some(explicit.unwrap_or_else(|| derive_seed(seed, 2)))
        }
        _ => None,
    };
    let omissive_menu: Vec<OmissionFlavor> = sem
        .admissible_flavors()
        .into_iter()
        .filter(|f| f.is_omissive())
        .collect();
    let mut flavors = FlavorSource {
        kind: match adversary.policy() {
            None | Some(AdversaryPolicy::Never) => FlavorSourceKind::Never,
            Some(AdversaryPolicy::Random { rate, .. }) => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::Config(format!(
                        "omission rate must be in [0, 1], got {rate}"
                    )));
                }
                FlavorSourceKind::Random(ChaCha8Rng::seed_from_u64(adversary_seed.unwrap()), *rate)
            }
            Some(AdversaryPolicy::Scripted(reqs)) => {
                FlavorSourceKind::Scripted(reqs.iter().copied().collect())
            }
        },
        omissive_menu,
    };

    let mut cache = StateCache::new();
    let mut agents: Vec<Arc<Value>> = init
        .agents
        .iter()
        .map(|a| cache.intern((**a).clone()))
        .collect();
    let mut events = Vec::with_capacity(horizon as usize);
    let mut omissions_spent: u64 = 0;
    let mut leader_omissions_spent: u64 = 0;

    for t in 0..horizon {
        let (s, r) = pairs.next(t);
        if s >= n || r >= n || s == r {
            return Err(Error::Script(format!(
                "scheduled pair ({s}, {r}) at step {t} is invalid for population of {n}"
            )));
        }
        let mut flavor = flavors.propose(t);
        if flavor.is_omissive() {
            let allowed = sem.admits(flavor)
                && match adversary {
                    OmissionAdversary::NoOmissions => false,
                    OmissionAdversary::Unrestricted { .. } => true,
                    OmissionAdversary::FiniteBudget { budget, .. } => omissions_spent < *budget,
                    OmissionAdversary::LeaderBounded { bound, .. } => {
                        let hits_leader =
                            init.leader_index.map_or(false, |l| s == l || r == l);
                        !hits_leader || leader_omissions_spent < *bound
                    }
                };
            if !allowed {
                flavor = OmissionFlavor::NonOmissive;
            }
        }
        let (s_post, r_post) = step_states(sem, prog, &agents[s], &agents[r], flavor)?;
        let pre = (agents[s].clone(), agents[r].clone());
        let post = (cache.intern(s_post), cache.intern(r_post));
        agents[s] = post.0.clone();
        agents[r] = post.1.clone();
        if flavor.is_omissive() {
            omissions_spent += 1;
            if init.leader_index.map_or(false, |l| s == l || r == l) {
                leader_omissions_spent += 1;
            }
        }
        events.push(InteractionEvent {
            time: t,
            starter: s,
            reactor: r,
            flavor,
            pre,
            post,
        });
    }

    Ok(Trace {
        meta: TraceMeta {
            program: prog.name().to_string(),
            preset: sem.preset_name.clone(),
            n,
            leader_index: init.leader_index,
            horizon,
            scheduler: scheduler.describe(),
            adversary: adversary.describe(),
            base_seed: Some(seed),
            scheduler_seed,
            adversary_seed,
            params: serde_json::Value::Null,
        },
        init: init.clone(),
        events,
    })
}

/// Replays an explicit interaction script exactly. Unlike [`run`], nothing is
/// downgraded: a step whose flavor the model does not admit is an error.
pub fn scripted_run(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    init: &Configuration,
    script: &[ScriptStep],
) -> Result<Trace> {
    sem.validate()?;
    init.validate_for(prog)?;
    let n = init.n();
    let mut cache = StateCache::new();
    let mut agents: Vec<Arc<Value>> = init
        .agents
        .iter()
        .map(|a| cache.intern((**a).clone()))
        .collect();
    let mut events = Vec::with_capacity(script.len());
    for (t, step) in script.iter().enumerate() {
        let (s, r) = (step.starter, step.reactor);
        if s >= n || r >= n || s == r {
            return Err(Error::Script(format!(
                "script step {t} schedules invalid pair ({s}, {r}) for population of {n}"
            )));
        }
        if !sem.admits(step.flavor) {
            return Err(Error::ModelViolation(format!(
                "script step {t} requests a {} interaction but model {} admits none",
                step.flavor.label(),
                sem.preset_name.as_deref().unwrap_or("<custom>")
            )));
        }
        let (s_post, r_post) = step_states(sem, prog, &agents[s], &agents[r], step.flavor)?;
        let pre = (agents[s].clone(), agents[r].clone());
        let post = (cache.intern(s_post), cache.intern(r_post));
        agents[s] = post.0.clone();
        agents[r] = post.1.clone();
        events.push(InteractionEvent {
            time: t as u64,
            starter: s,
            reactor: r,
            flavor: step.flavor,
            pre,
            post,
        });
    }
    Ok(Trace {
        meta: TraceMeta {
            program: prog.name().to_string(),
            preset: sem.preset_name.clone(),
            n,
            leader_index: init.leader_index,
            horizon: script.len() as u64,
            scheduler: "scripted".into(),
            adversary: "scripted".into(),
            base_seed: None,
            scheduler_seed: None,
            adversary_seed: None,
            params: serde_json::Value::Null,
        },
        init: init.clone(),
        events,
    })
}

/// Whether `predicate` holds in every one of the trace's last `window`
/// configurations — the finite-horizon stand-in for "holds from some point
/// on". A window of 0 is vacuously true; a window larger than the trace
/// checks every configuration including the initial one.
pub fn is_stably(
    trace: &Trace,
    predicate: impl Fn(&Configuration) -> bool,
    window: u64,
) -> bool {
    let total = trace.len() as u64 + 1;
    let skip = total.saturating_sub(window);
    trace
        .configs()
        .skip(skip as usize)
        .all(|cfg| predicate(&cfg))
}

/// The earliest configuration index from which `predicate` holds for the rest
/// of the trace, or `None` if it fails in the final configuration.
pub fn stabilization_step(
    trace: &Trace,
    predicate: impl Fn(&Configuration) -> bool,
) -> Option<u64> {
    let mut last_violation: Option<u64> = None;
    for (idx, cfg) in trace.configs().enumerate() {
        if !predicate(&cfg) {
            last_violation = Some(idx as u64);
        }
    }
    match last_violation {
        None => Some(0),
        Some(v) if v == trace.len() as u64 => None,
        Some(v) => Some(v + 1),
    }
}

/// Checks a recorded trace against the engine: every event's pre-states must
/// match the replayed configuration, and its post-states must be exactly what
/// the engine computes. This makes traces self-certifying given the program.
pub fn verify_replay(
    trace: &Trace,
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
) -> Result<()> {
    let n = trace.init.n();
    let mut agents = trace.init.agents.clone();
    for (i, ev) in trace.events.iter().enumerate() {
        if ev.starter >= n || ev.reactor >= n || ev.starter == ev.reactor {
            return Err(Error::Verification(format!(
                "event {i} has invalid pair ({}, {})",
                ev.starter, ev.reactor
            )));
        }
        if *ev.pre.0 != *agents[ev.starter] || *ev.pre.1 != *agents[ev.reactor] {
            return Err(Error::Verification(format!(
                "event {i} pre-states do not match the replayed configuration"
            )));
        }
        let (s_post, r_post) = step_states(sem, prog, &ev.pre.0, &ev.pre.1, ev.flavor)?;
        if s_post != *ev.post.0 || r_post != *ev.post.1 {
            return Err(Error::Verification(format!(
                "event {i} post-states do not match the engine ({} interaction of ({}, {}))",
                ev.flavor.label(),
                ev.starter,
                ev.reactor
            )));
        }
        agents[ev.starter] = ev.post.0.clone();
        agents[ev.reactor] = ev.post.1.clone();
    }
    Ok(())
}
