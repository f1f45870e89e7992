//! Adversarial constructions against target simulators: the
//! omission-recurrence decision procedure on 2-agent systems, the omission
//! insertion procedure that forces both agents of a 2-agent run through a
//! simulated transition while keeping every non-omissive step launched from a
//! recurrent configuration, and the two population-expansion constructions
//! that turn such runs into pairing-safety violations (the bounded-memory
//! mirror schedule and the 3-agent duplication schedule).
//!
//! Every construction returns an explicit [`AttackScript`]: a finite,
//! replayable interaction list with finitely many omissions, checkpointed so
//! the mirror-state law it relies on can be re-verified against the recorded
//! trace.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scheduling::{run, scripted_run, OmissionAdversary, Scheduler, ScriptStep, Trace};
use crate::semantics::{step_states, AgentProgram, Configuration, ModelSemantics, OmissionFlavor};
use crate::value::Value;

/// Default cap on the length `t` of the 2-agent sequence fed to
/// [`build_bounded_memory_attack`]; the constructed population has `2^t + 2`
/// agents, so this keeps it at 4096 + 2.
pub const DEFAULT_T_CAP: usize = 12;

/// The leader's role in an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionRole {
    Starter,
    Reactor,
}

/// An omission-recurrence question on a 2-agent system {leader, agent}: from
/// the configuration `(leader_state, agent_state)`, does some interaction
/// sequence whose first step is omissive on both sides — with the leader in
/// `leader_role` — eventually restore the leader's full local state?
pub struct RecurrenceQuery<'a> {
    pub program: &'a dyn AgentProgram,
    pub semantics: &'a ModelSemantics,
    pub leader_state: Value,
    pub agent_state: Value,
    pub leader_role: InteractionRole,
    /// Maximum sequence length considered.
    pub depth_bound: usize,
    /// Maximum number of distinct configurations explored.
    pub config_cap: usize,
}

/// Answer to a [`RecurrenceQuery`]. `Recurrent` carries a shortest witness
/// sequence over agents `{0 = leader, 1 = agent}`; `NotRecurrent` is exact
/// unless `bound_limited` is set, in which case the search ran out of depth
/// or configuration budget before settling the question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecurrenceVerdict {
    Recurrent(Vec<ScriptStep>),
    NotRecurrent { bound_limited: bool },
}

fn config_key(config: &(Value, Value)) -> String {
    format!("{}|{}", config.0, config.1)
}

/// Applies one 2-agent step to an ordered `(leader, agent)` pair.
fn step_pair(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    config: &(Value, Value),
    step: ScriptStep,
) -> Result<(Value, Value)> {
    let (s_pre, r_pre) = if step.starter == 0 {
        (&config.0, &config.1)
    } else {
        (&config.1, &config.0)
    };
    let (s_post, r_post) = step_states(sem, prog, s_pre, r_pre, step.flavor)?;
    Ok(if step.starter == 0 {
        (s_post, r_post)
    } else {
        (r_post, s_post)
    })
}

/// Decides omission recurrence by breadth-first search over 2-agent
/// configurations: one forced both-sides-omissive first edge with the leader
/// in the queried role, then arbitrary admissible edges, target = any
/// configuration whose leader component equals the starting leader state.
///
/// Returns a shortest witness when one exists within `depth_bound`. The
/// negative verdict is exact whenever the reachable configuration graph was
/// exhausted (a fixpoint, or a closed frontier at the depth bound) within
/// `config_cap` nodes; otherwise it is flagged `bound_limited`.
pub fn find_omission_recurrent(q: &RecurrenceQuery) -> Result<RecurrenceVerdict> {
    if q.depth_bound == 0 {
        return Err(Error::Config(
            "recurrence queries need a depth bound of at least 1".into(),
        ));
    }
    let first_step = match q.leader_role {
        InteractionRole::Starter => ScriptStep::new(0, 1, OmissionFlavor::BothSides),
        InteractionRole::Reactor => ScriptStep::new(1, 0, OmissionFlavor::BothSides),
    };
    let start = (q.leader_state.clone(), q.agent_state.clone());
    let first = step_pair(q.program, q.semantics, &start, first_step)?;
    if first.0 == q.leader_state {
        return Ok(RecurrenceVerdict::Recurrent(vec![first_step]));
    }

    // Parent pointers for witness reconstruction: reached key -> (parent
    // key, step taken).
    let mut parents: BTreeMap<String, (String, ScriptStep)> = BTreeMap::new();
    let first_key = config_key(&first);
    let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    seen.insert(first_key.clone());
    let mut layer = vec![first];

    let rebuild = |parents: &BTreeMap<String, (String, ScriptStep)>,
                   mut key: String,
                   last: ScriptStep| {
        let mut path = vec![last];
        while let Some((parent, step)) = parents.get(&key) {
            path.push(*step);
            key = parent.clone();
        }
        path.push(first_step);
        path.reverse();
        path
    };

    for _depth in 2..=q.depth_bound {
        let mut next = Vec::new();
        for config in &layer {
            for (s, r) in [(0usize, 1usize), (1, 0)] {
                for flavor in q.semantics.admissible_flavors() {
                    let step = ScriptStep::new(s, r, flavor);
                    let succ = step_pair(q.program, q.semantics, config, step)?;
                    if succ.0 == q.leader_state {
                        return Ok(RecurrenceVerdict::Recurrent(rebuild(
                            &parents,
                            config_key(config),
                            step,
                        )));
                    }
                    let key = config_key(&succ);
                    if seen.insert(key.clone()) {
                        if seen.len() > q.config_cap {
                            return Ok(RecurrenceVerdict::NotRecurrent {
                                bound_limited: true,
                            });
                        }
                        parents.insert(key, (config_key(config), step));
                        next.push(succ);
                    }
                }
            }
        }
        if next.is_empty() {
            // Fixpoint: every configuration reachable after the forced
            // omission has been visited and none restores the leader.
            return Ok(RecurrenceVerdict::NotRecurrent {
                bound_limited: false,
            });
        }
        layer = next;
    }

    // Depth exhausted; the negative answer is still exact if the frontier
    // expands to nothing new.
    let mut frontier_closed = true;
    'outer: for config in &layer {
        for (s, r) in [(0usize, 1usize), (1, 0)] {
            for flavor in q.semantics.admissible_flavors() {
                let succ = step_pair(q.program, q.semantics, config, ScriptStep::new(s, r, flavor))?;
                if !seen.contains(&config_key(&succ)) {
                    frontier_closed = false;
                    break 'outer;
                }
            }
        }
    }
    Ok(RecurrenceVerdict::NotRecurrent {
        bound_limited: !frontier_closed,
    })
}

/// One step of a 2-agent sequence produced by [`build_lemma_sequence`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaStep {
    pub step: ScriptStep,
    /// Whether this step is an inserted both-sides omission (as opposed to a
    /// step taken from the base sequence).
    pub inserted: bool,
    /// For non-inserted steps: the recurrence witness from the configuration
    /// immediately before this step, with the leader in this step's role.
    pub recurrence: Option<Vec<ScriptStep>>,
}

/// A 2-agent interaction sequence in which every non-omissive step launches
/// from an omission-recurrent configuration (witnessed), at most `k`
/// both-sides omissions were inserted, and by the end both agents have
/// changed simulated state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaSequence {
    pub steps: Vec<LemmaStep>,
    /// Number of inserted omissions; at most `k`.
    pub insertions: usize,
    /// The state-count budget the construction was run against.
    pub k: usize,
}

impl LemmaSequence {
    /// The raw interaction list, ready for scripted replay on agents {0, 1}.
    pub fn script(&self) -> Vec<ScriptStep> {
        self.steps.iter().map(|s| s.step).collect()
    }
}

/// Interleaves both-sides omissions into an omission-free 2-agent base
/// sequence so that (a) every retained base step launches from a
/// starter-/reactor-omission-recurrent configuration matching the leader's
/// role in it, (b) at most `k` omissions are inserted, and (c) the sequence
/// stops once both agents have completed a simulated state transition.
///
/// `c0` must be a 2-agent configuration with the leader at index 0, and
/// `base` an omission-free interaction list over agents {0, 1}. Each
/// recurrence question is decided by [`find_omission_recurrent`] with the
/// given `depth_bound` and `config_cap`; a bound-limited answer aborts the
/// construction rather than guessing.
pub fn build_lemma_sequence(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    c0: &Configuration,
    base: &[ScriptStep],
    k: usize,
    depth_bound: usize,
    config_cap: usize,
) -> Result<LemmaSequence> {
    if c0.n() != 2 {
        return Err(Error::Attack(format!(
            "the omission-insertion construction runs on 2 agents, got {}",
            c0.n()
        )));
    }
    if k == 0 {
        return Err(Error::Attack("the state-count budget k must be positive".into()));
    }
    if !prog.has_simulated_projection() {
        return Err(Error::Attack(format!(
            "target `{}` exposes no simulated projection; cannot detect simulated transitions",
            prog.name()
        )));
    }
    for (i, step) in base.iter().enumerate() {
        if step.flavor.is_omissive() {
            return Err(Error::Attack(format!(
                "base step {i} is omissive; the base sequence must be omission-free"
            )));
        }
        if step.starter > 1 || step.reactor > 1 {
            return Err(Error::Attack(format!(
                "base step {i} involves agent {}, outside the 2-agent system",
                step.starter.max(step.reactor)
            )));
        }
    }
    let project = |state: &Value| {
        prog.simulated_projection(state).ok_or_else(|| {
            Error::Attack(format!(
                "target `{}` failed to project state {state}",
                prog.name()
            ))
        })
    };

    let mut cur = (c0.state(0).clone(), c0.state(1).clone());
    let mut sims = (project(&cur.0)?, project(&cur.1)?);
    let mut transitioned = (false, false);
    let mut steps: Vec<LemmaStep> = Vec::new();
    let mut insertions = 0usize;
    let mut v = 0usize;

    while !(transitioned.0 && transitioned.1) {
        let Some(next) = base.get(v) else {
            return Err(Error::Attack(format!(
                "base sequence exhausted after {} steps before both agents completed \
                 a simulated transition",
                base.len()
            )));
        };
        let role = if next.starter == 0 {
            InteractionRole::Starter
        } else {
            InteractionRole::Reactor
        };
        let query = RecurrenceQuery {
            program: prog,
            semantics: sem,
            leader_state: cur.0.clone(),
            agent_state: cur.1.clone(),
            leader_role: role,
            depth_bound,
            config_cap,
        };
        let chosen = match find_omission_recurrent(&query)? {
            RecurrenceVerdict::Recurrent(witness) => {
                v += 1;
                LemmaStep {
                    step: *next,
                    inserted: false,
                    recurrence: Some(witness),
                }
            }
            RecurrenceVerdict::NotRecurrent { bound_limited: true } => {
                return Err(Error::Attack(format!(
                    "recurrence search was bound-limited before step {} (depth {}, cap {}); \
                     raise the bounds to settle the construction honestly",
                    steps.len(),
                    depth_bound,
                    config_cap
                )));
            }
            RecurrenceVerdict::NotRecurrent { bound_limited: false } => {
                if insertions == k {
                    return Err(Error::Attack(format!(
                        "construction needed more than k = {k} omission insertions; \
                         the target has more reachable leader states than declared"
                    )));
                }
                insertions += 1;
                let step = match role {
                    InteractionRole::Starter => {
                        ScriptStep::new(0, 1, OmissionFlavor::BothSides)
                    }
                    InteractionRole::Reactor => {
                        ScriptStep::new(1, 0, OmissionFlavor::BothSides)
                    }
                };
                LemmaStep {
                    step,
                    inserted: true,
                    recurrence: None,
                }
            }
        };
        cur = step_pair(prog, sem, &cur, chosen.step)?;
        let new_sims = (project(&cur.0)?, project(&cur.1)?);
        if new_sims.0 != sims.0 {
            transitioned.0 = true;
        }
        if new_sims.1 != sims.1 {
            transitioned.1 = true;
        }
        sims = new_sims;
        steps.push(chosen);
    }

    Ok(LemmaSequence {
        steps,
        insertions,
        k,
    })
}

/// A state-equality obligation on a replayed attack script: after
/// `after_step` interactions, all `mirror_agents` must hold identical full
/// local states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub after_step: usize,
    pub mirror_agents: Vec<usize>,
}

/// A finite, replayable adversarial interaction schedule produced by one of
/// the attack constructions, together with the mirror checkpoints it
/// guarantees and human-readable provenance notes (construction name and
/// parameters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackScript {
    /// Construction label: `duplication` or `bounded-memory`.
    pub name: String,
    /// Name of the target program the script was built against.
    pub program: String,
    /// Preset name of the interaction model, when built from one.
    pub preset: Option<String>,
    pub init: Configuration,
    pub steps: Vec<ScriptStep>,
    pub checkpoints: Vec<Checkpoint>,
    pub notes: Vec<String>,
}

impl AttackScript {
    pub fn population(&self) -> usize {
        self.init.n()
    }

    pub fn omission_count(&self) -> u64 {
        self.steps.iter().filter(|s| s.flavor.is_omissive()).count() as u64
    }

    /// Replays the script against a target, producing the full trace.
    pub fn replay(&self, prog: &dyn AgentProgram, sem: &ModelSemantics) -> Result<Trace> {
        scripted_run(prog, sem, &self.init, &self.steps)
    }

    /// Replays the script and verifies every checkpoint's mirror-state
    /// obligation, returning the trace on success.
    pub fn verify_checkpoints(
        &self,
        prog: &dyn AgentProgram,
        sem: &ModelSemantics,
    ) -> Result<Trace> {
        let trace = self.replay(prog, sem)?;
        let mut pending = self.checkpoints.iter().peekable();
        for (idx, config) in trace.configs().enumerate() {
            while let Some(cp) = pending.peek() {
                if cp.after_step != idx {
                    break;
                }
                if let Some((&first, rest)) = cp.mirror_agents.split_first() {
                    for &agent in rest {
                        if config.state(agent) != config.state(first) {
                            return Err(Error::Attack(format!(
                                "mirror checkpoint after step {idx} failed: agent {agent} is in \
                                 {} but agent {first} is in {}",
                                config.state(agent),
                                config.state(first)
                            )));
                        }
                    }
                }
                pending.next();
            }
        }
        if let Some(cp) = pending.next() {
            return Err(Error::Attack(format!(
                "checkpoint after step {} lies beyond the script's {} steps",
                cp.after_step,
                self.steps.len()
            )));
        }
        Ok(trace)
    }
}

/// Runs the target under a seeded fair scheduler with no omissions and
/// returns the interaction list up to (excluding nothing before) the first
/// configuration satisfying `goal`, as scripted steps. Errors if the goal is
/// not reached within `horizon` steps.
pub fn fair_base_sequence(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    init: &Configuration,
    goal: &dyn Fn(&Configuration) -> bool,
    horizon: u64,
    seed: u64,
) -> Result<Vec<ScriptStep>> {
    let trace = run(
        prog,
        sem,
        init,
        &Scheduler::UniformRandom { seed: None },
        &OmissionAdversary::NoOmissions,
        horizon,
        seed,
    )?;
    for (idx, config) in trace.configs().enumerate() {
        if goal(&config) {
            return Ok(trace.events[..idx]
                .iter()
                .map(|ev| ScriptStep::new(ev.starter, ev.reactor, ev.flavor))
                .collect());
        }
    }
    Err(Error::Attack(format!(
        "goal configuration not reached within {horizon} fair steps (seed {seed})"
    )))
}

/// Expands a 2-agent sequence from [`build_lemma_sequence`] into a mirror
/// schedule on `2^t + 2` agents (`t` = sequence length) that ends with agent
/// `a` and agent `b_1` in identical full local states — so any simulated
/// transition `a` completed has been duplicated by an agent the 2-agent run
/// never touched.
///
/// Agent layout: leader = 0, `a` = 1, `b_x` = 1 + x for `x` in `1..=m`. Before
/// each step of the input sequence, the current mirror cohort (the first
/// `w = m / 2^j` of the `b`s) is processed so that the half that stays
/// mirrors `a`'s next move, while the other half is discarded: each departing
/// agent either absorbs the first omission of the step's recurrence witness
/// and replays its remainder against the leader (resetting the leader's
/// state), or simply stops interacting. Both-sides-omissive filler
/// interactions are aimed at an expendable agent whose state no longer
/// matters; only when none exists yet — a non-omissive first step whose
/// recurrence witness is longer than one interaction — is one extra agent
/// added to the population for that purpose (noted in the provenance).
pub fn build_bounded_memory_attack(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    c0: &Configuration,
    lemma: &LemmaSequence,
    t_cap: usize,
) -> Result<AttackScript> {
    let t = lemma.steps.len();
    if t == 0 {
        return Err(Error::Attack("the input sequence is empty".into()));
    }
    if t > t_cap {
        return Err(Error::Attack(format!(
            "sequence length t = {t} exceeds the cap {t_cap} (population would be 2^{t} + 2)"
        )));
    }
    if c0.n() != 2 {
        return Err(Error::Attack(format!(
            "the mirror construction expands a 2-agent configuration, got {} agents",
            c0.n()
        )));
    }
    for (j, ls) in lemma.steps.iter().enumerate() {
        if !ls.inserted && ls.recurrence.is_none() {
            return Err(Error::Attack(format!(
                "step {j} is non-omissive but carries no recurrence witness"
            )));
        }
    }

    let m = 1usize << t;
    // An extra expendable agent is required only when the very first step
    // needs a witness replay: at that point no mirror agent has been
    // discarded yet.
    let needs_extra = {
        let first = &lemma.steps[0];
        !first.inserted && first.recurrence.as_ref().is_some_and(|w| w.len() >= 2)
    };
    let n = m + 2 + usize::from(needs_extra);

    let q_l = c0.state(0).clone();
    let q_a = c0.state(1).clone();
    let mut agents = vec![q_l];
    agents.extend(std::iter::repeat_with(|| q_a.clone()).take(n - 1));
    let init = Configuration::new(agents, Some(0));

    let b = |x: usize| 1 + x; // b_x's agent index
    let mut expendables: Vec<usize> = if needs_extra { vec![m + 2] } else { Vec::new() };
    let mut steps: Vec<ScriptStep> = Vec::new();
    let mut checkpoints = vec![Checkpoint {
        after_step: 0,
        mirror_agents: std::iter::once(1).chain((1..=m).map(b)).collect(),
    }];
    let mut witness_lengths: Vec<usize> = Vec::new();

    for (j, ls) in lemma.steps.iter().enumerate() {
        let w = m >> j;
        let leader_starts = ls.step.starter == 0;
        if ls.inserted {
            // The agents staying in the mirror repeat `a`'s omissive move
            // against an expendable partner; the departing half just stops
            // interacting.
            let d = expendables.first().copied().unwrap_or_else(|| b(w));
            for x in 1..=w / 2 {
                steps.push(if leader_starts {
                    ScriptStep::new(d, b(x), OmissionFlavor::BothSides)
                } else {
                    ScriptStep::new(b(x), d, OmissionFlavor::BothSides)
                });
            }
            steps.push(ls.step);
            witness_lengths.push(0);
        } else {
            let witness = ls.recurrence.as_ref().unwrap();
            let z = witness.len();
            witness_lengths.push(z);
            for x in 1..=w / 2 {
                // The mirror agent sees the leader exactly once, in the same
                // pre-step state `a` is about to see, while the leader's own
                // side of the encounter is omitted.
                steps.push(if leader_starts {
                    ScriptStep::new(0, b(x), OmissionFlavor::StarterSide)
                } else {
                    ScriptStep::new(b(x), 0, OmissionFlavor::ReactorSide)
                });
                if z >= 2 {
                    // A departing agent absorbs the witness's first omission
                    // (paired with an expendable partner) and then replays
                    // the rest of the witness, walking the leader back to
                    // its pre-step state.
                    let sb = b(x + w / 2);
                    let Some(&d) = expendables.first() else {
                        return Err(Error::Attack(format!(
                            "no expendable partner available at step {j}; this cannot happen \
                             with the population sizing above"
                        )));
                    };
                    steps.push(if leader_starts {
                        ScriptStep::new(d, sb, OmissionFlavor::BothSides)
                    } else {
                        ScriptStep::new(sb, d, OmissionFlavor::BothSides)
                    });
                    for ws in &witness[1..] {
                        let remap = |agent: usize| if agent == 0 { 0 } else { sb };
                        steps.push(ScriptStep::new(
                            remap(ws.starter),
                            remap(ws.reactor),
                            ws.flavor,
                        ));
                    }
                }
            }
            steps.push(ls.step);
        }
        // The discarded half of the cohort is expendable from here on.
        expendables.extend((w / 2 + 1..=w).map(b));
        checkpoints.push(Checkpoint {
            after_step: steps.len(),
            mirror_agents: std::iter::once(1).chain((1..=w / 2).map(b)).collect(),
        });
    }

    let script = AttackScript {
        name: "bounded-memory".into(),
        program: prog.name().to_string(),
        preset: sem.preset_name.clone(),
        init,
        steps,
        checkpoints,
        notes: vec![
            format!("bounded-memory mirror construction: t = {t}, m = 2^{t} = {m}, population {n}"),
            format!(
                "input sequence: {} inserted omissions against a state budget of k = {}",
                lemma.insertions, lemma.k
            ),
            format!("recurrence witness lengths per step: {witness_lengths:?}"),
            if needs_extra {
                "one extra expendable agent added: the first step's witness replay needs a \
                 partner before any mirror agent has been discarded"
                    .into()
            } else {
                "no extra agent needed: expendable partners come from discarded mirror agents"
                    .into()
            },
        ],
    };
    script.verify_checkpoints(prog, sem)?;
    Ok(script)
}

/// Expands an omission-free 2-agent pairing run into a 3-agent schedule in
/// which an undetected-omission model lets a third agent `b` shadow `a`
/// perfectly: before every `(leader, a)` step the script inserts
/// `(leader, b)` omissive on the leader's side (and symmetrically for
/// `(a, leader)` steps), so `a` and `b` see the leader in identical states
/// and end in identical full local states — duplicating `a`'s paired
/// outcome.
///
/// Requires a two-way model admitting omissions that neither side detects,
/// and a base run from `(leader = p, a = c)` that reaches simulated states
/// `(bot, cs)`; the base is truncated at the first such prefix.
pub fn build_duplication_attack(
    prog: &dyn AgentProgram,
    sem: &ModelSemantics,
    c0: &Configuration,
    base: &[ScriptStep],
) -> Result<AttackScript> {
    if sem.arity != crate::semantics::Arity::TwoWay
        || !sem.admits_omissions
        || sem.starter_detects_omission
        || sem.reactor_detects_omission
    {
        return Err(Error::Attack(
            "the duplication construction needs a two-way model whose omissions \
             neither side can detect"
                .into(),
        ));
    }
    if c0.n() != 2 {
        return Err(Error::Attack(format!(
            "the duplication construction expands a 2-agent configuration, got {} agents",
            c0.n()
        )));
    }
    if !prog.has_simulated_projection() {
        return Err(Error::Attack(format!(
            "target `{}` exposes no simulated projection; cannot locate the paired state",
            prog.name()
        )));
    }
    let sim_is = |state: &Value, expected: &str| -> Result<bool> {
        let sim = prog.simulated_projection(state).ok_or_else(|| {
            Error::Attack(format!(
                "target `{}` failed to project state {state}",
                prog.name()
            ))
        })?;
        Ok(sim.as_sym() == Some(expected))
    };

    // Truncate the base at the first prefix whose simulated states are
    // (bot, cs).
    let mut cur = (c0.state(0).clone(), c0.state(1).clone());
    let mut cut = None;
    if sim_is(&cur.0, "bot")? && sim_is(&cur.1, "cs")? {
        cut = Some(0);
    }
    for (idx, step) in base.iter().enumerate() {
        if cut.is_some() {
            break;
        }
        if step.flavor.is_omissive() {
            return Err(Error::Attack(format!(
                "base step {idx} is omissive; the base sequence must be omission-free"
            )));
        }
        if step.starter > 1 || step.reactor > 1 {
            return Err(Error::Attack(format!(
                "base step {idx} involves agent {}, outside the 2-agent system",
                step.starter.max(step.reactor)
            )));
        }
        cur = step_pair(prog, sem, &cur, *step)?;
        if sim_is(&cur.0, "bot")? && sim_is(&cur.1, "cs")? {
            cut = Some(idx + 1);
        }
    }
    let Some(cut) = cut else {
        return Err(Error::Attack(format!(
            "base sequence never reaches simulated states (bot, cs) within {} steps",
            base.len()
        )));
    };
    if cut == 0 {
        return Err(Error::Attack(
            "the initial configuration is already paired; nothing to duplicate".into(),
        ));
    }

    // Agents: leader = 0, a = 1, b = 2; b starts as a's twin.
    let init = Configuration::new(
        vec![c0.state(0).clone(), c0.state(1).clone(), c0.state(1).clone()],
        Some(0),
    );
    let mut steps = Vec::with_capacity(2 * cut);
    let mut checkpoints = vec![Checkpoint {
        after_step: 0,
        mirror_agents: vec![1, 2],
    }];
    for step in &base[..cut] {
        if step.starter == 0 {
            steps.push(ScriptStep::new(0, 2, OmissionFlavor::StarterSide));
        } else {
            steps.push(ScriptStep::new(2, 0, OmissionFlavor::ReactorSide));
        }
        steps.push(*step);
        checkpoints.push(Checkpoint {
            after_step: steps.len(),
            mirror_agents: vec![1, 2],
        });
    }

    let script = AttackScript {
        name: "duplication".into(),
        program: prog.name().to_string(),
        preset: sem.preset_name.clone(),
        init,
        steps,
        checkpoints,
        notes: vec![
            format!(
                "duplication construction: base truncated to {cut} steps, script length {}, \
                 {cut} omissions all on the leader's side",
                2 * cut
            ),
            "agent 2 shadows agent 1: both react to identical leader states throughout".into(),
        ],
    };
    script.verify_checkpoints(prog, sem)?;
    Ok(script)
}
