//! Trace verdicts: simulated-event extraction, the two-way simulation
//! matching check, the pairing and naming problem checks, and state-footprint
//! measurement.
//!
//! All checks are pure functions over recorded traces. The matching check is
//! a bounded exact search; its verdict carries certificates (the matching and
//! a linearization) that can be validated independently, and an explicit flag
//! when the node budget ran out before the search space did.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::protocols::PairingInstance;
use crate::scheduling::Trace;
use crate::semantics::{AgentProgram, ProtocolTable};
use crate::value::Value;

/// One observed change of an agent's simulated protocol state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedEvent {
    pub agent: usize,
    /// Step at which the change happened (the step's starter-side change is
    /// emitted before its reactor-side change).
    pub time: u64,
    pub from: Value,
    pub to: Value,
}

impl std::fmt::Display for SimulatedEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "agent {} at step {}: {} -> {}",
            self.agent, self.time, self.from, self.to
        )
    }
}

/// Projects every state change in `trace` onto the simulated protocol and
/// returns the changes in time order; agents whose projection stays constant
/// contribute nothing.
pub fn extract_simulated_events(
    trace: &Trace,
    prog: &dyn AgentProgram,
) -> Result<Vec<SimulatedEvent>> {
    if !prog.has_simulated_projection() {
        return Err(Error::Verification(format!(
            "program `{}` has no simulated projection to extract events from",
            prog.name()
        )));
    }
    let project = |state: &Value| {
        prog.simulated_projection(state).ok_or_else(|| {
            Error::Verification(format!(
                "program `{}` failed to project state {state}",
                prog.name()
            ))
        })
    };
    let mut events = Vec::new();
    for ev in &trace.events {
        for (agent, pre, post) in [
            (ev.starter, ev.pre.0.as_ref(), ev.post.0.as_ref()),
            (ev.reactor, ev.pre.1.as_ref(), ev.post.1.as_ref()),
        ] {
            let from = project(pre)?;
            let to = project(post)?;
            if from != to {
                events.push(SimulatedEvent {
                    agent,
                    time: ev.time,
                    from,
                    to,
                });
            }
        }
    }
    Ok(events)
}

/// One matched simulated interaction: indices of the starter-side and
/// reactor-side events, plus the protocol rule they instantiate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedPair {
    pub starter: usize,
    pub reactor: usize,
    pub rule: ((String, String), (String, String)),
}

/// Outcome of the simulation matching check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingVerdict {
    pub success: bool,
    /// On success, the perfect matching: every event index appears in exactly
    /// one pair.
    pub matching: Vec<MatchedPair>,
    /// On success, pair indices in an order that respects every agent's own
    /// event order — the temporal-consistency certificate.
    pub linearization: Vec<usize>,
    /// On failure, the first unmatchable event or an inconsistency witness.
    pub counterexample: Option<String>,
    pub search_budget_exhausted: bool,
    pub nodes_explored: u64,
}

impl MatchingVerdict {
    fn failure(counterexample: String, nodes: u64, exhausted: bool) -> MatchingVerdict {
        MatchingVerdict {
            success: false,
            matching: Vec::new(),
            linearization: Vec::new(),
            counterexample: Some(counterexample),
            search_budget_exhausted: exhausted,
            nodes_explored: nodes,
        }
    }
}

struct MatchSearch<'a> {
    events: &'a [SimulatedEvent],
    table: &'a ProtocolTable,
    /// Event indices in chronological order (time, then extraction order).
    order: Vec<usize>,
    /// Chronological rank of each event, for stable candidate enumeration.
    rank: Vec<usize>,
    /// Per-agent event indices in chronological order.
    per_agent: BTreeMap<usize, Vec<usize>>,
    matched: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    /// Chronologically first event seen with no rule-compatible partner.
    first_stuck: Option<usize>,
    /// Pairs left unplaceable by the last failed linearization attempt.
    last_cycle: Option<Vec<(usize, usize)>>,
    found: Option<(Vec<MatchedPair>, Vec<usize>)>,
}

impl<'a> MatchSearch<'a> {
    fn new(events: &'a [SimulatedEvent], table: &'a ProtocolTable, budget: u64) -> MatchSearch<'a> {
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.sort_by_key(|&i| (events[i].time, i));
        let mut rank = vec![0usize; events.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        let mut per_agent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &order {
            per_agent.entry(events[i].agent).or_default().push(i);
        }
        MatchSearch {
            events,
            table,
            order,
            rank,
            per_agent,
            matched: vec![false; events.len()],
            pairs: Vec::new(),
            nodes: 0,
            budget,
            exhausted: false,
            first_stuck: None,
            last_cycle: None,
            found: None,
        }
    }

    /// The rule instantiated by `(events[s], events[r])` with `s` on the
    /// starter side, if any.
    fn rule_of(&self, s: usize, r: usize) -> Option<((String, String), (String, String))> {
        if self.events[s].agent == self.events[r].agent {
            return None;
        }
        let fs = self.events[s].from.as_sym()?;
        let fr = self.events[r].from.as_sym()?;
        let ts = self.events[s].to.as_sym()?;
        let tr = self.events[r].to.as_sym()?;
        let rule = self.table.rule(fs, fr)?;
        (rule.0 == ts && rule.1 == tr)
            .then(|| ((fs.to_string(), fr.to_string()), rule.clone()))
    }

    /// Backtracking over pairings of the chronologically earliest unmatched
    /// event, candidates in chronological order, both orientations each.
    fn go(&mut self) -> bool {
        let Some(&e) = self.order.iter().find(|&&i| !self.matched[i]) else {
            return self.try_linearize();
        };
        let candidates: Vec<usize> = self
            .order
            .iter()
            .copied()
            .filter(|&f| f != e && !self.matched[f])
            .collect();
        let mut had_candidate = false;
        for f in candidates {
            for (s, r) in [(e, f), (f, e)] {
                let Some(rule) = self.rule_of(s, r) else {
                    continue;
                };
                had_candidate = true;
                self.nodes += 1;
                if self.nodes > self.budget {
                    self.exhausted = true;
                    return false;
                }
                self.matched[e] = true;
                self.matched[f] = true;
                self.pairs.push((s, r));
                let my_index = self.pairs.len() - 1;
                let done = self.go();
                if done {
                    if let Some((matching, _)) = self.found.as_mut() {
                        // Record the rule on the way out so only the
                        // successful branch pays for it.
                        matching[my_index].rule = rule;
                    }
                    return true;
                }
                if self.exhausted {
                    return false;
                }
                self.pairs.pop();
                self.matched[e] = false;
                self.matched[f] = false;
            }
        }
        if !had_candidate {
            let better = match self.first_stuck {
                None => true,
                Some(cur) => self.rank[e] < self.rank[cur],
            };
            if better {
                self.first_stuck = Some(e);
            }
        }
        false
    }

    /// Given a complete matching, looks for a pair order consistent with
    /// every agent's own event order: edges between the pairs of an agent's
    /// consecutive events, then a deterministic topological sort (earliest
    /// involved event first).
    fn try_linearize(&mut self) -> bool {
        let np = self.pairs.len();
        let mut pair_of = vec![usize::MAX; self.events.len()];
        for (pi, &(s, r)) in self.pairs.iter().enumerate() {
            pair_of[s] = pi;
            pair_of[r] = pi;
        }
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for own in self.per_agent.values() {
            for w in own.windows(2) {
                let (pi, pj) = (pair_of[w[0]], pair_of[w[1]]);
                if pi != pj {
                    edges.insert((pi, pj));
                }
            }
        }
        let mut indegree = vec![0usize; np];
        for &(_, v) in &edges {
            indegree[v] += 1;
        }
        let first_rank = |pi: usize| {
            let (s, r) = self.pairs[pi];
            self.rank[s].min(self.rank[r])
        };
        let mut available: BTreeSet<(usize, usize)> = (0..np)
            .filter(|&pi| indegree[pi] == 0)
            .map(|pi| (first_rank(pi), pi))
            .collect();
        let mut linearization = Vec::with_capacity(np);
        while let Some(&(key, pi)) = available.iter().next() {
            available.remove(&(key, pi));
            linearization.push(pi);
            for &(u, v) in &edges {
                if u == pi {
                    indegree[v] -= 1;
                    if indegree[v] == 0 {
                        available.insert((first_rank(v), v));
                    }
                }
            }
        }
        if linearization.len() < np {
            let placed: BTreeSet<usize> = linearization.iter().copied().collect();
            self.last_cycle = Some(
                (0..np)
                    .filter(|pi| !placed.contains(pi))
                    .map(|pi| self.pairs[pi])
                    .collect(),
            );
            return false;
        }
        let matching = self
            .pairs
            .iter()
            .map(|&(s, r)| MatchedPair {
                starter: s,
                reactor: r,
                // Placeholder; filled in on the unwind by `go`.
                rule: ((String::new(), String::new()), (String::new(), String::new())),
            })
            .collect();
        self.found = Some((matching, linearization));
        true
    }
}

/// Decides whether `events` can be explained as a sequence of two-way
/// interactions of `table`: a perfect matching of events into
/// rule-instantiating (starter, reactor) pairs together with a pair order
/// that respects each agent's own event order.
///
/// The search is exact up to `budget` explored nodes (pairing decisions);
/// beyond that the verdict reports budget exhaustion instead of an answer.
/// Events are assumed to carry distinct times per agent, which recorded
/// traces guarantee (one interaction per step).
pub fn match_simulated_events(
    events: &[SimulatedEvent],
    table: &ProtocolTable,
    budget: u64,
) -> MatchingVerdict {
    if events.len() % 2 != 0 {
        let lone = events.last().unwrap();
        return MatchingVerdict::failure(
            format!(
                "odd event count {}: a perfect matching cannot exist (last event: {lone})",
                events.len()
            ),
            0,
            false,
        );
    }
    let mut search = MatchSearch::new(events, table, budget);
    if search.go() {
        let (matching, linearization) = search.found.take().unwrap();
        // `go` filled in every pair's rule on the unwind from the successful
        // leaf.
        debug_assert!(matching.iter().all(|p| !p.rule.0 .0.is_empty()));
        return MatchingVerdict {
            success: true,
            matching,
            linearization,
            counterexample: None,
            search_budget_exhausted: false,
            nodes_explored: search.nodes,
        };
    }
    if search.exhausted {
        return MatchingVerdict::failure(
            format!("search budget of {budget} nodes exhausted before a verdict"),
            search.nodes,
            true,
        );
    }
    let witness = if let Some(e) = search.first_stuck {
        format!(
            "no rule-compatible partner for event {} ({})",
            e, events[e]
        )
    } else if let Some(cycle) = search.last_cycle {
        format!(
            "every rule-perfect matching is temporally inconsistent; last irreducible pair set: {cycle:?}"
        )
    } else {
        "no perfect matching instantiates the protocol rules".to_string()
    };
    MatchingVerdict::failure(witness, search.nodes, false)
}

/// Extracts simulated events from `trace` and runs the matching decision.
pub fn check_simulation(
    trace: &Trace,
    prog: &dyn AgentProgram,
    table: &ProtocolTable,
    budget: u64,
) -> Result<MatchingVerdict> {
    let events = extract_simulated_events(trace, prog)?;
    Ok(match_simulated_events(&events, table, budget))
}

/// Verdict of the pairing problem checks on one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingReport {
    /// No agent ever left a terminal pairing state (`cs` or `bot`).
    pub irrevocable: bool,
    /// Configuration index of the first terminal-state escape.
    pub first_irrevocability_violation: Option<u64>,
    /// `count(cs)` never exceeded the number of providers.
    pub safe: bool,
    pub first_safety_violation: Option<u64>,
    /// `count(cs)` equals `min(n_c, n_p)` throughout the trailing window.
    pub live: bool,
    /// Earliest configuration index from which `count(cs)` stays correct.
    pub stabilization_step: Option<u64>,
    pub final_cs_count: usize,
    pub expected_pairs: usize,
}

/// Checks irrevocability, safety, and liveness of the pairing protocol over
/// `trace`, whose program must project local states onto pairing states.
/// Liveness is judged over the trace's last `window` configurations.
pub fn check_pairing(
    trace: &Trace,
    prog: &dyn AgentProgram,
    inst: &PairingInstance,
    window: u64,
) -> Result<PairingReport> {
    if !prog.has_simulated_projection() {
        return Err(Error::Verification(format!(
            "program `{}` has no simulated projection; cannot read pairing states",
            prog.name()
        )));
    }
    let project = |state: &Value| {
        let sim = prog.simulated_projection(state).ok_or_else(|| {
            Error::Verification(format!(
                "program `{}` failed to project state {state}",
                prog.name()
            ))
        })?;
        sim.as_sym().map(str::to_string).ok_or_else(|| {
            Error::Verification(format!("projection {sim} is not a pairing state"))
        })
    };
    let is_terminal = |s: &str| s == "cs" || s == "bot";

    let mut sims: Vec<String> = Vec::with_capacity(trace.init.n());
    for st in &trace.init.agents {
        sims.push(project(st.as_ref())?);
    }
    let expected = inst.expected_pairs();
    let mut cs_count = sims.iter().filter(|s| *s == "cs").count();
    let mut cs_history: Vec<usize> = Vec::with_capacity(trace.len() + 1);
    cs_history.push(cs_count);

    let mut first_irrevocability_violation = None;
    let mut first_safety_violation = if cs_count > inst.n_p { Some(0) } else { None };

    for (idx, ev) in trace.events.iter().enumerate() {
        let config_idx = idx as u64 + 1;
        for (agent, post) in [
            (ev.starter, ev.post.0.as_ref()),
            (ev.reactor, ev.post.1.as_ref()),
        ] {
            let new_sim = project(post)?;
            let old_sim = &sims[agent];
            if *old_sim != new_sim {
                if is_terminal(old_sim) && first_irrevocability_violation.is_none() {
                    first_irrevocability_violation = Some(config_idx);
                }
                if *old_sim == "cs" {
                    cs_count -= 1;
                }
                if new_sim == "cs" {
                    cs_count += 1;
                }
                sims[agent] = new_sim;
            }
        }
        if cs_count > inst.n_p && first_safety_violation.is_none() {
            first_safety_violation = Some(config_idx);
        }
        cs_history.push(cs_count);
    }

    let total = cs_history.len() as u64;
    let live = cs_history
        .iter()
        .skip(total.saturating_sub(window) as usize)
        .all(|&c| c == expected);
    let stabilization_step = {
        let last_violation = cs_history
            .iter()
            .enumerate()
            .rev()
            .find(|&(_, &c)| c != expected)
            .map(|(i, _)| i as u64);
        match last_violation {
            None => Some(0),
            Some(v) if v == total - 1 => None,
            Some(v) => Some(v + 1),
        }
    };

    Ok(PairingReport {
        irrevocable: first_irrevocability_violation.is_none(),
        first_irrevocability_violation,
        safe: first_safety_violation.is_none(),
        first_safety_violation,
        live,
        stabilization_step,
        final_cs_count: cs_count,
        expected_pairs: expected,
    })
}

/// Verdict of the naming problem checks on one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingReport {
    /// No two agents ever held equal completed IDs.
    pub unique: bool,
    pub first_duplicate: Option<u64>,
    /// Every agent was named (or the leader) throughout the trailing window.
    pub all_named: bool,
    /// Earliest configuration index from which everyone stays named.
    pub stabilization_step: Option<u64>,
    /// Largest integer occurring in any completed ID.
    pub max_id: Option<BigInt>,
    /// Largest leader counter value observed anywhere in the trace.
    pub counter_bound: Option<BigInt>,
}

/// Checks ID distinctness and eventual naming over `trace`, whose program
/// must expose a naming view. "All named" is judged over the trace's last
/// `window` configurations.
pub fn check_naming(trace: &Trace, prog: &dyn AgentProgram, window: u64) -> Result<NamingReport> {
    let view_of = |state: &Value| {
        prog.naming_view(state).ok_or_else(|| {
            Error::Verification(format!(
                "program `{}` exposes no naming view for state {state}",
                prog.name()
            ))
        })
    };

    let n = trace.init.n();
    let mut ids: Vec<Option<Value>> = Vec::with_capacity(n);
    let mut named_or_leader: Vec<bool> = Vec::with_capacity(n);
    let mut id_counts: BTreeMap<Value, usize> = BTreeMap::new();
    let mut duplicates = 0usize;
    let mut max_id: Option<BigInt> = None;
    let mut counter_bound: Option<BigInt> = None;

    let bump_max = |slot: &mut Option<BigInt>, candidate: &BigInt| {
        if slot.as_ref().is_none_or(|cur| candidate > cur) {
            *slot = Some(candidate.clone());
        }
    };
    fn id_integers(id: &Value) -> Vec<BigInt> {
        match id {
            Value::Int(n) => vec![n.clone()],
            Value::List(items) => items.iter().flat_map(id_integers).collect(),
            _ => Vec::new(),
        }
    }

    let absorb = |agent: usize,
                      state: &Value,
                      ids: &mut Vec<Option<Value>>,
                      named: &mut Vec<bool>,
                      id_counts: &mut BTreeMap<Value, usize>,
                      duplicates: &mut usize,
                      max_id: &mut Option<BigInt>,
                      counter_bound: &mut Option<BigInt>|
     -> Result<()> {
        let view = view_of(state)?;
        for c in &view.counters {
            bump_max(counter_bound, c);
        }
        let new_id = view.id;
        if ids[agent] != new_id {
            if let Some(old) = ids[agent].take() {
                let cnt = id_counts.get_mut(&old).unwrap();
                if *cnt > 1 {
                    *duplicates -= 1;
                }
                *cnt -= 1;
                if *cnt == 0 {
                    id_counts.remove(&old);
                }
            }
            if let Some(id) = new_id.clone() {
                for part in id_integers(&id) {
                    bump_max(max_id, &part);
                }
                let cnt = id_counts.entry(id.clone()).or_insert(0);
                *cnt += 1;
                if *cnt > 1 {
                    *duplicates += 1;
                }
            }
            ids[agent] = new_id;
        }
        named[agent] = view.is_leader || ids[agent].is_some();
        Ok(())
    };

    for (agent, st) in trace.init.agents.iter().enumerate() {
        ids.push(None);
        named_or_leader.push(false);
        absorb(
            agent,
            st.as_ref(),
            &mut ids,
            &mut named_or_leader,
            &mut id_counts,
            &mut duplicates,
            &mut max_id,
            &mut counter_bound,
        )?;
    }

    let mut first_duplicate = if duplicates > 0 { Some(0u64) } else { None };
    let mut all_named_history: Vec<bool> = Vec::with_capacity(trace.len() + 1);
    all_named_history.push(named_or_leader.iter().all(|&b| b));

    for (idx, ev) in trace.events.iter().enumerate() {
        for (agent, post) in [
            (ev.starter, ev.post.0.as_ref()),
            (ev.reactor, ev.post.1.as_ref()),
        ] {
            absorb(
                agent,
                post,
                &mut ids,
                &mut named_or_leader,
                &mut id_counts,
                &mut duplicates,
                &mut max_id,
                &mut counter_bound,
            )?;
        }
        if duplicates > 0 && first_duplicate.is_none() {
            first_duplicate = Some(idx as u64 + 1);
        }
        all_named_history.push(named_or_leader.iter().all(|&b| b));
    }

    let total = all_named_history.len() as u64;
    let all_named = all_named_history
        .iter()
        .skip(total.saturating_sub(window) as usize)
        .all(|&b| b);
    let stabilization_step = {
        let last_violation = all_named_history
            .iter()
            .enumerate()
            .rev()
            .find(|&(_, &b)| !b)
            .map(|(i, _)| i as u64);
        match last_violation {
            None => Some(0),
            Some(v) if v == total - 1 => None,
            Some(v) => Some(v + 1),
        }
    };

    Ok(NamingReport {
        unique: first_duplicate.is_none(),
        first_duplicate,
        all_named,
        stabilization_step,
        max_id,
        counter_bound,
    })
}

/// How much distinct local state a trace actually exercised, split by the
/// designated leader agent vs. everyone else. `bits` is the ceiling of log2
/// of the respective count (0 for one state).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateFootprint {
    pub leader_states: usize,
    pub leader_bits: u32,
    pub follower_states: usize,
    pub follower_bits: u32,
    pub total_states: usize,
    pub total_bits: u32,
}

fn bits_for(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - (count - 1).leading_zeros()
    }
}

/// Counts the distinct local states observed anywhere in the trace.
pub fn measure_state_footprint(trace: &Trace) -> StateFootprint {
    let leader = trace.init.leader_index;
    let mut leader_set: BTreeSet<Value> = BTreeSet::new();
    let mut follower_set: BTreeSet<Value> = BTreeSet::new();
    let mut add = |agent: usize, state: &Value| {
        if Some(agent) == leader {
            leader_set.insert(state.clone());
        } else {
            follower_set.insert(state.clone());
        }
    };
    for (agent, st) in trace.init.agents.iter().enumerate() {
        add(agent, st.as_ref());
    }
    for ev in &trace.events {
        add(ev.starter, ev.post.0.as_ref());
        add(ev.reactor, ev.post.1.as_ref());
    }
    let total: BTreeSet<&Value> = leader_set.iter().chain(follower_set.iter()).collect();
    StateFootprint {
        leader_states: leader_set.len(),
        leader_bits: bits_for(leader_set.len()),
        follower_states: follower_set.len(),
        follower_bits: bits_for(follower_set.len()),
        total_states: total.len(),
        total_bits: bits_for(total.len()),
    }
}
