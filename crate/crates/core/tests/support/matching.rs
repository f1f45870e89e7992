//! Shared brute-force oracle for the simulation-matching verdict, plus the
//! fixture tables and event generators it is exercised on. Included via
//! `#[path]` by the test binaries that need it. The oracle enumerates every
//! perfect matching of events into rule-instantiating (starter, reactor)
//! pairs, and for each matching every linear extension of the pair precedence
//! order, by plain backtracking; it is the ground truth the pruned production
//! matcher is trusted against.

// Each including binary uses a subset of these items.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use omisim::verification::{match_simulated_events, MatchingVerdict, SimulatedEvent};
use omisim::{ProtocolTable, Value};

pub const BUDGET: u64 = 1_000_000;

pub fn ev(agent: usize, time: u64, from: &str, to: &str) -> SimulatedEvent {
    SimulatedEvent {
        agent,
        time,
        from: Value::sym(from),
        to: Value::sym(to),
    }
}

/// Whether `(events[s], events[r])` instantiates a declared rule of `table`
/// with `s` on the starter side.
pub fn pair_instantiates(table: &ProtocolTable, es: &SimulatedEvent, er: &SimulatedEvent) -> bool {
    if es.agent == er.agent {
        return false;
    }
    let (Some(fs), Some(fr), Some(ts), Some(tr)) = (
        es.from.as_sym(),
        er.from.as_sym(),
        es.to.as_sym(),
        er.to.as_sym(),
    ) else {
        return false;
    };
    table.rule(fs, fr) == Some(&(ts.to_string(), tr.to_string()))
}

/// Exhaustive check: does some perfect matching admit a linear order of pairs
/// consistent with every agent's own event order?
pub fn oracle_matchable(events: &[SimulatedEvent], table: &ProtocolTable) -> bool {
    if events.len() % 2 != 0 {
        return false;
    }
    let unpaired: Vec<usize> = (0..events.len()).collect();
    search(events, table, &unpaired, &mut Vec::new())
}

fn search(
    events: &[SimulatedEvent],
    table: &ProtocolTable,
    unpaired: &[usize],
    pairs: &mut Vec<(usize, usize)>,
) -> bool {
    let Some(&e) = unpaired.first() else {
        return extension_exists(events, pairs);
    };
    for &f in &unpaired[1..] {
        for (s, r) in [(e, f), (f, e)] {
            if pair_instantiates(table, &events[s], &events[r]) {
                let rest: Vec<usize> = unpaired[1..].iter().copied().filter(|&x| x != f).collect();
                pairs.push((s, r));
                if search(events, table, &rest, pairs) {
                    return true;
                }
                pairs.pop();
            }
        }
    }
    false
}

/// Enumerates linear extensions of the precedence order "pair u before pair v
/// whenever some agent has an event of u strictly before an event of v" until
/// one completes.
fn extension_exists(events: &[SimulatedEvent], pairs: &[(usize, usize)]) -> bool {
    let mut pair_of = vec![usize::MAX; events.len()];
    for (pi, &(s, r)) in pairs.iter().enumerate() {
        pair_of[s] = pi;
        pair_of[r] = pi;
    }
    let agents: BTreeSet<usize> = events.iter().map(|e| e.agent).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for agent in agents {
        let mut own: Vec<usize> = (0..events.len()).filter(|&i| events[i].agent == agent).collect();
        own.sort_by_key(|&i| events[i].time);
        for (a, &ei) in own.iter().enumerate() {
            for &ej in &own[a + 1..] {
                if pair_of[ei] != pair_of[ej] {
                    edges.insert((pair_of[ei], pair_of[ej]));
                }
            }
        }
    }
    let remaining: BTreeSet<usize> = (0..pairs.len()).collect();
    place_next(&edges, remaining)
}

fn place_next(edges: &BTreeSet<(usize, usize)>, remaining: BTreeSet<usize>) -> bool {
    if remaining.is_empty() {
        return true;
    }
    for &cand in &remaining {
        let blocked = edges
            .iter()
            .any(|&(u, v)| v == cand && remaining.contains(&u));
        if !blocked {
            let mut rest = remaining.clone();
            rest.remove(&cand);
            if place_next(edges, rest) {
                return true;
            }
        }
    }
    false
}

/// Independently validates a success verdict's certificates: the matching
/// covers every event exactly once, every pair instantiates a rule, and the
/// linearization is a pair permutation that respects per-agent event order.
pub fn validate_certificate(events: &[SimulatedEvent], table: &ProtocolTable, v: &MatchingVerdict) {
    assert!(v.success);
    let mut seen = vec![false; events.len()];
    for p in &v.matching {
        assert!(
            pair_instantiates(table, &events[p.starter], &events[p.reactor]),
            "pair ({}, {}) does not instantiate a rule",
            p.starter,
            p.reactor
        );
        assert_eq!(
            (
                (
                    events[p.starter].from.as_sym().unwrap().to_string(),
                    events[p.reactor].from.as_sym().unwrap().to_string()
                ),
                (
                    events[p.starter].to.as_sym().unwrap().to_string(),
                    events[p.reactor].to.as_sym().unwrap().to_string()
                )
            ),
            p.rule,
            "recorded rule must be the instantiated one"
        );
        for e in [p.starter, p.reactor] {
            assert!(!seen[e], "event {e} matched twice");
            seen[e] = true;
        }
    }
    assert!(seen.iter().all(|&s| s), "matching is not perfect");

    let mut order = vec![usize::MAX; v.matching.len()];
    assert_eq!(v.linearization.len(), v.matching.len());
    for (pos, &pi) in v.linearization.iter().enumerate() {
        assert_eq!(order[pi], usize::MAX, "pair {pi} linearized twice");
        order[pi] = pos;
    }
    let mut pair_of = vec![usize::MAX; events.len()];
    for (pi, p) in v.matching.iter().enumerate() {
        pair_of[p.starter] = pi;
        pair_of[p.reactor] = pi;
    }
    let agents: BTreeSet<usize> = events.iter().map(|e| e.agent).collect();
    for agent in agents {
        let mut own: Vec<usize> = (0..events.len()).filter(|&i| events[i].agent == agent).collect();
        own.sort_by_key(|&i| events[i].time);
        for w in own.windows(2) {
            let (pi, pj) = (pair_of[w[0]], pair_of[w[1]]);
            if pi != pj {
                assert!(
                    order[pi] < order[pj],
                    "linearization violates agent {agent}'s event order"
                );
            }
        }
    }
}

/// Runs both sides on one event list and asserts they agree; returns the
/// oracle's answer so sweeps can tally outcomes.
pub fn assert_agreement(events: &[SimulatedEvent], table: &ProtocolTable) -> bool {
    let expected = oracle_matchable(events, table);
    let verdict = match_simulated_events(events, table, BUDGET);
    assert!(
        !verdict.search_budget_exhausted,
        "desk-scale search must not exhaust a {BUDGET}-node budget"
    );
    assert_eq!(
        verdict.success, expected,
        "matcher disagrees with the oracle on {events:?}"
    );
    if verdict.success {
        validate_certificate(events, table, &verdict);
    } else {
        assert!(
            verdict.counterexample.is_some(),
            "failure verdicts must carry a witness"
        );
    }
    expected
}

/// A two-state oscillator whose every event is ambiguous between the starter
/// side of one rule and the reactor side of the other — worst case for greedy
/// pairing, good case for exercising backtracking.
pub fn oscillator() -> ProtocolTable {
    ProtocolTable::new(
        "oscillator",
        vec!["q0".into(), "q1".into()],
        vec!["q0".into(), "q1".into()],
        vec![
            (("q0".into(), "q1".into()), ("q1".into(), "q0".into())),
            (("q1".into(), "q0".into()), ("q0".into(), "q1".into())),
        ],
    )
    .unwrap()
}

/// A six-state table built so that two forced pairs can deadlock temporally:
/// each rule is instantiable by exactly one event pair, but the agents
/// witnessed the pairs in opposite orders.
pub fn two_phase() -> ProtocolTable {
    ProtocolTable::new(
        "two-phase",
        vec![
            "s0".into(),
            "s1".into(),
            "s2".into(),
            "r0".into(),
            "r1".into(),
            "r2".into(),
        ],
        vec!["s0".into(), "r0".into()],
        vec![
            (("s0".into(), "r1".into()), ("s1".into(), "r2".into())),
            (("r0".into(), "s1".into()), ("r1".into(), "s2".into())),
        ],
    )
    .unwrap()
}

/// A table laid out so that pairing the chronologically first events together
/// strands or temporally deadlocks the rest, while a later partner choice
/// works out. `with_w_rule` controls whether the stranded leftovers can pair
/// with each other (turning a dead-end trap into a temporal-cycle trap).
pub fn trap_table(with_w_rule: bool) -> ProtocolTable {
    let mut rules = vec![
        (("a0".into(), "b1".into()), ("a1".into(), "b2".into())),
        (("b0".into(), "a1".into()), ("b1".into(), "a2".into())),
        (("a0".into(), "c0".into()), ("a1".into(), "c1".into())),
        (("b1".into(), "c1".into()), ("b2".into(), "c2".into())),
    ];
    if with_w_rule {
        rules.push((("c0".into(), "c1".into()), ("c1".into(), "c2".into())));
    }
    ProtocolTable::new(
        "trap",
        ["a0", "a1", "a2", "b0", "b1", "b2", "c0", "c1", "c2"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        vec!["a0".into(), "b0".into(), "c0".into()],
        rules,
    )
    .unwrap()
}

pub fn trap_events() -> [SimulatedEvent; 6] {
    [
        ev(0, 1, "a0", "a1"),
        ev(1, 2, "b0", "b1"),
        ev(1, 3, "b1", "b2"),
        ev(2, 4, "c0", "c1"),
        ev(2, 5, "c1", "c2"),
        ev(0, 6, "a1", "a2"),
    ]
}

/// Replays a random valid history of `table`: a sequence of effective
/// interactions applied to concrete per-agent states, emitting the two
/// (starter-first) events of each one. Every history is matchable by
/// construction — each interaction matches itself.
pub fn random_history(
    rng: &mut ChaCha8Rng,
    table: &ProtocolTable,
    n_agents: usize,
    steps: usize,
) -> Vec<SimulatedEvent> {
    let inits = table.initial_states();
    let mut states: Vec<String> = (0..n_agents)
        .map(|_| inits[rng.gen_range(0..inits.len())].clone())
        .collect();
    let mut events = Vec::new();
    let mut t = 0u64;
    for _ in 0..steps {
        for _attempt in 0..30 {
            let s = rng.gen_range(0..n_agents);
            let mut r = rng.gen_range(0..n_agents - 1);
            if r >= s {
                r += 1;
            }
            if let Some((ts, tr)) = table.rule(&states[s], &states[r]).cloned() {
                if states[s] != ts {
                    events.push(ev(s, t, &states[s], &ts));
                }
                if states[r] != tr {
                    events.push(ev(r, t, &states[r], &tr));
                }
                states[s] = ts;
                states[r] = tr;
                t += 1;
                break;
            }
        }
    }
    events
}

pub fn per_agent_times_distinct(events: &[SimulatedEvent]) -> bool {
    let mut seen = BTreeSet::new();
    events.iter().all(|e| seen.insert((e.agent, e.time)))
}

/// Applies one structured corruption. Corruptions that would give one agent
/// two events at the same time are rolled back (real traces cannot produce
/// that, so neither side's behavior on it is pinned down).
pub fn mutate(rng: &mut ChaCha8Rng, table: &ProtocolTable, events: &mut Vec<SimulatedEvent>) {
    if events.is_empty() {
        return;
    }
    let backup = events.clone();
    match rng.gen_range(0..6) {
        0 => {}
        1 => {
            events.pop();
        }
        2 => {
            let i = rng.gen_range(0..events.len());
            events.remove(i);
        }
        3 => {
            // Redirect one event to a different target state.
            let i = rng.gen_range(0..events.len());
            let states = table.states();
            for _ in 0..10 {
                let to = &states[rng.gen_range(0..states.len())];
                if Some(to.as_str()) != events[i].from.as_sym() {
                    events[i].to = Value::sym(to.clone());
                    break;
                }
            }
        }
        4 => {
            // Hand one event to a different agent.
            let i = rng.gen_range(0..events.len());
            events[i].agent = (events[i].agent + 1 + rng.gen_range(0..3)) % 5;
        }
        _ => {
            // Swap the times of two events.
            let i = rng.gen_range(0..events.len());
            let j = rng.gen_range(0..events.len());
            let (ti, tj) = (events[i].time, events[j].time);
            events[i].time = tj;
            events[j].time = ti;
        }
    }
    if !per_agent_times_distinct(events) {
        *events = backup;
    }
}
