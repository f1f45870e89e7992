//! Brute-force oracle for the simulation-matching verdict.
//!
//! The production matcher (`match_simulated_events`) prunes its search; the
//! oracle (in `support/matching.rs`, shared with the acceptance sweep) does
//! not. It enumerates every perfect matching of events into
//! rule-instantiating (starter, reactor) pairs, and for each matching every
//! linear extension of the pair precedence order, by plain backtracking. At
//! desk scale (event lists of size <= 20) the two must agree exactly; the
//! oracle is the ground truth the pruned search is trusted against.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omisim::protocols::pairing_program;
use omisim::scheduling::{run, OmissionAdversary, Scheduler};
use omisim::verification::match_simulated_events;
use omisim::{AgentProgram, Configuration, InitSpec, ModelSemantics, ProtocolTable, Value};

#[path = "support/matching.rs"]
mod support;
use support::{
    assert_agreement, ev, mutate, oracle_matchable, oscillator, random_history, trap_events,
    trap_table, two_phase, BUDGET,
};

#[test]
fn empty_event_list_is_vacuously_simulated() {
    let table = pairing_program();
    let v = match_simulated_events(&[], &table, BUDGET);
    assert!(v.success);
    assert!(v.matching.is_empty());
    assert!(v.linearization.is_empty());
    assert!(!v.search_budget_exhausted);
}

#[test]
fn odd_event_counts_fail_with_a_witness() {
    let table = pairing_program();
    let v = match_simulated_events(&[ev(0, 3, "c", "cs")], &table, BUDGET);
    assert!(!v.success);
    assert!(!v.search_budget_exhausted);
    let witness = v.counterexample.expect("odd count needs a witness");
    assert!(witness.contains("odd"), "unexpected witness: {witness}");
}

#[test]
fn unpartnered_events_fail() {
    // Two agents entered cs but nobody ever left p: no candidate starter.
    let table = pairing_program();
    let events = [ev(0, 1, "c", "cs"), ev(1, 2, "c", "cs")];
    assert!(!oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn one_interaction_matches_itself() {
    let table = pairing_program();
    let events = [ev(0, 4, "c", "cs"), ev(1, 4, "p", "bot")];
    assert!(oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn temporal_cycle_defeats_a_rule_perfect_matching() {
    // Pair A = (agent 1 @1 starter, agent 2 @3 reactor) and pair B =
    // (agent 2 @2 starter, agent 1 @4 reactor) are forced by the rules, yet
    // agent 1 witnessed A before B and agent 2 witnessed B before A.
    let table = two_phase();
    let events = [
        ev(1, 1, "s0", "s1"),
        ev(2, 2, "r0", "r1"),
        ev(2, 3, "r1", "r2"),
        ev(1, 4, "s1", "s2"),
    ];
    assert!(!oracle_matchable(&events, &table));
    let v = match_simulated_events(&events, &table, BUDGET);
    assert!(!v.success, "a temporally inconsistent matching was accepted");
    assert!(v.counterexample.is_some());
    assert!(!v.search_budget_exhausted);
}

#[test]
fn two_phase_pairs_in_a_consistent_order_succeed() {
    // Same two pairs, but agent 2's events come in the same order as
    // agent 1's: linearize A then B.
    let table = two_phase();
    let events = [
        ev(1, 1, "s0", "s1"),
        ev(2, 2, "r1", "r2"),
        ev(2, 3, "r0", "r1"),
        ev(1, 4, "s1", "s2"),
    ];
    // Agent 2 goes r1->r2 before r0->r1, which breaks its own state chain;
    // chain continuity is not part of the matching problem, and pair A
    // (events 0, 1) precedes pair B (events 2, 3) for both agents.
    assert!(oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn crossed_oscillator_events_succeed() {
    let table = oscillator();
    let events = [
        ev(0, 1, "q0", "q1"),
        ev(1, 2, "q1", "q0"),
        ev(1, 3, "q0", "q1"),
        ev(0, 4, "q1", "q0"),
    ];
    assert!(oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn dead_end_trap_needs_a_non_greedy_partner_choice() {
    // Pairing agent 0's first event with agent 1's later event leaves agent
    // 2's two events unpairable; the consistent matching pairs it with agent
    // 2's first event instead.
    let table = trap_table(false);
    let events = trap_events();
    assert!(oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn cycle_trap_needs_a_non_greedy_partner_choice() {
    // With the extra rule, the eager pairing completes rule-wise but forces
    // a temporal cycle between the first two pairs; only a different partner
    // choice for the very first event linearizes.
    let table = trap_table(true);
    let events = trap_events();
    assert!(oracle_matchable(&events, &table));
    assert_agreement(&events, &table);
}

#[test]
fn a_tiny_budget_is_reported_as_exhausted() {
    let table = oscillator();
    let events = [
        ev(0, 1, "q0", "q1"),
        ev(1, 2, "q1", "q0"),
        ev(1, 3, "q0", "q1"),
        ev(0, 4, "q1", "q0"),
    ];
    let v = match_simulated_events(&events, &table, 1);
    assert!(!v.success);
    assert!(v.search_budget_exhausted);
}

#[test]
fn matcher_agrees_with_the_oracle_on_valid_histories() {
    for seed in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xFACE_0000 + seed);
        let table = if seed % 2 == 0 {
            pairing_program()
        } else {
            oscillator()
        };
        let n_agents = rng.gen_range(3..=5);
        let steps = rng.gen_range(1..=5);
        let events = random_history(&mut rng, &table, n_agents, steps);
        assert!(events.len() <= 20);
        assert_agreement(&events, &table);
    }
}

#[test]
fn matcher_agrees_with_the_oracle_on_corrupted_histories() {
    for seed in 0..160u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF_0000 + seed);
        let table = if seed % 2 == 0 {
            oscillator()
        } else {
            pairing_program()
        };
        let n_agents = rng.gen_range(3..=5);
        let steps = rng.gen_range(1..=5);
        let mut events = random_history(&mut rng, &table, n_agents, steps);
        mutate(&mut rng, &table, &mut events);
        mutate(&mut rng, &table, &mut events);
        assert!(events.len() <= 20);
        assert_agreement(&events, &table);
    }
}

#[test]
fn direct_executions_self_match() {
    // A fair reliable run of the pairing protocol, checked end to end through
    // extraction: every effective interaction pairs with itself.
    let prog = omisim::TableProgram::new(Arc::new(pairing_program()));
    let sem = ModelSemantics::preset("TW").unwrap();
    let init = Configuration::new(
        ["c", "c", "c", "p", "p"]
            .iter()
            .map(|s| prog.initial_state(&InitSpec::plain(Value::sym(*s))).unwrap())
            .collect(),
        None,
    );
    let trace = run(
        &prog,
        &sem,
        &init,
        &Scheduler::UniformRandom { seed: None },
        &OmissionAdversary::NoOmissions,
        400,
        7,
    )
    .unwrap();
    let events = omisim::verification::extract_simulated_events(&trace, &prog).unwrap();
    assert!(!events.is_empty());
    assert!(events.len() <= 20, "pairing produces at most 2*min(nc,np) events");
    assert_agreement(&events, &table_of(&prog));
}

fn table_of(prog: &omisim::TableProgram) -> ProtocolTable {
    (**prog.table()).clone()
}
