//! End-to-end properties across ingestion, forest construction and counting.

use proptest::prelude::*;

use cascade_branch_core::event::{
    events_to_string, parse_events, EventLog, EventRecord, FormatConfig,
};
use cascade_branch_core::forest::{build_forest, OrphanPolicy};
use cascade_branch_core::series::generation_counts;
use cascade_branch_core::simulator::{random_params, simulate};
use cascade_branch_core::temporal::{first_occurrence, period_generation_matrix};

fn assert_pipeline_invariants(log: &EventLog) {
    let forest = build_forest(log, OrphanPolicy::Reject).unwrap();
    let series = generation_counts(&forest).unwrap();

    // Successful-transmission accounting.
    let g_count = series.generations();
    for g in 1..g_count {
        assert_eq!(
            series.sent(g),
            series.infected(g + 1),
            "sent({g}) != infected({})",
            g + 1
        );
    }
    assert_eq!(series.sent(g_count), 0);
    for g in 1..=g_count {
        assert!(series.decisions(g) <= series.infected(g));
    }

    // Node totals.
    let total: u64 = series.infected_column().iter().sum();
    assert_eq!(total, forest.len() as u64);
    assert_eq!(series.total_reach(), forest.len() as u64);

    // Structural node invariants.
    for node in forest.nodes().values() {
        match &node.infector {
            None => assert_eq!(node.generation, 1),
            Some(infector) => {
                let parent = forest.get(infector).unwrap();
                assert_eq!(node.generation, parent.generation + 1);
                assert!(node.infected_at >= parent.infected_at);
            }
        }
    }

    // Temporal views agree with the series.
    let matrix = period_generation_matrix(&forest, 3600);
    for g in 1..=g_count {
        assert_eq!(matrix.row_sum(g), series.infected(g));
    }
    let first = first_occurrence(&forest);
    for w in first.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn simulated_campaigns_satisfy_all_invariants() {
    // Spread across regimes via seeded random parameters.
    for seed in 0..120 {
        let params = random_params(seed);
        let log = simulate(&params).unwrap();
        assert_pipeline_invariants(&log);
    }
}

#[test]
fn simulated_log_survives_serialization() {
    let params = random_params(7);
    let log = simulate(&params).unwrap();
    let text = events_to_string(&log, &params.comment_lines());
    let reparsed = parse_events(text.as_bytes(), &FormatConfig::default()).unwrap();
    assert!(reparsed.skipped.is_empty());
    assert_eq!(reparsed.log, log);
}

fn actor_id_strategy() -> impl Strategy<Value = String> {
    // Ids stress the CSV layer: commas, quotes, unicode, whitespace-free.
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Za-z0-9,\"';|]{1,12}",
        "[\\PC&&[^,\"\\s]]{1,6}",
    ]
    .prop_filter("csv trims outer whitespace", |s| {
        !s.trim().is_empty() && s.trim() == s
    })
}

prop_compose! {
    fn arb_record()(
        seed in any::<bool>(),
        sender in actor_id_strategy(),
        recipient in actor_id_strategy(),
        timestamp in -1_000_000i64..2_000_000_000,
    ) -> EventRecord {
        EventRecord { sender: (!seed).then_some(sender), recipient, timestamp }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn event_log_round_trips_through_csv(records in prop::collection::vec(arb_record(), 1..40)) {
        let log = EventLog::new(records);
        let text = events_to_string(&log, &[]);
        let reparsed = parse_events(text.as_bytes(), &FormatConfig::default()).unwrap();
        prop_assert!(reparsed.skipped.is_empty());
        prop_assert_eq!(reparsed.log, log);
    }

    #[test]
    fn forest_is_deterministic_and_orphans_partition(records in prop::collection::vec(arb_record(), 1..60)) {
        let log = EventLog::new(records);
        match build_forest(&log, OrphanPolicy::Reject) {
            Err(_) => prop_assert!(log.records().iter().all(|r| !r.is_seed())),
            Ok(forest) => {
                // Replay is a pure function of the log.
                let again = build_forest(&log, OrphanPolicy::Reject).unwrap();
                prop_assert_eq!(forest.nodes(), again.nodes());
                // Every record lands in exactly one bucket: new node,
                // wasted attempt, orphan, or duplicate seed.
                let nodes = forest.len() as u64;
                let attempts = forest.total_attempts();
                let orphans = forest.orphan_records().len() as u64;
                let dup_seeds = log.records().iter().filter(|r| r.is_seed()).count() as u64
                    - forest.nodes().values().filter(|n| n.infector.is_none()).count() as u64;
                prop_assert_eq!(log.len() as u64, nodes + attempts + orphans + dup_seeds);
            }
        }
    }

    #[test]
    fn as_seeds_policy_leaves_no_orphans(records in prop::collection::vec(arb_record(), 1..60)) {
        let log = EventLog::new(records);
        let forest = build_forest(&log, OrphanPolicy::AsSeeds).unwrap();
        prop_assert!(forest.orphan_records().is_empty());
        generation_counts(&forest).unwrap();
    }
}
