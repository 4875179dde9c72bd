//! Regenerates the reference fixtures under `fixtures/` at the workspace
//! root:
//!
//! - `v1_table1.csv`, `v2_table1.csv` — per-generation count series for the
//!   two reference campaigns,
//! - `v1_table2.csv` — campaign V1's period × generation matrix for its
//!   first ten days (fractions over the full 639 reach),
//! - `v1_events.csv`, `v2_events.csv` — synthetic event logs whose
//!   aggregates reproduce those tables when run through the pipeline.
//!
//! The event logs are deterministic constructions, not free-running
//! simulations: generation sizes, decider counts and (for V1) day placement
//! are constrained to the reference tables exactly. Times are laid out in
//! per-generation slots within each day so that every child strictly
//! follows its parent. Counts the published day columns do not cover are
//! spread over the campaign tail (days 11..=31).
//!
//! Run with: `cargo run -p cascade-branch-core --example generate_fixtures`

use std::fs;
use std::path::PathBuf;

use cascade_branch_core::event::{events_to_string, EventLog, EventRecord};
use cascade_branch_core::series::{write_series_csv, GenerationSeries};
use cascade_branch_core::temporal::{write_matrix_csv, PeriodMatrix};

const DAY: i64 = 86_400;

// Campaign V1: 639 infections over 14 generations, 31 days.
const V1_EPOCH: i64 = 1_300_000_000;
const V1_INFECTED: [u64; 14] = [1, 11, 49, 106, 123, 90, 79, 41, 43, 40, 38, 13, 4, 1];
const V1_DECISIONS: [u64; 14] = [1, 10, 26, 42, 41, 33, 20, 11, 12, 14, 7, 3, 1, 0];
const V1_TAIL_DAYS: u64 = 21; // days 11..=31 carry what the day table omits
#[rustfmt::skip]
const V1_DAY_COUNTS: [[u64; 10]; 14] = [
    [ 1,  0,  0,  0, 0, 0, 0, 0, 0, 0],
    [10,  0,  0,  0, 0, 0, 0, 0, 0, 0],
    [29,  6,  5,  1, 0, 2, 3, 0, 1, 0],
    [40, 25, 13,  8, 0, 0, 3, 0, 2, 0],
    [22, 31, 12,  7, 3, 1, 1, 3, 3, 2],
    [14,  7, 11,  3, 5, 7, 2, 0, 0, 1],
    [ 3, 12,  2,  0, 3, 4, 0, 4, 3, 3],
    [ 2,  7,  0,  0, 4, 0, 1, 3, 1, 0],
    [ 2,  6,  3,  5, 4, 2, 5, 2, 0, 0],
    [ 2,  4,  1,  4, 5, 2, 3, 3, 1, 0],
    [ 0,  2,  1, 15, 3, 0, 1, 3, 0, 0],
    [ 0,  0,  0,  0, 1, 1, 1, 2, 0, 0],
    [ 0,  0,  0,  0, 0, 1, 0, 0, 0, 0],
    [ 0,  0,  0,  0, 0, 0, 0, 0, 0, 0],
];

// Campaign V2: 2503 infections over 12 generations. No published day table;
// all events are laid out on one day in per-generation hour slots.
const V2_EPOCH: i64 = 1_310_000_000;
const V2_INFECTED: [u64; 12] = [9, 187, 552, 782, 450, 251, 137, 47, 27, 51, 6, 4];
const V2_DECISIONS: [u64; 12] = [8, 52, 115, 105, 55, 32, 18, 5, 4, 4, 3, 2];

#[derive(Clone)]
struct Node {
    id: String,
    time: i64,
}

/// Infection times for one V1 generation: the published day columns first,
/// the remainder cycled over the tail days. Within a day, generation g owns
/// the two-minute slot starting at `g * 120`.
fn v1_generation_times(g: usize, total: u64, day_row: &[u64; 10]) -> Vec<i64> {
    let slot = |day: u64, idx: u64| V1_EPOCH + day as i64 * DAY + g as i64 * 120 + idx as i64;
    let mut times = Vec::with_capacity(total as usize);
    for (day, &count) in day_row.iter().enumerate() {
        for idx in 0..count {
            times.push(slot(day as u64, idx));
        }
    }
    let placed = times.len() as u64;
    for j in 0..total - placed {
        times.push(slot(10 + j % V1_TAIL_DAYS, j / V1_TAIL_DAYS));
    }
    times.sort_unstable();
    times
}

/// V2 generation times: hour slot `g * 3600` on the single campaign day.
fn v2_generation_times(g: usize, total: u64) -> Vec<i64> {
    (0..total)
        .map(|idx| V2_EPOCH + g as i64 * 3600 + idx as i64)
        .collect()
}

/// Links every child to a decider: earliest-infected deciders forward;
/// each child takes the least-loaded decider infected strictly before it.
fn assign_parents(deciders: &[Node], children: &[Node]) -> Vec<usize> {
    let mut load = vec![0u64; deciders.len()];
    let mut parent_of = Vec::with_capacity(children.len());
    for child in children {
        let pick = (0..deciders.len())
            .filter(|&i| deciders[i].time < child.time)
            .min_by_key(|&i| (load[i], i))
            .unwrap_or_else(|| panic!("no eligible decider for child at t={}", child.time));
        load[pick] += 1;
        parent_of.push(pick);
    }
    assert!(
        load.iter().all(|&l| l > 0),
        "constrained layout left a decider without a transmission"
    );
    parent_of
}

/// Builds a constrained event log: per-generation node lists (chronological
/// ids), decider sets sized by the reference decision counts, and one
/// record per successful transmission.
fn build_campaign(
    prefix: &str,
    infected: &[u64],
    decisions: &[u64],
    times_for: impl Fn(usize, u64) -> Vec<i64>,
) -> (EventLog, Vec<Vec<Node>>) {
    // Lay out all nodes, then name them in global infection order.
    let mut per_gen: Vec<Vec<i64>> = (1..=infected.len())
        .map(|g| times_for(g, infected[g - 1]))
        .collect();
    per_gen.iter_mut().for_each(|times| times.sort_unstable());

    let mut order: Vec<(i64, usize, usize)> = Vec::new();
    for (gi, times) in per_gen.iter().enumerate() {
        for (ni, &t) in times.iter().enumerate() {
            order.push((t, gi, ni));
        }
    }
    order.sort_unstable();
    let mut names: Vec<Vec<String>> = per_gen
        .iter()
        .map(|t| vec![String::new(); t.len()])
        .collect();
    for (serial, &(_, gi, ni)) in order.iter().enumerate() {
        names[gi][ni] = format!("{prefix}{:04}", serial + 1);
    }
    let nodes: Vec<Vec<Node>> = per_gen
        .iter()
        .zip(&names)
        .map(|(times, ids)| {
            times
                .iter()
                .zip(ids)
                .map(|(&time, id)| Node {
                    id: id.clone(),
                    time,
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    for seed in &nodes[0] {
        records.push(EventRecord {
            sender: None,
            recipient: seed.id.clone(),
            timestamp: seed.time,
        });
    }
    for g in 0..nodes.len() - 1 {
        let deciders = &nodes[g][..decisions[g] as usize];
        let children = &nodes[g + 1];
        for (child, &pi) in children
            .iter()
            .zip(assign_parents(deciders, children).iter())
        {
            records.push(EventRecord {
                sender: Some(deciders[pi].id.clone()),
                recipient: child.id.clone(),
                timestamp: child.time,
            });
        }
    }
    (EventLog::new(records), nodes)
}

fn series(infected: &[u64], decisions: &[u64]) -> GenerationSeries {
    let sent: Vec<u64> = (0..infected.len())
        .map(|i| {
            if i + 1 < infected.len() {
                infected[i + 1]
            } else {
                0
            }
        })
        .collect();
    GenerationSeries::from_columns(infected.to_vec(), decisions.to_vec(), sent)
        .expect("reference tables satisfy the series invariants")
}

fn main() {
    let fixtures: PathBuf = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join("fixtures");
    fs::create_dir_all(&fixtures).expect("create fixtures dir");
    let write = |name: &str, contents: &str| {
        fs::write(fixtures.join(name), contents).unwrap_or_else(|e| panic!("write {name}: {e}"));
        println!("wrote fixtures/{name}");
    };

    // Count series.
    let v1_series = series(&V1_INFECTED, &V1_DECISIONS);
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &v1_series).unwrap();
    write("v1_table1.csv", &String::from_utf8(buf).unwrap());

    let v2_series = series(&V2_INFECTED, &V2_DECISIONS);
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &v2_series).unwrap();
    write("v2_table1.csv", &String::from_utf8(buf).unwrap());

    // V1 period matrix: first ten days, fractions over the full reach.
    let matrix = PeriodMatrix::from_counts(
        V1_DAY_COUNTS.iter().map(|row| row.to_vec()).collect(),
        DAY,
        V1_EPOCH + 120, // campaign launch = the seed's infection time
        v1_series.total_reach(),
    );
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, &matrix).unwrap();
    write("v1_table2.csv", &String::from_utf8(buf).unwrap());

    // Constrained event logs.
    let (v1_log, _) = build_campaign("u", &V1_INFECTED, &V1_DECISIONS, |g, n| {
        v1_generation_times(g, n, &V1_DAY_COUNTS[g - 1])
    });
    write(
        "v1_events.csv",
        &events_to_string(
            &v1_log,
            &["campaign V1 reconstruction: synthetic events constrained to the reference aggregates"
                .to_string()],
        ),
    );

    let (v2_log, v2_nodes) = build_campaign("u", &V2_INFECTED, &V2_DECISIONS, |g, n| {
        v2_generation_times(g, n)
    });
    // The final V2 generation recorded 2 forwarding members but zero
    // successful transmissions; keep their activity as wasted attempts
    // against the first seed.
    let mut records: Vec<EventRecord> = v2_log.records().to_vec();
    let seed_id = v2_nodes[0][0].id.clone();
    let last_gen = v2_nodes.last().unwrap();
    for attempter in last_gen.iter().take(2) {
        records.push(EventRecord {
            sender: Some(attempter.id.clone()),
            recipient: seed_id.clone(),
            timestamp: attempter.time + 60,
        });
    }
    write(
        "v2_events.csv",
        &events_to_string(
            &EventLog::new(records),
            &["campaign V2 reconstruction: synthetic events constrained to the reference aggregates"
                .to_string()],
        ),
    );

    println!("done; `cargo test -p cascade-branch-core --test fixtures` verifies the outputs");
}
