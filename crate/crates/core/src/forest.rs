//! Cascade forest construction: generation assignment over the event log.
//!
//! Replays records in timestamp order (ties in file order). Seeds become
//! generation-1 roots; every other infection gets its infector's generation
//! plus one. The first record infecting an actor wins; later events towards
//! that actor are counted as wasted attempts of their sender. A record whose
//! sender is not infected at event time is an orphan and is either rejected
//! (collected for diagnostics) or promoted to a fresh generation-1 seed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::event::{ActorId, EventLog, EventRecord};

/// How to treat records whose sender has no recorded infection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrphanPolicy {
    /// Skip the record and keep it in [`CascadeForest::orphan_records`].
    #[default]
    Reject,
    /// Promote the unknown sender to a generation-1 seed at the record's
    /// timestamp, then apply the record normally.
    AsSeeds,
}

/// One infected actor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestNode {
    /// 1-based; seeds are generation 1.
    pub generation: u32,
    /// Epoch seconds of the first (winning) infection.
    pub infected_at: i64,
    /// `None` for seeds.
    pub infector: Option<ActorId>,
}

/// The set of infection trees rooted at the seeds.
#[derive(Debug, Clone, Default)]
pub struct CascadeForest {
    nodes: BTreeMap<ActorId, ForestNode>,
    orphan_records: Vec<EventRecord>,
    attempt_counts: BTreeMap<ActorId, u64>,
    promoted_seeds: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("no seed records in log (and orphan policy is reject)")]
    NoSeeds,
}

impl CascadeForest {
    pub fn nodes(&self) -> &BTreeMap<ActorId, ForestNode> {
        &self.nodes
    }

    pub fn get(&self, id: &str) -> Option<&ForestNode> {
        self.nodes.get(id)
    }

    /// Number of distinct infected actors.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest generation present; 0 for an empty forest.
    pub fn max_generation(&self) -> u32 {
        self.nodes.values().map(|n| n.generation).max().unwrap_or(0)
    }

    /// Records skipped under [`OrphanPolicy::Reject`], in replay order.
    pub fn orphan_records(&self) -> &[EventRecord] {
        &self.orphan_records
    }

    /// Outgoing events per sender that hit an already-infected recipient.
    pub fn attempt_counts(&self) -> &BTreeMap<ActorId, u64> {
        &self.attempt_counts
    }

    /// Unknown senders promoted to seeds under [`OrphanPolicy::AsSeeds`].
    pub fn promoted_seeds(&self) -> u64 {
        self.promoted_seeds
    }

    pub fn total_attempts(&self) -> u64 {
        self.attempt_counts.values().sum()
    }

    /// Earliest infection time; `None` for an empty forest.
    pub fn origin(&self) -> Option<i64> {
        self.nodes.values().map(|n| n.infected_at).min()
    }
}

/// Builds the forest by replaying the log.
///
/// Under [`OrphanPolicy::Reject`] a log without any seed record comes back
/// as [`ForestError::NoSeeds`]: nothing can be infected. Cycles cannot
/// occur: an actor is infected at most once, and only by an actor already
/// infected at an earlier or equal time.
pub fn build_forest(log: &EventLog, policy: OrphanPolicy) -> Result<CascadeForest, ForestError> {
    let mut forest = CascadeForest::default();
    for record in log.records() {
        apply(&mut forest, record, policy);
    }
    if forest.is_empty() {
        return Err(ForestError::NoSeeds);
    }
    Ok(forest)
}

fn apply(forest: &mut CascadeForest, record: &EventRecord, policy: OrphanPolicy) {
    match &record.sender {
        None => {
            // Seed record. First infection wins; a repeat seed of an
            // already-infected actor carries no information.
            forest
                .nodes
                .entry(record.recipient.clone())
                .or_insert(ForestNode {
                    generation: 1,
                    infected_at: record.timestamp,
                    infector: None,
                });
        }
        Some(sender) => {
            let sender_gen = match forest.nodes.get(sender) {
                Some(node) => node.generation,
                None => match policy {
                    OrphanPolicy::Reject => {
                        forest.orphan_records.push(record.clone());
                        return;
                    }
                    OrphanPolicy::AsSeeds => {
                        forest.promoted_seeds += 1;
                        forest.nodes.insert(
                            sender.clone(),
                            ForestNode {
                                generation: 1,
                                infected_at: record.timestamp,
                                infector: None,
                            },
                        );
                        1
                    }
                },
            };
            if forest.nodes.contains_key(&record.recipient) {
                *forest.attempt_counts.entry(sender.clone()).or_insert(0) += 1;
            } else {
                forest.nodes.insert(
                    record.recipient.clone(),
                    ForestNode {
                        generation: sender_gen + 1,
                        infected_at: record.timestamp,
                        infector: Some(sender.clone()),
                    },
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{parse_events, FormatConfig};

    fn log(body: &str) -> EventLog {
        let text = format!("sender_id,recipient_id,timestamp\n{body}");
        parse_events(text.as_bytes(), &FormatConfig::default())
            .unwrap()
            .log
    }

    #[test]
    fn chain_generations() {
        let f = build_forest(&log(",A,100\nA,B,200\nB,C,300\n"), OrphanPolicy::Reject).unwrap();
        assert_eq!(f.get("A").unwrap().generation, 1);
        assert_eq!(f.get("B").unwrap().generation, 2);
        assert_eq!(f.get("C").unwrap().generation, 3);
        assert_eq!(f.get("C").unwrap().infector.as_deref(), Some("B"));
        assert_eq!(f.max_generation(), 3);
    }

    #[test]
    fn orphan_rejected() {
        let f = build_forest(&log(",A,100\nA,B,200\nC,D,300\n"), OrphanPolicy::Reject).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.orphan_records().len(), 1);
        assert_eq!(f.orphan_records()[0].sender.as_deref(), Some("C"));
    }

    #[test]
    fn orphan_promoted_as_seed() {
        let f = build_forest(&log(",A,100\nC,D,300\n"), OrphanPolicy::AsSeeds).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.get("C").unwrap().generation, 1);
        assert!(f.get("C").unwrap().infector.is_none());
        assert_eq!(f.get("D").unwrap().generation, 2);
        assert!(f.orphan_records().is_empty());
    }

    #[test]
    fn first_infection_wins_later_event_is_attempt() {
        let f = build_forest(&log(",A,100\nA,B,200\nA,B,250\n"), OrphanPolicy::Reject).unwrap();
        let b = f.get("B").unwrap();
        assert_eq!(b.infected_at, 200);
        assert_eq!(f.attempt_counts().get("A"), Some(&1));
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn no_seeds_is_an_error() {
        assert_eq!(
            build_forest(&log("A,B,200\n"), OrphanPolicy::Reject).unwrap_err(),
            ForestError::NoSeeds
        );
    }

    #[test]
    fn equal_timestamps_resolve_in_file_order() {
        // B's infection record precedes B's own send at the same instant,
        // so the chain closes; swapping them orphans the send.
        let f = build_forest(&log(",A,100\nA,B,100\nB,C,100\n"), OrphanPolicy::Reject).unwrap();
        assert_eq!(f.get("C").unwrap().generation, 3);

        let f2 = build_forest(&log(",A,100\nB,C,100\nA,B,100\n"), OrphanPolicy::Reject).unwrap();
        assert!(f2.get("C").is_none());
        assert_eq!(f2.orphan_records().len(), 1);
    }

    #[test]
    fn child_not_earlier_than_infector() {
        let f = build_forest(
            &log(",A,100\nA,B,140\nB,C,140\nA,D,900\n"),
            OrphanPolicy::Reject,
        )
        .unwrap();
        for node in f.nodes().values() {
            if let Some(infector) = &node.infector {
                assert!(node.infected_at >= f.get(infector).unwrap().infected_at);
            }
        }
    }
}
