//! Data-only broadcast bus with slot scheduling, local address matching,
//! and the chip-to-chip bridge that extends one ordered stream across die
//! boundaries.
//!
//! No address lines are modeled: sender identity is implied by slot
//! position, so an epoch's stream is simply the node outputs in ascending
//! source-id order. The simulator's events carry the source explicitly for
//! bookkeeping; occupancy, not wire encoding, is what is modeled.

use std::ops::Range;

use thiserror::Error;

use crate::config::{ConfigError, MAX_CHIPS};
use crate::model::{AddressTable, NodeId, Word, ADDRESS_SPACE};

/// One `(source, value)` pair delivered on the bus during an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastEvent {
    pub source: NodeId,
    pub value: Word,
}

/// Slot occupancy of one epoch's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSchedule {
    pub mode: crate::config::SlotMode,
    /// Slots carried this epoch: every node in dense mode, firing nodes in
    /// sparse mode.
    pub epoch_length: usize,
}

impl SlotSchedule {
    /// Schedule realized by one epoch's stream.
    pub fn of(mode: crate::config::SlotMode, stream: &[BroadcastEvent]) -> Self {
        Self {
            mode,
            epoch_length: stream.len(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("duplicate slot: source {source_id} present in both streams")]
    DuplicateSlot { source_id: NodeId },
}

/// One die's contiguous slice of the global id space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipBridge {
    pub chip_index: u32,
    /// Half-open id range `[low, high)` owned by this chip.
    pub id_range: Range<u32>,
}

impl ChipBridge {
    pub fn contains(&self, id: NodeId) -> bool {
        self.id_range.contains(&u32::from(id.0))
    }

    pub fn node_count(&self) -> u32 {
        self.id_range.end - self.id_range.start
    }
}

/// Matches an ascending broadcast stream against a canonical address
/// table with a single forward merge-scan, returning `(value, weight)`
/// pairs in table order. Sources absent from the stream contribute
/// nothing.
pub fn match_stream(table: &AddressTable, stream: &[BroadcastEvent]) -> Vec<(Word, i8)> {
    debug_assert!(
        stream.windows(2).all(|w| w[0].source < w[1].source),
        "broadcast stream must be strictly ascending by source"
    );
    let mut matched = Vec::new();
    let mut events = stream.iter().peekable();
    for entry in table.entries() {
        while let Some(ev) = events.peek() {
            if ev.source < entry.source {
                events.next();
            } else {
                break;
            }
        }
        if let Some(ev) = events.peek() {
            if ev.source == entry.source {
                matched.push((ev.value, entry.weight));
            }
        }
    }
    matched
}

/// Merges a chip-local stream with the forwarded neighbor stream into one
/// ascending stream. Inputs must each be sorted; a source id appearing in
/// both is a protocol error (two senders claiming one slot).
pub fn merge_streams(
    local: &[BroadcastEvent],
    forwarded: &[BroadcastEvent],
) -> Result<Vec<BroadcastEvent>, ProtocolError> {
    let mut merged = Vec::with_capacity(local.len() + forwarded.len());
    let (mut i, mut j) = (0, 0);
    while i < local.len() && j < forwarded.len() {
        let (a, b) = (local[i], forwarded[j]);
        if a.source == b.source {
            return Err(ProtocolError::DuplicateSlot {
                source_id: a.source,
            });
        }
        if a.source < b.source {
            merged.push(a);
            i += 1;
        } else {
            merged.push(b);
            j += 1;
        }
    }
    merged.extend_from_slice(&local[i..]);
    merged.extend_from_slice(&forwarded[j..]);
    Ok(merged)
}

/// Plans the chip partition: contiguous id ranges covering
/// `[0, total_nodes)`, one bridge per die. The last die may be partially
/// filled. Enforces the 16-bit address ceiling and, when `enforce_limit`
/// is set, the 21-chiplet chaining policy.
pub fn plan_chips(
    total_nodes: u32,
    nodes_per_chip: u32,
    enforce_limit: bool,
) -> Result<Vec<ChipBridge>, ConfigError> {
    if u64::from(total_nodes) > u64::from(ADDRESS_SPACE) {
        return Err(ConfigError::AddressSpaceExceeded {
            requested: u64::from(total_nodes),
        });
    }
    if nodes_per_chip == 0 {
        return Err(ConfigError::EmptyChip);
    }
    let chips = total_nodes.div_ceil(nodes_per_chip);
    if enforce_limit && chips > MAX_CHIPS {
        return Err(ConfigError::ChipLimitExceeded {
            chips,
            max: MAX_CHIPS,
        });
    }
    Ok((0..chips)
        .map(|chip_index| {
            let low = chip_index * nodes_per_chip;
            let high = (low + nodes_per_chip).min(total_nodes);
            ChipBridge {
                chip_index,
                id_range: low..high,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConnectionEntry;

    fn ev(source: u16, value: Word) -> BroadcastEvent {
        BroadcastEvent {
            source: NodeId(source),
            value,
        }
    }

    fn table(sources: &[u16]) -> AddressTable {
        AddressTable::new(
            sources
                .iter()
                .map(|&s| ConnectionEntry {
                    source: NodeId(s),
                    weight: 1,
                })
                .collect(),
        )
    }

    #[test]
    fn match_is_set_intersection_in_table_order() {
        let t = AddressTable::new(vec![
            ConnectionEntry {
                source: NodeId(2),
                weight: 3,
            },
            ConnectionEntry {
                source: NodeId(7),
                weight: -2,
            },
        ]);
        let stream = [ev(2, 10), ev(5, 1), ev(7, 3)];
        assert_eq!(match_stream(&t, &stream), vec![(10, 3), (3, -2)]);
    }

    #[test]
    fn empty_table_matches_nothing() {
        let stream = [ev(0, 1), ev(1, 2)];
        assert!(match_stream(&AddressTable::empty(), &stream).is_empty());
    }

    #[test]
    fn sparse_stream_skips_absent_sources() {
        let t = table(&[1, 3, 5]);
        let stream = [ev(3, 9)];
        assert_eq!(match_stream(&t, &stream), vec![(9, 1)]);
    }

    #[test]
    fn dense_stream_matches_full_table() {
        // 256-entry table against a 3200-slot dense stream: every entry hits.
        let t = table(&(0..256).collect::<Vec<u16>>());
        let stream: Vec<BroadcastEvent> = (0..3200).map(|i| ev(i, i as Word)).collect();
        assert_eq!(match_stream(&t, &stream).len(), 256);
    }

    #[test]
    fn merge_keeps_disjoint_ranges_sorted() {
        let local = [ev(0, 10), ev(1, 11)];
        let forwarded = [ev(3200, 12)];
        assert_eq!(
            merge_streams(&local, &forwarded).unwrap(),
            vec![ev(0, 10), ev(1, 11), ev(3200, 12)]
        );
        assert_eq!(merge_streams(&[], &[]).unwrap(), vec![]);
    }

    #[test]
    fn merge_rejects_duplicate_slot() {
        let local = [ev(5, 1)];
        let forwarded = [ev(5, 2)];
        assert_eq!(
            merge_streams(&local, &forwarded),
            Err(ProtocolError::DuplicateSlot {
                source_id: NodeId(5)
            })
        );
    }

    #[test]
    fn full_array_plans_21_chips() {
        let plan = plan_chips(65_536, 3200, true).unwrap();
        assert_eq!(plan.len(), 21);
        assert_eq!(plan[0].id_range, 0..3200);
        assert_eq!(plan[20].id_range, 64_000..65_536);
        // Ranges partition the id space contiguously.
        for pair in plan.windows(2) {
            assert_eq!(pair[0].id_range.end, pair[1].id_range.start);
        }
    }

    #[test]
    fn single_die_covers_its_own_range() {
        let plan = plan_chips(3200, 3200, true).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].id_range, 0..3200);
    }

    #[test]
    fn address_space_ceiling_is_exact() {
        assert!(plan_chips(65_536, 3200, true).is_ok());
        assert_eq!(
            plan_chips(65_537, 3200, true),
            Err(ConfigError::AddressSpaceExceeded { requested: 65_537 })
        );
    }
}
