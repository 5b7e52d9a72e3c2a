//! Future-event list ordered by (fire time, sequence number).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use slab::Slab;

use crate::domain::{NodeId, Priority};
use crate::noma_mac::TxIntent;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SyncCycleStart,
    PacketArrival(Arrival),
    SlotBoundary { station: u32 },
    TxComplete(TxDone),
    DisconnectToggle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arrival {
    /// Generates the traffic of one simulated minute.
    MinuteTick { minute: u32 },
    /// Every SN of a cluster reports its minute's packets.
    ClusterReport { ch: NodeId },
    /// One packet of one SN (per-packet jitter model).
    SnPacket { sn: NodeId, priority: Priority },
    /// An intent that failed its info or grant stage becomes eligible again.
    Requeue { station: u32, intent: TxIntent },
    /// End of a limited-forwarding detour from `from` to `to`.
    Forwarded {
        from: NodeId,
        to: NodeId,
        packet: usize,
        delivered: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxDone {
    pub station: u32,
    pub intent: TxIntent,
    pub decoded: bool,
    /// This completion frees the band and stands in for the slot boundary
    /// that would otherwise be scheduled right after it.
    pub frees_band: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub fire_at_s: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fire_at_s
            .total_cmp(&other.fire_at_s)
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Heap key compared as one integer: `order` maps the fire time onto `u64`
/// preserving `f64::total_cmp`, and sequences are unique, so `slot` never
/// decides.
#[derive(Debug, Clone, Copy)]
struct Key {
    order: u64,
    sequence: u64,
    slot: usize,
}

impl Key {
    fn rank(&self) -> u128 {
        (u128::from(self.order) << 64) | u128::from(self.sequence)
    }
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.rank() == other.rank()
    }
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn total_order_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

fn from_total_order_bits(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}

/// Min-heap of small keys; payloads live in a slab so sifting moves 24 bytes.
/// The fire time is recovered from the key.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Key>>,
    payload: Slab<EventKind>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fire_at_s: f64, kind: EventKind) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        let slot = self.payload.insert(kind);
        self.heap.push(Reverse(Key {
            order: total_order_bits(fire_at_s),
            sequence,
            slot,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(k) = self.heap.pop()?;
        Some(Event {
            fire_at_s: from_total_order_bits(k.order),
            sequence: k.sequence,
            kind: self.payload.remove(k.slot),
        })
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(k)| from_total_order_bits(k.order))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_sequence() {
        let mut q = EventQueue::new();
        q.push(2.0, EventKind::SyncCycleStart);
        q.push(1.0, EventKind::DisconnectToggle);
        q.push(1.0, EventKind::SyncCycleStart);
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| (e.fire_at_s, e.sequence)).collect();
        assert_eq!(order, vec![(1.0, 1), (1.0, 2), (2.0, 0)]);
    }

    #[test]
    fn key_bits_follow_total_order() {
        let xs = [-1.5, -0.0, 0.0, 1e-9, 1.0, 60.0, f64::INFINITY];
        for w in xs.windows(2) {
            assert!(total_order_bits(w[0]) < total_order_bits(w[1]), "{w:?}");
        }
        for x in xs {
            assert_eq!(from_total_order_bits(total_order_bits(x)).to_bits(), x.to_bits());
        }
    }
}
