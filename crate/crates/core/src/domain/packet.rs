use std::cmp::Ordering;
use std::fmt;

use super::config::Split;
use super::topology::{NodeId, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Priority {
    Urgent,
    Normal,
}

impl Priority {
    pub const ALL: [Priority; 2] = [Priority::Urgent, Priority::Normal];

    pub fn index(self) -> usize {
        match self {
            Priority::Urgent => 0,
            Priority::Normal => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Urgent => "urgent",
            Priority::Normal => "normal",
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// URGENT > NORMAL.
impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |p: &Priority| match p {
            Priority::Urgent => 1,
            Priority::Normal => 0,
        };
        rank(self).cmp(&rank(other))
    }
}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub node: NodeId,
    pub at_s: f64,
}

/// An original SN packet folded into a CH aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constituent {
    pub id: PacketId,
    pub source_sn_id: NodeId,
    pub created_at_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub priority: Priority,
    pub header_bits: u64,
    pub payload_bits: u64,
    pub created_at_s: f64,
    pub source_sn_id: NodeId,
    pub delivered_at_s: Option<f64>,
    /// Failed attempts on the current hop.
    pub retry_count: u32,
    pub hop_trace: Vec<Hop>,
    /// Originals carried by an aggregate; empty for an original packet.
    pub constituents: Vec<Constituent>,
}

impl Packet {
    pub fn new(
        id: PacketId,
        priority: Priority,
        header_bits: u64,
        payload_bits: u64,
        created_at_s: f64,
        source_sn_id: NodeId,
    ) -> Self {
        Self {
            id,
            priority,
            header_bits,
            payload_bits,
            created_at_s,
            source_sn_id,
            delivered_at_s: None,
            retry_count: 0,
            hop_trace: vec![Hop {
                node: source_sn_id,
                at_s: created_at_s,
            }],
            constituents: Vec::new(),
        }
    }

    /// Like [`Packet::new`] but with an empty hop trace. The engine uses this
    /// when hop tracing is switched off.
    pub fn untraced(
        id: PacketId,
        priority: Priority,
        header_bits: u64,
        payload_bits: u64,
        created_at_s: f64,
        source_sn_id: NodeId,
    ) -> Self {
        Self {
            id,
            priority,
            header_bits,
            payload_bits,
            created_at_s,
            source_sn_id,
            delivered_at_s: None,
            retry_count: 0,
            hop_trace: Vec::new(),
            constituents: Vec::new(),
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.header_bits + self.payload_bits
    }

    pub fn is_aggregate(&self) -> bool {
        !self.constituents.is_empty()
    }

    /// Number of original SN packets this packet stands for.
    pub fn original_count(&self) -> u64 {
        if self.constituents.is_empty() {
            1
        } else {
            self.constituents.len() as u64
        }
    }

    /// Creation instants of the originals carried.
    pub fn original_created_at(&self) -> impl Iterator<Item = f64> + '_ {
        let own = self.constituents.is_empty().then_some(self.created_at_s);
        own.into_iter()
            .chain(self.constituents.iter().map(|c| c.created_at_s))
    }

    pub fn record_hop(&mut self, node: NodeId, at_s: f64) {
        self.hop_trace.push(Hop { node, at_s });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BandId(pub u32);

/// Disjoint urgent / normal sub-band sets of one receiving tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubBandPlan {
    pub tier: Tier,
    pub urgent_bands: Vec<BandId>,
    pub normal_bands: Vec<BandId>,
}

impl SubBandPlan {
    /// Bands `0..urgent` are reserved for urgent traffic, the rest for normal.
    pub fn from_split(tier: Tier, split: Split) -> Self {
        Self {
            tier,
            urgent_bands: (0..split.urgent).map(BandId).collect(),
            normal_bands: (split.urgent..split.total()).map(BandId).collect(),
        }
    }

    pub fn band_count(&self) -> usize {
        self.urgent_bands.len() + self.normal_bands.len()
    }

    pub fn is_valid(&self) -> bool {
        !self
            .urgent_bands
            .iter()
            .any(|b| self.normal_bands.contains(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urgent_outranks_normal() {
        assert!(Priority::Urgent > Priority::Normal);
        assert_eq!(Priority::Normal.cmp(&Priority::Normal), Ordering::Equal);
    }

    #[test]
    fn plan_from_split_is_disjoint_and_complete() {
        let plan = SubBandPlan::from_split(Tier::Ch, Split::new(4, 1));
        assert!(plan.is_valid());
        assert_eq!(plan.band_count(), 5);
        assert_eq!(plan.normal_bands, vec![BandId(4)]);
    }

    #[test]
    fn default_packet_is_128_bytes() {
        let p = Packet::new(PacketId(1), Priority::Normal, 64, 960, 0.0, NodeId(7));
        assert_eq!(p.total_bits(), 1024);
        assert_eq!(p.original_count(), 1);
        assert_eq!(p.original_created_at().collect::<Vec<_>>(), vec![0.0]);
    }
}
