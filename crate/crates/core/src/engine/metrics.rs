//! Per-replication statistics and their merge.
//!
//! Every field merges by addition, maximum or sorted union, so merging is
//! associative and commutative and a sweep can combine replications in any
//! order. Delay sums are kept in integer nanoseconds for the same reason.

use crate::domain::{NodeId, PacketId, Priority, Scheme, Split};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassStats {
    /// Original SN packets created.
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    /// Still inside the network at the horizon.
    pub in_flight: u64,
    /// Failed access or decode attempts (info, grant or data stage).
    pub retries: u64,
    pub delay_sum_ns: u128,
    pub delay_max_ns: u64,
}

impl ClassStats {
    pub fn mean_delay_s(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum_ns as f64 / self.delivered as f64 * 1e-9)
    }

    /// Lost over resolved (delivered or lost); in-flight packets excluded.
    pub fn loss_rate(&self) -> f64 {
        let resolved = self.delivered + self.lost;
        if resolved == 0 {
            0.0
        } else {
            self.lost as f64 / resolved as f64
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.lost + self.in_flight
    }

    fn merge(&mut self, o: &ClassStats) {
        self.generated += o.generated;
        self.delivered += o.delivered;
        self.lost += o.lost;
        self.in_flight += o.in_flight;
        self.retries += o.retries;
        self.delay_sum_ns += o.delay_sum_ns;
        self.delay_max_ns = self.delay_max_ns.max(o.delay_max_ns);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncStats {
    /// Per-cycle makespans in seconds, ascending.
    pub samples_s: Vec<f64>,
    pub ptp_nodes: u64,
    pub distributed_nodes: u64,
    pub failed_nodes: u64,
}

impl SyncStats {
    pub fn record(&mut self, makespan_s: f64) {
        let pos = self.samples_s.partition_point(|&x| x.total_cmp(&makespan_s).is_le());
        self.samples_s.insert(pos, makespan_s);
    }

    pub fn cycles(&self) -> usize {
        self.samples_s.len()
    }

    pub fn mean_s(&self) -> Option<f64> {
        (!self.samples_s.is_empty()).then(|| self.samples_s.iter().sum::<f64>() / self.samples_s.len() as f64)
    }

    /// Nearest-rank percentile, `p` in (0, 100].
    pub fn percentile_s(&self, p: f64) -> Option<f64> {
        let n = self.samples_s.len();
        if n == 0 {
            return None;
        }
        let rank = ((p / 100.0) * n as f64).ceil() as usize;
        Some(self.samples_s[rank.clamp(1, n) - 1])
    }

    fn merge(&mut self, o: &SyncStats) {
        let mut all = Vec::with_capacity(self.samples_s.len() + o.samples_s.len());
        all.extend_from_slice(&self.samples_s);
        all.extend_from_slice(&o.samples_s);
        all.sort_by(f64::total_cmp);
        self.samples_s = all;
        self.ptp_nodes += o.ptp_nodes;
        self.distributed_nodes += o.distributed_nodes;
        self.failed_nodes += o.failed_nodes;
    }
}

/// Runtime checks of the model's safety properties. All counters should stay
/// zero; they are reported rather than asserted so a sweep can show them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantLog {
    pub max_band_occupancy: u32,
    /// Allocations exceeding the scheme's per-band capacity or landing on a busy band.
    pub occupancy_violations: u64,
    /// Pairs where both packets decoded.
    pub pairs_checked: u64,
    /// Decoded pairs where the PL1 packet had lower priority or completed
    /// after the PL2 packet.
    pub priority_order_violations: u64,
    pub clock_regressions: u64,
    /// Events scheduled earlier than the clock at scheduling time.
    pub causality_violations: u64,
    pub spread_increases: u64,
    /// Classes whose packet accounting did not balance.
    pub conservation_violations: u64,
}

impl InvariantLog {
    pub fn is_clean(&self) -> bool {
        self.occupancy_violations == 0
            && self.priority_order_violations == 0
            && self.clock_regressions == 0
            && self.causality_violations == 0
            && self.spread_increases == 0
            && self.conservation_violations == 0
    }

    fn merge(&mut self, o: &InvariantLog) {
        self.max_band_occupancy = self.max_band_occupancy.max(o.max_band_occupancy);
        self.occupancy_violations += o.occupancy_violations;
        self.pairs_checked += o.pairs_checked;
        self.priority_order_violations += o.priority_order_violations;
        self.clock_regressions += o.clock_regressions;
        self.causality_violations += o.causality_violations;
        self.spread_increases += o.spread_increases;
        self.conservation_violations += o.conservation_violations;
    }
}

/// One original packet reaching the CBS; kept only when requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub id: PacketId,
    pub priority: Priority,
    pub source_sn_id: NodeId,
    pub created_at_s: f64,
    pub delivered_at_s: f64,
}

impl Delivery {
    pub fn delay_s(&self) -> f64 {
        self.delivered_at_s - self.created_at_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scheme: Scheme,
    pub sn_count: u32,
    pub split_ch: Split,
    pub seed: u64,
    pub sim_minutes: u32,
    pub replications: u32,
    pub sync: SyncStats,
    /// Indexed by [`Priority::index`].
    pub classes: [ClassStats; 2],
    pub invariants: InvariantLog,
    /// Data items relayed by limited forwarding.
    pub forwarded: u64,
    /// Data items held for a later cycle because the relay peer was down too.
    pub held: u64,
    pub deliveries: Vec<Delivery>,
}

impl MetricsReport {
    pub fn empty(scheme: Scheme, sn_count: u32, split_ch: Split, seed: u64, sim_minutes: u32) -> Self {
        Self {
            scheme,
            sn_count,
            split_ch,
            seed,
            sim_minutes,
            replications: 0,
            sync: SyncStats::default(),
            classes: [ClassStats::default(); 2],
            invariants: InvariantLog::default(),
            forwarded: 0,
            held: 0,
            deliveries: Vec::new(),
        }
    }

    pub fn class(&self, p: Priority) -> &ClassStats {
        &self.classes[p.index()]
    }

    pub fn class_mut(&mut self, p: Priority) -> &mut ClassStats {
        &mut self.classes[p.index()]
    }

    pub fn total_generated(&self) -> u64 {
        self.classes.iter().map(|c| c.generated).sum()
    }

    /// Mean delay over both classes, weighted by deliveries.
    pub fn overall_mean_delay_s(&self) -> Option<f64> {
        let n: u64 = self.classes.iter().map(|c| c.delivered).sum();
        let sum: u128 = self.classes.iter().map(|c| c.delay_sum_ns).sum();
        (n > 0).then(|| sum as f64 / n as f64 * 1e-9)
    }

    /// Folds another replication of the same cell into this one.
    pub fn merge(&mut self, o: &MetricsReport) {
        self.replications += o.replications;
        self.sync.merge(&o.sync);
        for (a, b) in self.classes.iter_mut().zip(&o.classes) {
            a.merge(b);
        }
        self.invariants.merge(&o.invariants);
        self.forwarded += o.forwarded;
        self.held += o.held;
        self.deliveries.extend_from_slice(&o.deliveries);
        self.deliveries.sort_by(|a, b| {
            a.created_at_s
                .total_cmp(&b.created_at_s)
                .then(a.delivered_at_s.total_cmp(&b.delivered_at_s))
                .then(a.id.cmp(&b.id))
        });
    }
}
