//! Discrete-event core.
//!
//! Every receiving node (CH, AP, CBS) runs a station with one server per
//! sub-band and a FIFO queue per priority class. A slot boundary fires
//! whenever a band goes idle or work arrives at an idle station; it hands
//! the idle bands to the access scheme. Sync cycles are computed at each
//! cycle start and only feed the sync statistics.
//!
//! Data path: SN packets queue at their CH. A CH keeps one upstream intent
//! per class and builds the aggregate from its buffer when that intent wins
//! a band. APs forward without aggregating; the CBS is the sink. When a CH or
//! AP loses its upstream link for a cycle its data detours through a
//! same-tier peer.

pub mod event;
pub mod metrics;
pub mod seeds;
pub mod sweep;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use slab::Slab;
use thiserror::Error;

use crate::channel::{bernoulli, ChannelError, LinkBudget};
use crate::domain::{
    build_topology, ArrivalModel, BandId, ConfigError, LinkState, NodeId, Packet, PacketId, Priority,
    ScenarioConfig, Scheme, SubBandPlan, Tier, Topology,
};
use crate::noma_mac::{
    aggregate_at_ch, info_packet_phase, limited_forward, negotiate_power_levels, transmit_pair, MacParams,
    PairAssignment, TxIntent, TxResult,
};
use crate::ofdma_baseline::ofdma_transmit;
use crate::sync::{run_sync_cycle, SyncMethod};

pub use event::{Arrival, Event, EventKind, EventQueue, TxDone};
pub use metrics::{ClassStats, Delivery, InvariantLog, MetricsReport, SyncStats};
pub use seeds::{stream_rng, StreamPurpose};
pub use sweep::{job_count, sweep, sweep_in_order, SweepCell, SweepError, SweepSpec};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replication index; selects the random streams.
    pub replication: u32,
    /// Keep one [`Delivery`] per original packet.
    pub record_deliveries: bool,
    /// Record per-hop arrival times on packets.
    pub trace_hops: bool,
}

/// Runs replication 0 of `cfg`.
pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport, EngineError> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<MetricsReport, EngineError> {
    cfg.validate()?;
    let topo = build_topology(cfg)?;
    let mut sim = Sim::new(cfg, &topo, *opts)?;
    sim.run()?;
    Ok(sim.finish())
}

/// Creation-to-delivery time of a delivered packet.
pub fn end_to_end_delay(packet: &Packet) -> Option<f64> {
    packet.delivered_at_s.map(|d| d - packet.created_at_s)
}

/// FIFO by (enqueue time, seq). Fresh intents append; a retry keeps its
/// original enqueue time and is inserted in order.
#[derive(Debug, Default)]
struct IntentQueue(VecDeque<TxIntent>);

impl IntentQueue {
    fn push(&mut self, intent: TxIntent) {
        match (self.0.front(), self.0.back()) {
            (_, Some(last)) if last.fifo_cmp(&intent).is_le() => self.0.push_back(intent),
            // Retries are usually older than everything still queued.
            (Some(first), _) if first.fifo_cmp(&intent).is_gt() => self.0.push_front(intent),
            (Some(_), _) => {
                // The second retry of a failed pair lands right behind the first.
                if self.0.get(1).is_some_and(|x| x.fifo_cmp(&intent).is_gt()) {
                    let first = self.0.pop_front().expect("non-empty");
                    self.0.push_front(intent);
                    self.0.push_front(first);
                    return;
                }
                let pos = self.0.partition_point(|x| x.fifo_cmp(&intent).is_lt());
                self.0.insert(pos, intent);
            }
            (None, _) => self.0.push_back(intent),
        }
    }

    fn pop(&mut self) -> Option<TxIntent> {
        self.0.pop_front()
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

struct Station {
    plan: SubBandPlan,
    link: LinkBudget,
    band_free_at: Vec<f64>,
    queues: [IntentQueue; 2],
    /// Times of slot boundaries already scheduled; one per instant suffices
    /// since a boundary serves every band idle at that time.
    pending: Vec<f64>,
}

impl Station {
    fn has_work(&self) -> bool {
        self.queues.iter().any(|q| !q.is_empty())
    }

    fn has_idle_band(&self, now: f64) -> bool {
        self.band_free_at.iter().any(|&f| f <= now)
    }
}

#[derive(Default)]
struct ChState {
    buffer: [Vec<usize>; 2],
    outstanding: [bool; 2],
    /// The CH's own aggregate currently on its way up.
    inflight: [Option<usize>; 2],
    held: [bool; 2],
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    topo: &'a Topology,
    opts: RunOptions,
    params: MacParams,
    per_band: usize,
    events: EventQueue,
    now: f64,
    horizon: f64,
    stations: Vec<Station>,
    packets: Slab<Packet>,
    next_packet_id: u64,
    next_seq: u64,
    first_ch: u32,
    chs: Vec<ChState>,
    ap_held: Vec<Vec<usize>>,
    links: LinkState,
    ch_detour: LinkBudget,
    ap_detour: LinkBudget,
    sync_rng: ChaCha8Rng,
    rng: ChaCha8Rng,
    report: MetricsReport,
    pair_buf: Vec<PairAssignment>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, topo: &'a Topology, opts: RunOptions) -> Result<Self, EngineError> {
        let station_count = 1 + topo.aps().len() + topo.chs().len();
        let mut stations = Vec::with_capacity(station_count);
        for id in 0..station_count {
            let tier = topo.tier(NodeId(id as u32));
            let split = match tier {
                Tier::Cbs => cfg.split_cbs,
                Tier::Ap => cfg.split_ap,
                _ => cfg.split_ch,
            };
            let plan = SubBandPlan::from_split(tier, split);
            stations.push(Station {
                band_free_at: vec![0.0; plan.band_count()],
                plan,
                link: LinkBudget::into_tier(tier, cfg)?,
                queues: [IntentQueue::default(), IntentQueue::default()],
                pending: Vec::new(),
            });
        }
        let ch_link = LinkBudget::into_tier(Tier::Ap, cfg)?;
        let ap_link = LinkBudget::into_tier(Tier::Cbs, cfg)?;
        Ok(Self {
            cfg,
            topo,
            opts,
            params: MacParams::from_config(cfg),
            per_band: match cfg.scheme {
                Scheme::TsnIot => 2,
                Scheme::Ofdma => 1,
            },
            events: EventQueue::new(),
            now: 0.0,
            horizon: cfg.horizon_s(),
            stations,
            packets: Slab::new(),
            next_packet_id: 0,
            next_seq: 0,
            first_ch: topo.chs()[0].0,
            chs: (0..topo.chs().len()).map(|_| ChState::default()).collect(),
            ap_held: vec![Vec::new(); topo.aps().len()],
            links: LinkState::all_up(topo.len()),
            ch_detour: ch_link.detour(cfg.dist_ch_ap_m, cfg)?,
            ap_detour: ap_link.detour(cfg.dist_ap_cbs_m, cfg)?,
            sync_rng: stream_rng(cfg, opts.replication, StreamPurpose::Sync),
            rng: stream_rng(cfg, opts.replication, StreamPurpose::Traffic),
            report: MetricsReport::empty(cfg.scheme, cfg.sn_count, cfg.split_ch, cfg.seed, cfg.sim_minutes),
            pair_buf: Vec::new(),
        })
    }

    fn schedule(&mut self, at: f64, kind: EventKind) {
        if at < self.now {
            self.report.invariants.causality_violations += 1;
        }
        self.events.push(at, kind);
    }

    fn run(&mut self) -> Result<(), EngineError> {
        if self.horizon > 0.0 {
            self.schedule(0.0, EventKind::DisconnectToggle);
            self.schedule(0.0, EventKind::SyncCycleStart);
            if self.cfg.pkts_per_min_urgent + self.cfg.pkts_per_min_normal > 0 {
                self.schedule(0.0, EventKind::PacketArrival(Arrival::MinuteTick { minute: 0 }));
            }
        }
        while let Some(ev) = self.events.pop() {
            if ev.fire_at_s >= self.horizon {
                break;
            }
            if ev.fire_at_s < self.now {
                self.report.invariants.clock_regressions += 1;
            }
            self.now = ev.fire_at_s;
            match ev.kind {
                EventKind::DisconnectToggle => self.toggle_links(),
                EventKind::SyncCycleStart => self.sync_cycle()?,
                EventKind::PacketArrival(a) => self.arrival(a),
                EventKind::SlotBoundary { station } => self.slot_boundary(station as usize),
                EventKind::TxComplete(done) => {
                    let (s, frees) = (done.station as usize, done.frees_band);
                    self.tx_complete(done);
                    if frees {
                        self.slot_boundary(s);
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> MetricsReport {
        for (_, p) in &self.packets {
            self.report.classes[p.priority.index()].in_flight += p.original_count();
        }
        for c in &self.report.classes {
            if !c.is_conserved() {
                self.report.invariants.conservation_violations += 1;
            }
        }
        self.report.replications = 1;
        self.report
    }

    // ---- sync cycles and outages ----

    fn toggle_links(&mut self) {
        let p = self.cfg.disconnect_prob;
        for &n in self.topo.aps().iter().chain(self.topo.chs()) {
            let down = bernoulli(&mut self.sync_rng, p);
            self.links.set_down(n, down);
        }
    }

    fn sync_cycle(&mut self) -> Result<(), EngineError> {
        let out = run_sync_cycle(self.topo, self.cfg, &self.links, &mut self.sync_rng)?;
        let s = &mut self.report.sync;
        s.record(out.makespan_s);
        s.ptp_nodes += out.count(SyncMethod::Ptp) as u64;
        s.distributed_nodes += out.count(SyncMethod::Distributed) as u64;
        s.failed_nodes += out.count(SyncMethod::Failed) as u64;
        self.report.invariants.spread_increases += u64::from(out.spread_increases);

        // Data held back by a double outage gets another chance.
        for l in 0..self.chs.len() {
            for p in Priority::ALL {
                if std::mem::take(&mut self.chs[l].held[p.index()]) {
                    self.ch_dispatch(NodeId(self.first_ch + l as u32), p);
                }
            }
        }
        for l in 0..self.ap_held.len() {
            for key in std::mem::take(&mut self.ap_held[l]) {
                self.ap_forward(self.topo.aps()[l], key);
            }
        }

        let next = self.now + f64::from(self.cfg.sync_cycle_min) * 60.0;
        if next < self.horizon {
            self.schedule(next, EventKind::DisconnectToggle);
            self.schedule(next, EventKind::SyncCycleStart);
        }
        Ok(())
    }

    // ---- traffic ----

    fn arrival(&mut self, a: Arrival) {
        match a {
            Arrival::MinuteTick { minute } => self.minute_tick(minute),
            Arrival::ClusterReport { ch } => {
                let topo = self.topo;
                for &sn in topo.children_of(ch) {
                    for (p, n) in [
                        (Priority::Urgent, self.cfg.pkts_per_min_urgent),
                        (Priority::Normal, self.cfg.pkts_per_min_normal),
                    ] {
                        for _ in 0..n {
                            self.new_sn_packet(sn, ch, p);
                        }
                    }
                }
                self.kick(ch.index());
            }
            Arrival::SnPacket { sn, priority } => {
                let ch = self.topo.parent_of(sn).expect("SN has a CH");
                self.new_sn_packet(sn, ch, priority);
                self.kick(ch.index());
            }
            Arrival::Requeue { station, intent } => {
                self.stations[station as usize].queues[intent.priority.index()].push(intent);
                self.kick(station as usize);
            }
            Arrival::Forwarded {
                from,
                to,
                packet,
                delivered,
            } => self.forwarded(from, to, packet, delivered),
        }
    }

    fn minute_tick(&mut self, minute: u32) {
        let start = f64::from(minute) * 60.0;
        match self.cfg.arrival_model {
            ArrivalModel::ClusterEpoch => {
                for &ch in self.topo.chs() {
                    let at = start + self.rng.random::<f64>() * 60.0;
                    self.schedule(at, EventKind::PacketArrival(Arrival::ClusterReport { ch }));
                }
            }
            ArrivalModel::Uniform => {
                for &sn in self.topo.sns() {
                    for (priority, n) in [
                        (Priority::Urgent, self.cfg.pkts_per_min_urgent),
                        (Priority::Normal, self.cfg.pkts_per_min_normal),
                    ] {
                        for _ in 0..n {
                            let at = start + self.rng.random::<f64>() * 60.0;
                            self.schedule(at, EventKind::PacketArrival(Arrival::SnPacket { sn, priority }));
                        }
                    }
                }
            }
        }
        if minute + 1 < self.cfg.sim_minutes {
            self.schedule(
                start + 60.0,
                EventKind::PacketArrival(Arrival::MinuteTick { minute: minute + 1 }),
            );
        }
    }

    fn new_sn_packet(&mut self, sn: NodeId, ch: NodeId, priority: Priority) {
        let id = self.fresh_packet_id();
        let make = if self.opts.trace_hops { Packet::new } else { Packet::untraced };
        let pkt = make(id, priority, self.cfg.header_bits(), self.cfg.payload_bits(), self.now, sn);
        let key = self.packets.insert(pkt);
        self.report.classes[priority.index()].generated += 1;
        let intent = TxIntent::new(sn, Some(key), priority, self.now, self.fresh_seq());
        self.stations[ch.index()].queues[priority.index()].push(intent);
    }

    fn fresh_packet_id(&mut self) -> PacketId {
        self.next_packet_id += 1;
        PacketId(self.next_packet_id)
    }

    fn fresh_seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq
    }

    fn enqueue(&mut self, station: usize, sender: NodeId, key: Option<usize>, priority: Priority) {
        let intent = TxIntent::new(sender, key, priority, self.now, self.fresh_seq());
        self.stations[station].queues[priority.index()].push(intent);
        self.kick(station);
    }

    /// Schedules an immediate slot boundary if work can start now.
    fn kick(&mut self, station: usize) {
        let now = self.now;
        let st = &self.stations[station];
        if st.has_work() && st.has_idle_band(now) {
            self.schedule_boundary(station, now);
        }
    }

    fn schedule_boundary(&mut self, station: usize, at: f64) {
        let pending = &mut self.stations[station].pending;
        if !pending.contains(&at) {
            pending.push(at);
            self.schedule(at, EventKind::SlotBoundary { station: station as u32 });
        }
    }

    // ---- access ----

    fn slot_boundary(&mut self, s: usize) {
        let now = self.now;
        let per = self.per_band;
        let st = &mut self.stations[s];
        st.pending.retain(|&t| t != now);
        if !st.has_work() {
            return;
        }
        let mut pairs = std::mem::take(&mut self.pair_buf);
        fill_idle_bands(&mut st.queues, &st.plan, &st.band_free_at, now, per, &mut pairs);
        for pair in pairs.drain(..) {
            self.start_pair(s, pair);
        }
        self.pair_buf = pairs;
    }

    fn start_pair(&mut self, s: usize, mut pair: PairAssignment) {
        let now = self.now;
        let band = pair.subband_id.0 as usize;
        let occ = pair.occupants() as u32;
        let inv = &mut self.report.invariants;
        inv.max_band_occupancy = inv.max_band_occupancy.max(occ);
        if occ as usize > self.per_band || self.stations[s].band_free_at[band] > now {
            inv.occupancy_violations += 1;
        }

        pair.strong.packet = Some(self.resolve_packet(&pair.strong));
        if let Some(w) = pair.weak.as_mut() {
            let key = self.resolve_packet(w);
            w.packet = Some(key);
        }
        let link = self.stations[s].link;
        let bits = |sim: &Self, i: &TxIntent| sim.packets[i.packet.expect("resolved")].total_bits();

        let (free_at, merged) = match self.cfg.scheme {
            Scheme::TsnIot => {
                let info = info_packet_phase(&pair, &link, &self.params, &mut self.rng);
                let t1 = now + info.duration_s;
                let mut survivors = [pair.strong; 2];
                let mut n = 0;
                for (intent, ok) in [(Some(pair.strong), Some(info.strong_ok)), (pair.weak, info.weak_ok)] {
                    let (Some(intent), Some(ok)) = (intent, ok) else { continue };
                    if ok {
                        survivors[n] = intent;
                        n += 1;
                    } else {
                        self.fail_attempt(s, intent, Some(t1));
                    }
                }
                match survivors[..n] {
                    [] => (t1, false),
                    [a] => {
                        let out = transmit_pair(t1, bits(self, &a), None, &link, &self.params, &mut self.rng);
                        self.schedule_last_done(s, a, out.strong);
                        (out.band_free_at_s, true)
                    }
                    [a, b] => {
                        let (ba, bb) = (bits(self, &a), bits(self, &b));
                        let out = transmit_pair(t1, ba, Some(bb), &link, &self.params, &mut self.rng);
                        let weak = out.weak.expect("pair outcome");
                        if out.strong.decoded && weak.decoded {
                            // `a` holds PL1, so it never has the lower priority.
                            let inv = &mut self.report.invariants;
                            inv.pairs_checked += 1;
                            if a.priority < b.priority || out.strong.completed_at_s > weak.completed_at_s {
                                inv.priority_order_violations += 1;
                            }
                        }
                        self.schedule_done(s, a, out.strong, false);
                        self.schedule_last_done(s, b, weak);
                        (out.band_free_at_s, true)
                    }
                    _ => unreachable!("at most two occupants"),
                }
            }
            Scheme::Ofdma => {
                let a = pair.strong;
                let out = ofdma_transmit(now, bits(self, &a), &link, self.cfg, &self.params, &mut self.rng);
                match out.data {
                    Some(data) => {
                        self.schedule_last_done(s, a, data);
                        (out.band_free_at_s, true)
                    }
                    None => {
                        self.fail_attempt(s, a, Some(out.band_free_at_s));
                        (out.band_free_at_s, false)
                    }
                }
            }
        };
        self.stations[s].band_free_at[band] = free_at;
        if !merged {
            self.schedule_boundary(s, free_at);
        }
    }

    /// Slab key of the intent's packet, building a CH aggregate if needed.
    fn resolve_packet(&mut self, intent: &TxIntent) -> usize {
        match intent.packet {
            Some(k) => k,
            None => self.form_aggregate(intent.node_id, intent.priority),
        }
    }

    fn form_aggregate(&mut self, ch: NodeId, p: Priority) -> usize {
        let l = (ch.0 - self.first_ch) as usize;
        let packets = &mut self.packets;
        let parts: Vec<Packet> = self.chs[l].buffer[p.index()]
            .drain(..)
            .map(|k| packets.remove(k))
            .collect();
        let id = self.fresh_packet_id();
        let agg = aggregate_at_ch(id, parts, self.cfg.agg_factor).expect("CH buffer holds one class");
        let key = self.packets.insert(agg);
        let st = &mut self.chs[l];
        st.outstanding[p.index()] = true;
        st.inflight[p.index()] = Some(key);
        key
    }

    fn schedule_done(&mut self, s: usize, intent: TxIntent, r: TxResult, frees_band: bool) {
        self.schedule(
            r.completed_at_s,
            EventKind::TxComplete(TxDone {
                station: s as u32,
                intent,
                decoded: r.decoded,
                frees_band,
            }),
        );
    }

    /// Schedules the completion that ends the band's occupancy and marks the
    /// band busy until then. The completion doubles as the slot boundary at
    /// that instant unless one is already pending.
    fn schedule_last_done(&mut self, s: usize, intent: TxIntent, r: TxResult) {
        let at = r.completed_at_s;
        let pending = &mut self.stations[s].pending;
        let frees_band = !pending.contains(&at);
        if frees_band {
            pending.push(at);
        }
        self.schedule_done(s, intent, r, frees_band);
    }

    /// Charges one failed attempt; the intent retries at `retry_at` (or now)
    /// unless its budget is spent.
    fn fail_attempt(&mut self, s: usize, mut intent: TxIntent, retry_at: Option<f64>) {
        let key = intent.packet.expect("resolved");
        self.report.classes[intent.priority.index()].retries += 1;
        intent.retry_count += 1;
        if intent.retry_count > self.params.max_retries {
            self.settle_ch(intent.node_id, key, intent.priority);
            self.lose(key);
            self.redispatch(intent.node_id, intent.priority);
            return;
        }
        if let Some(p) = self.packets.get_mut(key) {
            p.retry_count = intent.retry_count;
        }
        match retry_at {
            Some(at) if at > self.now => self.schedule(
                at,
                EventKind::PacketArrival(Arrival::Requeue {
                    station: s as u32,
                    intent,
                }),
            ),
            _ => {
                self.stations[s].queues[intent.priority.index()].push(intent);
                self.kick(s);
            }
        }
    }

    fn lose(&mut self, key: usize) {
        let p = self.packets.remove(key);
        self.report.classes[p.priority.index()].lost += p.original_count();
    }

    /// Clears the CH's outstanding slot if `key` is its own aggregate.
    /// Returns whether it was.
    fn settle_ch(&mut self, node: NodeId, key: usize, p: Priority) -> bool {
        if self.topo.tier(node) != Tier::Ch {
            return false;
        }
        let st = &mut self.chs[(node.0 - self.first_ch) as usize];
        if st.inflight[p.index()] == Some(key) {
            st.inflight[p.index()] = None;
            st.outstanding[p.index()] = false;
            true
        } else {
            false
        }
    }

    fn redispatch(&mut self, node: NodeId, p: Priority) {
        if self.topo.tier(node) == Tier::Ch {
            self.ch_dispatch(node, p);
        }
    }

    fn tx_complete(&mut self, done: TxDone) {
        let s = done.station as usize;
        let intent = done.intent;
        if !done.decoded {
            self.fail_attempt(s, intent, None);
            return;
        }
        let key = intent.packet.expect("resolved");
        let receiver = NodeId(s as u32);
        {
            let pkt = &mut self.packets[key];
            pkt.retry_count = 0;
            if self.opts.trace_hops {
                pkt.record_hop(receiver, self.now);
            }
        }
        match self.topo.tier(receiver) {
            Tier::Ch => {
                let l = (receiver.0 - self.first_ch) as usize;
                self.chs[l].buffer[intent.priority.index()].push(key);
                self.ch_dispatch(receiver, intent.priority);
            }
            Tier::Ap => {
                let own = self.settle_ch(intent.node_id, key, intent.priority);
                self.ap_forward(receiver, key);
                if own {
                    self.ch_dispatch(intent.node_id, intent.priority);
                }
            }
            Tier::Cbs => self.deliver(key),
            Tier::Sn => unreachable!("SNs do not receive"),
        }
    }

    fn deliver(&mut self, key: usize) {
        let mut pkt = self.packets.remove(key);
        pkt.delivered_at_s = Some(self.now);
        let now = self.now;
        let record = self.opts.record_deliveries;
        let c = &mut self.report.classes[pkt.priority.index()];
        let mut push = |id: PacketId, src: NodeId, created: f64, out: &mut Vec<Delivery>| {
            let ns = ((now - created) * 1e9).round() as u64;
            c.delivered += 1;
            c.delay_sum_ns += u128::from(ns);
            c.delay_max_ns = c.delay_max_ns.max(ns);
            if record {
                out.push(Delivery {
                    id,
                    priority: pkt.priority,
                    source_sn_id: src,
                    created_at_s: created,
                    delivered_at_s: now,
                });
            }
        };
        let out = &mut self.report.deliveries;
        if pkt.constituents.is_empty() {
            push(pkt.id, pkt.source_sn_id, pkt.created_at_s, out);
        } else {
            for k in &pkt.constituents {
                push(k.id, k.source_sn_id, k.created_at_s, out);
            }
        }
    }

    // ---- upstream dispatch and limited forwarding ----

    fn ch_dispatch(&mut self, ch: NodeId, p: Priority) {
        let l = (ch.0 - self.first_ch) as usize;
        let st = &self.chs[l];
        if st.outstanding[p.index()] || st.buffer[p.index()].is_empty() {
            return;
        }
        if !self.links.is_down(ch) {
            self.chs[l].outstanding[p.index()] = true;
            let ap = self.topo.parent_of(ch).expect("CH has an AP");
            self.enqueue(ap.index(), ch, None, p);
            return;
        }
        match self.topo.forward_peer(ch) {
            Some(peer) if !self.links.is_down(peer) => {
                let key = self.form_aggregate(ch, p);
                let bits = self.packets[key].total_bits();
                let out = limited_forward(bits, &self.ch_detour, &self.params, &mut self.rng);
                self.report.forwarded += 1;
                self.schedule(
                    self.now + out.duration_s,
                    EventKind::PacketArrival(Arrival::Forwarded {
                        from: ch,
                        to: peer,
                        packet: key,
                        delivered: out.delivered,
                    }),
                );
            }
            _ => {
                if !self.chs[l].held[p.index()] {
                    self.chs[l].held[p.index()] = true;
                    self.report.held += 1;
                }
            }
        }
    }

    fn ap_forward(&mut self, ap: NodeId, key: usize) {
        let p = self.packets[key].priority;
        if !self.links.is_down(ap) {
            self.enqueue(0, ap, Some(key), p);
            return;
        }
        match self.topo.forward_peer(ap) {
            Some(peer) if !self.links.is_down(peer) => {
                let bits = self.packets[key].total_bits();
                let out = limited_forward(bits, &self.ap_detour, &self.params, &mut self.rng);
                self.report.forwarded += 1;
                self.schedule(
                    self.now + out.duration_s,
                    EventKind::PacketArrival(Arrival::Forwarded {
                        from: ap,
                        to: peer,
                        packet: key,
                        delivered: out.delivered,
                    }),
                );
            }
            _ => {
                self.ap_held[(ap.0 - 1) as usize].push(key);
                self.report.held += 1;
            }
        }
    }

    fn forwarded(&mut self, from: NodeId, to: NodeId, key: usize, delivered: bool) {
        let p = self.packets[key].priority;
        let own = self.settle_ch(from, key, p);
        if delivered {
            if self.opts.trace_hops {
                self.packets[key].record_hop(to, self.now);
            }
            let up = self.topo.parent_of(to).expect("relay peer has a parent");
            self.enqueue(up.index(), to, Some(key), p);
        } else {
            self.lose(key);
        }
        if own {
            self.ch_dispatch(from, p);
        }
    }
}

type ClassQueues = [IntentQueue; 2];

/// Pops the FIFO heads of both classes onto the bands idle at `now`, with the
/// same placement as [`crate::noma_mac::allocate_with_capacity`]; unplaced
/// intents simply stay queued.
fn fill_idle_bands(
    queues: &mut ClassQueues,
    plan: &SubBandPlan,
    band_free_at: &[f64],
    now: f64,
    per: usize,
    out: &mut Vec<PairAssignment>,
) {
    let idle = |b: &BandId| band_free_at[b.0 as usize] <= now;
    let fill = |band: BandId, q: &mut IntentQueue, out: &mut Vec<PairAssignment>| -> bool {
        let Some(first) = q.pop() else {
            return false;
        };
        let second = if per >= 2 { q.pop() } else { None };
        out.push(match second {
            Some(b) => negotiate_power_levels(band, first, b),
            None => PairAssignment::solo(band, first),
        });
        true
    };
    let [urgent, normal] = queues;
    for &band in plan.urgent_bands.iter().filter(|b| idle(b)) {
        if !fill(band, urgent, out) {
            break;
        }
    }
    let first_normal = out.len();
    for &band in plan.normal_bands.iter().filter(|b| idle(b)) {
        fill(band, normal, out);
    }
    for &band in plan.normal_bands.iter().filter(|b| idle(b)) {
        if out[first_normal..].iter().any(|p| p.subband_id == band) {
            continue;
        }
        if !fill(band, urgent, out) {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sn: u32, minutes: u32) -> ScenarioConfig {
        ScenarioConfig {
            sn_count: sn,
            sim_minutes: minutes,
            ..Default::default()
        }
    }

    #[test]
    fn one_minute_generates_twenty_per_sn() {
        let r = run(&small(400, 1)).unwrap();
        assert_eq!(r.total_generated(), 8000);
        assert!(r.invariants.is_clean(), "{:?}", r.invariants);
    }

    #[test]
    fn empty_horizon() {
        let r = run(&small(400, 0)).unwrap();
        assert_eq!(r.total_generated(), 0);
        assert_eq!(r.sync.cycles(), 0);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = small(400, 12);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let cfg = ScenarioConfig {
            sn_count: 401,
            ..Default::default()
        };
        assert!(matches!(run(&cfg), Err(EngineError::Config(_))));
    }

    #[test]
    fn ofdma_uses_one_user_per_band() {
        let cfg = ScenarioConfig {
            scheme: Scheme::Ofdma,
            ..small(400, 5)
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.invariants.max_band_occupancy, 1);
        assert!(r.invariants.is_clean(), "{:?}", r.invariants);
    }

    #[test]
    fn outages_exercise_forwarding_and_conserve_packets() {
        let cfg = ScenarioConfig {
            disconnect_prob: 0.3,
            sync_cycle_min: 1,
            ..small(400, 20)
        };
        let r = run_with(
            &cfg,
            &RunOptions {
                trace_hops: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.forwarded > 0);
        assert!(r.held > 0);
        assert!(r.invariants.is_clean(), "{:?}", r.invariants);
        assert!(r.sync.distributed_nodes > 0);
    }

    fn intent(seq: u64, urgent: bool, t: f64) -> TxIntent {
        let p = if urgent { Priority::Urgent } else { Priority::Normal };
        TxIntent::new(NodeId(100 + seq as u32), Some(seq as usize), p, t, seq)
    }

    proptest::proptest! {
        #[test]
        fn queue_fill_matches_list_allocator(
            items in proptest::collection::vec((proptest::bool::ANY, 0u8..4), 0..24),
            busy in proptest::collection::vec(proptest::bool::ANY, 5),
            urgent_bands in 0u32..=5,
            per in 1usize..=2,
        ) {
            let plan = SubBandPlan::from_split(Tier::Ch, crate::domain::Split::new(urgent_bands, 5 - urgent_bands));
            let free: Vec<f64> = busy.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let ready: Vec<TxIntent> =
                items.iter().enumerate().map(|(k, &(u, t))| intent(k as u64, u, f64::from(t))).collect();

            let mut queues: ClassQueues = [IntentQueue::default(), IntentQueue::default()];
            for i in &ready {
                queues[i.priority.index()].push(*i);
            }
            let mut got = Vec::new();
            fill_idle_bands(&mut queues, &plan, &free, 0.0, per, &mut got);

            let idle: Vec<BandId> = plan.urgent_bands.iter().copied().filter(|b| !busy[b.0 as usize]).collect();
            let idle_n: Vec<BandId> = plan.normal_bands.iter().copied().filter(|b| !busy[b.0 as usize]).collect();
            let restricted = SubBandPlan { tier: Tier::Ch, urgent_bands: idle, normal_bands: idle_n };
            let want = crate::noma_mac::allocate_with_capacity(ready, &restricted, per);
            proptest::prop_assert_eq!(&got, &want.pairs);
            let left = queues[0].0.len() + queues[1].0.len();
            proptest::prop_assert_eq!(left, want.deferred.len());
        }
    }

    #[test]
    fn delay_of_a_built_packet() {
        let mut p = Packet::new(PacketId(1), Priority::Urgent, 64, 960, 2.0, NodeId(9));
        assert_eq!(end_to_end_delay(&p), None);
        p.delivered_at_s = Some(2.5);
        assert_eq!(end_to_end_delay(&p), Some(0.5));
    }
}
