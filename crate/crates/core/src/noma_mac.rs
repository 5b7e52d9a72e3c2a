//! Semi-grant-free two-user NOMA access.
//!
//! Each transmission round on a sub-band runs in two stages. First every
//! contender sends a short info packet announcing its priority and the pair
//! negotiates power levels (higher or equal priority takes PL1). Then both
//! transmit superimposed and the receiver runs SIC, strong user first.
//!
//! This module only holds the per-slot decisions. Queues, clocks and retries
//! across slots belong to the engine.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::channel::{
    bernoulli, effective_snr_db, sample_fading, DecodeLevels, LinkBudget, SicOutcome,
};
use crate::domain::{BandId, Constituent, Hop, NodeId, Packet, PacketId, Priority, ScenarioConfig, SubBandPlan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MacError {
    #[error("cannot aggregate an empty packet list")]
    EmptyAggregate,
    #[error("aggregate mixes priority classes")]
    MixedClasses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerLevel {
    Pl1,
    Pl2,
}

/// A queued transmission request at a receiving station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxIntent {
    pub node_id: NodeId,
    /// Engine handle of the packet to send. `None` for a cluster head's
    /// aggregate that is only formed when the intent is dispatched.
    pub packet: Option<usize>,
    pub priority: Priority,
    pub announced_power_level: Option<PowerLevel>,
    pub enqueued_at_s: f64,
    /// Unique tie-breaker among equal enqueue times.
    pub seq: u64,
    pub retry_count: u32,
}

impl TxIntent {
    pub fn new(node_id: NodeId, packet: Option<usize>, priority: Priority, enqueued_at_s: f64, seq: u64) -> Self {
        Self {
            node_id,
            packet,
            priority,
            announced_power_level: None,
            enqueued_at_s,
            seq,
            retry_count: 0,
        }
    }

    /// FIFO order within a class.
    pub fn fifo_cmp(&self, other: &Self) -> Ordering {
        self.enqueued_at_s
            .total_cmp(&other.enqueued_at_s)
            .then(self.seq.cmp(&other.seq))
    }
}

/// One sub-band's occupants for a slot. `weak` is absent for a solo sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAssignment {
    pub subband_id: BandId,
    pub strong: TxIntent,
    pub weak: Option<TxIntent>,
}

impl PairAssignment {
    pub fn solo(subband_id: BandId, mut intent: TxIntent) -> Self {
        intent.announced_power_level = Some(PowerLevel::Pl1);
        Self {
            subband_id,
            strong: intent,
            weak: None,
        }
    }

    pub fn occupants(&self) -> usize {
        1 + usize::from(self.weak.is_some())
    }
}

/// Higher or equal priority transmits at PL1; on a tie the first-listed wins.
pub fn negotiate_power_levels(subband_id: BandId, a: TxIntent, b: TxIntent) -> PairAssignment {
    let (mut strong, mut weak) = if a.priority >= b.priority { (a, b) } else { (b, a) };
    strong.announced_power_level = Some(PowerLevel::Pl1);
    weak.announced_power_level = Some(PowerLevel::Pl2);
    PairAssignment {
        subband_id,
        strong,
        weak: Some(weak),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Allocation {
    pub pairs: Vec<PairAssignment>,
    pub deferred: Vec<TxIntent>,
}

/// NOMA allocation: up to two intents per band.
pub fn allocate_subbands(ready: Vec<TxIntent>, plan: &SubBandPlan) -> Allocation {
    allocate_with_capacity(ready, plan, 2)
}

/// Reservation-aware allocation with `per_band` occupants per sub-band.
///
/// Urgent intents fill the urgent bands, normal intents fill the normal
/// bands, and urgent overflow may take normal bands that no normal intent
/// claimed. Within a class intents are taken FIFO by enqueue time.
pub fn allocate_with_capacity(ready: Vec<TxIntent>, plan: &SubBandPlan, per_band: usize) -> Allocation {
    let per_band = per_band.max(1);
    let (mut urgent, mut normal): (Vec<_>, Vec<_>) =
        ready.into_iter().partition(|i| i.priority == Priority::Urgent);
    urgent.sort_by(TxIntent::fifo_cmp);
    normal.sort_by(TxIntent::fifo_cmp);
    let mut urgent = urgent.into_iter().peekable();
    let mut normal = normal.into_iter().peekable();

    let mut pairs = Vec::new();
    let mut fill = |band: BandId, src: &mut std::iter::Peekable<std::vec::IntoIter<TxIntent>>| -> bool {
        let first = match src.next() {
            Some(i) => i,
            None => return false,
        };
        let second = if per_band >= 2 { src.next() } else { None };
        pairs.push(match second {
            Some(b) => negotiate_power_levels(band, first, b),
            None => PairAssignment::solo(band, first),
        });
        true
    };

    for &band in &plan.urgent_bands {
        if !fill(band, &mut urgent) {
            break;
        }
    }
    let mut idle_normal = Vec::new();
    for &band in &plan.normal_bands {
        if !fill(band, &mut normal) {
            idle_normal.push(band);
        }
    }
    for band in idle_normal {
        if !fill(band, &mut urgent) {
            break;
        }
    }

    Allocation {
        pairs,
        deferred: urgent.chain(normal).collect(),
    }
}

/// Constants of the access procedure, resolved once from the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacParams {
    pub info_bits: u64,
    pub separation_db: f64,
    pub threshold_db: f64,
    pub reliability: f64,
    /// Delay between the strong and the weak user's decode.
    pub sic_stage_s: f64,
    pub proc_delay_s: f64,
    pub max_retries: u32,
    /// Cached levels for the scenario's effective SNR.
    pub levels: DecodeLevels,
}

impl MacParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            levels: DecodeLevels::new(
                effective_snr_db(cfg.sn_count, cfg),
                cfg.power_level_separation_db,
                cfg.sic_threshold_db,
            ),
            info_bits: cfg.header_bits(),
            separation_db: cfg.power_level_separation_db,
            threshold_db: cfg.sic_threshold_db,
            reliability: cfg.reliability,
            sic_stage_s: cfg.ptp_proc_delay_s,
            proc_delay_s: cfg.ptp_proc_delay_s,
            max_retries: cfg.max_retries,
        }
    }

    /// Decode levels for `link`, from the cache when its SNR matches.
    pub fn levels_for(&self, link: &LinkBudget) -> DecodeLevels {
        let l = &self.levels;
        if l.snr_db == link.effective_snr_db
            && l.separation_db == self.separation_db
            && l.threshold_db == self.threshold_db
        {
            self.levels
        } else {
            DecodeLevels::new(link.effective_snr_db, self.separation_db, self.threshold_db)
        }
    }
}

/// Result of the info-packet stage. Each intent succeeds independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoPhase {
    pub duration_s: f64,
    pub strong_ok: bool,
    pub weak_ok: Option<bool>,
}

pub fn info_phase_duration_s(link: &LinkBudget, params: &MacParams) -> f64 {
    link.transfer_s(params.info_bits)
}

pub fn info_packet_phase<R: Rng + ?Sized>(
    pair: &PairAssignment,
    link: &LinkBudget,
    params: &MacParams,
    rng: &mut R,
) -> InfoPhase {
    let strong_ok = bernoulli(rng, params.reliability);
    let weak_ok = pair.weak.map(|_| bernoulli(rng, params.reliability));
    InfoPhase {
        duration_s: info_phase_duration_s(link, params),
        strong_ok,
        weak_ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxResult {
    pub decoded: bool,
    pub completed_at_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub strong: TxResult,
    pub weak: Option<TxResult>,
    /// When the sub-band becomes free again.
    pub band_free_at_s: f64,
}

/// Data stage of a (possibly solo) pair starting at `start_s`. `weak_bits` is
/// required exactly when the pair has a weak member.
pub fn transmit_pair<R: Rng + ?Sized>(
    start_s: f64,
    strong_bits: u64,
    weak_bits: Option<u64>,
    link: &LinkBudget,
    params: &MacParams,
    rng: &mut R,
) -> PairOutcome {
    match weak_bits {
        None => {
            let t = start_s + link.transfer_s(strong_bits);
            let g = sample_fading(rng);
            let ok = params.levels_for(link).single(g, params.reliability, rng);
            PairOutcome {
                strong: TxResult {
                    decoded: ok,
                    completed_at_s: t,
                },
                weak: None,
                band_free_at_s: t,
            }
        }
        Some(wb) => {
            let t = start_s + link.transfer_s(strong_bits.max(wb));
            let levels = params.levels_for(link);
            let (gs, gw) = (sample_fading(rng), sample_fading(rng));
            let outcome = levels.sic(&levels.reception(gs, gw), params.reliability, rng);
            let weak_done = t + params.sic_stage_s;
            PairOutcome {
                strong: TxResult {
                    decoded: outcome != SicOutcome::None,
                    completed_at_s: t,
                },
                weak: Some(TxResult {
                    decoded: outcome == SicOutcome::BothOk,
                    completed_at_s: weak_done,
                }),
                band_free_at_s: weak_done,
            }
        }
    }
}

/// Folds same-class packets into one cluster-head aggregate. A single packet
/// passes through unchanged.
pub fn aggregate_at_ch(id: PacketId, packets: Vec<Packet>, agg_factor: f64) -> Result<Packet, MacError> {
    let first = packets.first().ok_or(MacError::EmptyAggregate)?;
    let priority = first.priority;
    if packets.iter().any(|p| p.priority != priority) {
        return Err(MacError::MixedClasses);
    }
    if packets.len() == 1 {
        return Ok(packets.into_iter().next().expect("one packet"));
    }

    let payload: u64 = packets.iter().map(|p| p.payload_bits).sum();
    let total = (payload as f64 / agg_factor).round() as u64;
    let created = packets
        .iter()
        .map(|p| p.created_at_s)
        .fold(f64::INFINITY, f64::min);

    let count: usize = packets.iter().map(|p| p.original_count() as usize).sum();
    let mut constituents = Vec::with_capacity(count);
    let mut hops: Vec<Hop> = Vec::new();
    for mut p in packets {
        if p.constituents.is_empty() {
            constituents.push(Constituent {
                id: p.id,
                source_sn_id: p.source_sn_id,
                created_at_s: p.created_at_s,
            });
        } else {
            constituents.append(&mut p.constituents);
        }
        hops.append(&mut p.hop_trace);
    }
    hops.sort_by(|a, b| a.at_s.total_cmp(&b.at_s).then(a.node.cmp(&b.node)));
    hops.dedup_by_key(|h| h.node);

    Ok(Packet {
        id,
        priority,
        header_bits: total.saturating_sub(payload),
        payload_bits: payload,
        created_at_s: created,
        source_sn_id: constituents[0].source_sn_id,
        delivered_at_s: None,
        retry_count: 0,
        hop_trace: hops,
        constituents,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOutcome {
    pub delivered: bool,
    /// Time spent on the detour, all attempts included.
    pub duration_s: f64,
    pub attempts: u32,
}

/// Same-tier relay to a peer over `detour`, single-user decoded, retried up
/// to `max_retries` times.
pub fn limited_forward<R: Rng + ?Sized>(
    bits: u64,
    detour: &LinkBudget,
    params: &MacParams,
    rng: &mut R,
) -> ForwardOutcome {
    let per_attempt = detour.transfer_s(bits);
    let mut attempts = 0;
    while attempts <= params.max_retries {
        attempts += 1;
        let g = sample_fading(rng);
        if params.levels_for(detour).single(g, params.reliability, rng) {
            return ForwardOutcome {
                delivered: true,
                duration_s: per_attempt * f64::from(attempts),
                attempts,
            };
        }
    }
    ForwardOutcome {
        delivered: false,
        duration_s: per_attempt * f64::from(attempts),
        attempts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Split, Tier};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn intent(seq: u64, priority: Priority) -> TxIntent {
        TxIntent::new(NodeId(seq as u32), Some(seq as usize), priority, seq as f64 * 1e-3, seq)
    }

    fn plan(u: u32, n: u32) -> SubBandPlan {
        SubBandPlan::from_split(Tier::Ch, Split::new(u, n))
    }

    #[test]
    fn power_level_rule() {
        let u = intent(1, Priority::Urgent);
        let n = intent(2, Priority::Normal);
        let p = negotiate_power_levels(BandId(0), u, n);
        assert_eq!((p.strong.seq, p.weak.unwrap().seq), (1, 2));
        let p = negotiate_power_levels(BandId(0), n, u);
        assert_eq!((p.strong.seq, p.weak.unwrap().seq), (1, 2));
        assert_eq!(p.strong.announced_power_level, Some(PowerLevel::Pl1));
        let n2 = intent(3, Priority::Normal);
        let p = negotiate_power_levels(BandId(0), n, n2);
        assert_eq!(p.strong.seq, 2);
    }

    #[test]
    fn allocation_counting_examples() {
        let mut ready: Vec<_> = (0..8).map(|i| intent(i, Priority::Urgent)).collect();
        ready.extend((8..10).map(|i| intent(i, Priority::Normal)));
        let a = allocate_subbands(ready, &plan(4, 1));
        assert_eq!(a.pairs.len(), 5);
        assert!(a.deferred.is_empty());
        assert_eq!(a.pairs[4].subband_id, BandId(4));
        assert_eq!(a.pairs[4].strong.priority, Priority::Normal);

        assert_eq!(allocate_subbands(Vec::new(), &plan(4, 1)), Allocation::default());

        let ready: Vec<_> = (0..12).map(|i| intent(i, Priority::Urgent)).collect();
        let a = allocate_subbands(ready, &plan(4, 1));
        assert_eq!(a.pairs.len(), 5);
        assert_eq!(a.pairs[4].subband_id, BandId(4));
        assert_eq!(a.deferred.iter().map(|i| i.seq).collect::<Vec<_>>(), vec![10, 11]);
    }

    #[test]
    fn info_phase_duration_at_sn_tier() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        let d = info_phase_duration_s(&link, &MacParams::from_config(&cfg));
        // 64 bits at 1 Mb/s plus 15 m of propagation (0.05 us).
        assert!((d - (64e-6 + 15.0 / 3e8)).abs() < 1e-15);
        assert!((d - 64.05e-6).abs() < 1e-15);
    }

    #[test]
    fn pair_completion_times() {
        let cfg = ScenarioConfig {
            reliability: 1.0,
            base_snr_db: 60.0,
            ..Default::default()
        };
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        let params = MacParams::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = transmit_pair(0.0, 1024, Some(1024), &link, &params, &mut rng);
        assert!((out.strong.completed_at_s - 1024.05e-6).abs() < 1e-12);
        let weak = out.weak.unwrap();
        assert!((weak.completed_at_s - 1034.05e-6).abs() < 1e-12);
        assert_eq!(out.band_free_at_s, weak.completed_at_s);

        let solo = transmit_pair(0.0, 1024, None, &link, &params, &mut rng);
        assert_eq!(solo.band_free_at_s, solo.strong.completed_at_s);
        assert!(solo.weak.is_none());
    }

    #[test]
    fn aggregation_sizes() {
        let pk = |i: u64| Packet::new(PacketId(i), Priority::Urgent, 64, 960, i as f64, NodeId(i as u32));
        let agg = aggregate_at_ch(PacketId(100), (0..10).map(pk).collect(), 0.6).unwrap();
        assert_eq!(agg.payload_bits, 9600);
        assert_eq!(agg.total_bits(), 16000);
        assert_eq!(agg.created_at_s, 0.0);
        assert_eq!(agg.original_count(), 10);

        let single = aggregate_at_ch(PacketId(100), vec![pk(3)], 0.6).unwrap();
        assert_eq!(single, pk(3));

        let ident = aggregate_at_ch(PacketId(100), vec![pk(0), pk(1)], 1.0).unwrap();
        assert_eq!(ident.total_bits(), 240 * 8);

        assert_eq!(aggregate_at_ch(PacketId(1), Vec::new(), 0.6), Err(MacError::EmptyAggregate));
    }

    #[test]
    fn forward_detour_time() {
        let cfg = ScenarioConfig {
            reliability: 1.0,
            base_snr_db: 60.0,
            ..Default::default()
        };
        let link = LinkBudget::into_tier(Tier::Ap, &cfg).unwrap();
        let params = MacParams::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = limited_forward(16_000, &link, &params, &mut rng);
        assert!(out.delivered);
        assert_eq!(out.attempts, 1);
        assert!((out.duration_s - (1.6e-3 + 20.0 / 3e8)).abs() < 1e-15);
    }

    fn arb_intents() -> impl Strategy<Value = Vec<TxIntent>> {
        prop::collection::vec((any::<bool>(), 0u8..6), 0..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (urgent, t))| {
                    let p = if urgent { Priority::Urgent } else { Priority::Normal };
                    TxIntent::new(NodeId(k as u32), Some(k), p, f64::from(t), k as u64)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn allocation_invariants(ready in arb_intents(), u in 0u32..6, n in 0u32..6, per in 1usize..3) {
            let plan = plan(u, n);
            let total = ready.len();
            let a = allocate_with_capacity(ready.clone(), &plan, per);
            let placed: usize = a.pairs.iter().map(PairAssignment::occupants).sum();
            prop_assert_eq!(placed + a.deferred.len(), total);
            let mut bands: Vec<_> = a.pairs.iter().map(|p| p.subband_id).collect();
            bands.sort();
            bands.dedup();
            prop_assert_eq!(bands.len(), a.pairs.len());
            for p in &a.pairs {
                prop_assert!(p.occupants() <= per);
                if let Some(w) = p.weak {
                    prop_assert!(p.strong.priority >= w.priority);
                }
                if plan.urgent_bands.contains(&p.subband_id) {
                    prop_assert_eq!(p.strong.priority, Priority::Urgent);
                }
            }
            // An urgent intent is deferred only when every urgent band is full.
            if a.deferred.iter().any(|i| i.priority == Priority::Urgent) {
                let on_urgent: usize = a.pairs.iter()
                    .filter(|p| plan.urgent_bands.contains(&p.subband_id))
                    .map(PairAssignment::occupants).sum();
                prop_assert_eq!(on_urgent, plan.urgent_bands.len() * per);
            }
            let mut rev = ready;
            rev.reverse();
            prop_assert_eq!(allocate_with_capacity(rev, &plan, per), a);
        }
    }
}
