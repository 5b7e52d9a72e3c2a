//! Priority-based OFDMA comparator: the same reservation and priority logic
//! as the NOMA path, but one user per sub-band, an explicit request/grant
//! handshake before each transmission and no consensus fallback for sync.

use rand::Rng;

use crate::channel::{bernoulli, sample_fading, ChannelError, LinkBudget};
use crate::domain::{BandId, LinkState, ScenarioConfig, Scheme, SubBandPlan, Topology};
use crate::noma_mac::{allocate_with_capacity, MacParams, TxIntent, TxResult};
use crate::sync::{run_sync_cycle, CycleOutcome};

/// One sub-band's single occupant for a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmaScheduleSlot {
    pub subband_id: BandId,
    pub occupant: TxIntent,
}

/// Scheduling request up, grant down: two header-sized control messages,
/// each with propagation and one processing delay.
pub fn grant_overhead_s(link: &LinkBudget, cfg: &ScenarioConfig) -> f64 {
    2.0 * (link.transfer_s(cfg.header_bits()) + cfg.ptp_proc_delay_s)
}

pub fn ofdma_allocate(ready: Vec<TxIntent>, plan: &SubBandPlan) -> (Vec<OfdmaScheduleSlot>, Vec<TxIntent>) {
    let alloc = allocate_with_capacity(ready, plan, 1);
    let slots = alloc
        .pairs
        .into_iter()
        .map(|p| OfdmaScheduleSlot {
            subband_id: p.subband_id,
            occupant: p.strong,
        })
        .collect();
    (slots, alloc.deferred)
}

/// Sequential PTP with one child per band and no distributed phase.
pub fn ofdma_sync<R: Rng + ?Sized>(
    topology: &Topology,
    cfg: &ScenarioConfig,
    links: &LinkState,
    rng: &mut R,
) -> Result<CycleOutcome, ChannelError> {
    let cfg = ScenarioConfig {
        scheme: Scheme::Ofdma,
        ..cfg.clone()
    };
    run_sync_cycle(topology, &cfg, links, rng)
}

/// Outcome of the grant stage plus, if granted, the data stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmaOutcome {
    pub granted: bool,
    pub data: Option<TxResult>,
    pub band_free_at_s: f64,
}

/// Grant handshake, then a single-user transmission of `bits`.
pub fn ofdma_transmit<R: Rng + ?Sized>(
    start_s: f64,
    bits: u64,
    link: &LinkBudget,
    cfg: &ScenarioConfig,
    params: &MacParams,
    rng: &mut R,
) -> OfdmaOutcome {
    let granted_at = start_s + grant_overhead_s(link, cfg);
    if !bernoulli(rng, params.reliability) {
        return OfdmaOutcome {
            granted: false,
            data: None,
            band_free_at_s: granted_at,
        };
    }
    let done = granted_at + link.transfer_s(bits);
    let g = sample_fading(rng);
    let decoded = params.levels_for(link).single(g, params.reliability, rng);
    OfdmaOutcome {
        granted: true,
        data: Some(TxResult {
            decoded,
            completed_at_s: done,
        }),
        band_free_at_s: done,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{db_to_linear, single_user_decode};
    use crate::domain::{build_topology, NodeId, Priority, Split, Tier};
    use crate::noma_mac::allocate_subbands;
    use crate::sync::SyncMethod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn intent(seq: u64, p: Priority) -> TxIntent {
        TxIntent::new(NodeId(seq as u32), Some(seq as usize), p, 0.0, seq)
    }

    #[test]
    fn one_user_per_band() {
        let plan = SubBandPlan::from_split(Tier::Ch, Split::new(4, 1));
        let ready: Vec<_> = (0..10).map(|i| intent(i, Priority::Urgent)).collect();
        let (slots, deferred) = ofdma_allocate(ready.clone(), &plan);
        assert_eq!((slots.len(), deferred.len()), (5, 5));
        assert!(allocate_subbands(ready, &plan).deferred.is_empty());

        let (slots, deferred) = ofdma_allocate(vec![intent(0, Priority::Normal)], &plan);
        assert_eq!((slots.len(), deferred.len()), (1, 0));

        let mut ready: Vec<_> = (0..8).map(|i| intent(i, Priority::Urgent)).collect();
        ready.extend((8..10).map(|i| intent(i, Priority::Normal)));
        let (slots, deferred) = ofdma_allocate(ready, &plan);
        let count = |v: &[TxIntent], p| v.iter().filter(|i| i.priority == p).count();
        let placed: Vec<_> = slots.iter().map(|s| s.occupant).collect();
        assert_eq!(count(&placed, Priority::Urgent), 4);
        assert_eq!(count(&placed, Priority::Normal), 1);
        assert_eq!(count(&deferred, Priority::Urgent), 4);
        assert_eq!(count(&deferred, Priority::Normal), 1);
    }

    #[test]
    fn decode_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(single_user_decode(10.0, 1.0, 3.0, 1.0, &mut rng));
        assert!(!single_user_decode(2.5, 1.0, 3.0, 1.0, &mut rng));
        assert!(db_to_linear(2.5) < db_to_linear(3.0));
    }

    #[test]
    fn zero_reliability_is_never_granted() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        let params = MacParams {
            reliability: 0.0,
            ..MacParams::from_config(&cfg)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ofdma_transmit(0.0, 1024, &link, &cfg, &params, &mut rng);
        assert!(!out.granted);
    }

    #[test]
    fn grant_overhead_at_sn_tier() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        assert!((grant_overhead_s(&link, &cfg) - 148.1e-6).abs() < 1e-14);
    }

    #[test]
    fn sync_has_no_fallback() {
        let cfg = ScenarioConfig {
            reliability: 0.5,
            ..Default::default()
        };
        let topo = build_topology(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = ofdma_sync(&topo, &cfg, &LinkState::all_up(topo.len()), &mut rng).unwrap();
        assert_eq!(out.count(SyncMethod::Distributed), 0);
        assert!(out.count(SyncMethod::Failed) > 0);
    }
}
