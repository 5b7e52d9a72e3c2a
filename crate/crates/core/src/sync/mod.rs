//! Clock synchronisation per cycle.
//!
//! The primary phase runs PTP top-down one tier at a time (CBS to APs, APs to
//! CHs, CHs to SNs); a tier starts once the tier above has finished. Within a
//! tier each parent serves its children on its own sub-bands. Under TSN-IoT
//! two children share a band and the second one finishes one SIC stage per
//! PTP message later. The OFDMA baseline serves one child per band and pays a
//! request/grant handshake before every exchange.
//!
//! TSN-IoT then runs a distributed phase for the nodes PTP could not reach:
//! consensus among APs, PTP from recovered APs to their orphaned CHs,
//! consensus among CHs, PTP from recovered CHs to their orphaned SNs.

pub mod consensus;
pub mod ptp;

use rand::Rng;

use crate::channel::{ChannelError, LinkBudget};
use crate::domain::{LinkState, NodeId, ScenarioConfig, Scheme, Tier, Topology, CBS};
use crate::ofdma_baseline::grant_overhead_s;

pub use consensus::{components, ConsensusRun, ConsensusState};
pub use ptp::{ptp_exchange, ptp_exchange_duration_s, serve_children, TierService};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncMethod {
    Ptp,
    Distributed,
    Failed,
}

impl SyncMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SyncMethod::Ptp => "PTP",
            SyncMethod::Distributed => "DISTRIBUTED",
            SyncMethod::Failed => "FAILED",
        }
    }
}

/// Final outcome of one node in one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncRecord {
    pub node_id: NodeId,
    pub method: SyncMethod,
    /// Time the node itself spent in exchanges or consensus rounds.
    pub elapsed_s: f64,
    pub attempts: u32,
    /// When the node became synced, from cycle start.
    pub synced_at_s: Option<f64>,
}

impl SyncRecord {
    pub fn is_synced(&self) -> bool {
        self.method != SyncMethod::Failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    /// One record per non-CBS node, in id order.
    pub records: Vec<SyncRecord>,
    pub makespan_s: f64,
    pub primary_end_s: f64,
    /// Consensus rounds in which the offset spread grew; always zero for a
    /// correct step size.
    pub spread_increases: u32,
}

impl CycleOutcome {
    pub fn count(&self, method: SyncMethod) -> usize {
        self.records.iter().filter(|r| r.method == method).count()
    }
}

/// Time until the last node became synced; failed nodes are ignored.
pub fn sync_time_metric(records: &[SyncRecord]) -> f64 {
    records
        .iter()
        .filter_map(|r| r.synced_at_s)
        .fold(0.0, f64::max)
}

/// Service parameters of a parent of `parent_tier` under `scheme`.
pub fn tier_service(scheme: Scheme, parent_tier: Tier, cfg: &ScenarioConfig) -> Result<TierService, ChannelError> {
    let link = LinkBudget::into_tier(parent_tier, cfg)?;
    let bands = match parent_tier {
        Tier::Cbs => cfg.subbands_cbs,
        Tier::Ap => cfg.subbands_ap,
        Tier::Ch | Tier::Sn => cfg.subbands_ch,
    } as usize;
    let exchange_s = ptp_exchange_duration_s(&link, cfg);
    Ok(match scheme {
        Scheme::TsnIot => TierService {
            bands,
            per_band: 2,
            exchange_s,
            weak_extra_s: f64::from(cfg.ptp_msg_count) * cfg.ptp_proc_delay_s,
            overhead_s: 0.0,
            reliability: cfg.reliability,
            max_retries: cfg.max_retries,
        },
        Scheme::Ofdma => TierService {
            bands,
            per_band: 1,
            exchange_s,
            weak_extra_s: 0.0,
            overhead_s: grant_overhead_s(&link, cfg),
            reliability: cfg.reliability,
            max_retries: cfg.max_retries,
        },
    })
}

type Table = Vec<Option<SyncRecord>>;

fn synced_at(table: &Table, id: NodeId) -> Option<f64> {
    if id == CBS {
        return Some(0.0);
    }
    table[id.index()].and_then(|r| r.synced_at_s)
}

/// Top-down PTP under `cfg.scheme` with every link up.
pub fn run_primary_sync<R: Rng + ?Sized>(
    topology: &Topology,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<SyncRecord>, ChannelError> {
    let links = LinkState::all_up(topology.len());
    let mut table = vec![None; topology.len()];
    primary_phase(topology, cfg, cfg.scheme, &links, &mut table, rng)?;
    Ok(finish(table))
}

fn primary_phase<R: Rng + ?Sized>(
    topo: &Topology,
    cfg: &ScenarioConfig,
    scheme: Scheme,
    links: &LinkState,
    table: &mut Table,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    let mut t = 0.0;
    for parent_tier in [Tier::Cbs, Tier::Ap, Tier::Ch] {
        let svc = tier_service(scheme, parent_tier, cfg)?;
        let mut end = t;
        for &p in topo.tier_nodes(parent_tier) {
            let kids = topo.children_of(p);
            if synced_at(table, p).is_none() {
                for &k in kids {
                    table[k.index()] = Some(SyncRecord::failed(k, 0.0, 0));
                }
                continue;
            }
            let mut reachable = Vec::with_capacity(kids.len());
            for &k in kids {
                if links.is_down(k) {
                    table[k.index()] = Some(SyncRecord::failed(k, 0.0, 0));
                } else {
                    reachable.push(k);
                }
            }
            for rec in serve_children(t, &reachable, &svc, rng) {
                if let Some(at) = rec.synced_at_s {
                    end = end.max(at);
                }
                table[rec.node_id.index()] = Some(rec);
            }
        }
        t = end;
    }
    Ok(t)
}

/// Consensus fallback for the nodes left FAILED by the primary phase,
/// starting at `start_s`. Updates `records` in place (indexed by node id,
/// CBS excluded) and returns the phase end and the spread-increase count.
pub fn run_distributed_sync<R: Rng + ?Sized>(
    records: &mut [SyncRecord],
    start_s: f64,
    topology: &Topology,
    cfg: &ScenarioConfig,
    links: &LinkState,
    rng: &mut R,
) -> Result<(f64, u32), ChannelError> {
    let mut table: Table = vec![None; topology.len()];
    for r in records.iter() {
        table[r.node_id.index()] = Some(*r);
    }
    let out = distributed_phase(topology, cfg, links, start_s, &mut table, rng)?;
    for r in records.iter_mut() {
        *r = table[r.node_id.index()].expect("record kept");
    }
    Ok(out)
}

fn distributed_phase<R: Rng + ?Sized>(
    topo: &Topology,
    cfg: &ScenarioConfig,
    links: &LinkState,
    start_s: f64,
    table: &mut Table,
    rng: &mut R,
) -> Result<(f64, u32), ChannelError> {
    let mut increases = 0;
    let mut t = start_s;
    for (tier, child_tier) in [(Tier::Ap, Tier::Ch), (Tier::Ch, Tier::Sn)] {
        let (end, inc) = consensus_tier(topo, cfg, tier, t, table, rng);
        increases += inc;
        t = end;
        // Recovered parents now serve the children they orphaned.
        let svc = tier_service(Scheme::TsnIot, tier, cfg)?;
        for &p in topo.tier_nodes(tier) {
            let Some(from) = synced_at(table, p) else { continue };
            let orphans: Vec<NodeId> = topo
                .children_of(p)
                .iter()
                .copied()
                .filter(|&k| {
                    let r = table[k.index()].expect("child record");
                    r.method == SyncMethod::Failed && r.attempts == 0 && !links.is_down(k)
                })
                .collect();
            if orphans.is_empty() {
                continue;
            }
            debug_assert!(orphans.iter().all(|&k| topo.tier(k) == child_tier));
            for rec in serve_children(from, &orphans, &svc, rng) {
                if let Some(at) = rec.synced_at_s {
                    t = t.max(at);
                }
                table[rec.node_id.index()] = Some(rec);
            }
        }
    }
    Ok((t, increases))
}

/// Runs consensus on every peer component of `tier` that holds a failed
/// node. Synced members anchor at offset zero; failed members start at a
/// random offset. Failed members of converged components of two or more
/// nodes become DISTRIBUTED.
fn consensus_tier<R: Rng + ?Sized>(
    topo: &Topology,
    cfg: &ScenarioConfig,
    tier: Tier,
    start_s: f64,
    table: &mut Table,
    rng: &mut R,
) -> (f64, u32) {
    let nodes = topo.tier_nodes(tier);
    let failed = |table: &Table, id: NodeId| !table[id.index()].is_some_and(|r| r.is_synced());
    if !nodes.iter().any(|&n| failed(table, n)) {
        return (start_s, 0);
    }
    let first = nodes[0].0;
    let local = |id: NodeId| (id.0 - first) as usize;
    let adjacency: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&n| topo.peers_of(n).iter().map(|&p| local(p)).collect())
        .collect();
    let bound = cfg.dsync_offset_bound_s;
    let offsets: Vec<f64> = nodes
        .iter()
        .map(|&n| {
            if failed(table, n) {
                (rng.random::<f64>() * 2.0 - 1.0) * bound
            } else {
                0.0
            }
        })
        .collect();

    let mut end = start_s;
    let mut increases = 0;
    for comp in components(&adjacency) {
        if comp.len() < 2 || !comp.iter().any(|&i| failed(table, nodes[i])) {
            continue;
        }
        let pos = |i: usize| comp.binary_search(&i).expect("member");
        let sub_adj = comp
            .iter()
            .map(|&i| adjacency[i].iter().map(|&j| pos(j)).collect())
            .collect();
        let sub_off = comp.iter().map(|&i| offsets[i]).collect();
        let mut state = ConsensusState::new(sub_off, sub_adj);
        let run = state.run(cfg.dsync_tolerance_s, cfg.dsync_iter_min, cfg.dsync_iter_max);
        increases += run.spread_increases;
        let dur = f64::from(run.iterations) * cfg.dsync_slot_s;
        end = end.max(start_s + dur);
        if !run.converged {
            continue;
        }
        for &i in &comp {
            let id = nodes[i];
            if failed(table, id) {
                let attempts = table[id.index()].map_or(0, |r| r.attempts);
                table[id.index()] = Some(SyncRecord {
                    node_id: id,
                    method: SyncMethod::Distributed,
                    elapsed_s: dur,
                    attempts,
                    synced_at_s: Some(start_s + dur),
                });
            }
        }
    }
    (end, increases)
}

fn finish(table: Table) -> Vec<SyncRecord> {
    table.into_iter().skip(1).map(|r| r.expect("every node has a record")).collect()
}

/// One full sync cycle under `cfg.scheme`.
pub fn run_sync_cycle<R: Rng + ?Sized>(
    topology: &Topology,
    cfg: &ScenarioConfig,
    links: &LinkState,
    rng: &mut R,
) -> Result<CycleOutcome, ChannelError> {
    let mut table = vec![None; topology.len()];
    let primary_end_s = primary_phase(topology, cfg, cfg.scheme, links, &mut table, rng)?;
    let mut spread_increases = 0;
    if cfg.scheme == Scheme::TsnIot {
        let (_, inc) = distributed_phase(topology, cfg, links, primary_end_s, &mut table, rng)?;
        spread_increases = inc;
    }
    let records = finish(table);
    Ok(CycleOutcome {
        makespan_s: sync_time_metric(&records),
        records,
        primary_end_s,
        spread_increases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(sn: u32, scheme: Scheme, reliability: f64) -> ScenarioConfig {
        ScenarioConfig {
            sn_count: sn,
            scheme,
            reliability,
            ..Default::default()
        }
    }

    fn cycle(c: &ScenarioConfig, seed: u64) -> CycleOutcome {
        let topo = build_topology(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_sync_cycle(&topo, c, &LinkState::all_up(topo.len()), &mut rng).unwrap()
    }

    #[test]
    fn certain_links_never_fall_back() {
        let out = cycle(&cfg(400, Scheme::TsnIot, 1.0), 1);
        assert_eq!(out.count(SyncMethod::Ptp), out.records.len());
        // AP round: 31.26 us + 30 us SIC stages; CH round: 39.8 + 30;
        // SN round: 126.15 + 30.
        let expect = 61.26e-6 + 69.8e-6 + 156.15e-6;
        assert!((out.makespan_s - expect).abs() < 1e-12, "{}", out.makespan_s);
    }

    #[test]
    fn ofdma_is_slower_at_certainty() {
        let tsn = cycle(&cfg(400, Scheme::TsnIot, 1.0), 1);
        let ofdma = cycle(&cfg(400, Scheme::Ofdma, 1.0), 1);
        assert!(ofdma.makespan_s > 2.0 * tsn.makespan_s);
        assert_eq!(ofdma.count(SyncMethod::Distributed), 0);
    }

    #[test]
    fn makespan_bounds_every_record() {
        let out = cycle(&cfg(800, Scheme::TsnIot, 0.9), 7);
        let max_elapsed = out.records.iter().map(|r| r.elapsed_s).fold(0.0, f64::max);
        assert!(out.makespan_s >= max_elapsed);
        for r in &out.records {
            assert!(r.attempts <= 4);
            if r.is_synced() {
                assert!(r.elapsed_s > 0.0);
            }
        }
        assert_eq!(out.spread_increases, 0);
    }

    #[test]
    fn disconnected_chs_recover_by_consensus() {
        let c = cfg(400, Scheme::TsnIot, 1.0);
        let topo = build_topology(&c).unwrap();
        let mut links = LinkState::all_up(topo.len());
        let ch = topo.chs()[3];
        links.set_down(ch, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = run_sync_cycle(&topo, &c, &links, &mut rng).unwrap();
        let rec = out.records[ch.index() - 1];
        assert_eq!(rec.method, SyncMethod::Distributed);
        for &sn in topo.children_of(ch) {
            assert_eq!(out.records[sn.index() - 1].method, SyncMethod::Ptp);
        }
        assert!(out.makespan_s > out.primary_end_s);

        let ofdma = ScenarioConfig {
            scheme: Scheme::Ofdma,
            ..c
        };
        let out = run_sync_cycle(&topo, &ofdma, &links, &mut rng).unwrap();
        assert_eq!(out.records[ch.index() - 1].method, SyncMethod::Failed);
        assert_eq!(out.count(SyncMethod::Failed), 11);
    }

    #[test]
    fn empty_records_give_zero() {
        assert_eq!(sync_time_metric(&[]), 0.0);
    }
}
