//! Parent-to-child PTP exchanges and the per-parent band servers that run
//! them in parallel.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;

use crate::channel::{bernoulli, LinkBudget};
use crate::domain::{NodeId, ScenarioConfig};

use super::{SyncMethod, SyncRecord};

/// Sync/Follow-up/Delay exchange: serialisation, processing and propagation
/// of every message.
pub fn ptp_exchange_duration_s(link: &LinkBudget, cfg: &ScenarioConfig) -> f64 {
    let n = f64::from(cfg.ptp_msg_count);
    n * f64::from(cfg.ptp_msg_bits) / link.rate_bps + n * cfg.ptp_proc_delay_s + n * link.propagation_s()
}

/// A single child synchronised by an otherwise idle parent, attempts back to
/// back.
pub fn ptp_exchange<R: Rng + ?Sized>(
    child: NodeId,
    link: &LinkBudget,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> SyncRecord {
    let d = ptp_exchange_duration_s(link, cfg);
    let mut elapsed = 0.0;
    for attempt in 1..=cfg.max_retries + 1 {
        elapsed += d;
        if bernoulli(rng, cfg.reliability) {
            return SyncRecord::ptp(child, elapsed, attempt, elapsed);
        }
    }
    SyncRecord::failed(child, elapsed, cfg.max_retries + 1)
}

/// How one parent serves its children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierService {
    pub bands: usize,
    /// Children served together on one band: 2 with NOMA pairing, 1 without.
    pub per_band: usize,
    pub exchange_s: f64,
    /// Extra completion delay of the second child of a pair.
    pub weak_extra_s: f64,
    /// Access overhead before every exchange.
    pub overhead_s: f64,
    pub reliability: f64,
    pub max_retries: u32,
}

struct Child {
    idx: usize,
    attempts: u32,
    elapsed: f64,
}

/// Event-driven band servers for one parent. Children queue in list order; a
/// failed child becomes eligible again at its failure time and rejoins at the
/// tail. Returns one record per child, in input order, with `synced_at_s`
/// measured on the caller's clock.
pub fn serve_children<R: Rng + ?Sized>(
    start_s: f64,
    children: &[NodeId],
    svc: &TierService,
    rng: &mut R,
) -> Vec<SyncRecord> {
    let mut out: Vec<Option<SyncRecord>> = vec![None; children.len()];
    let mut queue: VecDeque<Child> = (0..children.len())
        .map(|idx| Child {
            idx,
            attempts: 0,
            elapsed: 0.0,
        })
        .collect();
    // Retries keyed by (eligible time, insertion order).
    let mut pending: BinaryHeap<Reverse<(OrdF64, u64)>> = BinaryHeap::new();
    let mut parked: Vec<Option<Child>> = Vec::new();
    let mut free = vec![start_s; svc.bands.max(1)];
    let per_band = svc.per_band.max(1);

    while !queue.is_empty() || !pending.is_empty() {
        let (b, t) = free
            .iter()
            .copied()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("at least one band");
        while let Some(Reverse((OrdF64(at), key))) = pending.peek().copied() {
            if at > t {
                break;
            }
            pending.pop();
            queue.push_back(parked[key as usize].take().expect("parked child"));
        }
        if queue.is_empty() {
            let Reverse((OrdF64(next), _)) = *pending.peek().expect("pending retry");
            free[b] = next;
            continue;
        }
        let group = per_band.min(queue.len());
        let base = t + svc.overhead_s + svc.exchange_s;
        free[b] = base + if group == 2 { svc.weak_extra_s } else { 0.0 };
        for k in 0..group {
            let mut c = queue.pop_front().expect("queued child");
            let finish = base + if k == 1 { svc.weak_extra_s } else { 0.0 };
            c.attempts += 1;
            c.elapsed += finish - t;
            let node = children[c.idx];
            if bernoulli(rng, svc.reliability) {
                out[c.idx] = Some(SyncRecord::ptp(node, c.elapsed, c.attempts, finish));
            } else if c.attempts <= svc.max_retries {
                pending.push(Reverse((OrdF64(finish), parked.len() as u64)));
                parked.push(Some(c));
            } else {
                out[c.idx] = Some(SyncRecord::failed(node, c.elapsed, c.attempts));
            }
        }
    }
    out.into_iter().map(|r| r.expect("every child resolved")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl SyncRecord {
    pub(crate) fn ptp(node_id: NodeId, elapsed_s: f64, attempts: u32, synced_at_s: f64) -> Self {
        Self {
            node_id,
            method: SyncMethod::Ptp,
            elapsed_s,
            attempts,
            synced_at_s: Some(synced_at_s),
        }
    }

    pub(crate) fn failed(node_id: NodeId, elapsed_s: f64, attempts: u32) -> Self {
        Self {
            node_id,
            method: SyncMethod::Failed,
            elapsed_s,
            attempts,
            synced_at_s: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Tier;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn certain() -> ScenarioConfig {
        ScenarioConfig {
            reliability: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn exchange_durations_per_tier() {
        let cfg = certain();
        let sn = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        // 3 x 32 us + 3 x 10 us + 3 x 0.05 us.
        assert!((ptp_exchange_duration_s(&sn, &cfg) - 126.15e-6).abs() < 1e-15);
        let ap = LinkBudget::into_tier(Tier::Cbs, &cfg).unwrap();
        assert!((ptp_exchange_duration_s(&ap, &cfg) - 31.26e-6).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = ptp_exchange(NodeId(9), &sn, &cfg, &mut rng);
        assert_eq!(rec.method, SyncMethod::Ptp);
        assert_eq!(rec.attempts, 1);
    }

    #[test]
    fn failure_rate_matches_truncated_geometric() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut failed = 0;
        let mut attempts = 0u64;
        for _ in 0..n {
            let r = ptp_exchange(NodeId(1), &link, &cfg, &mut rng);
            failed += u32::from(r.method == SyncMethod::Failed);
            attempts += u64::from(r.attempts);
        }
        // P(fail) = 0.1^4; E[attempts] = sum_{k=0..3} 0.1^k.
        assert!(failed < 60, "{failed}");
        let mean = attempts as f64 / n as f64;
        assert!((mean - 1.111).abs() < 0.005, "{mean}");
    }

    #[test]
    fn paired_rounds() {
        let svc = TierService {
            bands: 5,
            per_band: 2,
            exchange_s: 1.0,
            weak_extra_s: 0.25,
            overhead_s: 0.0,
            reliability: 1.0,
            max_retries: 3,
        };
        let kids: Vec<NodeId> = (1..=10).map(NodeId).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let recs = serve_children(0.0, &kids, &svc, &mut rng);
        let last = recs.iter().filter_map(|r| r.synced_at_s).fold(0.0, f64::max);
        assert_eq!(last, 1.25);

        let kids: Vec<NodeId> = (1..=40).map(NodeId).collect();
        let recs = serve_children(0.0, &kids, &svc, &mut rng);
        let last = recs.iter().filter_map(|r| r.synced_at_s).fold(0.0, f64::max);
        assert_eq!(last, 5.0);

        let solo = TierService { per_band: 1, ..svc };
        let recs = serve_children(0.0, &kids, &solo, &mut rng);
        let last = recs.iter().filter_map(|r| r.synced_at_s).fold(0.0, f64::max);
        assert_eq!(last, 8.0);
    }

    #[test]
    fn zero_reliability_exhausts_retries() {
        let svc = TierService {
            bands: 2,
            per_band: 2,
            exchange_s: 1.0,
            weak_extra_s: 0.0,
            overhead_s: 0.0,
            reliability: 0.0,
            max_retries: 3,
        };
        let kids: Vec<NodeId> = (1..=3).map(NodeId).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in serve_children(0.0, &kids, &svc, &mut rng) {
            assert_eq!(r.method, SyncMethod::Failed);
            assert_eq!(r.attempts, 4);
            assert_eq!(r.elapsed_s, 4.0);
        }
    }
}
