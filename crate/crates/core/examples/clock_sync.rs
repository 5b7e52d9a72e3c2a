//! One synchronisation cycle: PTP down the tree, consensus among peers for
//! nodes whose exchange failed. Also shows consensus on its own.
//!
//! `cargo run --example clock_sync`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsn_iot_sim::domain::{build_topology, LinkState, ScenarioConfig};
use tsn_iot_sim::ofdma_baseline::ofdma_sync;
use tsn_iot_sim::sync::{run_sync_cycle, sync_time_metric, ConsensusState, SyncMethod};

fn main() {
    let cfg = ScenarioConfig {
        reliability: 0.9,
        ..Default::default()
    };
    let topo = build_topology(&cfg).expect("valid topology");
    let links = LinkState::all_up(topo.len());

    for (name, outcome) in [
        ("TSN-IoT", run_sync_cycle(&topo, &cfg, &links, &mut ChaCha8Rng::seed_from_u64(5))),
        ("OFDMA", ofdma_sync(&topo, &cfg, &links, &mut ChaCha8Rng::seed_from_u64(5))),
    ] {
        let out = outcome.expect("valid links");
        println!(
            "{name:<8} makespan {:.3} ms (metric {:.3} ms): ptp {}, distributed {}, failed {}",
            out.makespan_s * 1e3,
            sync_time_metric(&out.records) * 1e3,
            out.count(SyncMethod::Ptp),
            out.count(SyncMethod::Distributed),
            out.count(SyncMethod::Failed),
        );
    }

    // Consensus alone: a ring of six clocks, one of them 40 us ahead.
    let n = 6;
    let ring: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
    let mut offsets = vec![0.0; n];
    offsets[0] = 40e-6;
    let mut state = ConsensusState::new(offsets, ring);
    let run = state.run(cfg.dsync_tolerance_s, cfg.dsync_iter_min, cfg.dsync_iter_max);
    println!(
        "ring consensus: {} iterations, converged {}, spread {:.3} us -> {:.3} us",
        run.iterations,
        run.converged,
        run.spreads.first().copied().unwrap_or(0.0) * 1e6,
        state.spread() * 1e6
    );
}
