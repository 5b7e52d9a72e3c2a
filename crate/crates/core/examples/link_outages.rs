//! Random CH/AP disconnections: packets reroute through a peer via limited
//! forwarding, or wait for the next sync cycle when no peer is reachable.
//!
//! `cargo run --release --example link_outages`

use tsn_iot_sim::domain::{Priority, ScenarioConfig};
use tsn_iot_sim::engine::run;

fn main() {
    println!("disconnect_prob  forwarded  held  distributed_sync  urgent_loss  urgent_ms");
    for disconnect_prob in [0.0, 0.05, 0.2, 0.5] {
        let cfg = ScenarioConfig {
            disconnect_prob,
            sim_minutes: 10,
            ..Default::default()
        };
        let r = run(&cfg).expect("valid config");
        let urgent = &r.classes[Priority::Urgent.index()];
        println!(
            "{disconnect_prob:>15.2}  {:>9}  {:>4}  {:>16}  {:>11.3}  {:>9.3}",
            r.forwarded,
            r.held,
            r.sync.distributed_nodes,
            urgent.loss_rate(),
            urgent.mean_delay_s().map_or(f64::NAN, |d| d * 1e3),
        );
        assert!(r.invariants.is_clean(), "{:?}", r.invariants);
    }
}
