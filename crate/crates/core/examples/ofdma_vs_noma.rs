//! Same scenario under both access schemes, side by side.
//!
//! `cargo run --release --example ofdma_vs_noma`

use tsn_iot_sim::domain::{Priority, ScenarioConfig, Scheme};
use tsn_iot_sim::engine::run;

fn main() {
    println!("sn_count  scheme   sync_ms  urgent_ms  normal_ms  urgent_loss  normal_loss");
    for sn_count in [400, 1000, 1600] {
        for scheme in [Scheme::TsnIot, Scheme::Ofdma] {
            let cfg = ScenarioConfig {
                sn_count,
                scheme,
                sim_minutes: 5,
                ..Default::default()
            };
            let r = run(&cfg).expect("valid config");
            let ms = |p: Priority| r.classes[p.index()].mean_delay_s().map_or(f64::NAN, |d| d * 1e3);
            println!(
                "{sn_count:>8}  {:<7}  {:>7.3}  {:>9.3}  {:>9.3}  {:>11.3}  {:>11.3}",
                scheme.as_str(),
                r.sync.mean_s().unwrap_or(f64::NAN) * 1e3,
                ms(Priority::Urgent),
                ms(Priority::Normal),
                r.classes[Priority::Urgent.index()].loss_rate(),
                r.classes[Priority::Normal.index()].loss_rate(),
            );
        }
    }
}
