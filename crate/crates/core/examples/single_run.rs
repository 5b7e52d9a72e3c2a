//! A single simulation run at the default density, with per-class delay,
//! loss, sync statistics and the invariant log.
//!
//! `cargo run --release --example single_run [sn_count] [minutes]`

use tsn_iot_sim::domain::{Priority, ScenarioConfig};
use tsn_iot_sim::engine::run;

fn main() {
    let mut args = std::env::args().skip(1);
    let sn_count = args.next().map_or(400, |a| a.parse().expect("sn_count must be an integer"));
    let sim_minutes = args.next().map_or(10, |a| a.parse().expect("minutes must be an integer"));
    let cfg = ScenarioConfig {
        sn_count,
        sim_minutes,
        ..Default::default()
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };

    println!("{} SNs, {} minutes, seed {}", report.sn_count, report.sim_minutes, report.seed);
    for p in [Priority::Urgent, Priority::Normal] {
        let c = &report.classes[p.index()];
        println!(
            "{:<7} generated {:>7}  delivered {:>7}  lost {:>6}  mean delay {}  loss {:.3}",
            p.as_str(),
            c.generated,
            c.delivered,
            c.lost,
            c.mean_delay_s().map_or("n/a".into(), |d| format!("{:.3} ms", d * 1e3)),
            c.loss_rate()
        );
    }
    let s = &report.sync;
    println!(
        "sync: {} cycles, mean {:.3} ms, p95 {:.3} ms",
        s.cycles(),
        s.mean_s().unwrap_or(f64::NAN) * 1e3,
        s.percentile_s(95.0).unwrap_or(f64::NAN) * 1e3
    );
    println!("invariants clean: {} ({:?})", report.invariants.is_clean(), report.invariants);
}
