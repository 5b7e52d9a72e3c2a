//! Link budgets per tier and the NOMA decode probability as density grows.
//!
//! `cargo run --example channel_budget`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsn_iot_sim::channel::{effective_snr_db, sample_fading, DecodeLevels, LinkBudget, SicOutcome};
use tsn_iot_sim::domain::{ScenarioConfig, Tier};

fn main() {
    let cfg = ScenarioConfig::default();
    println!("tier  distance_m  path_loss_db  propagation_us  packet_us");
    for tier in [Tier::Ch, Tier::Ap, Tier::Cbs] {
        let link = LinkBudget::into_tier(tier, &cfg).expect("default config is valid");
        println!(
            "{:<4}  {:>10.0}  {:>12.2}  {:>14.3}  {:>9.3}",
            tier.as_str(),
            link.distance_m,
            link.pathloss_db,
            link.propagation_s() * 1e6,
            link.transfer_s(u64::from(cfg.pkt_total_bytes) * 8) * 1e6,
        );
    }

    // Monte Carlo SIC outcome rates for a two-user pair at each density.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    println!("\nsn_count  snr_db  both_ok  strong_only  none");
    for sn_count in (400..=1600).step_by(400) {
        let snr = effective_snr_db(sn_count, &cfg);
        let levels = DecodeLevels::new(snr, cfg.power_level_separation_db, cfg.sic_threshold_db);
        let mut counts = [0u32; 3];
        for _ in 0..draws {
            let rx = levels.reception(sample_fading(&mut rng), sample_fading(&mut rng));
            let idx = match levels.sic(&rx, 1.0, &mut rng) {
                SicOutcome::BothOk => 0,
                SicOutcome::StrongOnly => 1,
                SicOutcome::None => 2,
            };
            counts[idx] += 1;
        }
        let f = |c: u32| f64::from(c) / f64::from(draws);
        println!(
            "{sn_count:>8}  {snr:>6.2}  {:>7.3}  {:>11.3}  {:>4.3}",
            f(counts[0]),
            f(counts[1]),
            f(counts[2])
        );
    }
}
