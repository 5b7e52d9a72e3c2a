//! Whole-run properties of the engine across random configurations.

use proptest::prelude::*;
use tsn_iot_sim::domain::{ArrivalModel, Priority, ScenarioConfig, Scheme, Split};
use tsn_iot_sim::engine::{run, run_with, RunOptions};

fn config() -> impl Strategy<Value = ScenarioConfig> {
    (
        prop::sample::select(vec![400u32, 800, 1200, 1600]),
        prop::sample::select(vec![Scheme::TsnIot, Scheme::Ofdma]),
        prop::sample::select(vec![Split::new(4, 1), Split::new(3, 2)]),
        prop::sample::select(vec![ArrivalModel::ClusterEpoch, ArrivalModel::Uniform]),
        0.0..0.3f64,
        0.5..=1.0f64,
        any::<u64>(),
    )
        .prop_map(|(sn_count, scheme, split_ch, arrival_model, disconnect_prob, reliability, seed)| {
            ScenarioConfig {
                sn_count,
                scheme,
                split_ch,
                arrival_model,
                disconnect_prob,
                reliability,
                seed,
                sim_minutes: 1,
                ..Default::default()
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold(cfg in config()) {
        let r = run(&cfg).unwrap();
        prop_assert!(r.invariants.is_clean(), "{:?}", r.invariants);
        let cap = if cfg.scheme == Scheme::TsnIot { 2 } else { 1 };
        prop_assert!(r.invariants.max_band_occupancy <= cap);
        for c in &r.classes {
            prop_assert!(c.is_conserved(), "{c:?}");
            prop_assert_eq!(c.generated, c.delivered + c.lost + c.in_flight);
        }
        let per_minute = u64::from(cfg.sn_count)
            * u64::from(cfg.pkts_per_min_urgent + cfg.pkts_per_min_normal);
        prop_assert_eq!(r.classes.iter().map(|c| c.generated).sum::<u64>(), per_minute);
    }

    #[test]
    fn same_seed_same_report(cfg in config()) {
        prop_assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
}

#[test]
fn replications_differ_but_are_reproducible() {
    let cfg = ScenarioConfig {
        sim_minutes: 2,
        ..Default::default()
    };
    let rep = |replication| {
        run_with(
            &cfg,
            &RunOptions {
                replication,
                ..Default::default()
            },
        )
        .unwrap()
    };
    assert_eq!(rep(3), rep(3));
    assert_ne!(rep(0).classes, rep(1).classes);
}

#[test]
fn deliveries_match_class_counts() {
    let cfg = ScenarioConfig {
        sim_minutes: 1,
        ..Default::default()
    };
    let r = run_with(
        &cfg,
        &RunOptions {
            record_deliveries: true,
            ..Default::default()
        },
    )
    .unwrap();
    for p in [Priority::Urgent, Priority::Normal] {
        let n = r.deliveries.iter().filter(|d| d.priority == p).count() as u64;
        assert_eq!(n, r.classes[p.index()].delivered);
    }
    assert!(r.deliveries.iter().all(|d| d.delivered_at_s >= d.created_at_s));
}
