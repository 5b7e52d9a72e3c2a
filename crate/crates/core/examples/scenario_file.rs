//! Scenario files: parse, validate, override and write back.
//!
//! `cargo run --example scenario_file`

use tsn_iot_sim::domain::{apply_key, parse_scenario, to_scenario_string};

const TEXT: &str = "\
[topology]
sn_count = 800          # must divide evenly among cluster heads
[traffic]
pkts_per_min_urgent = 6
arrival_model = uniform
[run]
scheme = ofdma
seed = 42
";

fn main() {
    let mut cfg = parse_scenario(TEXT, "inline").expect("valid scenario");
    println!("parsed: sn_count={} scheme={} seed={}", cfg.sn_count, cfg.scheme, cfg.seed);

    apply_key(&mut cfg, "split_ch", "3/2").expect("known key");
    let written = to_scenario_string(&cfg);
    assert_eq!(parse_scenario(&written, "round trip").expect("writer output parses"), cfg);
    println!("round trip ok ({} lines)", written.lines().count());

    for bad in ["sn_count = 401", "sn_count = lots", "colour = blue", "seed = 1\nseed = 2"] {
        match parse_scenario(bad, "bad") {
            Ok(c) => match c.validate() {
                Ok(()) => println!("{bad:?}: accepted"),
                Err(e) => println!("{bad:?}: invalid: {e}"),
            },
            Err(e) => println!("{bad:?}: rejected: {e}"),
        }
    }
}
