//! Parallel sweep over density, scheme and split, printed as the two figure
//! tables the CLI writes to disk.
//!
//! `cargo run --release --example density_sweep`

use tsn_iot_sim::cli::{fig4_csv, fig5_csv};
use tsn_iot_sim::domain::{ScenarioConfig, Scheme, Split};
use tsn_iot_sim::engine::{sweep, SweepSpec};

fn main() {
    let base = ScenarioConfig {
        sim_minutes: 5,
        ..Default::default()
    };
    let spec = SweepSpec {
        sn_counts: vec![400, 800, 1200, 1600],
        schemes: vec![Scheme::TsnIot, Scheme::Ofdma],
        splits: vec![Split::new(4, 1), Split::new(3, 2)],
        replications: 2,
        first_replication: 0,
    };
    let cells = match sweep(&base, &spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    print!("{}\n{}", fig4_csv(&cells), fig5_csv(&cells));
}
