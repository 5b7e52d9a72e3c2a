//! Command-line front end.
//!
//! `run` simulates one scenario and writes `metrics.csv`; `sweep` runs a
//! density × scheme × split grid and writes `fig4.csv`, `fig5.csv` and a
//! gnuplot `.dat` file per figure. Both write `manifest.ini`, a scenario file
//! holding the resolved configuration, so any output can be regenerated with
//! `--scenario manifest.ini`. CSV times are milliseconds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::domain::{
    apply_key, load_scenario, to_scenario_string, ConfigError, KeyError, Priority, ScenarioConfig,
    ScenarioFileError, Scheme, Split,
};
use crate::engine::{run, sweep, EngineError, MetricsReport, SweepCell, SweepError, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "tsn-iot", version, about = "TSN-IoT NOMA/OFDMA network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write metrics.csv.
    Run(RunArgs),
    /// Sweep densities, schemes and splits; write fig4/fig5 data.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario file (key = value lines); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Master seed; overrides the scenario's `seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Simulated minutes; overrides the scenario's `sim_minutes`.
    #[arg(long, value_name = "N")]
    pub sim_minutes: Option<u32>,

    /// Override one scenario key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// SN counts as start:stop:step (inclusive).
    #[arg(long, value_name = "A:B:STEP", default_value = "400:1600:200", value_parser = parse_densities)]
    pub densities: Densities,

    /// Access schemes to compare.
    #[arg(long, value_delimiter = ',', default_value = "tsn,ofdma")]
    pub schemes: Vec<Scheme>,

    /// SN→CH urgent/normal sub-band splits.
    #[arg(long, value_delimiter = ',', default_value = "4/1,3/2")]
    pub splits: Vec<Split>,

    /// Replications per cell.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub reps: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Densities(pub Vec<u32>);

/// Parses `start:stop:step`; a bare number is a single density.
pub fn parse_densities(s: &str) -> Result<Densities, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<u32>().map_err(|_| format!("'{p}' is not a non-negative integer"));
    match parts[..] {
        [one] => Ok(Densities(vec![num(one)?])),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 {
                return Err("step must be positive".into());
            }
            if a > b {
                return Err(format!("start {a} exceeds stop {b}"));
            }
            Ok(Densities((a..=b).step_by(step as usize).collect()))
        }
        _ => Err(format!("'{s}' must look like start:stop:step")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioFileError),
    #[error("--set {arg}: {message}")]
    Override { arg: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Configuration after file, flags and overrides, plus how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub scenario: Option<PathBuf>,
    /// `key=value` in the order applied.
    pub overrides: Vec<String>,
}

/// Applies, in order: scenario file, `--seed`, `--sim-minutes`, `--set`.
pub fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let mut config = match &common.scenario {
        Some(p) => load_scenario(p)?,
        None => ScenarioConfig::default(),
    };
    let mut overrides = Vec::new();
    if let Some(seed) = common.seed {
        config.seed = seed;
        overrides.push(format!("seed={seed}"));
    }
    if let Some(m) = common.sim_minutes {
        config.sim_minutes = m;
        overrides.push(format!("sim_minutes={m}"));
    }
    for arg in &common.overrides {
        let (key, value) = arg.split_once('=').ok_or_else(|| CliError::Override {
            arg: arg.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        apply_key(&mut config, key, value).map_err(|e| CliError::Override {
            arg: arg.clone(),
            message: match e {
                KeyError::Unknown => format!("unknown key '{key}'"),
                KeyError::BadValue(m) => format!("bad value for '{key}': {m}"),
            },
        })?;
        overrides.push(format!("{key}={value}"));
    }
    config.validate()?;
    Ok(Resolved {
        config,
        scenario: common.scenario.clone(),
        overrides,
    })
}

/// Scenario text with provenance comments; loads back to the same config.
pub fn manifest(resolved: &Resolved, command: &str, extra: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tsn-iot {} {command}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "# scenario: {}",
        resolved
            .scenario
            .as_ref()
            .map_or_else(|| "(defaults)".to_string(), |p| p.display().to_string())
    );
    for o in &resolved.overrides {
        let _ = writeln!(out, "# override: {o}");
    }
    for e in extra {
        let _ = writeln!(out, "# {e}");
    }
    out.push_str(&to_scenario_string(&resolved.config));
    out
}

fn ms(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |s| format!("{:.6}", s * 1e3))
}

pub fn metrics_csv(r: &MetricsReport) -> String {
    let mut out = String::from("metric,class,value\n");
    let mut row = |metric: &str, class: &str, value: String| {
        let _ = writeln!(out, "{metric},{class},{value}");
    };
    for p in Priority::ALL {
        let c = r.class(p);
        let class = p.to_string();
        row("generated", &class, c.generated.to_string());
        row("delivered", &class, c.delivered.to_string());
        row("lost", &class, c.lost.to_string());
        row("in_flight", &class, c.in_flight.to_string());
        row("retries", &class, c.retries.to_string());
        row("mean_delay_ms", &class, ms(c.mean_delay_s()));
        row("max_delay_ms", &class, format!("{:.6}", c.delay_max_ns as f64 * 1e-6));
        row("loss_rate", &class, format!("{:.6}", c.loss_rate()));
    }
    row("mean_delay_ms", "all", ms(r.overall_mean_delay_s()));
    row("sync_cycles", "all", r.sync.cycles().to_string());
    row("mean_sync_ms", "all", ms(r.sync.mean_s()));
    row("p95_sync_ms", "all", ms(r.sync.percentile_s(95.0)));
    row("ptp_nodes", "all", r.sync.ptp_nodes.to_string());
    row("distributed_nodes", "all", r.sync.distributed_nodes.to_string());
    row("failed_nodes", "all", r.sync.failed_nodes.to_string());
    row("forwarded", "all", r.forwarded.to_string());
    row("held", "all", r.held.to_string());
    let inv = &r.invariants;
    row("max_band_occupancy", "all", inv.max_band_occupancy.to_string());
    row("occupancy_violations", "all", inv.occupancy_violations.to_string());
    row("pairs_checked", "all", inv.pairs_checked.to_string());
    row("priority_order_violations", "all", inv.priority_order_violations.to_string());
    row("conservation_violations", "all", inv.conservation_violations.to_string());
    out
}

/// Cells whose sync statistics represent their (density, scheme): the first
/// split of each, since sync does not depend on the split.
fn sync_cells(cells: &[SweepCell]) -> Vec<&SweepCell> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for c in cells {
        if !seen.contains(&(c.sn_count, c.scheme)) {
            seen.push((c.sn_count, c.scheme));
            out.push(c);
        }
    }
    out
}

pub fn fig4_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("sn_count,scheme,mean_sync_ms,p95_sync_ms,replications\n");
    for c in sync_cells(cells) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.sn_count,
            c.scheme.label(),
            ms(c.report.sync.mean_s()),
            ms(c.report.sync.percentile_s(95.0)),
            c.report.replications
        );
    }
    out
}

pub fn fig5_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("sn_count,scheme,split,class,mean_delay_ms,loss_rate\n");
    for c in cells {
        for p in Priority::ALL {
            let s = c.report.class(p);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                c.sn_count,
                c.scheme.label(),
                c.split,
                p,
                ms(s.mean_delay_s()),
                s.loss_rate()
            );
        }
    }
    out
}

fn densities(cells: &[SweepCell]) -> Vec<u32> {
    let mut d: Vec<u32> = Vec::new();
    for c in cells {
        if !d.contains(&c.sn_count) {
            d.push(c.sn_count);
        }
    }
    d
}

/// One row per density; mean and p95 columns per scheme.
pub fn fig4_dat(cells: &[SweepCell]) -> String {
    let sync = sync_cells(cells);
    let mut schemes: Vec<Scheme> = Vec::new();
    for c in &sync {
        if !schemes.contains(&c.scheme) {
            schemes.push(c.scheme);
        }
    }
    let mut out = String::from("# sn_count");
    for s in &schemes {
        let _ = write!(out, " {0}_mean_ms {0}_p95_ms", s.label());
    }
    out.push('\n');
    for d in densities(cells) {
        let _ = write!(out, "{d}");
        for s in &schemes {
            let c = sync.iter().find(|c| c.sn_count == d && c.scheme == *s);
            let (m, p) = c.map_or((None, None), |c| (c.report.sync.mean_s(), c.report.sync.percentile_s(95.0)));
            let _ = write!(out, " {} {}", ms(m), ms(p));
        }
        out.push('\n');
    }
    out
}

/// One row per density; a mean-delay column per (scheme, split, class).
pub fn fig5_dat(cells: &[SweepCell]) -> String {
    let mut series: Vec<(Scheme, Split)> = Vec::new();
    for c in cells {
        if !series.contains(&(c.scheme, c.split)) {
            series.push((c.scheme, c.split));
        }
    }
    let mut out = String::from("# sn_count");
    for (scheme, split) in &series {
        for p in Priority::ALL {
            let _ = write!(out, " {}_{}_{}_ms", scheme.label(), split.to_string().replace('/', "-"), p);
        }
    }
    out.push('\n');
    for d in densities(cells) {
        let _ = write!(out, "{d}");
        for (scheme, split) in &series {
            let c = cells
                .iter()
                .find(|c| c.sn_count == d && c.scheme == *scheme && c.split == *split);
            for p in Priority::ALL {
                let _ = write!(out, " {}", ms(c.and_then(|c| c.report.class(p).mean_delay_s())));
            }
        }
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<MetricsReport, CliError> {
    let resolved = resolve(&args.common)?;
    let report = run(&resolved.config)?;
    let out = &args.common.out;
    make_dir(out)?;
    write_file(out, "metrics.csv", &metrics_csv(&report))?;
    write_file(out, "manifest.ini", &manifest(&resolved, "run", &[]))?;
    Ok(report)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepCell>, CliError> {
    let resolved = resolve(&args.common)?;
    let spec = SweepSpec {
        sn_counts: args.densities.0.clone(),
        schemes: args.schemes.clone(),
        splits: args.splits.clone(),
        replications: args.reps,
        first_replication: 0,
    };
    let cells = sweep(&resolved.config, &spec)?;
    let out = &args.common.out;
    make_dir(out)?;
    write_file(out, "fig4.csv", &fig4_csv(&cells))?;
    write_file(out, "fig5.csv", &fig5_csv(&cells))?;
    write_file(out, "fig4.dat", &fig4_dat(&cells))?;
    write_file(out, "fig5.dat", &fig5_dat(&cells))?;
    let list = |v: Vec<String>| v.join(",");
    let extra = [
        format!(
            "densities: {}",
            list(spec.sn_counts.iter().map(ToString::to_string).collect())
        ),
        format!("schemes: {}", list(spec.schemes.iter().map(|s| s.label().to_string()).collect())),
        format!("splits: {}", list(spec.splits.iter().map(ToString::to_string).collect())),
        format!("reps: {}", spec.replications),
    ];
    write_file(out, "manifest.ini", &manifest(&resolved, "sweep", &extra))?;
    Ok(cells)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a).map(drop),
        Command::Sweep(a) => cmd_sweep(a).map(drop),
    }
}

/// Parses `std::env::args` and runs. Returns the process exit code:
/// 0 success, 1 scenario or runtime error, 2 usage error.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_ranges() {
        assert_eq!(parse_densities("400:1600:200").unwrap().0.len(), 7);
        assert_eq!(parse_densities("400").unwrap().0, vec![400]);
        assert_eq!(parse_densities("400:1000:400").unwrap().0, vec![400, 800]);
        assert!(parse_densities("400:1600:0").is_err());
        assert!(parse_densities("1600:400:200").is_err());
        assert!(parse_densities("a:b").is_err());
    }

    #[test]
    fn override_names_the_key() {
        let common = CommonArgs {
            scenario: None,
            out: PathBuf::from("unused"),
            seed: Some(9),
            sim_minutes: None,
            overrides: vec!["split_ch=4/6".into()],
        };
        let err = resolve(&common).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("split_ch"), "{err}");

        let bad = CommonArgs {
            overrides: vec!["nope=1".into()],
            ..common
        };
        assert!(resolve(&bad).unwrap_err().to_string().contains("unknown key 'nope'"));
    }

    #[test]
    fn manifest_parses_back() {
        let common = CommonArgs {
            scenario: None,
            out: PathBuf::from("unused"),
            seed: Some(3),
            sim_minutes: Some(5),
            overrides: vec!["sn_count = 1600".into()],
        };
        let r = resolve(&common).unwrap();
        let text = manifest(&r, "run", &[]);
        assert!(text.contains("# override: sn_count=1600"));
        assert_eq!(crate::domain::parse_scenario(&text, "m").unwrap(), r.config);
    }
}
