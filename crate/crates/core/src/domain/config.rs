//! Scenario configuration and its validation.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Multiple-access scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Two-stage NOMA with PTP primary sync and consensus fallback.
    TsnIot,
    /// Priority-based orthogonal comparator.
    Ofdma,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::TsnIot => "TSN_IOT",
            Scheme::Ofdma => "OFDMA",
        }
    }

    /// Short lowercase label used in CSV rows and CLI lists.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::TsnIot => "tsn",
            Scheme::Ofdma => "ofdma",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tsn_iot" | "tsn-iot" | "tsniot" | "tsn" => Ok(Scheme::TsnIot),
            "ofdma" => Ok(Scheme::Ofdma),
            other => Err(format!("unknown scheme '{other}' (expected TSN_IOT or OFDMA)")),
        }
    }
}

/// How per-minute SN traffic is placed inside each minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrivalModel {
    /// Every SN of a cluster reports its minute's packets at one shared
    /// instant, drawn uniformly within the minute per cluster.
    ClusterEpoch,
    /// Every packet arrives at an independent uniform instant within the minute.
    Uniform,
}

impl ArrivalModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ArrivalModel::ClusterEpoch => "CLUSTER_EPOCH",
            ArrivalModel::Uniform => "UNIFORM",
        }
    }
}

impl fmt::Display for ArrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArrivalModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cluster_epoch" | "cluster-epoch" | "epoch" => Ok(ArrivalModel::ClusterEpoch),
            "uniform" => Ok(ArrivalModel::Uniform),
            other => Err(format!(
                "unknown arrival model '{other}' (expected CLUSTER_EPOCH or UNIFORM)"
            )),
        }
    }
}

/// Urgent/normal partition of one tier's sub-bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    pub urgent: u32,
    pub normal: u32,
}

impl Split {
    pub const fn new(urgent: u32, normal: u32) -> Self {
        Self { urgent, normal }
    }

    pub fn total(self) -> u32 {
        self.urgent + self.normal
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.urgent, self.normal)
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (u, n) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| format!("split '{s}' must look like URGENT/NORMAL, e.g. 4/1"))?;
        let urgent = u
            .trim()
            .parse()
            .map_err(|_| format!("split '{s}': urgent count is not a non-negative integer"))?;
        let normal = n
            .trim()
            .parse()
            .map_err(|_| format!("split '{s}': normal count is not a non-negative integer"))?;
        Ok(Split { urgent, normal })
    }
}

/// Every tunable of a scenario. Defaults reproduce the reference hospital setup
/// at desk scale (1,000 simulated minutes).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sn_count: u32,
    pub ch_count: u32,
    pub ap_count: u32,
    pub cbs_count: u32,

    pub dist_sn_ch_m: f64,
    pub dist_ch_ap_m: f64,
    pub dist_ap_cbs_m: f64,

    pub rate_sn_ch: f64,
    pub rate_ch_ap: f64,
    pub rate_ap_cbs: f64,

    pub noma_pair_size: u32,

    pub subbands_ch: u32,
    pub subbands_ap: u32,
    pub subbands_cbs: u32,
    pub split_ch: Split,
    pub split_ap: Split,
    pub split_cbs: Split,

    pub max_retries: u32,

    pub ptp_msg_count: u32,
    pub ptp_msg_bits: u32,
    pub ptp_proc_delay_s: f64,

    pub dsync_slot_s: f64,
    pub dsync_iter_min: u32,
    pub dsync_iter_max: u32,
    /// Spread below which consensus counts as converged.
    pub dsync_tolerance_s: f64,
    /// Unsynced clocks start uniformly within +/- this bound each cycle.
    pub dsync_offset_bound_s: f64,

    pub base_snr_db: f64,
    pub density_penalty_db_per_40sn: f64,
    pub density_baseline_sn: u32,

    pub pathloss_exponent: f64,
    pub pathloss_ref_m: f64,

    pub sic_threshold_db: f64,
    pub power_level_separation_db: f64,

    pub pkt_total_bytes: u32,
    pub pkt_header_bytes: u32,
    pub pkt_payload_bytes: u32,

    pub pkts_per_min_normal: u32,
    pub pkts_per_min_urgent: u32,
    pub arrival_model: ArrivalModel,

    pub agg_factor: f64,
    pub reliability: f64,

    pub sync_cycle_min: u32,
    pub sim_minutes: u32,

    pub disconnect_prob: f64,

    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sn_count: 400,
            ch_count: 40,
            ap_count: 4,
            cbs_count: 1,
            dist_sn_ch_m: 15.0,
            dist_ch_ap_m: 20.0,
            dist_ap_cbs_m: 30.0,
            rate_sn_ch: 1e6,
            rate_ch_ap: 1e7,
            rate_ap_cbs: 1e8,
            noma_pair_size: 2,
            subbands_ch: 5,
            subbands_ap: 5,
            subbands_cbs: 2,
            split_ch: Split::new(4, 1),
            split_ap: Split::new(4, 1),
            split_cbs: Split::new(1, 1),
            max_retries: 3,
            ptp_msg_count: 3,
            ptp_msg_bits: 32,
            ptp_proc_delay_s: 10e-6,
            dsync_slot_s: 10e-6,
            dsync_iter_min: 3,
            dsync_iter_max: 20,
            dsync_tolerance_s: 1e-6,
            dsync_offset_bound_s: 50e-6,
            base_snr_db: 10.0,
            density_penalty_db_per_40sn: 0.25,
            density_baseline_sn: 400,
            pathloss_exponent: 2.5,
            pathloss_ref_m: 1.0,
            sic_threshold_db: 3.0,
            power_level_separation_db: 6.0,
            pkt_total_bytes: 128,
            pkt_header_bytes: 8,
            pkt_payload_bytes: 120,
            pkts_per_min_normal: 10,
            pkts_per_min_urgent: 10,
            arrival_model: ArrivalModel::ClusterEpoch,
            agg_factor: 0.6,
            reliability: 0.9,
            sync_cycle_min: 10,
            sim_minutes: 1_000,
            disconnect_prob: 0.0,
            scheme: Scheme::TsnIot,
            seed: 1,
        }
    }
}

/// One violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Field (or field group) the violation is about.
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid scenario configuration: {}", join_violations(.0))]
pub struct ConfigError(pub Vec<Violation>);

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ScenarioConfig {
    /// Returns every violated invariant, not just the first one.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = validate_config(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(v))
        }
    }

    pub fn header_bits(&self) -> u64 {
        u64::from(self.pkt_header_bytes) * 8
    }

    pub fn payload_bits(&self) -> u64 {
        u64::from(self.pkt_payload_bytes) * 8
    }

    pub fn sns_per_ch(&self) -> u32 {
        self.sn_count / self.ch_count
    }

    pub fn chs_per_ap(&self) -> u32 {
        self.ch_count / self.ap_count
    }

    pub fn horizon_s(&self) -> f64 {
        f64::from(self.sim_minutes) * 60.0
    }
}

/// Total validation: collects every violation.
pub fn validate_config(c: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |key: &'static str, message: String| out.push(Violation { key, message });

    for (key, value) in [
        ("sn_count", c.sn_count),
        ("ch_count", c.ch_count),
        ("ap_count", c.ap_count),
    ] {
        if value == 0 {
            bad(key, "must be a positive integer".into());
        }
    }
    if c.cbs_count != 1 {
        bad("cbs_count", format!("must be exactly 1, got {}", c.cbs_count));
    }
    if c.ch_count > 0 && c.sn_count % c.ch_count != 0 {
        bad(
            "sn_count",
            format!(
                "{} SNs cannot be split evenly across {} CHs",
                c.sn_count, c.ch_count
            ),
        );
    }
    if c.ap_count > 0 && c.ch_count % c.ap_count != 0 {
        bad(
            "ch_count",
            format!(
                "{} CHs cannot be split evenly across {} APs",
                c.ch_count, c.ap_count
            ),
        );
    }
    if c.noma_pair_size != 2 {
        bad(
            "noma_pair_size",
            format!("only two-user superposition is modelled, got {}", c.noma_pair_size),
        );
    }

    for (key, value) in [
        ("dist_sn_ch_m", c.dist_sn_ch_m),
        ("dist_ch_ap_m", c.dist_ch_ap_m),
        ("dist_ap_cbs_m", c.dist_ap_cbs_m),
    ] {
        if !(value.is_finite() && value >= c.pathloss_ref_m) {
            bad(
                key,
                format!("must be finite and >= pathloss_ref_m ({}), got {value}", c.pathloss_ref_m),
            );
        }
    }
    for (key, value) in [
        ("rate_sn_ch", c.rate_sn_ch),
        ("rate_ch_ap", c.rate_ch_ap),
        ("rate_ap_cbs", c.rate_ap_cbs),
        ("pathloss_ref_m", c.pathloss_ref_m),
        ("pathloss_exponent", c.pathloss_exponent),
        ("dsync_slot_s", c.dsync_slot_s),
        ("dsync_tolerance_s", c.dsync_tolerance_s),
    ] {
        if !(value.is_finite() && value > 0.0) {
            bad(key, format!("must be finite and > 0, got {value}"));
        }
    }
    for (key, value) in [
        ("ptp_proc_delay_s", c.ptp_proc_delay_s),
        ("dsync_offset_bound_s", c.dsync_offset_bound_s),
        ("power_level_separation_db", c.power_level_separation_db),
        ("density_penalty_db_per_40sn", c.density_penalty_db_per_40sn),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            bad(key, format!("must be finite and >= 0, got {value}"));
        }
    }
    for (key, value) in [
        ("base_snr_db", c.base_snr_db),
        ("sic_threshold_db", c.sic_threshold_db),
    ] {
        if !value.is_finite() {
            bad(key, format!("must be finite, got {value}"));
        }
    }

    for (key, split, bands) in [
        ("split_ch", c.split_ch, c.subbands_ch),
        ("split_ap", c.split_ap, c.subbands_ap),
        ("split_cbs", c.split_cbs, c.subbands_cbs),
    ] {
        if split.total() != bands {
            bad(
                key,
                format!("split sums to {} \u{2260} {} sub-bands", split.total(), bands),
            );
        }
    }
    for (key, bands) in [
        ("subbands_ch", c.subbands_ch),
        ("subbands_ap", c.subbands_ap),
        ("subbands_cbs", c.subbands_cbs),
    ] {
        if bands == 0 {
            bad(key, "a tier needs at least one sub-band".into());
        }
    }

    if c.ptp_msg_count == 0 {
        bad("ptp_msg_count", "must be positive".into());
    }
    if c.ptp_msg_bits == 0 {
        bad("ptp_msg_bits", "must be positive".into());
    }
    if c.dsync_iter_min > c.dsync_iter_max {
        bad(
            "dsync_iter_min",
            format!(
                "dsync_iter_min ({}) exceeds dsync_iter_max ({})",
                c.dsync_iter_min, c.dsync_iter_max
            ),
        );
    }

    if !(c.reliability > 0.0 && c.reliability <= 1.0) {
        bad("reliability", format!("must lie in (0, 1], got {}", c.reliability));
    }
    if !(c.agg_factor > 0.0 && c.agg_factor <= 1.0) {
        bad("agg_factor", format!("must lie in (0, 1], got {}", c.agg_factor));
    }
    if !(0.0..=1.0).contains(&c.disconnect_prob) {
        bad(
            "disconnect_prob",
            format!("must lie in [0, 1], got {}", c.disconnect_prob),
        );
    }
    if c.pkt_header_bytes + c.pkt_payload_bytes != c.pkt_total_bytes {
        bad(
            "pkt_total_bytes",
            format!(
                "header {} B + payload {} B = {} B \u{2260} total {} B",
                c.pkt_header_bytes,
                c.pkt_payload_bytes,
                c.pkt_header_bytes + c.pkt_payload_bytes,
                c.pkt_total_bytes
            ),
        );
    }
    if c.pkt_header_bytes == 0 {
        bad("pkt_header_bytes", "info packets reuse the header size; must be > 0".into());
    }
    if c.sync_cycle_min == 0 {
        bad("sync_cycle_min", "must be positive".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(validate_config(&ScenarioConfig::default()).is_empty());
    }

    #[test]
    fn oversized_split_is_reported() {
        let cfg = ScenarioConfig {
            split_ch: Split::new(4, 2),
            ..Default::default()
        };
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "split_ch");
        assert!(v[0].message.contains("split sums to 6 \u{2260} 5"), "{}", v[0]);
    }

    #[test]
    fn zero_reliability_is_rejected() {
        let cfg = ScenarioConfig {
            reliability: 0.0,
            ..Default::default()
        };
        let v = validate_config(&cfg);
        assert!(v.iter().any(|v| v.key == "reliability"));
    }

    #[test]
    fn all_violations_are_collected() {
        let cfg = ScenarioConfig {
            sn_count: 401,
            reliability: 1.5,
            agg_factor: 0.0,
            dsync_iter_min: 30,
            pkt_total_bytes: 100,
            ..Default::default()
        };
        let keys: Vec<_> = validate_config(&cfg).into_iter().map(|v| v.key).collect();
        for k in ["sn_count", "reliability", "agg_factor", "dsync_iter_min", "pkt_total_bytes"] {
            assert!(keys.contains(&k), "missing {k} in {keys:?}");
        }
    }

    #[test]
    fn split_parsing() {
        assert_eq!("4/1".parse::<Split>().unwrap(), Split::new(4, 1));
        assert_eq!(" 3 / 2 ".parse::<Split>().unwrap(), Split::new(3, 2));
        assert!("4-1".parse::<Split>().is_err());
        assert!("a/1".parse::<Split>().is_err());
    }

    #[test]
    fn scheme_parsing_accepts_short_forms() {
        assert_eq!("tsn".parse::<Scheme>().unwrap(), Scheme::TsnIot);
        assert_eq!("TSN_IOT".parse::<Scheme>().unwrap(), Scheme::TsnIot);
        assert_eq!("Ofdma".parse::<Scheme>().unwrap(), Scheme::Ofdma);
        assert!("lte".parse::<Scheme>().is_err());
    }
}
