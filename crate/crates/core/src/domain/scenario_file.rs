//! Flat `key = value` scenario files.
//!
//! One parameter per line, names exactly matching [`ScenarioConfig`] fields.
//! `#` and `;` start comments, `[section]` headers are accepted and ignored,
//! unknown or repeated keys are errors. [`to_scenario_string`] writes every key
//! in a fixed order so a written file parses back to the same configuration.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use super::config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}:{line}: unknown key '{key}'")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("{origin}:{line}: key '{key}' given more than once")]
    DuplicateKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("{origin}:{line}: bad value for '{key}': {message}")]
    BadValue {
        origin: String,
        line: usize,
        key: String,
        message: String,
    },
}

type Setter = fn(&mut ScenarioConfig, &str) -> Result<(), String>;
type Getter = fn(&ScenarioConfig) -> String;

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>()
        .map_err(|_| format!("'{s}' is not a valid {}", std::any::type_name::<T>()))
}

macro_rules! keys {
    ($( $field:ident : $kind:ident ),* $(,)?) => {
        const KEYS: &[(&str, Setter, Getter)] = &[
            $( (
                stringify!($field),
                |c, v| { c.$field = keys!(@parse $kind v)?; Ok(()) },
                |c| c.$field.to_string(),
            ), )*
        ];
    };
    (@parse num $v:ident) => { parse_num($v) };
    (@parse parsed $v:ident) => { $v.parse() };
}

keys! {
    sn_count: num,
    ch_count: num,
    ap_count: num,
    cbs_count: num,
    dist_sn_ch_m: num,
    dist_ch_ap_m: num,
    dist_ap_cbs_m: num,
    rate_sn_ch: num,
    rate_ch_ap: num,
    rate_ap_cbs: num,
    noma_pair_size: num,
    subbands_ch: num,
    subbands_ap: num,
    subbands_cbs: num,
    split_ch: parsed,
    split_ap: parsed,
    split_cbs: parsed,
    max_retries: num,
    ptp_msg_count: num,
    ptp_msg_bits: num,
    ptp_proc_delay_s: num,
    dsync_slot_s: num,
    dsync_iter_min: num,
    dsync_iter_max: num,
    dsync_tolerance_s: num,
    dsync_offset_bound_s: num,
    base_snr_db: num,
    density_penalty_db_per_40sn: num,
    density_baseline_sn: num,
    pathloss_exponent: num,
    pathloss_ref_m: num,
    sic_threshold_db: num,
    power_level_separation_db: num,
    pkt_total_bytes: num,
    pkt_header_bytes: num,
    pkt_payload_bytes: num,
    pkts_per_min_normal: num,
    pkts_per_min_urgent: num,
    arrival_model: parsed,
    agg_factor: num,
    reliability: num,
    sync_cycle_min: num,
    sim_minutes: num,
    disconnect_prob: num,
    scheme: parsed,
    seed: num,
}

/// All recognised keys, in file order.
pub fn scenario_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _, _)| *k)
}

/// Sets one field by name. Used for both file lines and `--set KEY=VALUE`.
pub fn apply_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), KeyError> {
    let (_, set, _) = KEYS
        .iter()
        .find(|(k, _, _)| *k == key)
        .ok_or(KeyError::Unknown)?;
    set(cfg, value.trim()).map_err(KeyError::BadValue)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyError {
    Unknown,
    BadValue(String),
}

/// Parses scenario text on top of the defaults. `origin` labels diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig, ScenarioFileError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() || (content.starts_with('[') && content.ends_with(']')) {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioFileError::Syntax {
                origin: origin.to_string(),
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) && KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(ScenarioFileError::DuplicateKey {
                origin: origin.to_string(),
                line,
                key: key.to_string(),
            });
        }
        apply_key(&mut cfg, key, value).map_err(|e| match e {
            KeyError::Unknown => ScenarioFileError::UnknownKey {
                origin: origin.to_string(),
                line,
                key: key.to_string(),
            },
            KeyError::BadValue(message) => ScenarioFileError::BadValue {
                origin: origin.to_string(),
                line,
                key: key.to_string(),
                message,
            },
        })?;
    }
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Writes every key, one per line, in a fixed order.
pub fn to_scenario_string(cfg: &ScenarioConfig) -> String {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, _, get) in KEYS {
        out.push_str(&format!("{key:<width$} = {}\n", get(cfg)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::config::{Scheme, Split};

    #[test]
    fn round_trips_defaults() {
        let cfg = ScenarioConfig::default();
        let text = to_scenario_string(&cfg);
        assert_eq!(parse_scenario(&text, "mem").unwrap(), cfg);
    }

    #[test]
    fn comments_sections_and_overrides() {
        let text = "\
# hospital ward
[scenario]
sn_count = 1600   ; dense ward
scheme = ofdma
split_ch = 3/2
rate_sn_ch = 1e6
";
        let cfg = parse_scenario(text, "ward.ini").unwrap();
        assert_eq!(cfg.sn_count, 1600);
        assert_eq!(cfg.scheme, Scheme::Ofdma);
        assert_eq!(cfg.split_ch, Split::new(3, 2));
        assert_eq!(cfg.rate_sn_ch, 1e6);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_scenario("sn_count = 400\nbogus = 1\n", "s.ini").unwrap_err();
        assert_eq!(err.to_string(), "s.ini:2: unknown key 'bogus'");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_scenario("seed = 1\nseed = 2\n", "s.ini").unwrap_err();
        assert!(matches!(err, ScenarioFileError::DuplicateKey { line: 2, .. }));
    }

    #[test]
    fn bad_value_names_key() {
        let err = parse_scenario("split_ch = four/one\n", "s.ini").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("s.ini:1: bad value for 'split_ch'"), "{msg}");
    }

    #[test]
    fn missing_equals_is_syntax_error() {
        let err = parse_scenario("sn_count 400\n", "s.ini").unwrap_err();
        assert!(matches!(err, ScenarioFileError::Syntax { line: 1, .. }));
    }
}
