//! Deterministic discrete-event simulator of a four-tier IoT network
//! (sensor node, cluster head, access point, central base station) comparing
//! priority-aware two-user NOMA access with PTP-plus-consensus clock sync
//! against an orthogonal OFDMA baseline.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: configuration, topology, packets, scenario files
//! - [`channel`]: path loss, SNR, fading and SIC decoding
//! - [`noma_mac`]: info-packet negotiation, sub-band allocation, pair transmission, aggregation
//! - [`sync`]: PTP primary sync, consensus fallback, makespan metric
//! - [`ofdma_baseline`]: one-user-per-band comparator
//! - [`engine`]: event loop, metrics, parameter sweeps
//! - [`cli`]: the `run` / `sweep` front end used by the `tsn-iot` binary

pub mod channel;
pub mod cli;
pub mod domain;
pub mod engine;
pub mod noma_mac;
pub mod ofdma_baseline;
pub mod sync;
