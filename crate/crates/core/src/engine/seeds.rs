//! Counter-based seed splitting. Every replication of every sweep cell gets
//! its own ChaCha8 stream, addressed by a hash of what the cell is rather than
//! where it sits in the sweep, so adding cells or reordering them changes
//! nothing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{ScenarioConfig, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    /// Sync cycles and link outages.
    Sync,
    /// Arrivals, access contention and channel draws.
    Traffic,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Sync => 0x5359_4e43,
            StreamPurpose::Traffic => 0x5452_4146,
        }
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fold(words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(0x243F_6A88_85A3_08D3, |h, w| splitmix64(h ^ w))
}

/// Identity of a cell. The sync stream ignores the sub-band splits, which
/// only shape data traffic.
pub fn cell_key(cfg: &ScenarioConfig, purpose: StreamPurpose) -> u64 {
    let scheme = match cfg.scheme {
        Scheme::TsnIot => 1,
        Scheme::Ofdma => 2,
    };
    let mut words = vec![
        u64::from(cfg.sn_count),
        u64::from(cfg.ch_count),
        u64::from(cfg.ap_count),
        scheme,
    ];
    if purpose == StreamPurpose::Traffic {
        for s in [cfg.split_ch, cfg.split_ap, cfg.split_cbs] {
            words.push((u64::from(s.urgent) << 32) | u64::from(s.normal));
        }
    }
    fold(words)
}

/// Independent stream for one (cell, replication, purpose).
pub fn stream_rng(cfg: &ScenarioConfig, replication: u32, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(fold([cell_key(cfg, purpose), u64::from(replication), purpose.tag()]));
    rng
}
