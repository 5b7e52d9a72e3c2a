//! Physical-layer model: log-distance path loss, density-dependent SNR,
//! Rayleigh block fading and the SIC decoding decision for a two-user
//! superposition.
//!
//! All powers are SNR-relative: noise is normalised to 1 and no absolute dBm
//! value appears anywhere. The configured effective SNR is the strong user's
//! mean received SNR on every tier; path loss only enters as a relative
//! correction when a forwarding detour changes the hop length.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

use crate::domain::{ScenarioConfig, Tier, SPEED_OF_LIGHT_M_S};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance {distance_m} m is below the reference distance {ref_m} m")]
    BelowReference { distance_m: f64, ref_m: f64 },
    #[error("reference distance must be positive, got {0}")]
    BadReference(f64),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Log-distance path loss `10 * n * log10(d / d0)`.
pub fn path_loss_db(distance_m: f64, exponent: f64, ref_m: f64) -> Result<f64, ChannelError> {
    if !(ref_m > 0.0) {
        return Err(ChannelError::BadReference(ref_m));
    }
    if !(distance_m >= ref_m) {
        return Err(ChannelError::BelowReference { distance_m, ref_m });
    }
    Ok(10.0 * exponent * (distance_m / ref_m).log10())
}

/// Base SNR minus the density penalty per 40 SNs above the baseline. Densities
/// below the baseline are clamped to the base SNR.
pub fn effective_snr_db(sn_count: u32, cfg: &ScenarioConfig) -> f64 {
    if sn_count <= cfg.density_baseline_sn {
        return cfg.base_snr_db;
    }
    let excess = f64::from(sn_count - cfg.density_baseline_sn);
    cfg.base_snr_db - cfg.density_penalty_db_per_40sn * excess / 40.0
}

/// One uplink hop as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub rate_bps: f64,
    pub pathloss_db: f64,
    pub effective_snr_db: f64,
}

impl LinkBudget {
    pub fn new(distance_m: f64, rate_bps: f64, cfg: &ScenarioConfig) -> Result<Self, ChannelError> {
        Ok(Self {
            distance_m,
            rate_bps,
            pathloss_db: path_loss_db(distance_m, cfg.pathloss_exponent, cfg.pathloss_ref_m)?,
            effective_snr_db: effective_snr_db(cfg.sn_count, cfg),
        })
    }

    /// Uplink into a receiver of the given tier (SN->CH for `Tier::Ch`, etc.).
    pub fn into_tier(receiver: Tier, cfg: &ScenarioConfig) -> Result<Self, ChannelError> {
        let (d, r) = match receiver {
            Tier::Ch => (cfg.dist_sn_ch_m, cfg.rate_sn_ch),
            Tier::Ap => (cfg.dist_ch_ap_m, cfg.rate_ch_ap),
            Tier::Cbs => (cfg.dist_ap_cbs_m, cfg.rate_ap_cbs),
            // SNs never receive; treat as the SN hop for symmetry.
            Tier::Sn => (cfg.dist_sn_ch_m, cfg.rate_sn_ch),
        };
        Self::new(d, r, cfg)
    }

    /// Same-tier detour of a different length: the SNR shifts by the path-loss
    /// difference between the two distances.
    pub fn detour(&self, distance_m: f64, cfg: &ScenarioConfig) -> Result<Self, ChannelError> {
        let pl = path_loss_db(distance_m, cfg.pathloss_exponent, cfg.pathloss_ref_m)?;
        Ok(Self {
            distance_m,
            rate_bps: self.rate_bps,
            pathloss_db: pl,
            effective_snr_db: self.effective_snr_db - (pl - self.pathloss_db),
        })
    }

    pub fn propagation_s(&self) -> f64 {
        self.distance_m / SPEED_OF_LIGHT_M_S
    }

    /// Serialisation time of `bits` plus one propagation delay.
    pub fn transfer_s(&self, bits: u64) -> f64 {
        bits as f64 / self.rate_bps + self.propagation_s()
    }
}

/// Unit-mean exponential power gain (squared Rayleigh amplitude).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let g: f64 = Exp1.sample(rng);
        if g > 0.0 {
            return g;
        }
    }
}

/// Bernoulli draw that consumes no randomness at the certain endpoints.
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

/// Received powers of a two-user superposition, noise-normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaReception {
    pub strong_power_lin: f64,
    pub weak_power_lin: f64,
    pub noise_power_lin: f64,
    pub fading_gain_strong: f64,
    pub fading_gain_weak: f64,
}

impl NomaReception {
    /// Builds the reception for fixed fading gains.
    pub fn with_gains(link: &LinkBudget, separation_db: f64, g_strong: f64, g_weak: f64) -> Self {
        DecodeLevels::new(link.effective_snr_db, separation_db, 0.0).reception(g_strong, g_weak)
    }

    pub fn sinr_strong(&self) -> f64 {
        self.strong_power_lin / (self.weak_power_lin + self.noise_power_lin)
    }

    pub fn sinr_weak(&self) -> f64 {
        self.weak_power_lin / self.noise_power_lin
    }
}

/// Linear-domain constants of one link SNR, so per-transmission decoding
/// needs no `powf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeLevels {
    pub snr_db: f64,
    pub separation_db: f64,
    pub threshold_db: f64,
    /// Mean strong-user (and single-user) SNR.
    pub strong_lin: f64,
    pub weak_lin: f64,
    pub threshold_lin: f64,
}

impl DecodeLevels {
    pub fn new(snr_db: f64, separation_db: f64, threshold_db: f64) -> Self {
        Self {
            snr_db,
            separation_db,
            threshold_db,
            strong_lin: db_to_linear(snr_db),
            weak_lin: db_to_linear(snr_db - separation_db),
            threshold_lin: db_to_linear(threshold_db),
        }
    }

    pub fn reception(&self, g_strong: f64, g_weak: f64) -> NomaReception {
        NomaReception {
            strong_power_lin: self.strong_lin * g_strong,
            weak_power_lin: self.weak_lin * g_weak,
            noise_power_lin: 1.0,
            fading_gain_strong: g_strong,
            fading_gain_weak: g_weak,
        }
    }

    /// [`sic_decode`] against this threshold.
    pub fn sic<R: Rng + ?Sized>(&self, rx: &NomaReception, reliability: f64, rng: &mut R) -> SicOutcome {
        if rx.sinr_strong() < self.threshold_lin || !bernoulli(rng, reliability) {
            return SicOutcome::None;
        }
        if rx.sinr_weak() < self.threshold_lin || !bernoulli(rng, reliability) {
            return SicOutcome::StrongOnly;
        }
        SicOutcome::BothOk
    }

    /// [`single_user_decode`] at this SNR and threshold.
    pub fn single<R: Rng + ?Sized>(&self, fading_gain: f64, reliability: f64, rng: &mut R) -> bool {
        self.strong_lin * fading_gain >= self.threshold_lin && bernoulli(rng, reliability)
    }
}

/// Draws independent block fading for both users of a pair.
pub fn received_powers<R: Rng + ?Sized>(
    link: &LinkBudget,
    separation_db: f64,
    rng: &mut R,
) -> NomaReception {
    let gs = sample_fading(rng);
    let gw = sample_fading(rng);
    NomaReception::with_gains(link, separation_db, gs, gw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SicOutcome {
    BothOk,
    StrongOnly,
    None,
}

/// Decodes the strong user against interference plus noise, cancels it, then
/// decodes the weak user against noise alone. The weak user is lost whenever
/// the strong one is.
pub fn sic_decode<R: Rng + ?Sized>(
    rx: &NomaReception,
    sic_threshold_db: f64,
    reliability: f64,
    rng: &mut R,
) -> SicOutcome {
    DecodeLevels::new(0.0, 0.0, sic_threshold_db).sic(rx, reliability, rng)
}

/// Single-user decode: SINR = SNR * fading against unit noise.
pub fn single_user_decode<R: Rng + ?Sized>(
    snr_db: f64,
    fading_gain: f64,
    threshold_db: f64,
    reliability: f64,
    rng: &mut R,
) -> bool {
    DecodeLevels::new(snr_db, 0.0, threshold_db).single(fading_gain, reliability, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_reference_points() {
        assert_eq!(path_loss_db(1.0, 2.5, 1.0).unwrap(), 0.0);
        // 25 * log10(15) and 25 * log10(30), evaluated by hand.
        assert!((path_loss_db(15.0, 2.5, 1.0).unwrap() - 29.402).abs() < 1e-3);
        assert!((path_loss_db(30.0, 2.5, 1.0).unwrap() - 36.928).abs() < 1e-3);
    }

    #[test]
    fn path_loss_rejects_short_distance() {
        assert!(matches!(
            path_loss_db(0.5, 2.5, 1.0),
            Err(ChannelError::BelowReference { .. })
        ));
        assert!(path_loss_db(5.0, 2.5, 0.0).is_err());
    }

    #[test]
    fn density_penalty() {
        let cfg = ScenarioConfig::default();
        assert_eq!(effective_snr_db(400, &cfg), 10.0);
        assert!((effective_snr_db(440, &cfg) - 9.75).abs() < 1e-12);
        assert!((effective_snr_db(1600, &cfg) - 2.5).abs() < 1e-12);
        assert_eq!(effective_snr_db(200, &cfg), 10.0);
    }

    #[test]
    fn sic_reference_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rx = NomaReception {
            strong_power_lin: 4.0,
            weak_power_lin: 1.0,
            noise_power_lin: 0.5,
            fading_gain_strong: 1.0,
            fading_gain_weak: 1.0,
        };
        assert!((linear_to_db(rx.sinr_strong()) - 4.26).abs() < 0.01);
        assert!((linear_to_db(rx.sinr_weak()) - 3.01).abs() < 0.01);
        assert_eq!(sic_decode(&rx, 3.0, 1.0, &mut rng), SicOutcome::BothOk);

        let equal = NomaReception {
            strong_power_lin: 1.0,
            weak_power_lin: 1.0,
            noise_power_lin: 1.0,
            ..rx
        };
        assert_eq!(sic_decode(&equal, 3.0, 1.0, &mut rng), SicOutcome::None);
        assert_eq!(sic_decode(&rx, 3.0, 0.0, &mut rng), SicOutcome::None);
    }

    #[test]
    fn received_powers_unit_fading() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ch, &cfg).unwrap();
        let rx = NomaReception::with_gains(&link, 6.0, 1.0, 1.0);
        assert!((rx.strong_power_lin - 10.0).abs() < 1e-9);
        assert!((rx.weak_power_lin - 2.512).abs() < 1e-3);
        assert_eq!(rx.noise_power_lin, 1.0);

        let same = NomaReception::with_gains(&link, 0.0, 1.0, 1.0);
        assert_eq!(same.strong_power_lin, same.weak_power_lin);

        let dense = LinkBudget {
            effective_snr_db: 2.5,
            ..link
        };
        let rx = NomaReception::with_gains(&dense, 6.0, 1.0, 1.0);
        assert!((rx.strong_power_lin - 1.778).abs() < 1e-3);
        assert!((rx.weak_power_lin - 0.447).abs() < 1e-3);
    }

    #[test]
    fn single_user_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(single_user_decode(10.0, 1.0, 3.0, 1.0, &mut rng));
        assert!(!single_user_decode(2.5, 1.0, 3.0, 1.0, &mut rng));
    }

    #[test]
    fn detour_of_equal_length_keeps_snr() {
        let cfg = ScenarioConfig::default();
        let link = LinkBudget::into_tier(Tier::Ap, &cfg).unwrap();
        let same = link.detour(cfg.dist_ch_ap_m, &cfg).unwrap();
        assert_eq!(same.effective_snr_db, link.effective_snr_db);
        let longer = link.detour(40.0, &cfg).unwrap();
        assert!(longer.effective_snr_db < link.effective_snr_db);
    }
}
