//! Photon stream generation from the kinetic model.
//!
//! Two routes produce photons from the same level scheme:
//!
//! * [`simulate_cw`] / [`simulate_pulsed`] walk the jump process state by
//!   state (competing exponential clocks) and record every emitted photon.
//!   [`hbt_split`] and [`detect`] then turn emissions into recorded events.
//! * [`acquire`] produces the recorded stream directly. Undetected
//!   excitation cycles are aggregated in closed form (see [`acquire`]), which
//!   makes acquisitions of minutes at realistic (~1e-5) collection
//!   efficiencies tractable. The result has the same law as the
//!   emission → split → detect chain.
//!
//! All times are integer picoseconds. Every run is a pure function of its
//! inputs and seed.

mod acquire;
mod detector;
mod jump;

use std::fmt::Debug;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use acquire::{acquire, acquire_hbt, acquire_tcspc};
pub use detector::{detect, hbt_split, register, thin};
pub use jump::{simulate_cw, simulate_pulsed, PulsedRun};

/// Channel carrying laser sync events in pulsed acquisitions.
pub const SYNC_CHANNEL: u8 = 0;
/// Detector channel in pulsed (single-detector TCSPC) acquisitions.
pub const TCSPC_PHOTON_CHANNEL: u8 = 1;

pub(crate) const PS_PER_NS: f64 = 1e3;
pub(crate) const PS_PER_S: f64 = 1e12;

pub(crate) fn ns_to_ps(t_ns: f64) -> u64 {
    (t_ns * PS_PER_NS).round() as u64
}

pub(crate) fn seconds_to_ps(t_s: f64) -> Result<u64> {
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::Config(format!("duration must be > 0 s, got {t_s}")));
    }
    Ok((t_s * PS_PER_S).round() as u64)
}

/// Independent, reproducible random stream for one stage of a run.
pub(crate) fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

pub(crate) mod stage {
    pub const EMISSION: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const THIN: u64 = 3;
    pub const REGISTER: u64 = 4;
    /// Per-channel detector stages start here.
    pub const ARM_BASE: u64 = 16;
}

/// Where a stream came from: a digest of the generating configuration and the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub config_hash: [u8; 32],
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: [u8; 32], seed: u64) -> Self {
        Provenance { config_hash, seed }
    }

    /// Digest of the `Debug` rendering of `parts`. `f64` and `BTreeMap`
    /// renderings are platform independent, so the hash is too.
    pub fn of<T: Debug + ?Sized>(parts: &T, seed: u64) -> Self {
        let digest = Sha256::digest(format!("{parts:?}").as_bytes());
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(&digest);
        Provenance { config_hash, seed }
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.config_hash)
    }
}

/// Emission times of one emitter (or one HBT arm), picoseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonStream {
    pub times_ps: Vec<u64>,
    pub duration_ps: u64,
    pub provenance: Provenance,
}

impl PhotonStream {
    pub fn empty(duration_ps: u64, provenance: Provenance) -> Self {
        PhotonStream {
            times_ps: Vec::new(),
            duration_ps,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn mean_rate_cps(&self) -> f64 {
        self.len() as f64 / self.duration_s()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Probability that a photon reaching this detector is registered.
    pub efficiency: f64,
    /// Gaussian timing jitter (standard deviation), ns.
    pub jitter_sigma_ns: f64,
    /// Non-paralyzable dead time, ns.
    pub dead_time_ns: f64,
    pub dark_rate_cps: f64,
    pub background_rate_cps: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            efficiency: crate::kinetics::DEFAULT_DETECTION_EFFICIENCY,
            jitter_sigma_ns: 0.41 / std::f64::consts::SQRT_2,
            dead_time_ns: 22.0,
            dark_rate_cps: 0.0,
            background_rate_cps: 0.0,
        }
    }
}

impl DetectorConfig {
    /// Lossless, noiseless detector.
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            jitter_sigma_ns: 0.0,
            dead_time_ns: 0.0,
            dark_rate_cps: 0.0,
            background_rate_cps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!(
                "detector efficiency must lie in [0,1], got {}",
                self.efficiency
            )));
        }
        for (name, v) in [
            ("jitter_sigma", self.jitter_sigma_ns),
            ("dead_time", self.dead_time_ns),
            ("dark_rate", self.dark_rate_cps),
            ("background_rate", self.background_rate_cps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("detector {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Dead time in picoseconds. Two events can never share a picosecond.
    pub(crate) fn min_gap_ps(&self) -> u64 {
        ns_to_ps(self.dead_time_ns).max(1)
    }
}

/// Recorded events of a multi-channel acquisition. Each channel is sorted
/// and strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampStream {
    pub channels: Vec<Vec<u64>>,
    pub duration_ps: u64,
    pub provenance: Provenance,
}

impl TimestampStream {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, id: u8) -> Result<&[u64]> {
        self.channels
            .get(id as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Usage(format!("stream has no channel {id}")))
    }

    pub fn count(&self, id: u8) -> u64 {
        self.channels.get(id as usize).map_or(0, |c| c.len() as u64)
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    /// Mean count rate of a channel over the acquisition, counts per second.
    pub fn rate_cps(&self, id: u8) -> f64 {
        self.count(id) as f64 / self.duration_s()
    }

    pub fn total_events(&self) -> u64 {
        self.channels.iter().map(|c| c.len() as u64).sum()
    }

    /// Checks ordering and that no event lies beyond the acquisition window.
    pub fn validate(&self) -> Result<()> {
        for (id, ch) in self.channels.iter().enumerate() {
            for (i, w) in ch.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(Error::NonMonotonic {
                        channel: id as u8,
                        index: i as u64 + 1,
                    });
                }
            }
            if let Some(&last) = ch.last() {
                if last > self.duration_ps {
                    return Err(Error::Format(format!(
                        "channel {id} has an event at {last} ps beyond the {} ps acquisition",
                        self.duration_ps
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest gap between consecutive events within any channel.
    pub fn min_gap_ps(&self) -> Option<u64> {
        self.channels
            .iter()
            .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
            .min()
    }
}
