//! Direct sampling of recorded photon streams.
//!
//! Under CW excitation every detected photon returns the molecule to the
//! ground state, so inter-detection times are i.i.d. Between two detections
//! the molecule runs `M` excitation cycles, `M ~ 1 + Geometric(q)` with
//! `q = η·k_rad/k_e` (`k_e = k_rad + k_nr + k_isc`). Each cycle spends an
//! `Exp(k_exc)` sojourn in the ground state and an `Exp(k_e)` sojourn in
//! the excited state, and the exit channel of the excited state is
//! independent of its sojourn. Of the `M − 1` undetected cycles, a
//! `Binomial(M − 1, p)` number pass through the shelving level, each adding
//! an `Exp(k_isc_return)` sojourn. Sums of exponentials with a common rate
//! are Gamma distributed, so one inter-detection time costs a handful of
//! draws regardless of how many undetected cycles it spans.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric};

use super::detector::register;
use super::jump::PulsedKinetics;
use super::{
    ns_to_ps, seconds_to_ps, stage, stage_rng, DetectorConfig, Provenance, TimestampStream,
};
use crate::error::{Error, Result};
use crate::kinetics::{excitation_rate, EmitterConfig, ExcitationContext, ExcitationMode};

/// Dispatches on the excitation mode: CW gives a two-arm HBT stream,
/// pulsed gives a sync + detector TCSPC stream.
pub fn acquire(
    cfg: &EmitterConfig,
    ctx: &ExcitationContext,
    det: &DetectorConfig,
    duration_s: f64,
    seed: u64,
) -> Result<TimestampStream> {
    match ctx.mode {
        ExcitationMode::Cw => acquire_hbt(cfg, ctx, det, duration_s, seed),
        ExcitationMode::Pulsed { .. } => acquire_tcspc(cfg, ctx, det, duration_s, seed),
    }
}

/// Two-detector Hanbury-Brown-Twiss acquisition under CW excitation.
/// Channels 0 and 1 are the two arms; both use `det`.
pub fn acquire_hbt(
    cfg: &EmitterConfig,
    ctx: &ExcitationContext,
    det: &DetectorConfig,
    duration_s: f64,
    seed: u64,
) -> Result<TimestampStream> {
    if ctx.mode != ExcitationMode::Cw {
        return Err(Error::Precondition("HBT acquisition needs a CW context".into()));
    }
    cfg.validate()?;
    ctx.validate()?;
    det.validate()?;
    let duration_ps = seconds_to_ps(duration_s)?;
    if cfg.k_isc > 0.0 && cfg.k_isc_return <= 0.0 {
        return Err(Error::Config(
            "shelving level is reachable but k_isc_return is 0".into(),
        ));
    }

    let cycle = CwCycle {
        k_exc: excitation_rate(cfg, ctx)?,
        k_rad: cfg.k_rad,
        k_nr: cfg.k_nr(ctx.wavelength_nm)?,
        k_isc: cfg.k_isc,
        k_return: cfg.k_isc_return,
    };
    let mut emission = stage_rng(seed, stage::EMISSION);
    let mut arms = [Vec::new(), Vec::new()];
    // Each photon meets a 50:50 splitter, then a detector of efficiency η.
    cycle.run(
        duration_ps as f64 / 1e3,
        det.efficiency,
        &mut emission,
        |t, rng| arms[usize::from(rng.random::<bool>())].push(ns_to_ps(t)),
    )?;

    let channels = arms
        .into_iter()
        .enumerate()
        .map(|(i, times)| {
            let mut rng = stage_rng(seed, stage::ARM_BASE + i as u64);
            register(times, det, duration_ps, &mut rng)
        })
        .collect();
    Ok(TimestampStream {
        channels,
        duration_ps,
        provenance: Provenance::of(&(cfg, ctx, det, duration_ps), seed),
    })
}

/// Single-detector TCSPC acquisition under pulsed excitation. Channel 0
/// holds the (jitter-free) laser sync, channel 1 the detector.
pub fn acquire_tcspc(
    cfg: &EmitterConfig,
    ctx: &ExcitationContext,
    det: &DetectorConfig,
    duration_s: f64,
    seed: u64,
) -> Result<TimestampStream> {
    det.validate()?;
    let duration_ps = seconds_to_ps(duration_s)?;
    let kinetics = PulsedKinetics::new(cfg, ctx)?;
    let mut emission = stage_rng(seed, stage::EMISSION);
    let mut photons = Vec::new();
    kinetics.run(duration_ps as f64 / 1e3, det.efficiency, &mut emission, |t| {
        photons.push(ns_to_ps(t))
    });
    let mut rng = stage_rng(seed, stage::ARM_BASE);
    let photons = register(photons, det, duration_ps, &mut rng);
    Ok(TimestampStream {
        channels: vec![kinetics.sync_times(duration_ps), photons],
        duration_ps,
        provenance: Provenance::of(&(cfg, ctx, det, duration_ps), seed),
    })
}

#[derive(Debug, Clone, Copy)]
struct CwCycle {
    k_exc: f64,
    k_rad: f64,
    k_nr: f64,
    k_isc: f64,
    k_return: f64,
}

impl CwCycle {
    /// Calls `on_detect` at every kept photon up to `t_end_ns`. `keep` is the
    /// per-photon detection probability.
    fn run<R: Rng>(
        &self,
        t_end_ns: f64,
        keep: f64,
        rng: &mut R,
        mut on_detect: impl FnMut(f64, &mut R),
    ) -> Result<()> {
        let k_e = self.k_rad + self.k_nr + self.k_isc;
        let q = keep * self.k_rad / k_e;
        if self.k_exc <= 0.0 || q <= 0.0 {
            return Ok(());
        }
        let cycles = Geometric::new(q).map_err(|e| Error::numerical(e.to_string()))?;
        let p_shelf = (self.k_isc / k_e / (1.0 - q)).clamp(0.0, 1.0);

        let mut t = 0.0;
        loop {
            let m = 1 + cycles.sample(rng);
            let mf = m as f64;
            t += gamma(rng, mf, self.k_exc) + gamma(rng, mf, k_e);
            if self.k_isc > 0.0 && m > 1 {
                let shelved = Binomial::new(m - 1, p_shelf)
                    .map_err(|e| Error::numerical(e.to_string()))?
                    .sample(rng);
                if shelved > 0 {
                    t += gamma(rng, shelved as f64, self.k_return);
                }
            }
            if t >= t_end_ns {
                return Ok(());
            }
            on_detect(t, rng);
        }
    }
}

/// Sum of `n` independent `Exp(rate)` variates.
fn gamma<R: Rng>(rng: &mut R, n: f64, rate: f64) -> f64 {
    Gamma::new(n, 1.0 / rate).expect("positive shape and rate").sample(rng)
}
