//! State-by-state sampling of the emitter's jump process.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};

use super::{ns_to_ps, seconds_to_ps, stage, stage_rng, PhotonStream, Provenance};
use crate::error::{Error, Result};
use crate::kinetics::{
    build_rate_matrix, excitation_rate, EmitterConfig, ExcitationContext, ExcitationMode, Level,
};

/// Exact CW trajectory: one photon per radiative excited → ground jump.
/// Starts in the ground state at t = 0.
pub fn simulate_cw(
    cfg: &EmitterConfig,
    ctx: &ExcitationContext,
    duration_s: f64,
    seed: u64,
) -> Result<PhotonStream> {
    let duration_ps = seconds_to_ps(duration_s)?;
    let m = build_rate_matrix(cfg, ctx)?;
    let provenance = Provenance::of(&(cfg, ctx, duration_ps), seed);
    for level in m.reachable_from_ground() {
        if level != Level::Ground && m.escape_rate(level) <= 0.0 {
            return Err(Error::Config(format!(
                "level {} is reachable but has no way out",
                level.label()
            )));
        }
    }

    let k_rad = cfg.k_rad;
    let k_nr = cfg.k_nr(ctx.wavelength_nm)?;
    let t_end_ns = duration_ps as f64 / 1e3;
    let mut rng = stage_rng(seed, stage::EMISSION);
    let mut times = Vec::new();
    let mut t = 0.0;
    let mut state = Level::Ground;
    loop {
        let escape = m.escape_rate(state);
        if escape <= 0.0 {
            break;
        }
        t += sample_exp(&mut rng, escape);
        if t >= t_end_ns {
            break;
        }
        let u = rng.random::<f64>() * escape;
        state = match state {
            Level::Ground => Level::Excited,
            Level::Excited => {
                if u < k_rad {
                    times.push(ns_to_ps(t));
                    Level::Ground
                } else if u < k_rad + k_nr {
                    Level::Ground
                } else {
                    Level::Isc
                }
            }
            Level::Isc => Level::Ground,
        };
    }
    // Rounding to ps can only merge, never reorder.
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    Ok(PhotonStream {
        times_ps: times,
        duration_ps,
        provenance,
    })
}

/// Emissions under pulsed excitation plus the laser sync times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulsedRun {
    pub photons: PhotonStream,
    /// One sync event at the start of every pulse, ps.
    pub syncs_ps: Vec<u64>,
}

/// Exact trajectory under rectangular excitation pulses.
///
/// `ctx.power_uw` is the time-averaged power: during a pulse the excitation
/// rate is the CW rate scaled by `period / pulse_width`, so the mean dose per
/// period matches CW excitation at the same power.
pub fn simulate_pulsed(
    cfg: &EmitterConfig,
    ctx: &ExcitationContext,
    duration_s: f64,
    seed: u64,
) -> Result<PulsedRun> {
    let duration_ps = seconds_to_ps(duration_s)?;
    let kinetics = PulsedKinetics::new(cfg, ctx)?;
    let provenance = Provenance::of(&(cfg, ctx, duration_ps), seed);
    let mut rng = stage_rng(seed, stage::EMISSION);
    let mut times = Vec::new();
    kinetics.run(duration_ps as f64 / 1e3, 1.0, &mut rng, |t| times.push(ns_to_ps(t)));
    Ok(PulsedRun {
        photons: PhotonStream {
            times_ps: times,
            duration_ps,
            provenance,
        },
        syncs_ps: kinetics.sync_times(duration_ps),
    })
}

pub(super) fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

/// Rates governing a pulsed trajectory, ns⁻¹ and ns.
#[derive(Debug, Clone, Copy)]
pub(super) struct PulsedKinetics {
    /// Excitation rate while a pulse is on.
    pub k_pulse: f64,
    pub k_rad: f64,
    pub k_nr: f64,
    pub k_isc: f64,
    pub k_return: f64,
    pub period_ns: f64,
    pub width_ns: f64,
}

impl PulsedKinetics {
    pub fn new(cfg: &EmitterConfig, ctx: &ExcitationContext) -> Result<Self> {
        cfg.validate()?;
        ctx.validate()?;
        let ExcitationMode::Pulsed {
            period_ns,
            pulse_width_ps,
        } = ctx.mode
        else {
            return Err(Error::Precondition("pulsed simulation needs a pulsed context".into()));
        };
        let width_ns = pulse_width_ps / 1e3;
        if cfg.k_isc > 0.0 && cfg.k_isc_return <= 0.0 {
            return Err(Error::Config(
                "shelving level is reachable but k_isc_return is 0".into(),
            ));
        }
        Ok(PulsedKinetics {
            k_pulse: excitation_rate(cfg, ctx)? * period_ns / width_ns,
            k_rad: cfg.k_rad,
            k_nr: cfg.k_nr(ctx.wavelength_nm)?,
            k_isc: cfg.k_isc,
            k_return: cfg.k_isc_return,
            period_ns,
            width_ns,
        })
    }

    /// Pulse starts `n·period` strictly before the end of the acquisition.
    pub fn sync_times(&self, duration_ps: u64) -> Vec<u64> {
        let n = (duration_ps as f64 / 1e3 / self.period_ns).ceil() as u64;
        (0..n)
            .map(|i| ns_to_ps(i as f64 * self.period_ns))
            .filter(|&t| t < duration_ps)
            .collect()
    }

    /// Walks the trajectory up to `t_end_ns`. Each emitted photon is passed to
    /// `on_photon` with probability `keep` (Bernoulli thinning folded into the
    /// walk so unkept photons cost nothing downstream).
    pub fn run<R: Rng + ?Sized>(
        &self,
        t_end_ns: f64,
        keep: f64,
        rng: &mut R,
        mut on_photon: impl FnMut(f64),
    ) {
        if self.k_pulse <= 0.0 {
            return;
        }
        // Probability that a pulse excites a molecule sitting in the ground state.
        let p_pulse = -(-self.k_pulse * self.width_ns).exp_m1();
        let skip = Geometric::new(p_pulse).ok();
        let k_excited = self.k_rad + self.k_nr + self.k_isc;

        let mut t = 0.0;
        let mut state = Level::Ground;
        while t < t_end_ns {
            match state {
                Level::Ground => {
                    let n = (t / self.period_ns).floor();
                    let offset = t - n * self.period_ns;
                    if offset < self.width_ns {
                        let dt = sample_exp(rng, self.k_pulse);
                        if dt < self.width_ns - offset {
                            t += dt;
                            state = Level::Excited;
                            continue;
                        }
                    }
                    // Pulses that pass without excitation, then a truncated
                    // exponential inside the exciting pulse.
                    let Some(skip) = &skip else { return };
                    let idle = skip.sample(rng) as f64;
                    let pulse = n + 1.0 + idle;
                    let u: f64 = rng.random();
                    let within = -(-u * p_pulse).ln_1p() / self.k_pulse;
                    t = pulse * self.period_ns + within.min(self.width_ns);
                    state = Level::Excited;
                }
                Level::Excited => {
                    t += sample_exp(rng, k_excited);
                    if t >= t_end_ns {
                        break;
                    }
                    let u = rng.random::<f64>() * k_excited;
                    state = if u < self.k_rad {
                        if keep >= 1.0 || rng.random::<f64>() < keep {
                            on_photon(t);
                        }
                        Level::Ground
                    } else if u < self.k_rad + self.k_nr {
                        Level::Ground
                    } else {
                        Level::Isc
                    };
                }
                Level::Isc => {
                    t += sample_exp(rng, self.k_return);
                    state = Level::Ground;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{steady_state, GREEN_NM, RED_NM};

    #[test]
    fn dark_emitter_emits_nothing() {
        let cfg = EmitterConfig::reference();
        let s = simulate_cw(&cfg, &ExcitationContext::cw(RED_NM, 0.0), 1e-3, 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.duration_ps, 1_000_000_000);
    }

    #[test]
    fn seeds_reproduce() {
        let cfg = EmitterConfig::reference();
        let ctx = ExcitationContext::cw(RED_NM, 300.0);
        let a = simulate_cw(&cfg, &ctx, 1e-5, 7).unwrap();
        let b = simulate_cw(&cfg, &ctx, 1e-5, 7).unwrap();
        let c = simulate_cw(&cfg, &ctx, 1e-5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times_ps, c.times_ps);
        assert!(a.times_ps.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.times_ps.iter().all(|&t| t <= a.duration_ps));
    }

    #[test]
    fn strongly_driven_rate_approaches_radiative_rate() {
        // k_exc = 1000·k_rad; ~1e6 photons.
        let cfg = EmitterConfig::reference();
        let mut ctx = ExcitationContext::cw(RED_NM, 1.0);
        ctx.alpha = 1000.0 * cfg.k_rad;
        let duration_s = 1.27e-3;
        let s = simulate_cw(&cfg, &ctx, duration_s, 3).unwrap();
        let ss = steady_state(&build_rate_matrix(&cfg, &ctx).unwrap(), cfg.k_rad, 1.0).unwrap();
        let expected = ss.detected_rate_cps * duration_s;
        let n = s.len() as f64;
        assert!(n > 9.9e5);
        assert!((n - expected).abs() < 3.0 * expected.sqrt(), "{n} vs {expected}");
    }

    #[test]
    fn absorbing_shelf_is_a_config_error() {
        let mut cfg = EmitterConfig::reference();
        cfg.k_isc = 0.1;
        let r = simulate_cw(&cfg, &ExcitationContext::cw(RED_NM, 10.0), 1e-6, 1);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn one_sync_per_pulse() {
        let cfg = EmitterConfig::reference();
        let ctx = ExcitationContext::pulsed(GREEN_NM, 10.0, 20.0, 50.0);
        // 10⁶ pulses at 50 MHz.
        let run = simulate_pulsed(&cfg, &ctx, 0.02, 1).unwrap();
        assert_eq!(run.syncs_ps.len(), 1_000_000);
        assert_eq!(run.syncs_ps[1], 20_000);
    }

    #[test]
    fn pulsed_emission_delay_is_exponential() {
        let mut cfg = EmitterConfig::reference();
        cfg.k_nr_by_wavelength.insert(GREEN_NM, 1.0 / 0.25 - cfg.k_rad);
        let ctx = ExcitationContext::pulsed(GREEN_NM, 100.0, 20.0, 50.0);
        let run = simulate_pulsed(&cfg, &ctx, 2e-3, 11).unwrap();
        let delays: Vec<f64> = run
            .photons
            .times_ps
            .iter()
            .map(|&t| (t % 20_000) as f64 / 1e3)
            .collect();
        let n = delays.len() as f64;
        assert!(n > 5e3, "{n}");
        let mean = delays.iter().sum::<f64>() / n;
        // Excitation lands on average ~half a pulse width into the window.
        let expected = 0.25 + 0.025;
        assert!((mean - expected).abs() < 3.0 * 0.25 / n.sqrt() + 0.005, "{mean}");
    }

    #[test]
    fn pulse_longer_than_period_rejected() {
        let cfg = EmitterConfig::reference();
        let ctx = ExcitationContext::pulsed(GREEN_NM, 10.0, 0.04, 50.0);
        assert!(matches!(simulate_pulsed(&cfg, &ctx, 1e-6, 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_excitation_pulsed_is_dark() {
        let cfg = EmitterConfig::reference();
        let ctx = ExcitationContext::pulsed(GREEN_NM, 0.0, 20.0, 50.0);
        let run = simulate_pulsed(&cfg, &ctx, 1e-4, 1).unwrap();
        assert!(run.photons.is_empty());
        assert_eq!(run.syncs_ps.len(), 5000);
    }
}
