//! Beam splitter and single-photon detector model.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::{seconds_to_ps, stage, stage_rng, DetectorConfig, PhotonStream, PS_PER_NS, PS_PER_S};
use crate::error::Result;

/// Routes each photon to one of two arms with probability 1/2.
pub fn hbt_split(stream: &PhotonStream, seed: u64) -> (PhotonStream, PhotonStream) {
    let mut rng = stage_rng(seed, stage::SPLIT);
    let mut arm1 = PhotonStream::empty(stream.duration_ps, stream.provenance);
    let mut arm2 = PhotonStream::empty(stream.duration_ps, stream.provenance);
    for &t in &stream.times_ps {
        if rng.random::<bool>() {
            arm2.times_ps.push(t);
        } else {
            arm1.times_ps.push(t);
        }
    }
    (arm1, arm2)
}

/// Keeps each time independently with probability `efficiency`.
pub fn thin<R: Rng + ?Sized>(times: &[u64], efficiency: f64, rng: &mut R) -> Vec<u64> {
    if efficiency >= 1.0 {
        return times.to_vec();
    }
    times
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < efficiency)
        .collect()
}

/// Everything a detector does after deciding which photons it absorbs:
/// adds dark and background counts over `[0, duration)`, applies Gaussian
/// jitter (rounded to the picosecond, events pushed outside the window are
/// lost), sorts, then enforces the dead time against the previously kept event.
pub fn register<R: Rng + ?Sized>(
    mut times: Vec<u64>,
    det: &DetectorConfig,
    duration_ps: u64,
    rng: &mut R,
) -> Vec<u64> {
    let noise_rate = det.dark_rate_cps + det.background_rate_cps;
    if noise_rate > 0.0 {
        let gaps = Exp::new(noise_rate / PS_PER_S).expect("positive rate");
        let mut t = gaps.sample(rng);
        while t < duration_ps as f64 {
            times.push(t as u64);
            t += gaps.sample(rng);
        }
    }

    if det.jitter_sigma_ns > 0.0 {
        let jitter = Normal::new(0.0, det.jitter_sigma_ns * PS_PER_NS).expect("finite sigma");
        times = times
            .into_iter()
            .filter_map(|t| {
                let shifted = (t as f64 + jitter.sample(rng)).round();
                (shifted >= 0.0 && shifted < duration_ps as f64).then_some(shifted as u64)
            })
            .collect();
    }
    times.sort_unstable();

    let gap = det.min_gap_ps();
    let mut kept: Vec<u64> = Vec::with_capacity(times.len());
    for t in times {
        match kept.last() {
            Some(&last) if t - last < gap => {}
            _ => kept.push(t),
        }
    }
    kept
}

/// Full detector chain for one channel: efficiency thinning, then [`register`].
pub fn detect(
    stream: &PhotonStream,
    det: &DetectorConfig,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<u64>> {
    det.validate()?;
    let duration_ps = seconds_to_ps(duration_s)?;
    let mut rng = stage_rng(seed, stage::THIN);
    let absorbed = thin(&stream.times_ps, det.efficiency, &mut rng);
    let mut rng = stage_rng(seed, stage::REGISTER);
    Ok(register(absorbed, det, duration_ps, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::Provenance;

    fn stream(times: Vec<u64>, duration_ps: u64) -> PhotonStream {
        PhotonStream {
            times_ps: times,
            duration_ps,
            provenance: Provenance::new([0; 32], 0),
        }
    }

    #[test]
    fn blind_detector_records_nothing() {
        let det = DetectorConfig {
            efficiency: 0.0,
            ..DetectorConfig::ideal()
        };
        let s = stream((0..1000).map(|i| i * 1000).collect(), 1_000_000_000);
        assert!(detect(&s, &det, 1e-3, 1).unwrap().is_empty());
    }

    #[test]
    fn dead_time_rule() {
        let det = DetectorConfig {
            dead_time_ns: 20.0,
            ..DetectorConfig::ideal()
        };
        let s = stream(vec![0, 15_000, 40_000], 100_000);
        assert_eq!(detect(&s, &det, 1e-7, 1).unwrap(), vec![0, 40_000]);
    }

    #[test]
    fn dark_counts_are_poisson() {
        let det = DetectorConfig {
            efficiency: 0.0,
            dark_rate_cps: 1000.0,
            ..DetectorConfig::ideal()
        };
        let s = stream(Vec::new(), 100 * 1_000_000_000_000);
        let n = detect(&s, &det, 100.0, 9).unwrap().len() as f64;
        assert!((n - 1e5).abs() < 3.0 * 1e5f64.sqrt(), "{n}");
    }

    #[test]
    fn empty_split() {
        let (a, b) = hbt_split(&stream(Vec::new(), 10), 1);
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn split_is_balanced_disjoint_and_reproducible() {
        let times: Vec<u64> = (0..1_000_000).map(|i| i * 10).collect();
        let s = stream(times.clone(), 10_000_000);
        let (a, b) = hbt_split(&s, 77);
        let n = a.len() as f64;
        // Binomial(10⁶, 1/2): σ = 500.
        assert!((n - 5e5).abs() < 1500.0, "{n}");
        let mut union: Vec<u64> = a.times_ps.iter().chain(&b.times_ps).copied().collect();
        union.sort_unstable();
        assert_eq!(union, times);
        assert_eq!(hbt_split(&s, 77), (a, b));
    }

    #[test]
    fn jitter_keeps_order_and_window() {
        let det = DetectorConfig {
            jitter_sigma_ns: 0.41,
            dead_time_ns: 0.0,
            ..DetectorConfig::ideal()
        };
        let s = stream((0..10_000).map(|i| i * 3_000).collect(), 30_000_000);
        let out = detect(&s, &det, 3e-5, 4).unwrap();
        assert!(out.windows(2).all(|w| w[0] < w[1]));
        assert!(out.iter().all(|&t| t < 30_000_000));
        assert!(out.len() > 9_990);
    }
}
