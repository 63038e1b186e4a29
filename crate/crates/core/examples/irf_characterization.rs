//! Instrument response: histogram of detector jitter around a fixed sync
//! delay, fitted with a bin-integrated Gaussian.

use photonlab::correlator::tcspc_histogram;
use photonlab::fitting::fit_gaussian;
use photonlab::montecarlo::{register, DetectorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> photonlab::Result<()> {
    let det = DetectorConfig {
        efficiency: 1.0,
        jitter_sigma_ns: 0.41,
        dead_time_ns: 0.0,
        ..DetectorConfig::default()
    };
    let period_ps = 20_000u64;
    let n = 50_000u64;
    let syncs: Vec<u64> = (0..n).map(|k| k * period_ps).collect();
    // A prompt reflection 5 ns after every pulse, seen through the jittery detector.
    let prompt: Vec<u64> = syncs.iter().map(|t| t + 5_000).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let photons = register(prompt, &det, n * period_ps, &mut rng);
    for bin_ps in [25.0, 100.0, 500.0, 2000.0] {
        let t = tcspc_histogram(&photons, &syncs, 20e-9, bin_ps * 1e-12)?;
        let mut h = t.histogram;
        h.kind = photonlab::correlator::HistogramKind::Irf;
        let fit = fit_gaussian(&h)?;
        println!(
            "bin {bin_ps:>6.0} ps: center {:.4} ns, sigma {:.4} +/- {:.4} ns{}",
            fit.value("center").unwrap(),
            fit.value("sigma").unwrap(),
            fit.uncertainty("sigma").unwrap(),
            fit.warnings.first().map(|w| format!(" ({w})")).unwrap_or_default()
        );
    }
    Ok(())
}
