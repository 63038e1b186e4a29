//! Dead time, dark counts and jitter applied to one ideal photon stream.

use photonlab::kinetics::{EmitterConfig, ExcitationContext, RED_NM};
use photonlab::montecarlo::{detect, simulate_cw, DetectorConfig};

fn main() -> photonlab::Result<()> {
    let photons = simulate_cw(&EmitterConfig::reference(), &ExcitationContext::cw(RED_NM, 1000.0), 0.05, 1)?;
    println!("emitted: {:.3e} photons/s", photons.mean_rate_cps());
    let base = DetectorConfig {
        efficiency: 0.05,
        jitter_sigma_ns: 0.0,
        dead_time_ns: 0.0,
        dark_rate_cps: 0.0,
        background_rate_cps: 0.0,
    };
    let cases = [
        ("ideal thinning", base.clone()),
        ("22 ns dead time", DetectorConfig { dead_time_ns: 22.0, ..base.clone() }),
        ("1 us dead time", DetectorConfig { dead_time_ns: 1000.0, ..base.clone() }),
        ("50 kcps dark", DetectorConfig { dark_rate_cps: 5e4, ..base.clone() }),
        ("0.41 ns jitter", DetectorConfig { jitter_sigma_ns: 0.41, ..base.clone() }),
    ];
    for (name, det) in cases {
        let t = detect(&photons, &det, 0.05, 2)?;
        let min_gap = t.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0);
        println!("{name:>16}: {:>9.0} cps, shortest gap {min_gap} ps", t.len() as f64 / 0.05);
    }
    Ok(())
}
