//! Hanbury-Brown-Twiss antibunching: simulate two detector arms, build the
//! coincidence histogram, normalize it and fit the IRF-convolved model.
//!
//! `cargo run --release --example antibunching -- [power_uw] [efficiency] [seconds]`

use photonlab::correlator::coincidence_histogram;
use photonlab::fitting::{fit_g2, IrfSigma};
use photonlab::kinetics::{default_alpha, EmitterConfig, ExcitationContext, RED_NM};
use photonlab::montecarlo::{acquire_hbt, DetectorConfig};

fn main() -> photonlab::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let power = args.first().copied().unwrap_or(10.0);
    let efficiency = args.get(1).copied().unwrap_or(0.01);
    let seconds = args.get(2).copied().unwrap_or(20.0);

    let cfg = EmitterConfig::reference();
    let ctx = ExcitationContext::cw(RED_NM, power);
    let det = DetectorConfig {
        efficiency,
        ..DetectorConfig::default()
    };
    let s = acquire_hbt(&cfg, &ctx, &det, seconds, 1)?;
    println!("arm rates: {:.0} / {:.0} cps", s.rate_cps(0), s.rate_cps(1));

    let h = coincidence_histogram(s.channel(0)?, s.channel(1)?, 73.3e-12, 20e-9)?.with_acquisition(
        s.duration_s(),
        s.rate_cps(0),
        s.rate_cps(1),
    );
    println!("{} coincidences in {} bins", h.total(), h.len());
    let fit = fit_g2(&h, IrfSigma::Fixed(0.41))?;
    print!("{fit}");
    println!(
        "expected antibunching time 1/(k_exc + k_rad) = {:.3} ns",
        1.0 / (default_alpha() * power + cfg.k_rad)
    );
    Ok(())
}
