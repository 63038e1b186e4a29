//! Rotating the excitation polarization over a tilted molecule and fitting
//! the tilt angle from the intensity modulation.

use photonlab::fitting::fit_polarization;
use photonlab::kinetics::{EmitterConfig, ExcitationContext, RED_NM};
use photonlab::montecarlo::{acquire_hbt, DetectorConfig};

fn main() -> photonlab::Result<()> {
    let det = DetectorConfig {
        efficiency: 3.3e-4,
        ..DetectorConfig::default()
    };
    let angles: Vec<f64> = (0..24).map(|k| 15.0 * k as f64).collect();
    for phi in [0.0, 37.4, 53.6] {
        let cfg = EmitterConfig {
            tilt_phi_deg: phi,
            ..EmitterConfig::reference()
        };
        let mut rates = Vec::new();
        for (i, &theta) in angles.iter().enumerate() {
            let ctx = ExcitationContext {
                pol_theta_deg: theta,
                ..ExcitationContext::cw(RED_NM, 2.0)
            };
            rates.push(acquire_hbt(&cfg, &ctx, &det, 20.0, 100 + i as u64)?.total_events() as f64 / 20.0);
        }
        let fit = fit_polarization(&angles, &rates)?;
        println!(
            "tilt {phi:>4.1} deg: fitted {:.2} +/- {:.2} deg, min/max {:.3} (1 - sin^2 phi = {:.3}){}",
            fit.value("phi").unwrap(),
            fit.uncertainty("phi").unwrap(),
            fit.value("min_max_ratio").unwrap(),
            1.0 - phi.to_radians().sin().powi(2),
            if fit.warnings.is_empty() { "" } else { ", low contrast" }
        );
    }
    Ok(())
}
